#!/usr/bin/env python3
"""
Run the Panel Toolkit CLI
"""

import sys

from src.cli.main import main

if __name__ == "__main__":
    sys.exit(main())
