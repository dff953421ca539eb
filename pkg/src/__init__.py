"""
Spatio-temporal Panel Econometrics Toolkit
"""

__version__ = "1.0.0"
