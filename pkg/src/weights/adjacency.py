"""
County Adjacency Parsing
"""

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import pandas as pd

from ..errors import PanelValidationError

logger = logging.getLogger(__name__)

FIPS_WIDTH = 5
FIPS_PATTERN = re.compile(r'^\d{5}$')
Edge = Tuple[str, str]


@dataclass(frozen=True)
class AdjacencyGraph:
    """Undirected simple graph over FIPS identifiers."""

    nodes: Tuple[str, ...]
    edges: FrozenSet[Edge]
    dropped_nodes: int = 0
    neighbors: Dict[str, Tuple[str, ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        adjacency: Dict[str, List[str]] = {node: [] for node in self.nodes}
        for a, b in self.edges:
            if a == b:
                raise PanelValidationError(f"Self-loop on {a}")
            if a not in adjacency or b not in adjacency:
                raise PanelValidationError(f"Edge {a}-{b} references an unknown node")
            adjacency[a].append(b)
            adjacency[b].append(a)
        object.__setattr__(
            self, 'neighbors', {node: tuple(sorted(nbrs)) for node, nbrs in adjacency.items()}
        )

    def degree(self, node: str) -> int:
        return len(self.neighbors[node])

    def components(self) -> List[List[str]]:
        """Connected components via union-find, each sorted, largest first."""
        parent = {node: node for node in self.nodes}

        def find(x: str) -> str:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in self.edges:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        groups: Dict[str, List[str]] = {}
        for node in self.nodes:
            groups.setdefault(find(node), []).append(node)
        return sorted((sorted(g) for g in groups.values()), key=lambda g: (-len(g), g[0]))

    def restrict(self, universe: Iterable[str]) -> 'AdjacencyGraph':
        """Drop nodes outside the universe and add universe members as isolated nodes."""
        keep = set(universe)
        edges = frozenset(e for e in self.edges if e[0] in keep and e[1] in keep)
        dropped = sum(1 for node in self.nodes if node not in keep)
        return AdjacencyGraph(tuple(sorted(keep)), edges, dropped_nodes=self.dropped_nodes + dropped)


def normalize_fips(raw: str, line_no: int) -> str:
    """Zero-pad a county FIPS code to five digits."""
    token = raw.strip().strip('"').strip("'")
    if token.endswith('.0'):
        token = token[:-2]
    padded = token.zfill(FIPS_WIDTH)
    if not FIPS_PATTERN.match(padded):
        raise PanelValidationError(f"Malformed FIPS '{raw.strip()}' on line {line_no}")
    return padded


def _is_code(token: str) -> bool:
    return token.strip().strip('"').replace('.', '', 1).isdigit()


def _build_graph(pairs: Iterable[Tuple[int, str, str]], universe: Optional[Sequence[str]]) -> AdjacencyGraph:
    nodes = set()
    edges = set()
    self_pairs = 0
    for line_no, raw_a, raw_b in pairs:
        a = normalize_fips(raw_a, line_no)
        b = normalize_fips(raw_b, line_no)
        nodes.update((a, b))
        if a == b:
            self_pairs += 1
            continue
        edges.add((a, b) if a < b else (b, a))

    graph = AdjacencyGraph(tuple(sorted(nodes)), frozenset(edges))
    if self_pairs:
        logger.info(f"Removed {self_pairs} self pairs from adjacency input")
    if universe is not None:
        graph = graph.restrict(universe)
        if graph.dropped_nodes:
            logger.info(f"Dropped {graph.dropped_nodes} adjacency nodes outside the entity universe")
    logger.info(f"Adjacency graph: {len(graph.nodes)} nodes, {len(graph.edges)} edges")
    return graph


def parse_adjacency(lines: Iterable[str], universe: Optional[Sequence[str]] = None) -> AdjacencyGraph:
    """
    Parse `fips_a,fips_b` lines into a symmetric adjacency graph.

    Duplicate and reversed pairs collapse to one undirected edge and self
    pairs are removed (their node is still registered). A non-numeric first
    line is treated as a header.

    Args:
        lines: Text lines of the adjacency file
        universe: Optional entity universe; nodes outside it are dropped

    Returns:
        AdjacencyGraph with the dropped-node count recorded
    """
    def pairs() -> Iterator[Tuple[int, str, str]]:
        for line_no, line in enumerate(lines, 1):
            if not line.strip():
                continue
            parts = [p for p in re.split(r'[,\t;]', line.strip()) if p.strip()]
            if line_no == 1 and parts and not _is_code(parts[0]):
                continue
            if len(parts) < 2:
                raise PanelValidationError(f"Expected two FIPS codes on line {line_no}: {line.strip()!r}")
            yield line_no, parts[0], parts[1]

    return _build_graph(pairs(), universe)


def read_adjacency(path: Union[str, Path], universe: Optional[Sequence[str]] = None) -> AdjacencyGraph:
    """
    Read an adjacency CSV file (comma, tab or semicolon separated).

    Raises:
        PanelValidationError: unreadable file, a row without two codes, or a malformed code
    """
    try:
        frame = pd.read_csv(
            path, sep=r'[,\t;]', engine='python', header=None, dtype=str,
            skip_blank_lines=True, skipinitialspace=True,
        )
    except pd.errors.EmptyDataError:
        return _build_graph([], universe)
    except pd.errors.ParserError as exc:
        raise PanelValidationError(f"Cannot parse adjacency file {path}: {exc}") from exc
    if frame.empty:
        return _build_graph([], universe)
    if frame.shape[1] < 2:
        raise PanelValidationError(f"Adjacency file {path} needs two FIPS columns")
    # row labels count non-blank lines
    if isinstance(frame.iat[0, 0], str) and not _is_code(frame.iat[0, 0]):
        frame = frame.iloc[1:]

    def pairs() -> Iterator[Tuple[int, str, str]]:
        for row, a, b in zip(frame.index, frame.iloc[:, 0], frame.iloc[:, 1]):
            if not (isinstance(a, str) and isinstance(b, str)):
                raise PanelValidationError(f"Expected two FIPS codes on line {row + 1} of {path}")
            yield row + 1, a, b

    return _build_graph(pairs(), universe)
