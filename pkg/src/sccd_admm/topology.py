"""Connected communication graphs and their Laplacian spectrum.

Graphs are undirected and always connected: the Erdos-Renyi generator
rejects disconnected samples and redraws, and loading from disk re-runs the
same validation. Neighbor lists are kept sorted so that per-node iteration
order (and therefore every downstream random draw) is reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Graph",
    "DisconnectedGraphError",
    "generate_erdos_renyi",
    "neighbors",
    "laplacian",
    "laplacian_lambda_max",
    "save_edge_list",
    "load_edge_list",
]


class DisconnectedGraphError(RuntimeError):
    """No connected sample was found within the retry budget."""

    def __init__(self, n: int, p: float, attempts: int):
        super().__init__(
            f"no connected graph with n={n}, p={p} after {attempts} attempts"
        )
        self.n = n
        self.p = p
        self.attempts = attempts


@dataclass(frozen=True)
class Graph:
    """Undirected connected graph over nodes 0..n-1.

    ``adjacency[i]`` is the ascending tuple of neighbors of node i;
    ``edge_count`` counts undirected edges. ``gen_retries`` records how many
    disconnected samples the generator discarded before this one.
    """

    n: int
    adjacency: tuple[tuple[int, ...], ...]
    edge_count: int
    gen_retries: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("graph needs at least 2 nodes")
        if len(self.adjacency) != self.n:
            raise ValueError("adjacency length must equal n")
        half_sum = 0
        for i, nbrs in enumerate(self.adjacency):
            if list(nbrs) != sorted(set(nbrs)):
                raise ValueError(f"neighbor list of node {i} not sorted/unique")
            for j in nbrs:
                if j == i:
                    raise ValueError(f"self-loop at node {i}")
                if not 0 <= j < self.n:
                    raise ValueError(f"neighbor {j} of node {i} out of range")
                if i not in self.adjacency[j]:
                    raise ValueError(f"asymmetric edge ({i}, {j})")
            half_sum += len(nbrs)
        if half_sum != 2 * self.edge_count:
            raise ValueError("edge_count inconsistent with adjacency")
        if not _connected(self.n, self.adjacency):
            raise ValueError("graph is not connected")

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    @property
    def max_degree(self) -> int:
        return max(len(nbrs) for nbrs in self.adjacency)


def _connected(n: int, adjacency) -> bool:
    # iterative BFS from node 0
    seen = bytearray(n)
    seen[0] = 1
    frontier = [0]
    count = 1
    while frontier:
        nxt = []
        for i in frontier:
            for j in adjacency[i]:
                if not seen[j]:
                    seen[j] = 1
                    count += 1
                    nxt.append(j)
        frontier = nxt
    return count == n


def generate_erdos_renyi(
    n: int, p: float, seed: int, max_retries: int = 1000
) -> Graph:
    """Draw a connected Erdos-Renyi graph G(n, p).

    Each unordered pair becomes an edge independently with probability p,
    consuming one uniform draw per pair from a stream determined by ``seed``.
    Disconnected samples are rejected and redrawn from the same stream, up
    to ``max_retries`` attempts.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if max_retries < 1:
        raise ValueError("max_retries must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    n_pairs = n * (n - 1) // 2
    iu = np.triu_indices(n, k=1)
    for attempt in range(max_retries):
        mask = rng.random(n_pairs) < p
        adj: list[list[int]] = [[] for _ in range(n)]
        edge_count = 0
        for i, j, keep in zip(iu[0], iu[1], mask):
            if keep:
                adj[int(i)].append(int(j))
                adj[int(j)].append(int(i))
                edge_count += 1
        adjacency = tuple(tuple(sorted(nbrs)) for nbrs in adj)
        if _connected(n, adjacency):
            return Graph(
                n=n,
                adjacency=adjacency,
                edge_count=edge_count,
                gen_retries=attempt,
            )
    raise DisconnectedGraphError(n, p, max_retries)


def neighbors(graph: Graph, i: int) -> tuple[int, ...]:
    """Sorted neighbors of node i."""
    if not 0 <= i < graph.n:
        raise ValueError(f"node {i} out of range for n={graph.n}")
    return graph.adjacency[i]


def laplacian(graph: Graph) -> np.ndarray:
    """Dense graph Laplacian (degree matrix minus adjacency matrix)."""
    lap = np.zeros((graph.n, graph.n))
    for i, nbrs in enumerate(graph.adjacency):
        lap[i, i] = len(nbrs)
        for j in nbrs:
            lap[i, j] = -1.0
    return lap


def laplacian_lambda_max(
    graph: Graph, max_iters: int = 10_000, residual_tol: float = 1e-10
) -> float:
    """Largest Laplacian eigenvalue via power iteration.

    The start vector is all-ones plus the first basis vector; the all-ones
    component lies in the Laplacian nullspace and dies after one step, the
    basis bump guarantees overlap with the top eigenspace in practice.
    Iterates until the relative eigen-residual drops below ``residual_tol``
    or the cap is hit, then returns the Rayleigh quotient.
    """
    lap = laplacian(graph)
    v = np.ones(graph.n)
    v[0] += 1.0
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iters):
        w = lap @ v
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            break
        v = w / norm_w
        lam = float(v @ (lap @ v))
        residual = np.linalg.norm(lap @ v - lam * v)
        if residual <= residual_tol * max(lam, 1.0):
            break
    return lam


def save_edge_list(graph: Graph, path) -> None:
    """Write the graph as a text edge list: header ``n=<n>``, then ``i j`` lines."""
    lines = [f"n={graph.n}"]
    for i, nbrs in enumerate(graph.adjacency):
        for j in nbrs:
            if i < j:
                lines.append(f"{i} {j}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_edge_list(path) -> Graph:
    """Read a graph written by :func:`save_edge_list`, re-running validation."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    if not raw or not raw[0].startswith("n="):
        raise ValueError("edge list must start with an 'n=<count>' header")
    n = int(raw[0][2:])
    adj: list[set[int]] = [set() for _ in range(n)]
    edge_count = 0
    for ln in raw[1:]:
        si, sj = ln.split()
        i, j = int(si), int(sj)
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"bad edge line: {ln!r}")
        if j not in adj[i]:
            edge_count += 1
        adj[i].add(j)
        adj[j].add(i)
    adjacency = tuple(tuple(sorted(s)) for s in adj)
    return Graph(n=n, adjacency=adjacency, edge_count=edge_count)
