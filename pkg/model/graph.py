"""
Latent Graph Module untuk SCALE-I
=================================
Modul ini berisi DAG dari variabel causal laten, enumerasi causal order yang
valid, dan surround set yang membatasi estimasi laten mana yang boleh tetap
tercampur setelah recovery.

Node disimpan 0-based; text I/O memakai label 1-based.
"""

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from utils.errors import StructuralError

logger = logging.getLogger(__name__)

# Di atas jumlah node ini enumerasi hanya mengembalikan satu topological order.
MAX_ENUMERATION_NODES = 10


class Dag:
    """
    Class untuk DAG immutable atas node ``0..n-1``, disimpan sebagai parent set.
    """

    def __init__(self, n: int, parents: Sequence[Iterable[int]]):
        if n < 0:
            raise StructuralError(f"Node count must be non-negative, got {n}")
        if len(parents) != n:
            raise StructuralError(f"Expected {n} parent sets, got {len(parents)}")

        frozen = []
        for i, pa in enumerate(parents):
            pa = frozenset(int(j) for j in pa)
            bad = [j for j in pa if j < 0 or j >= n or j == i]
            if bad:
                raise StructuralError(f"Invalid parents {sorted(bad)} for node {i + 1}")
            frozen.append(pa)

        self._n = n
        self._parents: Tuple[FrozenSet[int], ...] = tuple(frozen)
        children = [set() for _ in range(n)]
        for i, pa in enumerate(frozen):
            for j in pa:
                children[j].add(i)
        self._children: Tuple[FrozenSet[int], ...] = tuple(frozenset(c) for c in children)

        graph = self.to_networkx()
        if not nx.is_directed_acyclic_graph(graph):
            cycle = nx.find_cycle(graph)
            labels = " -> ".join(str(u + 1) for u, _ in cycle)
            raise StructuralError(f"Graph contains a cycle: {labels}")

    # KONSTRUKTOR

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Tuple[int, int]]) -> "Dag":
        parents = [set() for _ in range(n)]
        for j, i in edges:
            if not (0 <= i < n and 0 <= j < n):
                raise StructuralError(f"Edge ({j}, {i}) out of range for n={n}")
            parents[i].add(j)
        return cls(n, parents)

    @classmethod
    def from_adjacency(cls, adjacency: np.ndarray) -> "Dag":
        """Bangun dari matriks 0/1 dengan ``adjacency[j, i] = 1`` untuk edge j -> i."""
        adjacency = np.asarray(adjacency)
        if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
            raise StructuralError(f"Adjacency must be square, got shape {adjacency.shape}")
        n = adjacency.shape[0]
        return cls(n, [set(np.flatnonzero(adjacency[:, i])) for i in range(n)])

    @classmethod
    def empty(cls, n: int) -> "Dag":
        return cls(n, [set() for _ in range(n)])

    @classmethod
    def chain(cls, n: int) -> "Dag":
        return cls(n, [set() if i == 0 else {i - 1} for i in range(n)])

    @classmethod
    def diamond(cls) -> "Dag":
        return cls.from_edges(4, [(0, 1), (0, 2), (1, 3), (2, 3)])

    @classmethod
    def triangle(cls) -> "Dag":
        return cls.from_edges(3, [(0, 1), (0, 2), (1, 2)])

    @classmethod
    def random(cls, n: int, edge_prob: float, seed: int) -> "Dag":
        """
        Sampling DAG upper-triangular, jadi ``[0..n-1]`` selalu order yang valid.

        Args:
            n: jumlah node
            edge_prob: probabilitas tiap edge maju j -> i, j < i
            seed: seed generator

        Returns:
            Dag acak
        """
        if not 0.0 <= edge_prob <= 1.0:
            raise StructuralError(f"edge_prob must lie in [0, 1], got {edge_prob}")
        rng = np.random.default_rng(seed)
        mask = np.triu(rng.random((n, n)) < edge_prob, k=1)
        return cls.from_adjacency(mask.astype(int))

    # QUERY

    @property
    def n(self) -> int:
        return self._n

    def parents(self, i: int) -> FrozenSet[int]:
        return self._parents[i]

    def children(self, i: int) -> FrozenSet[int]:
        return self._children[i]

    def parents_bar(self, i: int) -> FrozenSet[int]:
        """pa̅(i) = Pa(i) ∪ {i}."""
        return self._parents[i] | {i}

    def children_bar(self, i: int) -> FrozenSet[int]:
        """ch̅(i) = Ch(i) ∪ {i}."""
        return self._children[i] | {i}

    def descendants(self, i: int) -> FrozenSet[int]:
        return frozenset(nx.descendants(self.to_networkx(), i))

    def nondescendants(self, i: int) -> FrozenSet[int]:
        return frozenset(range(self._n)) - self.descendants(i) - {i}

    @property
    def edges(self) -> List[Tuple[int, int]]:
        """List pasangan (parent, child) yang sudah diurutkan."""
        return sorted((j, i) for i in range(self._n) for j in self._parents[i])

    @property
    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self._n, self._n), dtype=int)
        for j, i in self.edges:
            adj[j, i] = 1
        return adj

    def topological_order(self) -> List[int]:
        """Topological order yang terkecil secara leksikografis."""
        return list(nx.lexicographical_topological_sort(self.to_networkx()))

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self._n))
        graph.add_edges_from((j, i) for i in range(self._n) for j in self._parents[i])
        return graph

    def relabel(self, pi: Sequence[int]) -> "Dag":
        """
        Relabel node sehingga node ``pi[r]`` dari graph ini menjadi node ``r``.
        """
        position = {node: r for r, node in enumerate(pi)}
        return Dag.from_edges(self._n, [(position[j], position[i]) for j, i in self.edges])

    # SERIALISASI

    def to_text(self) -> str:
        lines = [f"n={self._n}"]
        for i in range(self._n):
            parents = ",".join(str(j + 1) for j in sorted(self._parents[i]))
            lines.append(f"{i + 1} <- {parents}".rstrip())
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text: str) -> "Dag":
        lines = [line.strip() for line in text.strip().splitlines() if line.strip()]
        if not lines or not lines[0].startswith("n="):
            raise StructuralError("Graph text must start with 'n=<int>'")
        try:
            n = int(lines[0][2:])
            parents: List[set] = [set() for _ in range(n)]
            for line in lines[1:]:
                node, _, rest = line.partition("<-")
                i = int(node) - 1
                if not 0 <= i < n:
                    raise StructuralError(f"Node label {node.strip()} out of range")
                parents[i] = {int(tok) - 1 for tok in rest.replace(" ", "").split(",") if tok}
        except StructuralError:
            raise
        except ValueError as exc:
            raise StructuralError(f"Malformed graph text: {exc}") from exc
        return cls(n, parents)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dag):
            return NotImplemented
        return self._n == other._n and self._parents == other._parents

    def __hash__(self) -> int:
        return hash((self._n, self._parents))

    def __repr__(self) -> str:
        edges = ", ".join(f"{j + 1}->{i + 1}" for j, i in self.edges)
        return f"Dag(n={self._n}, edges=[{edges}])"


@dataclass(frozen=True)
class CausalOrder:
    """
    Permutasi node; ``pi[r]`` adalah node di posisi ``r``.
    """
    pi: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "pi", tuple(int(p) for p in self.pi))
        if sorted(self.pi) != list(range(len(self.pi))):
            raise StructuralError(f"Not a permutation: {list(self.pi)}")

    @classmethod
    def identity(cls, n: int) -> "CausalOrder":
        return cls(tuple(range(n)))

    @property
    def n(self) -> int:
        return len(self.pi)

    @property
    def matrix_form(self) -> np.ndarray:
        """P_π with P_π · [0..n-1]ᵀ = πᵀ."""
        P = np.zeros((self.n, self.n), dtype=int)
        P[np.arange(self.n), self.pi] = 1
        return P

    def position(self, node: int) -> int:
        return self.pi.index(node)

    def inverse(self) -> Tuple[int, ...]:
        inv = [0] * self.n
        for r, node in enumerate(self.pi):
            inv[node] = r
        return tuple(inv)

    def is_valid(self, dag: Dag) -> bool:
        """True jika setiap parent muncul sebelum child-nya."""
        if dag.n != self.n:
            return False
        pos = self.inverse()
        return all(pos[j] < pos[i] for j, i in dag.edges)

    def labels(self) -> List[int]:
        return [p + 1 for p in self.pi]


@dataclass(frozen=True)
class SurroundMap:
    sur: Tuple[FrozenSet[int], ...]

    @property
    def surrounded_set(self) -> FrozenSet[int]:
        return frozenset(i for i, s in enumerate(self.sur) if s)

    def surrounded_in_order(self, order: CausalOrder) -> FrozenSet[int]:
        """S_π: posisi r yang node ``pi[r]``-nya surrounded."""
        return frozenset(r for r, node in enumerate(order.pi) if self.sur[node])

    def to_dict(self) -> Dict[str, List[int]]:
        return {str(i + 1): sorted(j + 1 for j in s) for i, s in enumerate(self.sur) if s}


# OPERASI

def valid_orders(dag: Dag, max_nodes: int = MAX_ENUMERATION_NODES,
                 limit: Optional[int] = None) -> List[CausalOrder]:
    """
    Enumerasi causal order yang valid dengan backtracking, mulai dari yang terkecil.

    Args:
        dag: graph laten
        max_nodes: di atas ukuran ini hanya satu order yang dikembalikan
        limit: batas opsional jumlah order

    Returns:
        List CausalOrder, urut leksikografis
    """
    n = dag.n
    if n > max_nodes:
        logger.info("Graph has %d nodes (> %d); returning a single order", n, max_nodes)
        return [CausalOrder(tuple(dag.topological_order()))]

    indegree = [len(dag.parents(i)) for i in range(n)]
    placed = [False] * n
    prefix: List[int] = []
    orders: List[CausalOrder] = []

    def extend() -> None:
        if limit is not None and len(orders) >= limit:
            return
        if len(prefix) == n:
            orders.append(CausalOrder(tuple(prefix)))
            return
        for node in range(n):
            if placed[node] or indegree[node] > 0:
                continue
            placed[node] = True
            prefix.append(node)
            for child in dag.children(node):
                indegree[child] -= 1
            extend()
            for child in dag.children(node):
                indegree[child] += 1
            prefix.pop()
            placed[node] = False

    extend()
    return orders


def surround_map(dag: Dag) -> SurroundMap:
    """
    sur(i) = {j ≠ i : ch̅(i) ⊆ Ch(j)}.
    """
    sur = []
    for i in range(dag.n):
        chbar = dag.children_bar(i)
        sur.append(frozenset(j for j in range(dag.n) if j != i and chbar <= dag.children(j)))
    return SurroundMap(tuple(sur))


def sigma_mask(dag: Dag) -> np.ndarray:
    """Σ with Σ[i, j] = 1 iff ch̅(j) ⊆ Ch(i)."""
    n = dag.n
    sigma = np.zeros((n, n), dtype=int)
    for i in range(n):
        for j in range(n):
            if i != j and dag.children_bar(j) <= dag.children(i):
                sigma[i, j] = 1
    return sigma


def dag_equal_up_to_order(g1: Dag, g2: Dag, pi: CausalOrder) -> bool:
    """
    True jika relabel g1 dengan pi (node ``pi[r]`` menjadi ``r``) menghasilkan g2.
    """
    if g1.n != g2.n or pi.n != g1.n:
        raise StructuralError(f"Size mismatch: {g1.n}, {g2.n}, order of {pi.n}")
    return g1.relabel(pi.pi) == g2


def edge_differences(g1: Dag, g2: Dag) -> int:
    """Jumlah pasangan node tak berurut yang status edge-nya berbeda."""
    if g1.n != g2.n:
        raise StructuralError(f"Size mismatch: {g1.n} vs {g2.n}")
    a1, a2 = g1.adjacency, g2.adjacency
    return int(sum(
        (a1[i, j], a1[j, i]) != (a2[i, j], a2[j, i])
        for i, j in combinations(range(g1.n), 2)
    ))


if __name__ == "__main__":
    for name, g in [("diamond", Dag.diamond()), ("triangle", Dag.triangle())]:
        print(name, g)
        print("  orders:", [o.labels() for o in valid_orders(g)])
        print("  sur:", surround_map(g).to_dict())
