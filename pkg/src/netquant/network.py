"""Transcript networks from domain annotations and domain-domain interactions,
their summary statistics, and the perturbations used in robustness runs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .errors import ValidationError
from .model import TranscriptCatalog, TranscriptNetwork


class DomainAnnotation:
    """Transcript to domain rows, deduplicated, first-seen order kept."""

    def __init__(self, rows: Iterable[tuple[str, str]]):
        self.rows = tuple(dict.fromkeys((str(t), str(d)) for t, d in rows))
        self.by_transcript: dict[str, set[str]] = {}
        for t, d in self.rows:
            self.by_transcript.setdefault(t, set()).add(d)

    def __eq__(self, other):
        return isinstance(other, DomainAnnotation) and self.rows == other.rows

    def __len__(self):
        return len(self.rows)


class DDITable:
    """Unordered domain pairs. ``(a, a)`` is allowed: a domain may bind itself
    when carried by two different transcripts.

    ``tiers`` optionally labels a pair with its evidence class.
    """

    def __init__(self, pairs: Iterable[tuple[str, str]], tiers: dict | None = None):
        self.pairs = frozenset(_ordered(a, b) for a, b in pairs)
        self.tiers = {_ordered(*k): v for k, v in (tiers or {}).items()}

    def partners(self) -> dict[str, set[str]]:
        out: dict[str, set[str]] = {}
        for a, b in self.pairs:
            out.setdefault(a, set()).add(b)
            out.setdefault(b, set()).add(a)
        return out

    def __contains__(self, pair):
        return _ordered(*pair) in self.pairs

    def __eq__(self, other):
        return (isinstance(other, DDITable) and self.pairs == other.pairs
                and self.tiers == other.tiers)

    def __len__(self):
        return len(self.pairs)


def _ordered(a, b):
    return (a, b) if a <= b else (b, a)


def build_network(catalog: TranscriptCatalog, annot: DomainAnnotation,
                  ddi: DDITable) -> TranscriptNetwork:
    """Connect transcripts of different genes that carry an interacting domain pair.

    Every catalog transcript becomes a node, annotated or not. An edge carries
    the tiers of the domain pairs supporting it, joined by ``+`` in sorted order.
    """
    unknown = sorted(t for t in annot.by_transcript if not catalog.has_transcript(t))
    if unknown:
        raise ValidationError(
            f"{len(unknown)} annotated transcripts not in catalog: {unknown[:10]}")
    carriers: dict[str, list[str]] = {}
    for t, d in annot.rows:
        carriers.setdefault(d, []).append(t)
    gene = catalog.gene_map()
    edges: set[tuple[str, str]] = set()
    tiers: dict[tuple[str, str], set[str]] = {}
    for pair in sorted(ddi.pairs):
        a, b = pair
        ta, tb = carriers.get(a, ()), carriers.get(b, ())
        tier = ddi.tiers.get(pair)
        for x in ta:
            for y in tb:
                if gene[x] == gene[y]:
                    continue
                e = _ordered(x, y)
                edges.add(e)
                if tier is not None:
                    tiers.setdefault(e, set()).add(tier)
    return TranscriptNetwork(catalog.transcript_ids, edges, gene,
                             {e: "+".join(sorted(v)) for e, v in tiers.items()})


@dataclass(frozen=True)
class NetworkStats:
    node_count: int
    edge_count: int
    density: float
    avg_degree: float
    avg_clustering_coefficient: float
    diameter: int
    density_defined: bool = True
    diameter_component_size: int = 0
    n_components: int = 0

    def rows(self) -> list[tuple[str, str]]:
        return [
            ("node_count", str(self.node_count)),
            ("edge_count", str(self.edge_count)),
            ("density", f"{self.density:.10g}"),
            ("avg_degree", f"{self.avg_degree:.10g}"),
            ("avg_clustering_coefficient", f"{self.avg_clustering_coefficient:.10g}"),
            ("diameter", str(self.diameter)),
            ("density_defined", str(self.density_defined).lower()),
            ("diameter_component_size", str(self.diameter_component_size)),
            ("n_components", str(self.n_components)),
        ]


def network_stats(net: TranscriptNetwork, paths: bool = True) -> NetworkStats:
    """Size, density, mean degree, mean clustering coefficient and diameter.

    Nodes of degree < 2 count as clustering 0. The diameter is taken over the
    largest connected component. ``paths=False`` skips clustering and diameter
    (reported as NaN and -1).
    """
    n, m = net.n_nodes, net.n_edges
    defined = n >= 2
    density = m / (n * (n - 1) / 2) if defined else 0.0
    avg_degree = 2 * m / n if n else 0.0
    if not paths or n == 0:
        return NetworkStats(n, m, density, avg_degree, float("nan"), -1, defined)
    adj = net.adjacency_matrix(net.nodes)
    clustering = float(clustering_coefficients(adj).mean())
    n_comp, labels = csgraph.connected_components(adj, directed=False)
    sizes = np.bincount(labels)
    big = int(np.argmax(sizes))
    members = np.flatnonzero(labels == big)
    diameter = _diameter(adj[members][:, members])
    return NetworkStats(n, m, density, avg_degree, clustering, diameter, defined,
                        int(sizes[big]), int(n_comp))


def clustering_coefficients(adj: sp.spmatrix) -> np.ndarray:
    n = adj.shape[0]
    deg = np.asarray(adj.sum(axis=1)).ravel()
    if n <= 8000:
        a = adj.toarray().astype(np.float32)
        tri = ((a @ a) * a).sum(axis=1) / 2
    else:
        a = sp.csr_matrix(adj, dtype=np.float64)
        tri = np.asarray((a @ a).multiply(a).sum(axis=1)).ravel() / 2
    possible = deg * (deg - 1) / 2
    return np.divide(tri, possible, out=np.zeros(n), where=deg >= 2)


def _diameter(adj: sp.spmatrix) -> int:
    """Eccentricity maximum of a connected graph."""
    n = adj.shape[0]
    if n <= 1:
        return 0
    if n <= 8000:
        # all-sources BFS as repeated boolean products
        a = adj.toarray().astype(np.float32)
        reach = np.eye(n, dtype=np.float32)
        d = 0
        while True:
            nxt = ((reach @ a) + reach > 0).astype(np.float32)
            d += 1
            if nxt.all():
                return d
            if np.array_equal(nxt, reach):
                raise ValidationError("diameter requested on a disconnected graph")
            reach = nxt
    best = 0
    for s in range(n):
        dist = csgraph.shortest_path(adj, unweighted=True, indices=s, directed=False)
        best = max(best, int(dist.max()))
    return best


def degree_summary(net: TranscriptNetwork) -> dict[str, float]:
    deg = np.array([len(net.neighbors(v)) for v in net.nodes], dtype=float)
    if deg.size == 0:
        return {"mean": 0.0, "std": 0.0, "max": 0.0, "isolated": 0.0}
    return {"mean": float(deg.mean()), "std": float(deg.std()),
            "max": float(deg.max()), "isolated": float((deg == 0).sum())}


def randomize_network(net: TranscriptNetwork, seed: int,
                      max_tries: int = 1000) -> TranscriptNetwork:
    """Shuffle transcript labels over the network's nodes.

    Edges landing inside one gene are then rewired by endpoint swaps with
    randomly chosen other edges, which keeps every degree. Deterministic in
    ``seed``.
    """
    rng = np.random.default_rng(seed)
    nodes = sorted(net.nodes)
    perm = rng.permutation(len(nodes))
    relabel = {nodes[k]: nodes[perm[k]] for k in range(len(nodes))}
    edges = [_ordered(relabel[a], relabel[b]) for a, b in net.sorted_edges()]
    gene = net.gene_of
    if gene is not None:
        edges = _rewire_same_gene(edges, gene, rng, max_tries)
    return TranscriptNetwork(net.nodes, edges, gene)


def _rewire_same_gene(edges, gene, rng, max_tries):
    present = set(edges)
    bad = [k for k, (a, b) in enumerate(edges) if gene[a] == gene[b]]
    m = len(edges)
    for k in bad:
        for _ in range(max_tries):
            j = int(rng.integers(m))
            if j == k:
                continue
            (u, v), (x, y) = edges[k], edges[j]
            if rng.random() < 0.5:
                x, y = y, x
            e1, e2 = _ordered(u, x), _ordered(v, y)
            if u == x or v == y or e1 == e2 or gene[u] == gene[x] or gene[v] == gene[y]:
                continue
            if e1 in present or e2 in present:
                continue
            present -= {edges[k], edges[j]}
            present |= {e1, e2}
            edges[k], edges[j] = e1, e2
            break
        else:
            raise ValidationError(
                f"could not rewire same-gene edge {edges[k]} after {max_tries} tries")
    return edges


def deletion_count(fraction: float, n_edges: int) -> int:
    """Number of edges removed for ``fraction``, floor of the exact decimal product."""
    return math.floor(Fraction(repr(float(fraction))) * n_edges)


def delete_edges(net: TranscriptNetwork, fraction: float, seed: int) -> TranscriptNetwork:
    """Remove a uniformly random ``floor(fraction * |E|)`` edges."""
    if not 0.0 <= fraction <= 1.0:
        raise ValidationError(f"fraction must be in [0, 1], got {fraction}")
    edges = net.sorted_edges()
    k = deletion_count(fraction, len(edges))
    rng = np.random.default_rng(seed)
    drop = set(rng.choice(len(edges), size=k, replace=False).tolist()) if k else set()
    return net.with_edges(e for n, e in enumerate(edges) if n not in drop)


def two_step_closure(net: TranscriptNetwork) -> TranscriptNetwork:
    """Connect every pair at distance at most 2, same-gene pairs excluded."""
    nodes = list(net.nodes)
    adj = net.adjacency_matrix(nodes).tocsr()
    reach = (adj + adj @ adj).tocoo()
    gene = net.gene_of
    edges = []
    for r, c in zip(reach.row, reach.col):
        if r < c:
            a, b = nodes[r], nodes[c]
            if gene is not None and gene[a] == gene[b]:
                continue
            edges.append((a, b))
    return TranscriptNetwork(nodes, edges, gene)
