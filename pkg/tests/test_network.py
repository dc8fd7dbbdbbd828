import itertools
from collections import deque

import numpy as np
import pytest

from helpers import catalog
from netquant import ValidationError
from netquant.model import TranscriptNetwork
from netquant.network import (
    DDITable,
    DomainAnnotation,
    build_network,
    clustering_coefficients,
    deletion_count,
    delete_edges,
    network_stats,
    randomize_network,
    two_step_closure,
)


def _random_instance(seed, n_genes=8):
    rng = np.random.default_rng(seed)
    cat = catalog({f"G{g}": [(f"G{g}.{k}", 500) for k in range(int(rng.integers(1, 4)))]
                   for g in range(n_genes)})
    doms = [f"D{d}" for d in range(6)]
    rows = [(t, d) for t in cat.transcript_ids for d in doms if rng.random() < 0.25]
    pairs = [(a, b) for a, b in itertools.combinations_with_replacement(doms, 2) if rng.random() < 0.2]
    return cat, DomainAnnotation(rows), DDITable(pairs)


def _random_network(seed, n_genes=10):
    rng = np.random.default_rng(seed)
    cat = catalog({f"G{g}": [(f"G{g}.{k}", 500) for k in range(int(rng.integers(1, 4)))]
                   for g in range(n_genes)})
    ids = cat.transcript_ids
    edges = [(a, b) for a, b in itertools.combinations(ids, 2)
             if cat.gene_of(a) != cat.gene_of(b) and rng.random() < 0.2]
    return cat, TranscriptNetwork(ids, edges, cat.gene_map())


def test_no_interacting_domains_no_edges():
    cat = catalog({"A": [("a", 100)], "B": [("b", 100)]})
    net = build_network(cat, DomainAnnotation([("a", "D1"), ("b", "D2")]), DDITable([("D1", "D3")]))
    assert net.n_edges == 0 and net.n_nodes == 2


def test_miniature_receptor_example():
    cat = catalog({"CD79A": [("NM_021601", 1200)],
                   "CD79B": [("NM_001039933", 1100), ("NM_000626", 1300)],
                   "LCK": [("NM_005356", 2000)], "SYK": [("NM_003177", 2500)]})
    annot = DomainAnnotation([("NM_021601", "pfam02189"), ("NM_001039933", "pfam02189"),
                              ("NM_000626", "pfam02189"), ("NM_005356", "pfam00017"),
                              ("NM_003177", "pfam00017")])
    net = build_network(cat, annot, DDITable([("pfam00017", "pfam02189"),
                                             ("pfam02189", "pfam02189")]))
    assert net.has_edge("NM_021601", "NM_005356")
    assert net.has_edge("NM_021601", "NM_003177")
    assert not net.has_edge("NM_001039933", "NM_000626")


@pytest.mark.parametrize("seed", range(10))
def test_build_network_brute_force(seed):
    cat, annot, ddi = _random_instance(seed)
    net = build_network(cat, annot, ddi)
    doms = {t: {d for tt, d in annot.rows if tt == t} for t in cat.transcript_ids}
    expect = set()
    for a, b in itertools.combinations(cat.transcript_ids, 2):
        if cat.gene_of(a) == cat.gene_of(b):
            continue
        if any((x, y) in ddi or (y, x) in ddi for x in doms[a] for y in doms[b]):
            expect.add(tuple(sorted((a, b))))
    assert set(net.edges) == expect
    for a, b in net.edges:
        assert a != b and cat.gene_of(a) != cat.gene_of(b)
        assert b in net.neighbors(a) and a in net.neighbors(b)


def test_build_network_unknown_transcript():
    cat = catalog({"A": [("a", 100)]})
    with pytest.raises(ValidationError, match="zzz"):
        build_network(cat, DomainAnnotation([("zzz", "D")]), DDITable([]))


def test_build_network_carries_tiers():
    cat = catalog({"A": [("a", 100)], "B": [("b", 100)]})
    annot = DomainAnnotation([("a", "D1"), ("a", "D2"), ("b", "D1")])
    net = build_network(cat, annot, DDITable([("D1", "D1"), ("D2", "D1")],
                                             {("D1", "D1"): "3did", ("D1", "D2"): "pred"}))
    assert net.tiers == {("a", "b"): "3did+pred"}


def test_triangle_stats():
    s = network_stats(TranscriptNetwork(None, [("a", "b"), ("b", "c"), ("a", "c")]))
    assert (s.node_count, s.edge_count, s.density, s.avg_clustering_coefficient, s.diameter) == \
        (3, 3, 1.0, 1.0, 1)


def test_single_node_density_flag():
    s = network_stats(TranscriptNetwork(["a"], []))
    assert not s.density_defined and s.density == 0.0


def _edges_with_count(n, m, seed):
    """``m`` distinct random edges over ``n`` nodes."""
    rng = np.random.default_rng(seed)
    codes = set()
    while len(codes) < m:
        a = rng.integers(0, n, 2 * (m - len(codes)))
        b = rng.integers(0, n, a.size)
        keep = a < b
        codes.update((a[keep] * n + b[keep]).tolist())
    codes = sorted(codes)[:m]
    names = [f"t{k:05d}" for k in range(n)]
    return names, [(names[c // n], names[c % n]) for c in codes]


@pytest.mark.parametrize("n, m, density, degree", [
    (898, 12157, 3.02, 27.08),
    (5599, 711516, 4.54, None),
])
def test_published_network_sizes(n, m, density, degree):
    names, edges = _edges_with_count(n, m, 0)
    s = network_stats(TranscriptNetwork(names, edges), paths=False)
    assert abs(100 * s.density - density) <= 0.01
    if degree is not None:
        assert abs(s.avg_degree - degree) <= 0.01


def _bfs(adj, s):
    dist = {s: 0}
    dq = deque([s])
    while dq:
        u = dq.popleft()
        for v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                dq.append(v)
    return dist


@pytest.mark.parametrize("seed", range(5))
def test_stats_against_brute_force(seed):
    _, net = _random_network(seed, 12)
    s = network_stats(net)
    adj = net.adjacency
    cc = []
    for v in net.nodes:
        nb = adj[v]
        if len(nb) < 2:
            cc.append(0.0)
            continue
        links = sum(net.has_edge(a, b) for a, b in itertools.combinations(nb, 2))
        cc.append(links / (len(nb) * (len(nb) - 1) / 2))
    assert s.avg_clustering_coefficient == pytest.approx(np.mean(cc), abs=1e-6)
    comps, seen = [], set()
    for v in net.nodes:
        if v not in seen:
            c = set(_bfs(adj, v))
            seen |= c
            comps.append(c)
    big = max(comps, key=len)
    assert s.diameter == max(max(_bfs(adj, v).values()) for v in big)
    assert s.n_components == len(comps)


def test_clustering_zero_for_low_degree():
    net = TranscriptNetwork(None, [("a", "b"), ("b", "c")])
    adj = net.adjacency_matrix(net.nodes)
    assert clustering_coefficients(adj).tolist() == [0.0, 0.0, 0.0]


@pytest.mark.parametrize("seed", range(10))
def test_randomize_invariants(seed):
    cat, net = _random_network(seed, 15)
    r1, r2 = randomize_network(net, seed), randomize_network(net, seed)
    assert r1.sorted_edges() == r2.sorted_edges()
    assert r1.n_edges == net.n_edges
    assert all(cat.gene_of(a) != cat.gene_of(b) for a, b in r1.edges)
    assert set(r1.nodes) == set(net.nodes)


def test_randomize_impossible_rewire():
    net = TranscriptNetwork(["a", "b", "x"], [("a", "x")], {"a": "A", "b": "A", "x": "X"})
    # only one edge: a same-gene landing can never be swapped away
    for seed in range(50):
        try:
            r = randomize_network(net, seed, max_tries=5)
        except ValidationError:
            return
        assert all(r.gene_of[a] != r.gene_of[b] for a, b in r.edges)
    pytest.fail("no seed produced a same-gene landing")


def test_delete_edges_rules():
    _, net = _random_network(3, 15)
    assert delete_edges(net, 0.0, 1) == net
    assert delete_edges(net, 1.0, 1).n_edges == 0
    half = delete_edges(net, 0.5, 7)
    assert half.n_edges == net.n_edges - net.n_edges // 2
    assert half.edges <= net.edges
    assert delete_edges(net, 0.5, 7).sorted_edges() == half.sorted_edges()
    assert deletion_count(0.5, 12157) == 6078
    assert deletion_count(0.95, 100) == 95


def test_delete_edges_range():
    with pytest.raises(ValidationError):
        delete_edges(TranscriptNetwork(None, []), 1.5, 0)


def test_two_step_path():
    net = TranscriptNetwork(None, [("a", "b"), ("b", "c")], {"a": "A", "b": "B", "c": "C"})
    assert two_step_closure(net).has_edge("a", "c")
    same = TranscriptNetwork(None, [("a", "b"), ("b", "c")], {"a": "A", "b": "B", "c": "A"})
    assert not two_step_closure(same).has_edge("a", "c")


def test_two_step_complete_bipartite_unchanged():
    edges = [(a, b) for a in ("a1", "a2") for b in ("b1", "b2")]
    net = TranscriptNetwork(None, edges, {"a1": "A", "a2": "A", "b1": "B", "b2": "B"})
    assert two_step_closure(net).edges == net.edges


@pytest.mark.parametrize("seed", range(5))
def test_two_step_brute_force(seed):
    cat, net = _random_network(seed, 8)
    closure = two_step_closure(net)
    expect = set()
    for a in net.nodes:
        for b, d in _bfs(net.adjacency, a).items():
            if a < b and d <= 2 and cat.gene_of(a) != cat.gene_of(b):
                expect.add((a, b))
    assert set(closure.edges) == expect
    assert net.edges <= closure.edges
