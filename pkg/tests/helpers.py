"""Builders and brute-force oracles shared by the test modules."""

import numpy as np

from netquant import sim
from netquant.model import (
    CompatibilitySet,
    GeneEntry,
    ReadCompat,
    Transcript,
    TranscriptCatalog,
)
from netquant.network import build_network

SIM_READS = 20_000
SIM_AMBIGUITY = 0.9
SIM_READ_LENGTH = 76


def catalog(genes):
    """``{gene_id: [(transcript_id, length), ...]}`` in insertion order."""
    return TranscriptCatalog(
        GeneEntry(g, tuple(Transcript(t, l) for t, l in ts)) for g, ts in genes.items())


def random_reads(rng, k, n_reads, q_low=0.001, q_high=0.01):
    """Reads with random non-empty compatibility sets and explicit q."""
    q = rng.uniform(q_low, q_high, size=k)
    reads = []
    for j in range(n_reads):
        m = rng.random(k) < 0.5
        if not m.any():
            m[rng.integers(k)] = True
        ks = tuple(int(x) for x in np.flatnonzero(m))
        reads.append(ReadCompat(f"r{j}", ks, tuple(float(q[x]) for x in ks), True))
    return reads


def grid_argmax_2(f, step=1e-4):
    """Maximizer of ``f(p1_array)`` over ``p = (p1, 1 - p1)`` on a uniform grid."""
    p1 = np.linspace(0.0, 1.0, int(round(1 / step)) + 1)
    vals = f(p1)
    k = int(np.nanargmax(np.where(np.isnan(vals), -np.inf, vals)))
    return np.array([p1[k], 1.0 - p1[k]])


def loglik_2(reads, p1):
    """Mixture log-likelihood on a 2-transcript grid, straight from the reads."""
    total = np.zeros_like(p1)
    with np.errstate(divide="ignore"):
        for r in reads:
            qv = dict(zip(r.transcripts, r.q))
            total += np.log(p1 * qv.get(0, 0.0) + (1 - p1) * qv.get(1, 0.0))
    return total


def simulated_instance(seed, n_genes=100, n_domains=100, total_reads=SIM_READS,
                       ambiguity=SIM_AMBIGUITY, sim_alpha=1.0):
    cat = sim.synthetic_catalog(n_genes, seed=seed)
    annot, ddi = sim.synthetic_domains(cat, seed=seed, n_domains=n_domains)
    net = build_network(cat, annot, ddi)
    truth = sim.generate_truth(cat, net, sim_alpha=sim_alpha, seed=seed)
    compat = sim.sample_compat(truth, total_reads=total_reads, read_length=SIM_READ_LENGTH,
                               overlap_model="shared_prefix", ambiguity=ambiguity, seed=seed)
    expected = sim.expected_expression(truth, total_reads, SIM_READ_LENGTH)
    return cat, net, truth, compat, expected


def single_gene_compat(reads, k, lengths=None):
    lengths = lengths or [1000] * k
    cat = catalog({"G": [(f"G.{j}", lengths[j]) for j in range(k)]})
    return cat, CompatibilitySet(cat, [reads], None)
