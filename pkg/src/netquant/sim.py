"""Ground-truth expression profiles that partially follow the network, and a
read-compatibility sampler that stands in for read simulation and alignment."""

from __future__ import annotations

import numpy as np

from .errors import NumericalError, ValidationError
from .model import (
    CompatibilitySet,
    GeneEntry,
    ReadCompat,
    SimTruth,
    Transcript,
    TranscriptCatalog,
    TranscriptNetwork,
    neighbor_mean_operator,
)
from .network import DDITable, DomainAnnotation

POISSON_MEAN = 50.0
SIM_ALPHA = 1.0
POWERLAW_EXPONENT = 0.6
TOTAL_READS = 100_000
READ_LENGTH = 76
TRUTH_TOL = 1e-8
TRUTH_MAX_ITER = 500


def powerlaw_proportions(k: int, exponent: float, rng: np.random.Generator) -> np.ndarray:
    """Rank-based power law over ``k`` isoforms with randomly assigned ranks."""
    if k == 1:
        return np.ones(1)
    w = (rng.permutation(k) + 1.0) ** -exponent
    return w / w.sum()


def generate_truth(catalog: TranscriptCatalog, network: TranscriptNetwork | None,
                   poisson_mean: float = POISSON_MEAN, sim_alpha: float = SIM_ALPHA,
                   noise_sigma: float | None = None,
                   powerlaw_exponent: float = POWERLAW_EXPONENT,
                   seed: int = 0, tol: float = TRUTH_TOL,
                   max_iter: int = TRUTH_MAX_ITER) -> SimTruth:
    """Sample gene expressions and pull isoform proportions toward neighbor expression.

    1. gene expression ``E ~ Poisson(poisson_mean)``;
    2. initial proportions from a rank power law within each gene;
    3. initial expression ``E * p0`` plus Gaussian noise, clipped at 0;
    4. repeat ``p <- normalize(sim_alpha * neighbor_mean(E * p) + initial)``
       per gene until no proportion moves by ``tol``;
    5. expression ``E * p``.

    ``noise_sigma`` defaults to a tenth of ``poisson_mean``.
    """
    if poisson_mean <= 0 or sim_alpha < 0 or powerlaw_exponent < 0:
        raise ValidationError("poisson_mean must be > 0; sim_alpha, exponent >= 0")
    sigma = 0.1 * poisson_mean if noise_sigma is None else float(noise_sigma)
    if sigma < 0:
        raise ValidationError("noise_sigma must be >= 0")
    rng = np.random.default_rng(seed)
    gidx = catalog.gene_index
    starts = catalog.offsets[:-1]
    e = rng.poisson(poisson_mean, catalog.n_genes).astype(float)
    p0 = np.concatenate([powerlaw_proportions(catalog.gene_size(i), powerlaw_exponent, rng)
                         for i in range(catalog.n_genes)]) if catalog.n_genes else np.zeros(0)
    pi0 = np.maximum(e[gidx] * p0 + rng.normal(0.0, sigma, catalog.n_transcripts), 0.0)
    mean_op = neighbor_mean_operator(catalog, network or TranscriptNetwork([], []))
    sizes = np.diff(catalog.offsets)

    p = p0.copy()
    for it in range(1, max_iter + 1):
        num = sim_alpha * (mean_op @ (e[gidx] * p)) + pi0
        tot = np.add.reduceat(num, starts) if num.size else num
        flat = tot[gidx]
        new = np.where(flat > 0, num / np.where(flat > 0, flat, 1.0), 1.0 / sizes[gidx])
        delta = float(np.max(np.abs(new - p))) if p.size else 0.0
        p = new
        if delta < tol:
            break
    else:
        raise NumericalError(f"truth proportions did not converge in {max_iter} iterations")
    return SimTruth(catalog, e, p0, p, e[gidx] * p, float(sim_alpha), sigma, it)


def gene_read_shares(truth: SimTruth) -> np.ndarray:
    cat = truth.catalog
    mass = truth.pi * cat.lengths
    per_gene = np.add.reduceat(mass, cat.offsets[:-1]) if mass.size else mass
    total = per_gene.sum()
    if not total > 0:
        raise ValidationError("truth has no expression")
    return per_gene / total


def origin_weights(truth: SimTruth, read_length: int) -> np.ndarray:
    return truth.pi * (truth.catalog.lengths - read_length + 1)


def expected_expression(truth: SimTruth, total_reads: int, read_length: int) -> np.ndarray:
    """Expected reads per base for every transcript under ``sample_compat``.

    This is the truth on the same scale as an estimate's expressions.
    """
    cat = truth.catalog
    share = gene_read_shares(truth)
    w = origin_weights(truth, read_length)
    wsum = np.add.reduceat(w, cat.offsets[:-1])[cat.gene_index]
    within = np.divide(w, wsum, out=np.zeros_like(w), where=wsum > 0)
    return total_reads * share[cat.gene_index] * within / cat.lengths


def sample_compat(truth: SimTruth, total_reads: int = TOTAL_READS,
                  read_length: int = READ_LENGTH, overlap_model: str = "exclusive",
                  ambiguity: float = 0.5, seed: int = 0) -> CompatibilitySet:
    """Draw read origins from the truth and derive each read's compatibility set.

    Reads go to genes in proportion to expression times length, then to
    transcripts in proportion to expression times the number of start
    positions. Under ``exclusive`` a read is compatible with its origin only.
    Under ``shared_prefix`` the isoforms of a gene share their first
    ``floor(ambiguity * m)`` start positions, ``m`` being the shortest
    isoform's count; a read starting there is compatible with every isoform.
    """
    cat = truth.catalog
    if overlap_model not in ("exclusive", "shared_prefix"):
        raise ValidationError(f"unknown overlap model {overlap_model!r}")
    if not 0.0 <= ambiguity <= 1.0:
        raise ValidationError("ambiguity must be in [0, 1]")
    if cat.n_transcripts and read_length >= int(cat.lengths.min()):
        raise ValidationError(
            f"read length {read_length} must be below the shortest transcript "
            f"({int(cat.lengths.min())})")
    rng = np.random.default_rng(seed)
    per_gene = rng.multinomial(total_reads, gene_read_shares(truth))
    w = origin_weights(truth, read_length)
    reads: list[list[ReadCompat]] = []
    serial = 0
    for i in range(cat.n_genes):
        s = cat.gene_slice(i)
        k = cat.gene_size(i)
        n = int(per_gene[i])
        q = tuple(1.0 / (cat.lengths[s] - read_length + 1))
        wi = w[s]
        if n == 0 or wi.sum() <= 0:
            reads.append([])
            continue
        origins = rng.choice(k, size=n, p=wi / wi.sum())
        if overlap_model == "shared_prefix" and k > 1:
            l_eff = cat.lengths[s] - read_length + 1
            n_shared = np.floor(ambiguity * l_eff.min())
            shared = rng.random(n) < (n_shared / l_eff)[origins]
        else:
            shared = np.zeros(n, dtype=bool)
        all_k = tuple(range(k))
        signatures = [((j,), (q[j],)) for j in range(k)]
        gene_reads = []
        for o, sh in zip(origins.tolist(), shared.tolist()):
            ks, qs = (all_k, q) if sh else signatures[o]
            gene_reads.append(ReadCompat(f"r{serial:09d}", ks, qs))
            serial += 1
        reads.append(gene_reads)
    return CompatibilitySet(cat, reads, read_length)


def synthetic_catalog(n_genes: int, seed: int, isoform_weights=(0.35, 0.3, 0.2, 0.15),
                      length_range: tuple[int, int] = (600, 4000)) -> TranscriptCatalog:
    """Random genes with 1..len(isoform_weights) isoforms each."""
    rng = np.random.default_rng(seed)
    w = np.asarray(isoform_weights, dtype=float)
    genes = []
    for g in range(n_genes):
        k = int(rng.choice(w.size, p=w / w.sum())) + 1
        lengths = rng.integers(length_range[0], length_range[1] + 1, size=k)
        genes.append(GeneEntry(
            f"G{g:05d}",
            tuple(Transcript(f"G{g:05d}.{j + 1}", int(lengths[j])) for j in range(k))))
    return TranscriptCatalog(genes)


def synthetic_domains(catalog: TranscriptCatalog, seed: int, n_domains: int = 200,
                      domains_per_gene: tuple[int, int] = (1, 4),
                      ddi_per_domain: float = 1.5) -> tuple[DomainAnnotation, DDITable]:
    """Random domain content and domain-domain interactions.

    Each gene draws a domain set; each isoform keeps a random non-empty
    subset of it, so isoforms of one gene often reach different partners.
    """
    rng = np.random.default_rng(seed)
    names = [f"D{d:04d}" for d in range(n_domains)]
    rows = []
    for i, gene in enumerate(catalog.genes):
        m = int(rng.integers(domains_per_gene[0], domains_per_gene[1] + 1))
        pool = rng.choice(n_domains, size=m, replace=False)
        for t in gene.transcripts:
            keep = rng.random(m) < 0.6
            if not keep.any():
                keep[rng.integers(m)] = True
            rows.extend((t.transcript_id, names[d]) for d in sorted(pool[keep]))
    n_pairs = int(round(ddi_per_domain * n_domains))
    pairs = set()
    while len(pairs) < n_pairs:
        a, b = rng.integers(n_domains, size=2)
        pairs.add((names[min(a, b)], names[max(a, b)]))
    return DomainAnnotation(rows), DDITable(sorted(pairs))
