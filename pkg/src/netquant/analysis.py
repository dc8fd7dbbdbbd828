"""Co-expression versus network adjacency, enrichment testing, estimate
comparison, and the randomized / incomplete network evaluation harness."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from . import driver
from .errors import ValidationError
from .model import CompatibilitySet, QuantState, TranscriptCatalog, TranscriptNetwork
from .network import degree_summary, delete_edges, randomize_network, two_step_closure

log = logging.getLogger(__name__)

SUBSETS = ("different_neighbors", "all_multi_isoform", "all")


@dataclass
class CoexpressionBins:
    """Adjacent-pair counts per bin of pairs ranked by decreasing correlation.

    ``total_pairs`` and ``total_adjacent`` cover every enumerated pair,
    including those in the incomplete final bin that ``counts`` omits.
    """

    counts: np.ndarray
    bin_size: int
    distance: int
    total_pairs: int
    total_adjacent: int
    excluded: list[str] = field(default_factory=list)

    @property
    def density(self) -> float:
        return self.total_adjacent / self.total_pairs if self.total_pairs else 0.0

    @property
    def baseline(self) -> float:
        """Adjacent pairs expected per bin if adjacency ignored correlation."""
        return self.density * self.bin_size

    @property
    def remainder_pairs(self) -> int:
        return self.total_pairs - self.counts.size * self.bin_size


def pair_correlations(expr: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Pearson correlation of every row pair across columns.

    Constant rows are dropped. Returns ``(i, j, r, kept)`` with ``i < j``
    indexing the original rows and ``kept`` the surviving row indices.
    """
    expr = np.asarray(expr, dtype=float)
    if expr.ndim != 2 or expr.shape[1] < 2:
        raise ValidationError("need a transcripts x samples matrix with >= 2 samples")
    kept = np.flatnonzero(expr.std(axis=1) > 0)
    if kept.size < 2:
        return (np.zeros(0, int), np.zeros(0, int), np.zeros(0), kept)
    r = np.corrcoef(expr[kept])
    a, b = np.triu_indices(kept.size, 1)
    return kept[a], kept[b], r[a, b], kept


def coexpression_bins(expr: np.ndarray, transcript_ids: Sequence[str],
                      network: TranscriptNetwork, bin_size: int = 1000,
                      distance: int = 1) -> CoexpressionBins:
    """Rank transcript pairs by co-expression and count network-near pairs per bin.

    Parameters
    ----------
    expr : (n_transcripts, n_samples) array
    transcript_ids : row labels of ``expr``
    network : TranscriptNetwork
    bin_size : int
    distance : {1, 2}
        Count direct neighbors, or pairs within two steps.
    """
    if bin_size < 1:
        raise ValidationError("bin_size must be >= 1")
    if distance not in (1, 2):
        raise ValidationError("distance must be 1 or 2")
    ids = list(transcript_ids)
    if len(ids) != np.asarray(expr).shape[0]:
        raise ValidationError("expression rows and transcript ids differ in number")
    net = two_step_closure(network) if distance == 2 else network
    i, j, r, kept = pair_correlations(expr)
    excluded = [ids[k] for k in sorted(set(range(len(ids))) - set(kept.tolist()))]
    if excluded:
        log.info("%d constant transcripts excluded", len(excluded))
    pos = {t: k for k, t in enumerate(ids)}
    adj = np.zeros((len(ids), len(ids)), dtype=bool)
    for a, b in net.edges:
        if a in pos and b in pos:
            adj[pos[a], pos[b]] = adj[pos[b], pos[a]] = True
    # stable sort keeps (i, j) order among equal correlations
    order = np.argsort(-r, kind="stable")
    hit = adj[i[order], j[order]]
    n_bins = hit.size // bin_size
    counts = hit[:n_bins * bin_size].reshape(n_bins, bin_size).sum(axis=1)
    return CoexpressionBins(counts.astype(np.int64), bin_size, distance,
                            int(hit.size), int(hit.sum()), excluded)


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    p_value: float
    table: tuple[tuple[int, int], tuple[int, int]]
    low_expected: bool


def chi_square_2x2(table) -> ChiSquareResult:
    """Pearson chi-square on a 2x2 table, one degree of freedom, no continuity
    correction. A table with an empty margin gives statistic 0 and p = 1."""
    (a, b), (c, d) = [[int(x) for x in row] for row in table]
    n = a + b + c + d
    margins = [a + b, c + d, a + c, b + d]
    if min(margins) == 0:
        return ChiSquareResult(0.0, 1.0, ((a, b), (c, d)), True)
    stat = n * float(a * d - b * c) ** 2 / float(np.prod(margins, dtype=float))
    expected = np.outer([a + b, c + d], [a + c, b + d]) / n
    return ChiSquareResult(stat, float(stats.chi2.sf(stat, 1)), ((a, b), (c, d)),
                           bool((expected < 5).any()))


def chi_square_enrichment(bin_counts: Sequence[int], n_top_bins: int,
                          totals: tuple[int, int], bin_size: int) -> ChiSquareResult:
    """Are network-near pairs over-represented among the top-correlated pairs?

    ``totals`` is ``(total_pairs, total_adjacent)`` over all enumerated pairs.
    The table is ``[[top near, top far], [rest near, rest far]]``.
    """
    counts = np.asarray(bin_counts, dtype=np.int64)
    if n_top_bins < 1 or n_top_bins > counts.size:
        raise ValidationError(f"n_top_bins must be in [1, {counts.size}]")
    total_pairs, total_adjacent = int(totals[0]), int(totals[1])
    top = n_top_bins * bin_size
    top_hit = int(counts[:n_top_bins].sum())
    rest, rest_hit = total_pairs - top, total_adjacent - top_hit
    if rest < 0 or rest_hit < 0 or rest_hit > rest:
        raise ValidationError("totals inconsistent with bin counts")
    return chi_square_2x2(((top_hit, top - top_hit), (rest_hit, rest - rest_hit)))


def subset_mask(catalog: TranscriptCatalog, network: TranscriptNetwork | None,
                subset: str) -> np.ndarray:
    """Boolean mask over catalog transcripts.

    ``different_neighbors`` keeps transcripts with at least one sibling whose
    neighbor set differs from theirs.
    """
    sizes = np.diff(catalog.offsets)[catalog.gene_index]
    if subset == "all":
        return np.ones(catalog.n_transcripts, dtype=bool)
    if subset == "all_multi_isoform":
        return sizes > 1
    if subset != "different_neighbors":
        raise ValidationError(f"unknown subset {subset!r}; expected one of {SUBSETS}")
    if network is None:
        raise ValidationError("subset different_neighbors needs a network")
    mask = np.zeros(catalog.n_transcripts, dtype=bool)
    for i in range(catalog.n_genes):
        s = catalog.gene_slice(i)
        ids = catalog.transcript_ids[s]
        if len(ids) < 2:
            continue
        nbs = [frozenset(network.neighbors(t)) for t in ids]
        for k in range(len(ids)):
            mask[s.start + k] = any(nbs[k] != nbs[o] for o in range(len(ids)) if o != k)
    return mask


def log_expression(x: np.ndarray) -> np.ndarray:
    return np.log2(np.asarray(x, dtype=float) + 1.0)


def compare_quant(estimate, other, mask: np.ndarray | None = None) -> float:
    """Pearson correlation of log2(x + 1) expressions over ``mask``.

    ``estimate`` and ``other`` may be QuantState objects (their expressions
    are used) or flat arrays in catalog order.
    """
    x = estimate.pi if isinstance(estimate, QuantState) else np.asarray(estimate, float)
    y = other.pi if isinstance(other, QuantState) else np.asarray(other, float)
    if x.shape != y.shape:
        raise ValidationError(f"expression vectors differ in shape: {x.shape} vs {y.shape}")
    if mask is not None:
        x, y = x[mask], y[mask]
    if x.size == 0:
        raise ValidationError("comparison subset is empty")
    lx, ly = log_expression(x), log_expression(y)
    if np.ptp(lx) == 0 or np.ptp(ly) == 0:
        raise ValidationError("correlation undefined for constant expression")
    return float(np.corrcoef(lx, ly)[0, 1])


def compare_subset(estimate, other, catalog: TranscriptCatalog,
                   network: TranscriptNetwork | None, subset: str) -> float:
    return compare_quant(estimate, other, subset_mask(catalog, network, subset))


@dataclass
class StudyRow:
    label: str
    seed: int | None
    correlation: float
    edges: int
    rounds: int


def randomized_network_study(catalog: TranscriptCatalog, compat: CompatibilitySet,
                             network: TranscriptNetwork, truth_expression: np.ndarray,
                             n_networks: int, seed: int, lam: float = driver.DEFAULT_LAMBDA,
                             subset: str = "different_neighbors") -> list[StudyRow]:
    """Correlation with truth for base EM, the true network and label-permuted networks.

    The subset is always taken from the true network.
    """
    mask = subset_mask(catalog, network, subset)
    base = driver.base_quant(catalog, compat)
    rows = [StudyRow("base_em", None, compare_quant(base, truth_expression, mask), 0, 1)]
    est = driver.net_rstq(catalog, compat, network, lam)
    rows.append(StudyRow("network", None, compare_quant(est, truth_expression, mask),
                         network.n_edges, est.rounds))
    seeds = np.random.SeedSequence(seed).generate_state(n_networks)
    for s in seeds.tolist():
        rnet = randomize_network(network, s)
        log.debug("randomized network %d degrees %s", s, degree_summary(rnet))
        est = driver.net_rstq(catalog, compat, rnet, lam)
        rows.append(StudyRow("randomized", s, compare_quant(est, truth_expression, mask),
                             rnet.n_edges, est.rounds))
    return rows


def edge_deletion_study(catalog: TranscriptCatalog, compat: CompatibilitySet,
                        network: TranscriptNetwork, truth_expression: np.ndarray,
                        fractions: Sequence[float], seed: int,
                        lam: float = driver.DEFAULT_LAMBDA,
                        subset: str = "different_neighbors") -> list[StudyRow]:
    """Correlation with truth after removing each fraction of edges."""
    mask = subset_mask(catalog, network, subset)
    rows = []
    for f in fractions:
        net = delete_edges(network, f, seed)
        est = driver.net_rstq(catalog, compat, net, lam)
        rows.append(StudyRow(f"delete_{f:g}", seed, compare_quant(est, truth_expression, mask),
                             net.n_edges, est.rounds))
    return rows
