"""Alternating per-gene optimization of the network pseudo-likelihood.

Each round sweeps the genes; for gene ``i`` the prior read counts are
recomputed from the current proportions of every other gene, a MAP EM gives
a candidate, and the candidate is kept only if it strictly increases the part
of the global objective that depends on gene ``i``: its own prior and
likelihood plus the priors of every gene adjacent to it, whose prior read
counts move with gene ``i``'s expression.
"""

from __future__ import annotations

import logging
from typing import Callable

import numpy as np
from scipy.special import gammaln

from . import em
from .errors import NumericalError, ValidationError
from .model import (
    CompatibilitySet,
    QuantState,
    TranscriptCatalog,
    TranscriptNetwork,
    neighbor_mean_operator,
)

log = logging.getLogger(__name__)

DEFAULT_LAMBDA = 0.1
OUTER_TOL = 1e-6
MAX_ROUNDS = 100

ProgressCallback = Callable[[int, int, float], None]


def _segment_log_priors(p, alpha, starts):
    """Log Dirichlet density of consecutive gene blocks of ``p``.

    ``starts`` are block offsets into ``p``/``alpha``.
    """
    ex = alpha - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(ex != 0, ex * np.log(p), 0.0)
    return (gammaln(np.add.reduceat(alpha, starts))
            - np.add.reduceat(gammaln(alpha), starts)
            + np.add.reduceat(terms, starts))


class _Problem:
    """Flat arrays and precomputed neighborhoods shared by one run."""

    def __init__(self, catalog: TranscriptCatalog, compat: CompatibilitySet,
                 network: TranscriptNetwork | None, lam: float):
        if compat.catalog != catalog:
            raise ValidationError("compatibility set was built for a different catalog")
        if lam < 0:
            raise ValidationError(f"lambda must be >= 0, got {lam}")
        self.catalog = catalog
        self.lam = float(lam)
        self.classes = [compat.classes(i) for i in range(catalog.n_genes)]
        self.counts = compat.read_counts().astype(float)
        self.lengths = catalog.lengths.astype(float)
        self.offsets = catalog.offsets
        self.sizes = np.diff(catalog.offsets)
        self.t_counts = self.counts[catalog.gene_index]
        net = network if network is not None else TranscriptNetwork([], [])
        self.mean_op = neighbor_mean_operator(catalog, net)
        self.mean_op_csc = self.mean_op.tocsc()
        # genes adjacent to each gene, ascending
        adj = self.mean_op_csc
        gidx = catalog.gene_index
        self.nb_genes = []
        for i in range(catalog.n_genes):
            s = catalog.gene_slice(i)
            rows = adj.indices[adj.indptr[s.start]:adj.indptr[s.stop]]
            self.nb_genes.append(np.unique(gidx[rows]))

    def gene_rows(self, genes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Flat transcript indices of ``genes`` and block starts within them."""
        sizes = self.sizes[genes]
        starts = np.concatenate(([0], np.cumsum(sizes)[:-1]))
        rows = np.repeat(self.offsets[genes] - starts, sizes) + np.arange(sizes.sum())
        return rows, starts

    def pi(self, p: np.ndarray) -> np.ndarray:
        return self.t_counts * p / self.lengths

    def phi(self, pi: np.ndarray) -> np.ndarray:
        return self.lengths * (self.mean_op @ pi)

    def gene_phi(self, i: int, pi: np.ndarray) -> np.ndarray:
        s = self.catalog.gene_slice(i)
        return self.lengths[s] * (self.mean_op[s] @ pi)

    def all_priors(self, p: np.ndarray, phi: np.ndarray) -> np.ndarray:
        return _segment_log_priors(p, self.lam * phi + 1.0, self.offsets[:-1])

    def all_loglik(self, p: np.ndarray) -> np.ndarray:
        return np.array([em.log_likelihood(p[self.catalog.gene_slice(i)], c)
                         for i, c in enumerate(self.classes)])

    def objective(self, p: np.ndarray) -> float:
        """Global log pseudo-likelihood: every gene's log prior plus log likelihood."""
        phi = self.phi(self.pi(p))
        return float(self.all_priors(p, phi).sum() + self.all_loglik(p).sum())


class NeighborPriors:
    """Summed log Dirichlet densities of the genes adjacent to one gene, as a
    function of that gene's proportions; everything else is held at ``p``."""

    def __init__(self, problem: _Problem, i: int, p: np.ndarray, phi: np.ndarray):
        self.problem = problem
        self.slice = problem.catalog.gene_slice(i)
        self.genes = problem.nb_genes[i]
        self.p_i = p[self.slice].copy()
        if self.genes.size:
            self.rows, self.starts = problem.gene_rows(self.genes)
            self.p_rows = p[self.rows]
            self.phi_rows = phi[self.rows]
            self.block = problem.mean_op_csc[:, self.slice]

    def phi_for(self, p_i: np.ndarray) -> np.ndarray:
        pr = self.problem
        d_pi = pr.t_counts[self.slice] * (p_i - self.p_i) / pr.lengths[self.slice]
        d_phi = (self.block @ d_pi)[self.rows] * pr.lengths[self.rows]
        return self.phi_rows + d_phi

    def __call__(self, p_i: np.ndarray) -> float:
        if not self.genes.size:
            return 0.0
        alpha = self.problem.lam * self.phi_for(p_i) + 1.0
        return float(_segment_log_priors(self.p_rows, alpha, self.starts).sum())


def _initial_p(problem: _Problem, init, rng: np.random.Generator) -> np.ndarray:
    cat = problem.catalog
    p = np.empty(cat.n_transcripts)
    if isinstance(init, str):
        if init in ("uniform", "base_em", "base-em"):
            for i in range(cat.n_genes):
                s = cat.gene_slice(i)
                p[s] = 1.0 / cat.gene_size(i)
            if init != "uniform":
                for i in range(cat.n_genes):
                    s = cat.gene_slice(i)
                    p[s] = em.base_em(problem.classes[i], cat.gene_size(i)).p
        elif init == "random":
            for i in range(cat.n_genes):
                p[cat.gene_slice(i)] = rng.dirichlet(np.ones(cat.gene_size(i)))
        else:
            raise ValidationError(f"unknown init {init!r}")
        return p
    p = np.array(init, dtype=float)
    if p.shape != (cat.n_transcripts,):
        raise ValidationError(f"supplied P has shape {p.shape}, expected ({cat.n_transcripts},)")
    for i in range(cat.n_genes):
        blk = p[cat.gene_slice(i)]
        if np.any(blk < 0) or abs(blk.sum() - 1.0) > 1e-9:
            raise ValidationError(f"supplied P for gene {cat.gene_ids[i]} is not on the simplex")
    return p


def net_rstq(catalog: TranscriptCatalog, compat: CompatibilitySet,
             network: TranscriptNetwork | None, lam: float = DEFAULT_LAMBDA,
             init="base_em", outer_tol: float = OUTER_TOL, max_rounds: int = MAX_ROUNDS,
             seed: int | None = None, gene_order: str = "fixed",
             inner_tol: float = em.INNER_TOL, inner_max_iter: int = em.INNER_MAX_ITER,
             progress: ProgressCallback | None = None) -> QuantState:
    """Estimate all genes' proportions under network-derived Dirichlet priors.

    Parameters
    ----------
    catalog, compat : TranscriptCatalog, CompatibilitySet
    network : TranscriptNetwork or None
        ``None`` or an edgeless network gives every transcript a flat prior.
    lam : float
        Prior weight.
    init : {"base_em", "uniform", "random"} or array
        Starting proportions; an array must be flat in catalog order.
    outer_tol : float
        Stop after the first round in which no proportion moved by this much.
    max_rounds : int
    seed : int, optional
        Seeds ``init="random"`` and ``gene_order="random"``.
    gene_order : {"fixed", "random"}
        Catalog order, or a fresh permutation every round.
    progress : callable, optional
        Called as ``progress(gene_index, round, delta)`` after every gene,
        with ``delta`` the change in the compared objective (0 when rejected).

    Returns
    -------
    QuantState
        ``trajectory`` holds ``(round, gene_index, accepted, objective)`` per
        gene visit; ``round_objective`` the global objective after init and
        after each round.
    """
    if gene_order not in ("fixed", "random"):
        raise ValidationError(f"unknown gene order {gene_order!r}")
    if (gene_order == "random" or (isinstance(init, str) and init == "random")) and seed is None:
        raise ValidationError("a seed is required for randomized runs")
    rng = np.random.default_rng(seed)
    pr = _Problem(catalog, compat, network, lam)
    p = _initial_p(pr, init, rng)
    pi = pr.pi(p)
    phi = pr.phi(pi)
    priors = pr.all_priors(p, phi)
    lliks = pr.all_loglik(p)
    total = float(priors.sum() + lliks.sum())
    if np.isnan(total):
        raise NumericalError("initial objective is NaN")
    accepted = np.zeros(catalog.n_genes, dtype=np.int64)
    trajectory = []
    round_objective = [total]
    order = np.arange(catalog.n_genes)
    converged = False
    rounds = 0

    for rnd in range(1, max_rounds + 1):
        rounds = rnd
        p_prev = p.copy()
        if gene_order == "random":
            order = rng.permutation(catalog.n_genes)
        for i in order:
            i = int(i)
            s = catalog.gene_slice(i)
            if catalog.gene_size(i) == 1:
                continue
            phi_i = pr.gene_phi(i, pi)
            cand = em.prior_em(pr.classes[i], phi_i, pr.lam, inner_tol, inner_max_iter,
                               init=p[s]).p
            nbp = NeighborPriors(pr, i, p, phi)
            try:
                cur_val = em.gene_log_likelihood(p[s], pr.classes[i], phi_i, pr.lam, nbp)
                new_val = em.gene_log_likelihood(cand, pr.classes[i], phi_i, pr.lam, nbp)
            except NumericalError as e:
                raise NumericalError(f"gene {catalog.gene_ids[i]}: {e}") from e
            if np.isnan(cur_val) or np.isnan(new_val) or new_val == np.inf:
                raise NumericalError(f"non-finite objective at gene {catalog.gene_ids[i]}")
            delta = 0.0
            if new_val > cur_val:
                delta = new_val - cur_val if np.isfinite(cur_val) else np.inf
                if nbp.genes.size:
                    new_phi_rows = nbp.phi_for(cand)
                    phi[nbp.rows] = new_phi_rows
                    priors[nbp.genes] = _segment_log_priors(
                        nbp.p_rows, pr.lam * new_phi_rows + 1.0, nbp.starts)
                p[s] = cand
                pi[s] = pr.t_counts[s] * cand / pr.lengths[s]
                phi[s] = phi_i
                priors[i] = em.log_dirichlet_prior(cand, pr.lam * phi_i + 1.0)
                lliks[i] = em.log_likelihood(cand, pr.classes[i])
                accepted[i] += 1
                total = float(priors.sum() + lliks.sum())
            trajectory.append((rnd, i, bool(delta), total))
            if progress is not None:
                progress(i, rnd, delta)
        # refresh against accumulated rounding in the incremental updates
        phi = pr.phi(pi)
        priors = pr.all_priors(p, phi)
        total = float(priors.sum() + lliks.sum())
        round_objective.append(total)
        change = float(np.max(np.abs(p - p_prev))) if p.size else 0.0
        log.debug("round %d: max change %.3g, objective %.10g", rnd, change, total)
        if change < outer_tol:
            converged = True
            break

    return QuantState(
        catalog=catalog,
        read_counts=pr.counts,
        p=p,
        phi=pr.phi(pr.pi(p)),
        lam=pr.lam,
        no_data=pr.counts == 0,
        accepted=accepted,
        rounds=rounds,
        converged=converged,
        trajectory=trajectory,
        round_objective=round_objective,
    )


def base_quant(catalog: TranscriptCatalog, compat: CompatibilitySet,
               tol: float = em.INNER_TOL, max_iter: int = em.INNER_MAX_ITER) -> QuantState:
    """Independent per-gene maximum-likelihood estimates."""
    if compat.catalog != catalog:
        raise ValidationError("compatibility set was built for a different catalog")
    p = np.empty(catalog.n_transcripts)
    converged = True
    for i in range(catalog.n_genes):
        res = em.base_em(compat.classes(i), catalog.gene_size(i), tol, max_iter)
        p[catalog.gene_slice(i)] = res.p
        converged &= res.converged
    counts = compat.read_counts().astype(float)
    return QuantState(catalog=catalog, read_counts=counts, p=p,
                      phi=np.zeros(catalog.n_transcripts), lam=0.0,
                      no_data=counts == 0, converged=converged, rounds=1)


def pseudo_log_likelihood(catalog: TranscriptCatalog, compat: CompatibilitySet,
                          network: TranscriptNetwork | None, lam: float,
                          p: np.ndarray) -> float:
    """Global objective at flat proportions ``p``."""
    return _Problem(catalog, compat, network, lam).objective(np.asarray(p, dtype=float))
