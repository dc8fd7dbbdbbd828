"""Joint estimation with a network smoothness penalty instead of Dirichlet priors.

Maximizes ``sum_g log L_g(P_g) - lam * ||A P - W P||^2`` over the product of
per-gene simplices, where ``A P`` are transcript expressions and ``W P`` the
mean expression of each transcript's neighbors. The penalty is not jointly
concave with the likelihood, so the solver finds a local maximum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError
from .model import (
    CompatibilitySet,
    QuantState,
    TranscriptCatalog,
    TranscriptNetwork,
    neighbor_mean_operator,
)


@dataclass
class PenaltyOperators:
    """``a`` is the diagonal of A (reads of the gene over transcript length);
    ``w`` is W with the neighbor-averaging pattern of the network."""

    a: np.ndarray
    w: sp.csr_matrix

    @property
    def difference(self) -> sp.csr_matrix:
        return sp.csr_matrix(sp.diags(self.a) - self.w)


def penalty_operators(catalog: TranscriptCatalog, read_counts: np.ndarray,
                      network: TranscriptNetwork | None) -> PenaltyOperators:
    counts = np.asarray(read_counts, dtype=float)[catalog.gene_index]
    scale = counts / catalog.lengths
    mean_op = neighbor_mean_operator(catalog, network or TranscriptNetwork([], []))
    return PenaltyOperators(scale, sp.csr_matrix(mean_op @ sp.diags(scale)))


def penalty(p: np.ndarray, ops: PenaltyOperators) -> float:
    """Squared distance between each transcript's expression and its neighbor mean."""
    r = ops.a * p - ops.w @ p
    return float(r @ r)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort and threshold)."""
    v = np.asarray(v, dtype=float)
    return project_blocks(v, np.array([0, v.size]))


def project_blocks(v: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Project every block ``v[offsets[i]:offsets[i+1]]`` onto its own simplex.

    Ties are broken by position, so the result is deterministic.
    """
    v = np.asarray(v, dtype=float)
    sizes = np.diff(offsets)
    block = np.repeat(np.arange(sizes.size), sizes)
    order = np.lexsort((np.arange(v.size), -v, block))
    u = v[order]
    cs = np.cumsum(u)
    start = offsets[:-1]
    before = np.where(start > 0, cs[np.maximum(start - 1, 0)], 0.0)
    cs_blk = cs - np.repeat(before, sizes)
    j = np.arange(v.size) - np.repeat(start, sizes) + 1
    ok = u - (cs_blk - 1.0) / j > 0
    # last index per block where the condition holds; the first always does
    last = np.maximum.reduceat(np.where(ok, np.arange(v.size), -1), start)
    theta = (cs_blk[last] - 1.0) / j[last]
    return np.maximum(v - np.repeat(theta, sizes), 0.0)


class _Objective:
    def __init__(self, catalog, compat, ops, lam):
        rows, cols, vals, weights = [], [], [], []
        c0 = 0
        for i in range(catalog.n_genes):
            cls = compat.classes(i)
            r, k = np.nonzero(cls.q)
            rows.append(r + c0)
            cols.append(k + int(catalog.offsets[i]))
            vals.append(cls.q[r, k])
            weights.append(cls.counts)
            c0 += cls.q.shape[0]
        self.q = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                               shape=(c0, catalog.n_transcripts)) if c0 else \
            sp.csr_matrix((0, catalog.n_transcripts))
        self.w = np.concatenate(weights) if weights else np.zeros(0)
        self.diff = ops.difference
        self.lam = lam

    def value(self, p):
        d = self.q @ p
        if np.any(d <= 0):
            return -np.inf
        r = self.diff @ p
        return float(self.w @ np.log(d) - self.lam * (r @ r))

    def gradient(self, p):
        d = self.q @ p
        r = self.diff @ p
        return self.q.T @ (self.w / d) - 2.0 * self.lam * (self.diff.T @ r)


def solve_penalized(catalog: TranscriptCatalog, compat: CompatibilitySet,
                    network: TranscriptNetwork | None, lambda_reg: float,
                    tol: float = 1e-10, max_iter: int = 20000,
                    init: np.ndarray | None = None) -> QuantState:
    """Projected-gradient ascent on the penalized log-likelihood.

    Each iteration tries a Barzilai-Borwein step, halving it until the
    objective increases. The run stops when a step moves no coordinate by
    ``tol`` or more; if the step size underflows first, the best point so far
    is returned with ``stalled`` set.

    Returns
    -------
    QuantState
        ``lam`` holds ``lambda_reg``; ``trajectory`` the objective per
        accepted step.
    """
    if lambda_reg < 0:
        raise ValidationError(f"lambda_reg must be >= 0, got {lambda_reg}")
    if compat.catalog != catalog:
        raise ValidationError("compatibility set was built for a different catalog")
    counts = compat.read_counts().astype(float)
    ops = penalty_operators(catalog, counts, network)
    obj = _Objective(catalog, compat, ops, float(lambda_reg))
    offsets = catalog.offsets
    if init is None:
        p = np.repeat(1.0 / np.diff(offsets), np.diff(offsets))
    else:
        p = project_blocks(np.asarray(init, dtype=float), offsets)
    f = obj.value(p)
    if not np.isfinite(f):
        raise ValidationError("starting point has zero likelihood")
    g = obj.gradient(p)
    step = 1.0 / max(float(np.max(np.abs(g))), 1.0)
    trajectory = [f]
    converged = stalled = False
    it = 0
    for it in range(1, max_iter + 1):
        t = step
        while True:
            cand = project_blocks(p + t * g, offsets)
            moved = float(np.max(np.abs(cand - p)))
            if moved < tol:
                converged = True
                break
            fc = obj.value(cand)
            if fc > f:
                break
            t *= 0.5
            if t < 1e-300:
                stalled = True
                break
        if converged or stalled:
            break
        gc = obj.gradient(cand)
        s, y = cand - p, gc - g
        sy = float(s @ y)
        # ascent on a locally concave function gives s.y < 0
        step = float(s @ s) / -sy if sy < 0 else 2.0 * t
        p, f, g = cand, fc, gc
        trajectory.append(f)
    return QuantState(catalog=catalog, read_counts=counts, p=p,
                      phi=np.zeros(catalog.n_transcripts), lam=float(lambda_reg),
                      no_data=counts == 0, rounds=it, converged=converged,
                      stalled=stalled, trajectory=trajectory)
