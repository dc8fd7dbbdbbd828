"""Per-gene EM for transcript proportions, with and without a Dirichlet prior.

Reads are handled as compatibility classes (see ``model.ReadClasses``); the
likelihood is identical to the per-read form. All objectives are in log space.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import NumericalError, ValidationError
from .model import ReadClasses, ReadCompat, collapse_reads

INNER_TOL = 1e-8
INNER_MAX_ITER = 1000


@dataclass
class EMResult:
    p: np.ndarray
    iterations: int
    converged: bool
    no_data: bool = False
    trace: list | None = None


def as_classes(reads: ReadClasses | Sequence[ReadCompat], n_transcripts: int) -> ReadClasses:
    if isinstance(reads, ReadClasses):
        if reads.q.shape[1] != n_transcripts:
            raise ValidationError(
                f"read classes cover {reads.q.shape[1]} transcripts, expected {n_transcripts}")
        return reads
    return collapse_reads(list(reads), n_transcripts)


def log_dirichlet_prior(p: np.ndarray, alpha: np.ndarray) -> float:
    """Log Dirichlet density at ``p``.

    Components with ``alpha == 1`` contribute nothing even where ``p`` is 0;
    ``p == 0`` against ``alpha > 1`` gives ``-inf``.
    """
    p = np.asarray(p, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if p.shape != alpha.shape:
        raise ValidationError(f"shape mismatch {p.shape} vs {alpha.shape}")
    if np.any(alpha < 1):
        raise ValidationError("Dirichlet parameters must be >= 1")
    log_c = gammaln(alpha.sum()) - gammaln(alpha).sum()
    ex = alpha - 1.0
    m = ex != 0
    if not m.any():
        return float(log_c)
    with np.errstate(divide="ignore"):
        return float(log_c + np.dot(ex[m], np.log(p[m])))


def log_likelihood(p: np.ndarray, classes: ReadClasses) -> float:
    """Log of the mixture likelihood: sum over reads of ``log(sum_k p_k q_k)``."""
    if classes.counts.size == 0:
        return 0.0
    d = classes.q @ p
    with np.errstate(divide="ignore"):
        return float(np.dot(classes.counts, np.log(d)))


def log_posterior(p: np.ndarray, classes: ReadClasses, phi: np.ndarray, lam: float) -> float:
    """Log of prior times likelihood for one gene with its prior read counts fixed."""
    return log_dirichlet_prior(p, lam * np.asarray(phi, dtype=float) + 1.0) + log_likelihood(p, classes)


def prior_e_step(p: np.ndarray, reads: ReadClasses | Sequence[ReadCompat]) -> np.ndarray:
    """Soft assignment of every read (class) to the transcripts it is compatible with.

    Returns an ``(n_classes, K)`` array whose rows sum to 1.
    """
    p = np.asarray(p, dtype=float)
    classes = as_classes(reads, p.size)
    num = classes.q * p
    d = num.sum(axis=1)
    if np.any(d <= 0):
        raise NumericalError("read orphaned by zero probabilities")
    return num / d[:, None]


def prior_m_step(responsibilities: np.ndarray, phi: np.ndarray, lam: float,
                 counts: np.ndarray | None = None) -> np.ndarray:
    """Closed-form maximizer of the expected complete-data log posterior.

    ``counts`` are class multiplicities; omit for one row per read.
    """
    resp = np.asarray(responsibilities, dtype=float)
    expected = resp.sum(axis=0) if counts is None else counts @ resp
    num = lam * np.asarray(phi, dtype=float) + expected
    total = num.sum()
    if not total > 0:
        raise NumericalError("all-zero M-step numerators")
    return num / total


def prior_em(reads: ReadClasses | Sequence[ReadCompat], phi: np.ndarray, lam: float,
             tol: float = INNER_TOL, max_iter: int = INNER_MAX_ITER,
             init: np.ndarray | None = None, trace: bool = False) -> EMResult:
    """MAP estimate of one gene's proportions under a Dirichlet(lam * phi + 1) prior.

    Parameters
    ----------
    reads : ReadClasses or sequence of ReadCompat
    phi : (K,) array
        Prior read counts, non-negative.
    lam : float
        Prior weight, non-negative.
    tol : float
        Stop once an EM step would move no coordinate by ``tol`` or more; the
        iterate at which that happens is returned.
    max_iter : int
    init : (K,) array, optional
        Starting point on the simplex; uniform by default.
    trace : bool
        Record the log objective of every iterate.

    Returns
    -------
    EMResult
    """
    phi = np.asarray(phi, dtype=float)
    k = phi.size
    if lam < 0 or np.any(phi < 0):
        raise ValidationError("lambda and phi must be non-negative")
    classes = as_classes(reads, k)
    prior = lam * phi
    if classes.counts.size == 0 or classes.n_reads == 0:
        if prior.sum() > 0:
            p = phi / phi.sum()
            return EMResult(p, 0, True, False,
                            [log_posterior(p, classes, phi, lam)] if trace else None)
        return EMResult(np.full(k, 1.0 / k), 0, True, True, [] if trace else None)
    if k == 1:
        p = np.ones(1)
        return EMResult(p, 0, True, False,
                        [log_posterior(p, classes, phi, lam)] if trace else None)

    q, w = classes.q, classes.counts
    p = np.full(k, 1.0 / k) if init is None else np.array(init, dtype=float)
    hist = [log_posterior(p, classes, phi, lam)] if trace else None
    for it in range(1, max_iter + 1):
        d = q @ p
        if np.any(d <= 0):
            raise NumericalError("read orphaned by zero probabilities")
        num = prior + p * (q.T @ (w / d))
        new = num / num.sum()
        if np.max(np.abs(new - p)) < tol:
            return EMResult(p, it - 1, True, False, hist)
        p = new
        if trace:
            hist.append(log_posterior(p, classes, phi, lam))
    return EMResult(p, max_iter, False, False, hist)


def base_em(reads: ReadClasses | Sequence[ReadCompat], n_transcripts: int,
            tol: float = INNER_TOL, max_iter: int = INNER_MAX_ITER,
            trace: bool = False) -> EMResult:
    """Maximum-likelihood proportions without a prior.

    A gene with no reads returns the uniform vector with ``no_data`` set.
    """
    return prior_em(reads, np.zeros(n_transcripts), 0.0, tol, max_iter, trace=trace)


def gene_log_likelihood(p: np.ndarray, reads: ReadClasses | Sequence[ReadCompat],
                        phi: np.ndarray, lam: float,
                        neighbor_priors: Callable[[np.ndarray], float] | None = None) -> float:
    """Objective compared by the acceptance test of the alternating optimizer.

    Without ``neighbor_priors`` this is the gene's own log posterior. With it,
    ``neighbor_priors(p)`` must return the summed log Dirichlet densities of
    the neighboring genes, their prior read counts recomputed from ``p``.
    """
    p = np.asarray(p, dtype=float)
    classes = as_classes(reads, p.size)
    val = log_posterior(p, classes, phi, lam)
    if neighbor_priors is not None:
        val += neighbor_priors(p)
    if np.isnan(val):
        raise NumericalError("log likelihood is NaN")
    return val
