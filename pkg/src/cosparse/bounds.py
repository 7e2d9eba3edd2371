"""Lower bounds on the probability that thresholding recovers the co-support.

Every product of powers is evaluated as ``exp(sum(n_i * log(base_i)))`` so that
large exponents do not underflow before the optimization over beta sees them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import erfc, log_ndtr

from .errors import InvalidArgument
from .signal import ratio_of_snr

BETA_MIN = 1e-2
BETA_MAX = 1e3
BETA_GRID = 2000
GOLDEN_ITERS = 80
SNR_LO, SNR_HI, SNR_POINTS = 6.0, 74.0, 35

_LOG2 = math.log(2.0)
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class Variant(str, Enum):
    MARGINAL = "marginal"
    JOINT = "joint"


@dataclass(frozen=True)
class BoundPoint:
    p: int
    d: int
    r: int
    ell: int
    ratio: float
    alpha: float
    beta_star: float
    bound: float


@dataclass
class BoundCurve:
    axis: np.ndarray
    values: np.ndarray
    variant: Variant
    ratios: np.ndarray = field(default=None, repr=False)

    def rows(self):
        for s, q, v in zip(self.axis, self.ratios, self.values):
            yield {"snr_db": float(s), "ratio": float(q), "bound": float(v), "variant": Variant(self.variant).value}


def q_tail(t):
    """Standard normal upper tail Q(t)."""
    out = 0.5 * erfc(np.asarray(t, dtype=float) / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


def _log_g(beta):
    beta = np.asarray(beta, dtype=float)
    term = np.sqrt(8.0 / np.pi) / beta * np.exp(-(beta**2) / 8.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(term < 1.0, np.log1p(-np.minimum(term, 1.0)), -np.inf)


def _log_2q(t):
    return _LOG2 + log_ndtr(-np.asarray(t, dtype=float))


def g_base(beta):
    """max{0, 1 - sqrt(8/(pi beta^2)) exp(-beta^2/8)}."""
    b = np.asarray(beta, dtype=float)
    if np.any(b <= 0):
        raise InvalidArgument("beta must be > 0")
    out = np.maximum(0.0, 1.0 - np.sqrt(8.0 / (np.pi * b**2)) * np.exp(-(b**2) / 8.0))
    return float(out) if np.ndim(out) == 0 else out


def _pow(log_base, n):
    # n * log(base) with 0 * (-inf) := 0, i.e. x**0 == 1.
    with np.errstate(invalid="ignore"):
        return np.where(n == 0, 0.0, n * log_base)


def theorem1_bound(p, d, r, ell, beta) -> float:
    """Success probability given z_min >= beta sigma: g(beta)^(p - ell + d - r)."""
    if beta <= 0:
        raise InvalidArgument("beta must be > 0")
    n = p - ell + d - r
    if n < 0:
        raise InvalidArgument(f"exponent p - ell + d - r = {n} is negative")
    return float(np.exp(_pow(_log_g(beta), n)))


def zmin_prob_bound(p, ell, beta, ratio, alpha) -> float:
    """Lower bound on Pr{z_min > beta sigma}: (2 Q(beta ratio / alpha))^(p - ell)."""
    if not 0 < alpha <= 1:
        raise InvalidArgument(f"alpha must lie in (0, 1], got {alpha}")
    if ratio <= 0 or beta <= 0:
        raise InvalidArgument("ratio and beta must be > 0")
    return float(np.exp(_pow(_log_2q(beta * ratio / alpha), p - ell)))


def _log_objective(beta, n_g, n_q, c):
    """log of g(beta)^n_g * (2 Q(c beta))^n_q; broadcasts over all arguments."""
    return _pow(_log_g(beta), n_g) + _pow(_log_2q(c * beta), n_q)


def theorem2_bound(p, d, r, ell, ratio, alpha, beta) -> float:
    if not 0 < alpha <= 1:
        raise InvalidArgument(f"alpha must lie in (0, 1], got {alpha}")
    if ratio <= 0 or beta <= 0:
        raise InvalidArgument("ratio and beta must be > 0")
    return float(np.exp(_log_objective(beta, p - ell + d - r, p - ell, ratio / alpha)))


def _maximize(n_g, n_q, c):
    """Grid then golden-section maximization of the log objective, vectorized over cells.

    Returns (beta_star, bound) arrays shaped like the broadcast inputs.
    """
    n_g, n_q, c = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (n_g, n_q, c)))
    shape = n_g.shape
    n_g, n_q, c = n_g.ravel()[:, None], n_q.ravel()[:, None], c.ravel()[:, None]
    grid = np.logspace(math.log10(BETA_MIN), math.log10(BETA_MAX), BETA_GRID)
    vals = _log_objective(grid[None, :], n_g, n_q, c)
    i = np.argmax(vals, axis=1)
    best_beta = grid[i]
    best_val = vals[np.arange(len(i)), i]

    lo = grid[np.maximum(i - 1, 0)]
    hi = grid[np.minimum(i + 1, BETA_GRID - 1)]
    ng, nq, cc = n_g[:, 0], n_q[:, 0], c[:, 0]
    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1 = _log_objective(x1, ng, nq, cc)
    f2 = _log_objective(x2, ng, nq, cc)
    for _ in range(GOLDEN_ITERS):
        left = f1 >= f2
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        keep_x = np.where(left, x1, x2)
        keep_f = np.where(left, f1, f2)
        xn = np.where(left, hi - _INVPHI * (hi - lo), lo + _INVPHI * (hi - lo))
        fn = _log_objective(xn, ng, nq, cc)
        x1, f1 = np.where(left, xn, keep_x), np.where(left, fn, keep_f)
        x2, f2 = np.where(left, keep_x, xn), np.where(left, keep_f, fn)
    xm = 0.5 * (lo + hi)
    fm = _log_objective(xm, ng, nq, cc)
    better = fm > best_val
    best_beta = np.where(better, xm, best_beta)
    best_val = np.where(better, fm, best_val)
    return best_beta.reshape(shape), np.exp(best_val).reshape(shape)


def optimize_beta(p, d, r, ell, ratio, alpha) -> BoundPoint:
    """Choose beta to make the product success bound as large as possible."""
    if not 0 < alpha <= 1:
        raise InvalidArgument(f"alpha must lie in (0, 1], got {alpha}")
    if ratio <= 0:
        raise InvalidArgument("ratio must be > 0")
    beta, val = _maximize(p - ell + d - r, p - ell, ratio / alpha)
    return BoundPoint(p, d, r, ell, float(ratio), float(alpha), float(beta), float(min(1.0, val)))


def averaged_bound_marginal(p, d, r, ratio, alpha, cosparsity_dist) -> float:
    """Average over co-sparsity of the per-level optimized bound, at the worst-case alpha."""
    if not 0 < alpha <= 1:
        raise InvalidArgument(f"alpha must lie in (0, 1], got {alpha}")
    ks = np.array(sorted(cosparsity_dist), dtype=float)
    w = np.array([cosparsity_dist[k] for k in sorted(cosparsity_dist)], dtype=float)
    _, vals = _maximize(p - ks + d - r, p - ks, ratio / alpha)
    return float(np.clip(np.sum(w * vals), 0.0, 1.0))


def averaged_bound_joint(p, d, r, ratio, joint, bins: int | None = None) -> float:
    """Average over (co-sparsity, alpha bin) cells, alpha taken at each bin's lower edge.

    The lowest bin has lower edge 0, where the bound degenerates to 0.
    """
    joint = np.asarray(joint, dtype=float)
    bins = joint.shape[1] if bins is None else bins
    k_idx, m_idx = np.nonzero(joint)
    keep = m_idx >= 1
    k_idx, m_idx = k_idx[keep], m_idx[keep]
    if k_idx.size == 0:
        return 0.0
    ell = k_idx + 1.0
    edge = m_idx / bins
    _, vals = _maximize(p - ell + d - r, p - ell, ratio / edge)
    return float(np.clip(np.sum(joint[k_idx, m_idx] * vals), 0.0, 1.0))


def snr_grid(lo: float = SNR_LO, hi: float = SNR_HI, n: int = SNR_POINTS) -> np.ndarray:
    return np.linspace(lo, hi, n)


def parse_snr_grid(text: str) -> np.ndarray:
    """Parse ``a:b:n`` into n evenly spaced SNR values from a to b."""
    try:
        a, b, n = text.split(":")
        grid = snr_grid(float(a), float(b), int(n))
    except ValueError as exc:
        raise InvalidArgument(f"SNR grid must look like a:b:n, got {text!r}") from exc
    if grid.size < 1 or (grid.size > 1 and np.any(np.diff(grid) <= 0)):
        raise InvalidArgument("SNR grid must be strictly increasing")
    return grid


def bound_curve(profile, variant: Variant | str = Variant.JOINT, snr_db=None) -> BoundCurve:
    """Tabulate one averaged bound of a :class:`~cosparse.metrics.DictionaryProfile` over SNR."""
    variant = Variant(variant)
    axis = snr_grid() if snr_db is None else np.asarray(snr_db, dtype=float)
    ratios = np.array([ratio_of_snr(s, profile.d, profile.r) for s in axis])
    vals = np.array([bound_at_ratio(profile, q, variant) for q in ratios])
    return BoundCurve(axis, vals, variant, ratios)


def bound_at_ratio(profile, ratio: float, variant: Variant | str = Variant.JOINT) -> float:
    p, d, r = profile.p, profile.d, profile.r
    if Variant(variant) is Variant.MARGINAL:
        return averaged_bound_marginal(p, d, r, ratio, profile.alpha_r, profile.cosparsity_dist)
    return averaged_bound_joint(p, d, r, ratio, profile.joint, profile.bins)
