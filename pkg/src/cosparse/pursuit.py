"""Analysis thresholding pursuit, the oracle projector and success certificates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dictionary import AnalysisDictionary
from .errors import InfeasibleTarget, InvalidArgument
from .linalg import GramSchmidt, as_vector, nullspace_projector, rank_of
from .signal import EPS0, CoSupport, NoisyInstance, zmin_of

ISNR_CAP_DB = 300.0


@dataclass(frozen=True)
class PursuitResult:
    """Output of :func:`threshold_pursuit`.

    ``selected`` is every row scanned before the target rank was reached (the
    rows appended by the co-support update), ``independent`` the subset that
    raised the rank. ``success`` and ``isnr_db`` are only filled when the
    pursuit was given a :class:`NoisyInstance` carrying the truth.
    """

    x_hat: np.ndarray = field(repr=False)
    cosupport_hat: CoSupport
    selected: tuple
    independent: tuple
    success: bool | None = None
    isnr_db: float | None = None


def scan_order(z: np.ndarray) -> np.ndarray:
    """Indices sorted by ascending ``z``; ties go to the lower index."""
    return np.argsort(z, kind="stable")


def threshold_pursuit(dic: AnalysisDictionary, y, r: int, eps0: float = EPS0) -> PursuitResult:
    instance = y if isinstance(y, NoisyInstance) else None
    y = as_vector(instance.y if instance is not None else y, "y")
    d = dic.d
    if y.shape[0] != d:
        raise InvalidArgument(f"y has dimension {y.shape[0]}, dictionary expects {d}")
    if not 1 <= r <= d - 1:
        raise InvalidArgument(f"need 1 <= r <= d-1, got r={r}")
    target = d - r

    omega = dic.omega
    gs = GramSchmidt(d, capacity=target)
    selected, independent = [], []
    for k in scan_order(np.abs(omega @ y)):
        selected.append(int(k))
        if gs.insert(omega[k]):
            independent.append(int(k))
            if gs.rank == target:
                break
    else:
        raise InfeasibleTarget(f"{dic.label}: rank {gs.rank} never reaches co-rank {target}")

    q = gs.vectors
    x_hat = y - q.T @ (q @ y)
    refined = np.flatnonzero(np.abs(omega @ x_hat) < eps0)
    cos_hat = CoSupport(tuple(refined.tolist()), min(target, refined.size))

    success = isnr_db = None
    if instance is not None:
        success = cos_hat.indices == instance.x_true.effective_cosupport.indices
        if instance.sigma > 0:
            isnr_db = isnr(instance.x_true.x, x_hat, d, instance.sigma)
    return PursuitResult(x_hat, cos_hat, tuple(selected), tuple(independent), success, isnr_db)


def oracle_denoise(dic: AnalysisDictionary, y, cosupport: CoSupport) -> np.ndarray:
    """Project ``y`` onto the null space of the true co-support rows."""
    y = as_vector(y.y if isinstance(y, NoisyInstance) else y, "y")
    idx = cosupport.as_array()
    if idx.size == 0:
        return y.copy()
    return nullspace_projector(dic.rows(idx)) @ y


def isnr(x_true, x_hat, d: int, sigma: float) -> float:
    """SNR improvement in dB, capped at ``ISNR_CAP_DB`` for exact recovery."""
    if sigma <= 0:
        raise InvalidArgument(f"sigma must be > 0, got {sigma}")
    err = float(np.sum((np.asarray(x_hat) - np.asarray(x_true)) ** 2))
    if err <= 0.0:
        return ISNR_CAP_DB
    return min(ISNR_CAP_DB, -10.0 * math.log10(err / (d * sigma**2)))


def _lambda_tilde(dic, instance, lambda_tilde):
    sig = instance.x_true
    lt = sig.generating_subset if lambda_tilde is None else lambda_tilde
    idx = lt.indices if isinstance(lt, CoSupport) else tuple(sorted(int(i) for i in lt))
    target = dic.d - sig.r
    if len(idx) != target or rank_of(dic.rows(idx)) != target:
        raise InvalidArgument(f"lambda_tilde must hold {target} linearly independent rows")
    if not set(idx) <= set(sig.effective_cosupport.indices):
        raise InvalidArgument("lambda_tilde must be a subset of the true co-support")
    return np.asarray(idx, dtype=np.int64)


def success_certificate(dic: AnalysisDictionary, instance: NoisyInstance, lambda_tilde=None) -> bool:
    """True iff every row of lambda_tilde scores below every off-support row on y."""
    lt = _lambda_tilde(dic, instance, lambda_tilde)
    comp = instance.x_true.effective_cosupport.complement(dic.p)
    z = np.abs(dic.omega @ instance.y)
    return bool(np.max(z[lt]) < np.min(z[comp]))


def lemma1_condition(dic: AnalysisDictionary, instance: NoisyInstance, lambda_tilde=None) -> bool:
    """z_min >= 2 max |w_j^T e| over lambda_tilde and the off-support rows."""
    lt = _lambda_tilde(dic, instance, lambda_tilde)
    comp = instance.x_true.effective_cosupport.complement(dic.p)
    ze = np.abs(dic.omega[np.concatenate([lt, comp])] @ instance.e)
    return bool(zmin_of(dic, instance.x_true) >= 2.0 * np.max(ze))


def adversarial_condition(dic: AnalysisDictionary, instance: NoisyInstance, eps: float | None = None) -> bool:
    """Bounded-noise predicate: z_min >= 2 eps with ||e|| <= eps (defaults to ||e||)."""
    e_norm = float(np.linalg.norm(instance.e))
    if eps is None:
        eps = e_norm
    elif e_norm > eps:
        raise InvalidArgument(f"noise norm {e_norm:.3g} exceeds eps={eps:.3g}")
    return bool(zmin_of(dic, instance.x_true) >= 2.0 * eps)
