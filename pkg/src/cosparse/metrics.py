"""Dictionary certification: signature and spark, co-sparsity distributions,
ROPP constants and the quantized joint (co-sparsity, alpha) distribution.

Exhaustive routines walk all k-subsets of rows in lexicographic order, split
into contiguous index ranges that can be processed by separate workers.
Merging is a sum of counts plus a min of alphas, so the result does not depend
on the number of workers.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _rng
from .dictionary import AnalysisDictionary
from .errors import BudgetExceeded, DegenerateSignal, InvalidArgument
from .linalg import TOL_RANK, orthogonalize_batched, row_space_basis
from .signal import CoSupport, CosparseSignal, generate_signal

ENUMERATION_BUDGET = 10**7
DEFAULT_BINS = 100
CHUNK = 4096


class Mode(str, Enum):
    EXACT = "exact"
    EMPIRICAL = "empirical"


@dataclass(frozen=True)
class Closure:
    """One effective co-support reached by the exhaustive walk.

    ``count`` is the number of independent generating subsets that close onto
    it and ``weight`` its normalized share; ``alpha`` is the per-co-support
    ROPP value.
    """

    cosupport: CoSupport
    count: int
    weight: float
    alpha: float

    @property
    def ell(self) -> int:
        return len(self.cosupport)


# ---------------------------------------------------------------------------
# Subset walking


def _ranges(total: int, workers: int) -> list[tuple[int, int]]:
    workers = max(1, min(workers, total))
    step = math.ceil(total / workers)
    return [(a, min(a + step, total)) for a in range(0, total, step)]


def _subset_chunks(p: int, k: int, start: int, stop: int):
    it = itertools.islice(itertools.combinations(range(p), k), start, stop)
    while True:
        block = list(itertools.islice(it, CHUNK))
        if not block:
            return
        yield np.array(block, dtype=np.int64)


def _independent_count(omega, k, start, stop) -> int:
    n = 0
    for idx in _subset_chunks(omega.shape[0], k, start, stop):
        ranks, _, _ = orthogonalize_batched(omega[idx])
        n += int(np.count_nonzero(ranks == k))
    return n


def _closure_scan(omega, k, start, stop) -> dict:
    """Map closure bitmask -> [count, alpha] for full-rank k-subsets in a range."""
    out: dict = {}
    for idx in _subset_chunks(omega.shape[0], k, start, stop):
        ranks, q, _ = orthogonalize_batched(omega[idx])
        q = q[ranks == k]
        if q.shape[0] == 0:
            continue
        coef = np.einsum("pd,nkd->npk", omega, q)
        resid = np.linalg.norm(omega[None] - np.einsum("npk,nkd->npd", coef, q), axis=2)
        in_span = resid <= TOL_RANK
        alpha = np.where(in_span, np.inf, resid).min(axis=1)
        keys = np.packbits(in_span, axis=1)
        for key, a in zip(map(bytes, keys), alpha):
            slot = out.get(key)
            if slot is None:
                out[key] = [1, float(a)]
            else:
                slot[0] += 1
                slot[1] = min(slot[1], float(a))
    return out


def _run(fn, omega, k, total, workers):
    spans = _ranges(total, workers)
    if workers <= 1 or len(spans) == 1:
        return [fn(omega, k, a, b) for a, b in spans]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, omega, k, a, b) for a, b in spans]
        return [f.result() for f in futures]


def _check_budget(total: int, budget: int, what: str):
    if total > budget:
        raise BudgetExceeded(
            f"{what} needs {total:,} subsets (budget {budget:,}); use the empirical mode instead"
        )


# ---------------------------------------------------------------------------
# Signature and spark


def spark_from_signature(f) -> int:
    f = np.asarray(f)
    below = np.flatnonzero(f < 1.0)
    return int(below[0]) + 1 if below.size else len(f) + 1


def signature(
    dic: AnalysisDictionary,
    mode: Mode | str = Mode.EXACT,
    sample_budget: int = 10_000,
    seed=0,
    *,
    budget: int = ENUMERATION_BUDGET,
    spark_only: bool = False,
    workers: int = 1,
) -> tuple[np.ndarray, int]:
    """Fraction f(k) of independent k-row subsets for k = 1..d, and the spark.

    With ``spark_only`` the walk stops at the first k with f(k) < 1 and the
    remaining entries are NaN.
    """
    mode = Mode(mode)
    p, d = dic.shape
    omega = np.ascontiguousarray(dic.omega)
    f = np.full(d, np.nan)
    if mode is Mode.EXACT:
        _check_budget(sum(math.comb(p, k) for k in range(1, d + 1)), budget, "exact signature")
    for k in range(1, d + 1):
        if mode is Mode.EXACT:
            total = math.comb(p, k)
            f[k - 1] = sum(_run(_independent_count, omega, k, total, workers)) / total
        else:
            g = _rng.rng(seed, _rng.SUBSETS, k)
            idx = np.array([g.choice(p, size=k, replace=False) for _ in range(sample_budget)])
            ranks, _, _ = orthogonalize_batched(omega[idx])
            f[k - 1] = np.count_nonzero(ranks == k) / sample_budget
        if spark_only and f[k - 1] < 1.0:
            break
    if mode is Mode.EMPIRICAL and not spark_only:
        # Subsets of independent sets are independent, so the true f is non-increasing.
        f = np.minimum.accumulate(f)
    return f, spark_from_signature(np.nan_to_num(f, nan=1.0))


# ---------------------------------------------------------------------------
# Co-supports and ROPP


def enumerate_cosupports(
    dic: AnalysisDictionary,
    r: int,
    *,
    uniform: bool = False,
    budget: int = ENUMERATION_BUDGET,
    workers: int = 1,
) -> list[Closure]:
    """All effective co-supports of co-rank d - r, sorted by their index tuples.

    Each closure is weighted by the number of independent (d-r)-subsets that
    generate it, or uniformly over distinct closures when ``uniform``.
    """
    p, d = dic.shape
    if not 1 <= r <= d - 1:
        raise InvalidArgument(f"need 1 <= r <= d-1, got r={r}")
    k = d - r
    total = math.comb(p, k)
    _check_budget(total, budget, f"exact enumeration at co-rank {k}")
    merged: dict = {}
    for part in _run(_closure_scan, np.ascontiguousarray(dic.omega), k, total, workers):
        for key, (c, a) in part.items():
            slot = merged.setdefault(key, [0, np.inf])
            slot[0] += c
            slot[1] = min(slot[1], a)
    if not merged:
        raise InvalidArgument(f"{dic.label} has no independent subsets of size {k}")
    n_gen = sum(c for c, _ in merged.values())
    out = []
    for key, (c, a) in merged.items():
        mask = np.unpackbits(np.frombuffer(key, dtype=np.uint8))[:p].astype(bool)
        w = 1.0 / len(merged) if uniform else c / n_gen
        out.append(Closure(CoSupport(tuple(np.flatnonzero(mask).tolist()), k), c, w, float(a)))
    out.sort(key=lambda cl: cl.cosupport.indices)
    return out


def ropp_alpha_lambda(dic: AnalysisDictionary, cosupport) -> float:
    """min over rows outside the co-support of the norm of their null-space projection."""
    idx = cosupport.as_array() if isinstance(cosupport, CoSupport) else np.asarray(sorted(cosupport), dtype=np.int64)
    mask = np.ones(dic.p, dtype=bool)
    mask[idx] = False
    if not mask.any():
        raise DegenerateSignal("co-support covers every row; no off-support atoms")
    w = dic.omega[mask]
    if idx.size == 0:
        return float(np.min(np.linalg.norm(w, axis=1)))
    q = row_space_basis(dic.rows(idx)).vectors
    return float(np.min(np.linalg.norm(w - (w @ q.T) @ q, axis=1)))


def alpha_of_signal(dic: AnalysisDictionary, signal: CosparseSignal) -> float:
    """Per-co-support ROPP value of a generated signal's effective co-support.

    The generating subset spans the same space as the effective co-support, so
    its (smaller) basis is used for the projection.
    """
    comp = signal.effective_cosupport.complement(dic.p)
    if comp.size == 0:
        raise DegenerateSignal("co-support covers every row; no off-support atoms")
    q = row_space_basis(dic.rows(signal.generating_subset.indices)).vectors
    w = dic.omega[comp]
    return float(np.min(np.linalg.norm(w - (w @ q.T) @ q, axis=1)))


def signal_statistics(dic: AnalysisDictionary, signals) -> tuple[np.ndarray, np.ndarray]:
    """(co-sparsity, per-co-support alpha) for each signal's effective co-support."""
    ell = np.array([s.ell for s in signals], dtype=np.int64)
    alpha = np.array([alpha_of_signal(dic, s) for s in signals])
    return ell, alpha


def ropp_constant(
    dic: AnalysisDictionary,
    r: int,
    mode: Mode | str = Mode.EXACT,
    signals=None,
    *,
    closures: list[Closure] | None = None,
    workers: int = 1,
) -> float:
    """Worst-case ROPP constant over exact closures, or over sampled signals.

    The empirical value is a minimum over a subset of co-supports and so can
    only overestimate the exact one.
    """
    if Mode(mode) is Mode.EXACT:
        closures = closures if closures is not None else enumerate_cosupports(dic, r, workers=workers)
        alphas = [c.alpha for c in closures]
    else:
        if not signals:
            raise InvalidArgument("empirical ROPP needs a non-empty signal collection")
        alphas = signal_statistics(dic, signals)[1]
    if len(alphas) == 0:
        raise InvalidArgument("empty co-support collection")
    return float(np.min(alphas))


def erc_like_check(dic: AnalysisDictionary, cosupport, alpha: float) -> bool:
    """Sufficient condition: every off-support row keeps at most 1 - alpha inside the span."""
    idx = cosupport.as_array() if isinstance(cosupport, CoSupport) else np.asarray(sorted(cosupport), dtype=np.int64)
    mask = np.ones(dic.p, dtype=bool)
    mask[idx] = False
    if not mask.any():
        raise DegenerateSignal("co-support covers every row; no off-support atoms")
    if idx.size == 0:
        return bool(0.0 <= 1.0 - alpha)
    q = row_space_basis(dic.rows(idx)).vectors
    inside = np.linalg.norm((dic.omega[mask] @ q.T) @ q, axis=1)
    return bool(np.max(inside) <= 1.0 - alpha)


# ---------------------------------------------------------------------------
# Distributions


def alpha_bin(alpha, bins: int = DEFAULT_BINS):
    """0-based bin of alpha in [0, 1]; alpha == 1 lands in the top bin."""
    b = np.floor(np.asarray(alpha, dtype=float) * bins).astype(np.int64)
    return np.clip(b, 0, bins - 1)


def cosparsity_distribution(ell, weights=None, p: int | None = None) -> dict[int, float]:
    ell = np.asarray(ell, dtype=np.int64)
    w = np.ones(ell.size) if weights is None else np.asarray(weights, dtype=float)
    acc: Counter = Counter()
    for k, wk in zip(ell.tolist(), w.tolist()):
        acc[k] += wk
    total = sum(acc.values())
    return {k: acc[k] / total for k in sorted(acc)}


def joint_matrix(ell, alpha, p: int, bins: int = DEFAULT_BINS, weights=None) -> np.ndarray:
    """p x bins matrix; row k-1 is co-sparsity k, column m-1 is alpha in [(m-1)/T, m/T)."""
    ell = np.asarray(ell, dtype=np.int64)
    w = np.ones(ell.size) if weights is None else np.asarray(weights, dtype=float)
    if np.any(ell < 1) or np.any(ell > p):
        raise InvalidArgument("co-sparsity values must lie in 1..p")
    out = np.zeros((p, bins))
    np.add.at(out, (ell - 1, alpha_bin(alpha, bins)), w)
    return out / out.sum()


def joint_distribution(
    dic: AnalysisDictionary,
    r: int,
    bins: int = DEFAULT_BINS,
    mode: Mode | str = Mode.EXACT,
    signals=None,
    *,
    closures: list[Closure] | None = None,
    workers: int = 1,
) -> np.ndarray:
    if Mode(mode) is Mode.EXACT:
        closures = closures if closures is not None else enumerate_cosupports(dic, r, workers=workers)
        return joint_matrix(
            [c.ell for c in closures], [c.alpha for c in closures], dic.p, bins, [c.weight for c in closures]
        )
    if not signals:
        raise InvalidArgument("empirical joint distribution needs signals")
    ell, alpha = signal_statistics(dic, signals)
    return joint_matrix(ell, alpha, dic.p, bins)


# ---------------------------------------------------------------------------
# Profile


@dataclass
class DictionaryProfile:
    """Everything the bounds need to know about a dictionary at one r."""

    p: int
    d: int
    r: int
    signature: np.ndarray | None
    spark: int | None
    cosparsity_dist: dict
    alpha_r: float
    joint: np.ndarray = field(repr=False)
    mode: Mode = Mode.EXACT
    sample_count: int | None = None
    bins: int = DEFAULT_BINS
    family: str | None = None
    seed: int | None = None

    def to_json(self) -> dict:
        return {
            "family": self.family,
            "seed": self.seed,
            "p": self.p,
            "d": self.d,
            "r": self.r,
            "signature": None
            if self.signature is None
            else [None if math.isnan(v) else float(v) for v in self.signature],
            "spark": self.spark,
            "cosparsity_dist": {str(k): v for k, v in self.cosparsity_dist.items()},
            "alpha_r": self.alpha_r,
            "T": self.bins,
            "joint": self.joint.tolist(),
            "mode": Mode(self.mode).value,
            "sample_count": self.sample_count,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DictionaryProfile":
        try:
            joint = np.asarray(obj["joint"], dtype=float)
            return cls(
                p=int(obj["p"]),
                d=int(obj["d"]),
                r=int(obj["r"]),
                signature=None
                if obj.get("signature") is None
                else np.array([np.nan if v is None else v for v in obj["signature"]], dtype=float),
                spark=None if obj.get("spark") is None else int(obj["spark"]),
                cosparsity_dist={int(k): float(v) for k, v in obj["cosparsity_dist"].items()},
                alpha_r=float(obj["alpha_r"]),
                joint=joint,
                mode=Mode(obj.get("mode", "exact")),
                sample_count=obj.get("sample_count"),
                bins=int(obj.get("T", joint.shape[1])),
                family=obj.get("family"),
                seed=obj.get("seed"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidArgument(f"malformed profile: {exc}") from exc


def sample_signals(dic: AnalysisDictionary, r: int, n: int, seed=0) -> list[CosparseSignal]:
    return [generate_signal(dic, r, _rng.subseed(seed, "signal", r, t)) for t in range(n)]


def build_profile(
    dic: AnalysisDictionary,
    r: int,
    mode: Mode | str = Mode.EXACT,
    *,
    n: int = 10_000,
    seed=0,
    bins: int = DEFAULT_BINS,
    uniform_closures: bool = False,
    signals=None,
    workers: int = 1,
    budget: int = ENUMERATION_BUDGET,
) -> DictionaryProfile:
    mode = Mode(mode)
    if mode is Mode.EXACT:
        f, spark = signature(dic, Mode.EXACT, budget=budget, workers=workers)
        closures = enumerate_cosupports(dic, r, uniform=uniform_closures, budget=budget, workers=workers)
        ell = [c.ell for c in closures]
        alpha = [c.alpha for c in closures]
        weights = [c.weight for c in closures]
        sample_count = None
    else:
        f, spark = signature(dic, Mode.EMPIRICAL, sample_budget=min(n, 10_000), seed=seed)
        if signals is None:
            signals = sample_signals(dic, r, n, seed)
        ell, alpha = signal_statistics(dic, signals)
        weights = None
        sample_count = len(signals)
    return DictionaryProfile(
        p=dic.p,
        d=dic.d,
        r=r,
        signature=f,
        spark=spark,
        cosparsity_dist=cosparsity_distribution(ell, weights),
        alpha_r=float(np.min(alpha)),
        joint=joint_matrix(ell, alpha, dic.p, bins, weights),
        mode=mode,
        sample_count=sample_count,
        bins=bins,
        family=dic.family.value,
        seed=dic.seed,
    )


def profile_from_samples(dic: AnalysisDictionary, r: int, ell, alpha, bins: int = DEFAULT_BINS) -> DictionaryProfile:
    """Empirical profile from per-signal (co-sparsity, alpha) pairs; no signature."""
    ell = np.asarray(ell, dtype=np.int64)
    alpha = np.asarray(alpha, dtype=float)
    if ell.size == 0:
        raise InvalidArgument("need at least one sample")
    return DictionaryProfile(
        p=dic.p,
        d=dic.d,
        r=r,
        signature=None,
        spark=None,
        cosparsity_dist=cosparsity_distribution(ell),
        alpha_r=float(alpha.min()),
        joint=joint_matrix(ell, alpha, dic.p, bins),
        mode=Mode.EMPIRICAL,
        sample_count=int(ell.size),
        bins=bins,
        family=dic.family.value,
        seed=dic.seed,
    )
