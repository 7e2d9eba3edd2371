"""Co-sparse signal generation, effective co-supports, noise and SNR conversions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .dictionary import AnalysisDictionary
from .errors import DegenerateSignal, InfeasibleTarget, InvalidArgument
from .linalg import TOL_RANK, GramSchmidt, rank_of, row_space_basis

# Threshold separating exact zeros of Omega x from generic inner products.
EPS0 = 1e-8
MAX_RESAMPLES = 100
# Same limit as exhaustive enumeration; see metrics.ENUMERATION_BUDGET.
UNIFORM_DRAW_LIMIT = 10**7
MAX_REJECTIONS = 10_000


@dataclass(frozen=True)
class CoSupport:
    """Sorted set of row indices (0-based) with the rank of the selected rows."""

    indices: tuple = ()
    corank: int = 0

    def __post_init__(self):
        idx = tuple(sorted(int(i) for i in self.indices))
        if len(set(idx)) != len(idx):
            raise InvalidArgument("co-support indices must be unique")
        if idx and idx[0] < 0:
            raise InvalidArgument("co-support indices must be non-negative")
        if self.corank < 0 or self.corank > len(idx):
            raise InvalidArgument(f"co-rank {self.corank} impossible for {len(idx)} rows")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def of(cls, dic: AnalysisDictionary, indices) -> "CoSupport":
        idx = sorted(int(i) for i in indices)
        if idx and (idx[0] < 0 or idx[-1] >= dic.p):
            raise InvalidArgument(f"co-support index out of range for p={dic.p}")
        return cls(tuple(idx), rank_of(dic.rows(idx)) if idx else 0)

    def __len__(self):
        return len(self.indices)

    def __contains__(self, j):
        return j in set(self.indices)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.int64)

    def complement(self, p: int) -> np.ndarray:
        mask = np.ones(p, dtype=bool)
        mask[list(self.indices)] = False
        return np.flatnonzero(mask)


@dataclass(frozen=True)
class CosparseSignal:
    x: np.ndarray = field(repr=False)
    generating_subset: CoSupport
    effective_cosupport: CoSupport
    ell: int
    r: int
    seed: int | None = None


@dataclass(frozen=True)
class NoisyInstance:
    y: np.ndarray = field(repr=False)
    x_true: CosparseSignal
    sigma: float
    seed: int | None = None

    @property
    def e(self) -> np.ndarray:
        return self.y - self.x_true.x


def draw_cosupport(dic: AnalysisDictionary, r: int, seed=0, method: str = "auto") -> CoSupport:
    """Draw d - r linearly independent rows.

    ``method``:

    * ``"uniform"`` - uniform over all independent (d-r)-subsets, by rejecting
      dependent random subsets. Signals then follow the generating-subset
      weighting used by the exact co-sparsity distribution.
    * ``"scan"`` - walk the rows in a random order keeping those that raise the
      rank. Cheap at any size, but biased toward some closures.
    * ``"auto"`` - ``"uniform"`` when C(p, d-r) is small enough to enumerate
      exactly, else ``"scan"``.
    """
    return _draw(dic, r, seed, method)[0]


def _draw(dic, r, seed, method="auto") -> tuple[CoSupport, int]:
    """Return the co-support and the number of rejected candidates."""
    d = dic.d
    if not 1 <= r <= d - 1:
        raise InvalidArgument(f"need 1 <= r <= d-1, got r={r}, d={d}")
    if method == "auto":
        method = "uniform" if math.comb(dic.p, d - r) <= UNIFORM_DRAW_LIMIT else "scan"
    if method == "uniform":
        target = d - r
        g = _rng.rng(seed, _rng.COSUPPORT, 1)
        for attempt in range(MAX_REJECTIONS):
            idx = np.sort(g.choice(dic.p, size=target, replace=False))
            gs = GramSchmidt(d, capacity=target)
            if all(gs.insert(w) for w in dic.omega[idx]):
                return CoSupport(tuple(idx.tolist()), target), attempt
        # Too few independent subsets for rejection to be practical.
        cos, rej = _scan_independent(dic, r, _rng.rng(seed, _rng.COSUPPORT))
        return cos, rej + MAX_REJECTIONS
    if method == "scan":
        return _scan_independent(dic, r, _rng.rng(seed, _rng.COSUPPORT))
    raise InvalidArgument(f"unknown draw method {method!r}")


def _scan_independent(dic, r, g) -> tuple[CoSupport, int]:
    d = dic.d
    target = d - r
    gs = GramSchmidt(d, capacity=target)
    chosen = []
    rejected = 0
    for j in g.permutation(dic.p):
        if gs.insert(dic.omega[j]):
            chosen.append(int(j))
            if gs.rank == target:
                return CoSupport(tuple(chosen), target), rejected
        else:
            rejected += 1
    raise InfeasibleTarget(f"{dic.label} has rank {gs.rank} < requested co-rank {target}")


def effective_cosupport(dic: AnalysisDictionary, x, eps0: float = EPS0) -> np.ndarray:
    """Indices j with |w_j^T x| < eps0."""
    return np.flatnonzero(np.abs(dic.omega @ np.asarray(x, dtype=float)) < eps0)


def project_signal(dic: AnalysisDictionary, cosupport: CoSupport, sigma_u: float = 1.0, seed=0) -> CosparseSignal:
    """Project white Gaussian ``u`` onto the null space of the co-support rows."""
    idx = cosupport.as_array()
    if idx.size and (idx[-1] >= dic.p):
        raise InvalidArgument(f"co-support index out of range for p={dic.p}")
    q = row_space_basis(dic.rows(idx)).vectors if idx.size else np.empty((0, dic.d))
    corank = q.shape[0]
    for attempt in range(MAX_RESAMPLES):
        u = sigma_u * _rng.rng(seed, _rng.SIGNAL, attempt).standard_normal(dic.d)
        x = u - q.T @ (q @ u)
        eff = effective_cosupport(dic, x)
        # Accidental zeros outside span(Omega_Lambda) would raise the co-rank.
        w = dic.omega[eff]
        resid = np.linalg.norm(w - (w @ q.T) @ q, axis=1) if eff.size else np.empty(0)
        if not np.any(resid > TOL_RANK):
            break
    else:  # pragma: no cover - probability zero event repeated MAX_RESAMPLES times
        raise InfeasibleTarget("could not draw a signal with the requested co-rank")
    return CosparseSignal(
        x=x,
        generating_subset=CoSupport(cosupport.indices, corank),
        effective_cosupport=CoSupport(tuple(eff.tolist()), corank),
        ell=int(eff.size),
        r=dic.d - corank,
        seed=seed,
    )


def generate_signal(
    dic: AnalysisDictionary, r: int, seed=0, sigma_u: float = 1.0, method: str = "auto"
) -> CosparseSignal:
    """Draw a co-support of co-rank d - r and a signal on it, both from ``seed``."""
    return project_signal(dic, draw_cosupport(dic, r, seed, method), sigma_u, seed)


def add_noise(signal: CosparseSignal, sigma: float, seed=0) -> NoisyInstance:
    if sigma < 0:
        raise InvalidArgument(f"sigma must be >= 0, got {sigma}")
    e = sigma * _rng.rng(seed, _rng.NOISE).standard_normal(signal.x.shape[0])
    return NoisyInstance(signal.x + e, signal, float(sigma), seed)


def snr_of_ratio(ratio: float, d: int, r: int) -> float:
    """SNR in dB for noise ratio sigma/sigma_u when E||x||^2 = r sigma_u^2."""
    if ratio <= 0:
        raise InvalidArgument(f"ratio must be > 0, got {ratio}")
    return -20.0 * math.log10(math.sqrt(d / r) * ratio)


def ratio_of_snr(snr_db: float, d: int, r: int) -> float:
    return 10.0 ** (-snr_db / 20.0) / math.sqrt(d / r)


def zmin_of(dic: AnalysisDictionary, signal: CosparseSignal) -> float:
    """Smallest nonzero analysis coefficient magnitude of the clean signal."""
    comp = signal.effective_cosupport.complement(dic.p)
    if comp.size == 0:
        raise DegenerateSignal("signal is orthogonal to every row (x = 0)")
    return float(np.min(np.abs(dic.omega[comp] @ signal.x)))
