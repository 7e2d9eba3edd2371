"""Analysis dictionaries: cyclic 2-D differences, Gaussian rows, and their mix."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import _rng
from .errors import InvalidArgument, InvalidInput
from .linalg import as_matrix, load_matrix, rank_of, save_matrix

UNIT_NORM_TOL = 1e-12
RENORM_WARN_TOL = 1e-6


class Family(str, Enum):
    DIF = "DIF"
    RAND = "RAND"
    MIX = "MIX"
    CUSTOM = "CUSTOM"


@dataclass(frozen=True)
class AnalysisDictionary:
    """A p x d analysis operator with unit-norm rows.

    ``row_scale`` holds the row norms before normalization when the rows were
    rescaled (MIX and CUSTOM); it is informational only.
    """

    omega: np.ndarray = field(repr=False)
    family: Family = Family.CUSTOM
    seed: int | None = None
    grid_side: int | None = None
    row_scale: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        omega = as_matrix(self.omega, "omega").copy()
        omega.setflags(write=False)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "family", Family(self.family))
        p, d = omega.shape
        if p < d:
            raise InvalidArgument(f"analysis dictionary needs p >= d, got {p}x{d}")
        norms = np.linalg.norm(omega, axis=1)
        if np.max(np.abs(norms - 1.0)) > UNIT_NORM_TOL:
            raise InvalidArgument("dictionary rows must have unit l2 norm")
        if self.family in (Family.DIF, Family.MIX):
            n = self.grid_side
            if n is None or d != n * n or p != 2 * d:
                raise InvalidArgument(f"{self.family.value} needs d = grid_side^2 and p = 2d")

    @property
    def p(self) -> int:
        return self.omega.shape[0]

    @property
    def d(self) -> int:
        return self.omega.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.omega.shape

    def rows(self, idx) -> np.ndarray:
        return self.omega[np.asarray(idx, dtype=np.int64)]

    def header(self) -> dict:
        return {
            "family": self.family.value,
            "d": self.d,
            "p": self.p,
            "seed": self.seed,
            "grid_side": self.grid_side,
        }

    @property
    def label(self) -> str:
        return f"{self.family.value}({self.p}x{self.d})"


def _normalize_rows(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(m, axis=1)
    return m / norms[:, None], norms


def difference_operator(grid_side: int) -> np.ndarray:
    """Unnormalized cyclic right/down one-sided differences on an n x n grid.

    Rows 0..d-1 are horizontal differences in row-major pixel order, rows
    d..2d-1 the vertical ones.
    """
    n = int(grid_side)
    d = n * n
    m = np.zeros((2 * d, d))
    for i in range(n):
        for j in range(n):
            px = i * n + j
            m[px, px] += 1.0
            m[px, i * n + (j + 1) % n] -= 1.0
            m[d + px, px] += 1.0
            m[d + px, ((i + 1) % n) * n + j] -= 1.0
    return m


def make_dif(grid_side: int) -> AnalysisDictionary:
    if int(grid_side) != grid_side or grid_side < 2:
        raise InvalidArgument(f"grid_side must be an integer >= 2, got {grid_side}")
    grid_side = int(grid_side)
    omega = difference_operator(grid_side) / math.sqrt(2.0)
    return AnalysisDictionary(omega, Family.DIF, None, grid_side)


def make_rand(p: int, d: int, seed=0) -> AnalysisDictionary:
    if d < 1 or p < d:
        raise InvalidArgument(f"need p >= d >= 1, got p={p}, d={d}")
    g = _rng.rng(seed, _rng.DICTIONARY, p, d)
    omega, norms = _normalize_rows(g.standard_normal((p, d)))
    return AnalysisDictionary(omega, Family.RAND, seed, None, norms)


def make_mix(grid_side: int, seed=0) -> AnalysisDictionary:
    """Cyclic differences times a Gaussian d x d matrix, rows renormalized."""
    if int(grid_side) != grid_side or grid_side < 2:
        raise InvalidArgument(f"grid_side must be an integer >= 2, got {grid_side}")
    grid_side = int(grid_side)
    d = grid_side * grid_side
    g = _rng.rng(seed, _rng.MIXING, d)
    while True:
        a = g.standard_normal((d, d))
        if rank_of(a) == d:
            break
    omega, norms = _normalize_rows((difference_operator(grid_side) / math.sqrt(2.0)) @ a)
    return AnalysisDictionary(omega, Family.MIX, seed, grid_side, norms)


def make_family(family: str, d: int, p: int | None = None, seed=0) -> AnalysisDictionary:
    """Build a dictionary by family name; DIF/MIX need ``d`` to be a perfect square."""
    fam = Family(str(family).upper())
    if fam is Family.RAND:
        return make_rand(p if p is not None else 2 * d, d, seed)
    n = math.isqrt(d)
    if n * n != d:
        raise InvalidArgument(f"{fam.value} needs a square signal dimension, got d={d}")
    if p is not None and p != 2 * d:
        raise InvalidArgument(f"{fam.value} has p = 2d = {2 * d}, got p={p}")
    if fam is Family.DIF:
        return make_dif(n)
    if fam is Family.MIX:
        return make_mix(n, seed)
    raise InvalidArgument(f"cannot construct family {fam.value}")


def from_matrix(omega, family=Family.CUSTOM, seed=None, grid_side=None) -> AnalysisDictionary:
    """Wrap a matrix, renormalizing rows (warns if any changes by more than 1e-6)."""
    m = np.asarray(omega, dtype=float)
    if m.ndim != 2 or m.size == 0:
        raise InvalidInput(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInput("matrix contains NaN or Inf")
    norms = np.linalg.norm(m, axis=1)
    if np.any(norms == 0.0):
        bad = np.flatnonzero(norms == 0.0).tolist()
        raise InvalidInput(f"zero rows are not valid analysis atoms: {bad}")
    if m.shape[0] < m.shape[1]:
        raise InvalidInput(f"need p >= d, got {m.shape[0]}x{m.shape[1]}")
    drift = np.max(np.abs(norms - 1.0))
    if drift > RENORM_WARN_TOL:
        warnings.warn(f"renormalized rows to unit norm (max relative change {drift:.3g})", stacklevel=2)
    if drift <= UNIT_NORM_TOL:
        # Already unit rows: keep the bits so save/load round-trips exactly.
        return AnalysisDictionary(m, family, seed, grid_side)
    return AnalysisDictionary(m / norms[:, None], family, seed, grid_side, norms)


def load_custom(path) -> AnalysisDictionary:
    return from_matrix(load_matrix(path))


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def save_dictionary(dic: AnalysisDictionary, path) -> Path:
    """Write the matrix (CSV or JSON by extension) plus a ``.meta.json`` header."""
    save_matrix(path, dic.omega)
    side = sidecar_path(path)
    side.write_text(json.dumps(dic.header(), indent=2) + "\n")
    return side


def load_dictionary(path) -> AnalysisDictionary:
    """Load a dictionary, restoring family metadata from its sidecar if present."""
    side = sidecar_path(path)
    if not side.exists():
        return load_custom(path)
    try:
        meta = json.loads(side.read_text())
        fam = Family(str(meta.get("family", "CUSTOM")).upper())
    except ValueError as exc:
        raise InvalidInput(f"{side}: bad header: {exc}") from exc
    m = load_matrix(path)
    if (meta.get("p"), meta.get("d")) != (None, None) and tuple(m.shape) != (meta.get("p"), meta.get("d")):
        raise InvalidInput(f"{side}: header shape {meta.get('p')}x{meta.get('d')} != matrix {m.shape}")
    return from_matrix(m, fam, meta.get("seed"), meta.get("grid_side"))
