"""Dense kernels: Gram-Schmidt with rank tracking, null-space projectors, matrix I/O.

All rank decisions in the package go through :func:`gs_insert` (or its batched
twin :func:`orthogonalize_batched`), so "rank" means the same thing in the
pursuit, the signal generator and the dictionary metrics.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgument, InvalidInput

# Relative to the norm of the row being inserted.
TOL_RANK = 1e-10
TOL_PROJ = 1e-8
TOL_ORTH = 1e-8


def as_matrix(a, name="matrix") -> np.ndarray:
    """Validate and return a finite 2-D float array."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise InvalidArgument(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidArgument(f"{name} contains NaN or Inf")
    return m


def as_vector(v, name="vector") -> np.ndarray:
    x = np.asarray(v, dtype=float)
    if x.ndim != 1:
        raise InvalidArgument(f"{name} must be 1-D, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidArgument(f"{name} contains NaN or Inf")
    return x


@dataclass(frozen=True)
class OrthoBasis:
    """An ordered orthonormal set of vectors in R^ambient_dim, stored as rows."""

    ambient_dim: int
    vectors: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        v = self.vectors
        if v is None:
            v = np.empty((0, self.ambient_dim))
        v = np.array(v, dtype=float).reshape(-1, self.ambient_dim)
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    @classmethod
    def empty(cls, ambient_dim: int) -> "OrthoBasis":
        return cls(ambient_dim, np.empty((0, ambient_dim)))

    def __len__(self):
        return self.vectors.shape[0]

    def projector(self) -> np.ndarray:
        """I - sum_j q_j q_j^T."""
        q = self.vectors
        return np.eye(self.ambient_dim) - q.T @ q

    def project_out(self, y) -> np.ndarray:
        q = self.vectors
        y = np.asarray(y, dtype=float)
        return y - q.T @ (q @ y)


def _residual(q: np.ndarray, w: np.ndarray) -> np.ndarray:
    # Classical Gram-Schmidt followed by one re-orthogonalization pass.
    if q.shape[0] == 0:
        return w.copy()
    r = w - q.T @ (q @ w)
    return r - q.T @ (q @ r)


def gs_insert(basis: OrthoBasis, w) -> tuple[OrthoBasis, bool]:
    """Orthogonalize ``w`` against ``basis`` and append it if it adds rank.

    Returns the (possibly unchanged) basis and whether ``w`` was accepted.
    """
    w = as_vector(w, "w")
    if w.shape[0] != basis.ambient_dim:
        raise InvalidArgument(
            f"dimension mismatch: basis lives in R^{basis.ambient_dim}, w in R^{w.shape[0]}"
        )
    wn = np.linalg.norm(w)
    q = _residual(basis.vectors, w)
    qn = np.linalg.norm(q)
    if wn == 0.0 or qn <= TOL_RANK * wn:
        return basis, False
    return OrthoBasis(basis.ambient_dim, np.vstack([basis.vectors, q / qn])), True


class GramSchmidt:
    """Mutable accumulator with the same acceptance rule as :func:`gs_insert`.

    Used in hot loops where rebuilding an immutable basis per row would dominate.
    """

    def __init__(self, ambient_dim: int, capacity: int | None = None):
        self.ambient_dim = ambient_dim
        self._q = np.zeros((capacity or ambient_dim, ambient_dim))
        self.rank = 0

    def insert(self, w: np.ndarray) -> bool:
        if self.rank >= self._q.shape[0]:
            return False
        wn = np.linalg.norm(w)
        q = _residual(self._q[: self.rank], w)
        qn = np.linalg.norm(q)
        if wn == 0.0 or qn <= TOL_RANK * wn:
            return False
        self._q[self.rank] = q / qn
        self.rank += 1
        return True

    @property
    def vectors(self) -> np.ndarray:
        return self._q[: self.rank]

    def basis(self) -> OrthoBasis:
        return OrthoBasis(self.ambient_dim, self.vectors.copy())


def orthogonalize_batched(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run the :func:`gs_insert` rule on many row sequences at once.

    Parameters
    ----------
    rows : ndarray, shape (n, k, d)
        ``n`` independent sequences of ``k`` rows each, inserted in order.

    Returns
    -------
    ranks : ndarray of int, shape (n,)
    bases : ndarray, shape (n, k, d)
        Accepted orthonormal vectors packed at the front, zero-padded.
    accepted : ndarray of bool, shape (n, k)
    """
    rows = np.asarray(rows, dtype=float)
    n, k, d = rows.shape
    bases = np.zeros((n, k, d))
    ranks = np.zeros(n, dtype=np.int64)
    accepted = np.zeros((n, k), dtype=bool)
    idx = np.arange(n)
    for i in range(k):
        w = rows[:, i, :]
        c = np.einsum("nkd,nd->nk", bases, w)
        r = w - np.einsum("nk,nkd->nd", c, bases)
        c = np.einsum("nkd,nd->nk", bases, r)
        r = r - np.einsum("nk,nkd->nd", c, bases)
        wn = np.linalg.norm(w, axis=1)
        rn = np.linalg.norm(r, axis=1)
        ok = (wn > 0) & (rn > TOL_RANK * wn)
        sel = idx[ok]
        bases[sel, ranks[sel], :] = r[ok] / rn[ok, None]
        ranks[sel] += 1
        accepted[:, i] = ok
    return ranks, bases, accepted


def row_space_basis(omega_sub) -> OrthoBasis:
    m = as_matrix(omega_sub, "omega_sub")
    gs = GramSchmidt(m.shape[1], capacity=min(m.shape))
    for w in m:
        gs.insert(w)
    return gs.basis()


def rank_of(omega_sub) -> int:
    """Number of rows accepted by sequential Gram-Schmidt insertion."""
    m = np.asarray(omega_sub, dtype=float)
    if m.ndim == 2 and m.shape[0] == 0:
        return 0
    m = as_matrix(m, "omega_sub")
    gs = GramSchmidt(m.shape[1], capacity=min(m.shape))
    for w in m:
        gs.insert(w)
    return gs.rank


def nullspace_projector(omega_sub, d: int | None = None) -> np.ndarray:
    """Return ``I - pinv(A) @ A`` for ``A = omega_sub`` via an SVD row-space basis.

    ``d`` is only needed when ``omega_sub`` has no rows.
    """
    a = np.asarray(omega_sub, dtype=float)
    if a.size == 0:
        if d is None:
            d = a.shape[1] if a.ndim == 2 else None
        if d is None:
            raise InvalidArgument("empty omega_sub needs an explicit dimension")
        return np.eye(d)
    a = as_matrix(a, "omega_sub")
    _, s, vt = np.linalg.svd(a, full_matrices=False)
    keep = s > TOL_RANK * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
    v = vt[keep]
    p = np.eye(a.shape[1]) - v.T @ v
    return 0.5 * (p + p.T)


# ---------------------------------------------------------------------------
# Serialization


def write_matrix_csv(path, m) -> None:
    m = as_matrix(m)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in m:
            writer.writerow([f"{v:.17g}" for v in row])


def read_matrix_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    if not rows:
        raise InvalidInput(f"{path}: empty matrix file")
    if len({len(r) for r in rows}) != 1:
        raise InvalidInput(f"{path}: ragged rows")
    return np.array(rows)


def matrix_to_json(m) -> dict:
    m = as_matrix(m)
    return {"rows": int(m.shape[0]), "cols": int(m.shape[1]), "data": m.ravel().tolist()}


def matrix_from_json(obj) -> np.ndarray:
    try:
        rows, cols, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"not a matrix JSON object: {exc}") from exc
    a = np.asarray(data, dtype=float)
    if rows < 1 or cols < 1 or a.size != rows * cols:
        raise InvalidInput(f"matrix JSON has {a.size} entries for shape {rows}x{cols}")
    return a.reshape(rows, cols)


def save_matrix(path, m) -> None:
    path = Path(path)
    if path.suffix.lower() == ".json":
        path.write_text(json.dumps(matrix_to_json(m)))
    else:
        write_matrix_csv(path, m)


def load_matrix(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise InvalidInput(f"{path}: no such file")
    try:
        if path.suffix.lower() == ".json":
            m = matrix_from_json(json.loads(path.read_text()))
        else:
            m = read_matrix_csv(path)
    except ValueError as exc:
        if isinstance(exc, InvalidInput):
            raise
        raise InvalidInput(f"{path}: {exc}") from exc
    if not np.all(np.isfinite(m)):
        raise InvalidInput(f"{path}: non-finite entries")
    return m
