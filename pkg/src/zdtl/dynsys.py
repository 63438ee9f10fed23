"""Torus rotations as free minimal Z^d actions.

A rotation action is given by a d x m matrix ``A``; the lattice vector ``n``
moves a point ``x`` of the m-torus to ``(x + n A) mod 1``.  Points are numpy
float arrays with coordinates in [0, 1), lattice vectors are integer arrays.
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

#: Global tolerance for geometric comparisons.
TAU_GEO = 1e-9


def canonical(v) -> np.ndarray:
    """Reduce coordinates mod 1 into [0, 1)."""
    y = np.mod(np.asarray(v, dtype=float), 1.0)
    # np.mod returns 1.0 for tiny negative inputs
    return np.where(y >= 1.0, 0.0, y)


def wrapped_delta(v) -> np.ndarray:
    """Componentwise distance to the nearest integer, in [0, 1/2]."""
    y = np.abs(np.mod(np.asarray(v, dtype=float), 1.0))
    return np.minimum(y, 1.0 - y)


@dataclass(frozen=True)
class RotationAction:
    A: tuple
    independence_window: int = 8
    _matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mat = np.atleast_2d(np.asarray(self.A, dtype=float))
        if mat.ndim != 2 or mat.size == 0:
            raise ValueError("rotation matrix must be a non-empty d x m array")
        mat = canonical(mat)
        object.__setattr__(self, "A", tuple(tuple(float(v) for v in row) for row in mat))
        mat.setflags(write=False)
        object.__setattr__(self, "_matrix", mat)
        if self.independence_window < 0:
            raise ValueError("independence_window must be non-negative")
        w = freeness_defect(self, self.independence_window)
        if w is not None:
            raise ValueError(f"action is not free on the window: n={w} returns within 1e-9")

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @functools.cached_property
    def split(self) -> tuple[np.ndarray, np.ndarray]:
        """``A = hi + lo`` with ``hi`` on a 2**-20 grid."""
        hi = np.round(self._matrix * 2.0 ** 20) / 2.0 ** 20
        return hi, self._matrix - hi

    @property
    def d(self) -> int:
        return self._matrix.shape[0]

    @property
    def m(self) -> int:
        return self._matrix.shape[1]

    @property
    def is_diagonal(self) -> bool:
        """True when each generator rotates its own coordinate only."""
        mat = self._matrix
        return mat.shape[0] == mat.shape[1] and np.count_nonzero(mat - np.diag(np.diag(mat))) == 0


def freeness_defect(action: RotationAction, window: int):
    """Return a nonzero n with ``|n|_inf <= window`` and ``nA`` within 1e-9 of 0, or None."""
    if window == 0:
        return None
    rng = range(-window, window + 1)
    ns = np.array(list(itertools.product(rng, repeat=action.d)), dtype=np.int64)
    ns = ns[np.any(ns != 0, axis=1)]
    dist = np.linalg.norm(wrapped_delta(ns @ action.matrix), axis=1)
    bad = np.flatnonzero(dist <= 1e-9)
    return tuple(int(v) for v in ns[bad[0]]) if bad.size else None


def default_action(d: int = 2) -> RotationAction:
    """The standard test beds: ``[sqrt2 - 1]`` for d=1, ``[[sqrt2, sqrt3], [sqrt5, sqrt7]]`` for d=2."""
    if d == 1:
        return RotationAction(((math.sqrt(2) - 1,),), independence_window=50)
    if d == 2:
        return RotationAction(((math.sqrt(2), math.sqrt(3)), (math.sqrt(5), math.sqrt(7))),
                              independence_window=20)
    raise ValueError("default systems exist for d=1 and d=2 only")


def diagonal_action(d: int = 2) -> RotationAction:
    """Product rotation ``diag(sqrt2, sqrt3, ...)``; supports of small balls can be enumerated per axis."""
    roots = [math.sqrt(p) for p in (2, 3, 5, 7, 11, 13)][:d]
    return RotationAction(tuple(tuple(r if i == j else 0.0 for j in range(d)) for i, r in enumerate(roots)),
                          independence_window=20)


def _check_point(action: RotationAction, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (action.m,):
        raise ValueError(f"point has dimension {x.shape[-1:]}, action expects m={action.m}")
    return x


def _check_lattice(action: RotationAction, n) -> np.ndarray:
    n = np.asarray(n)
    if n.ndim == 0 or n.shape[-1] != action.d:
        raise ValueError(f"lattice vector has shape {n.shape}, action expects d={action.d}")
    if not np.issubdtype(n.dtype, np.integer):
        if not np.all(n == np.round(n)):
            raise ValueError("lattice vector must have integer components")
        n = n.astype(np.int64)
    return n


def act(action: RotationAction, x, n) -> np.ndarray:
    """T^n(x) = (x + n A) mod 1.  Broadcasts over leading axes of ``x`` and ``n``."""
    x = _check_point(action, x)
    n = _check_lattice(action, n)
    hi, lo = action.split
    # n @ hi is exact for |n| < 2**33, so large steps lose no more than a few ulps
    return canonical(x + np.mod(n @ hi, 1.0) + n @ lo)


def torus_distance(x, y) -> np.ndarray | float:
    """l2 norm of the wrapped coordinate differences."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != y.shape[-1]:
        raise ValueError("torus points of different dimension")
    out = np.sqrt(np.sum(wrapped_delta(x - y) ** 2, axis=-1))
    return float(out) if out.ndim == 0 else out


def orbit_window(action: RotationAction, x, W) -> dict:
    """Map each lattice vector of the finite set ``W`` to T^n(x)."""
    keys = [tuple(int(v) for v in np.atleast_1d(n)) for n in W]
    if not keys:
        return {}
    pts = act(action, x, np.array(keys, dtype=np.int64))
    return {k: p for k, p in zip(keys, pts)}


def sample_points(seed: int, count: int, m: int) -> np.ndarray:
    """``count`` uniform points of the m-torus; reproducible from ``seed``."""
    if count < 0:
        raise ValueError("count must be non-negative")
    return np.random.default_rng(seed).random((count, m))


def lattice_ball(radius: float, d: int, strict: bool = False) -> np.ndarray:
    """All integer vectors with l2 norm ``<= radius`` (``<`` when strict), sorted lexicographically."""
    R = int(math.floor(radius))
    if radius < 0:
        return np.zeros((0, d), dtype=np.int64)
    axis = np.arange(-R, R + 1, dtype=np.int64)
    grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    sq = np.sum(grid * grid, axis=1)
    keep = sq < radius * radius if strict else sq <= radius * radius + 1e-12
    return grid[keep]


def lattice_box(N: int, d: int) -> np.ndarray:
    """The window {0, ..., N-1}^d as an (N^d, d) array."""
    axis = np.arange(N, dtype=np.int64)
    return np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
