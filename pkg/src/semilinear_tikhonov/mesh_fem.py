"""Uniform 1D meshes, P1/P0 functions, tridiagonal assembly and exact norms.

States and adjoints live in P1 (nodal values, including the two boundary
nodes); controls live in P0 (one value per cell).  Linear systems are always
posed on the interior nodes, so a ``Tridiagonal`` of size ``n_cells - 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.linalg import lapack

# 2-point Gauss rule on the reference cell [0, 1]
GAUSS_XI = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
GAUSS_W = np.array([0.5, 0.5])

# 4-point rule, used only for comparing against closed-form functions
_G4_T, _G4_W = np.polynomial.legendre.leggauss(4)
GAUSS4_XI = 0.5 * (_G4_T + 1.0)
GAUSS4_W = 0.5 * _G4_W

P1 = "P1"
P0 = "P0"


class SingularSystemError(ArithmeticError):
    """Raised when a tridiagonal system has a zero (or non-finite) pivot."""


@dataclass(frozen=True)
class Mesh:
    """Uniform partition of ``domain`` into ``n_cells`` cells.

    ``coef`` optionally holds a diffusion coefficient a(x) >= lambda_A > 0
    sampled at cell midpoints; ``None`` means a = 1 (the operator -y'').
    """

    n_cells: int
    domain: tuple[float, float] = (0.0, 1.0)
    coef: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        n = self.n_cells
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
            raise TypeError(f"n_cells must be an integer, got {n!r}")
        if n < 2 or n % 2:
            raise ValueError(f"n_cells must be even and >= 2, got {n}")
        a, b = map(float, self.domain)
        if not (np.isfinite(a) and np.isfinite(b) and a < b):
            raise ValueError(f"degenerate domain {self.domain!r}")
        object.__setattr__(self, "domain", (a, b))
        if self.coef is not None:
            c = np.asarray(self.coef, dtype=float)
            if c.shape != (n,):
                raise ValueError("coef must hold one value per cell")
            if not np.all(c > 0):
                raise ValueError("coef must be strictly positive")
            c.setflags(write=False)
            object.__setattr__(self, "coef", c)

    @property
    def h(self) -> float:
        return (self.domain[1] - self.domain[0]) / self.n_cells

    @property
    def nodes(self) -> np.ndarray:
        a, b = self.domain
        return a + self.h * np.arange(self.n_cells + 1)

    @property
    def midpoints(self) -> np.ndarray:
        return self.nodes[:-1] + 0.5 * self.h

    @property
    def gauss_points(self) -> np.ndarray:
        """(n_cells, 2) array of the 2-point Gauss nodes of every cell."""
        return self.nodes[:-1, None] + self.h * GAUSS_XI[None, :]

    @property
    def diffusion(self) -> np.ndarray:
        if self.coef is None:
            return np.ones(self.n_cells)
        return self.coef


def build_mesh(n_cells: int, domain: tuple[float, float] = (0.0, 1.0), coef=None) -> Mesh:
    return Mesh(n_cells, domain, coef)


@dataclass(frozen=True)
class FEFunction:
    mesh: Mesh
    kind: str
    values: np.ndarray

    def __post_init__(self):
        if self.kind not in (P1, P0):
            raise ValueError(f"unknown kind {self.kind!r}")
        v = np.array(self.values, dtype=float)
        expected = self.mesh.n_cells + (1 if self.kind == P1 else 0)
        if v.shape != (expected,):
            raise ValueError(f"{self.kind} function needs {expected} values, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, scalar):
        return FEFunction(self.mesh, self.kind, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return FEFunction(self.mesh, self.kind, -self.values)

    def _combine(self, other, op):
        if isinstance(other, FEFunction):
            if other.kind != self.kind or other.mesh.n_cells != self.mesh.n_cells:
                raise ValueError("incompatible FE functions")
            other = other.values
        return FEFunction(self.mesh, self.kind, op(self.values, other))

    @property
    def interior(self) -> np.ndarray:
        if self.kind != P1:
            raise ValueError("only P1 functions have interior nodal values")
        return self.values[1:-1]

    def at_gauss(self) -> np.ndarray:
        """Values at the 2-point Gauss nodes, shape (n_cells, 2)."""
        if self.kind == P0:
            return np.repeat(self.values[:, None], 2, axis=1)
        v = self.values
        return v[:-1, None] * (1.0 - GAUSS_XI) + v[1:, None] * GAUSS_XI

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == P1:
            return np.interp(x, self.mesh.nodes, self.values)
        a = self.mesh.domain[0]
        k = np.clip(np.floor((x - a) / self.mesh.h).astype(int), 0, self.mesh.n_cells - 1)
        return self.values[k]


def p1(mesh: Mesh, values) -> FEFunction:
    return FEFunction(mesh, P1, values)


def p0(mesh: Mesh, values) -> FEFunction:
    return FEFunction(mesh, P0, values)


def p1_from_interior(mesh: Mesh, interior) -> FEFunction:
    v = np.zeros(mesh.n_cells + 1)
    v[1:-1] = interior
    return FEFunction(mesh, P1, v)


def interpolate(mesh: Mesh, fn: Callable) -> FEFunction:
    return FEFunction(mesh, P1, fn(mesh.nodes))


def cell_average(mesh: Mesh, fn: Callable) -> FEFunction:
    """P0 function holding 4-point Gauss cell averages of ``fn``."""
    pts = mesh.nodes[:-1, None] + mesh.h * GAUSS4_XI[None, :]
    return FEFunction(mesh, P0, fn(pts) @ GAUSS4_W)


def to_p0(f: FEFunction) -> FEFunction:
    """Cell average; exact for P1."""
    if f.kind == P0:
        return f
    return FEFunction(f.mesh, P0, 0.5 * (f.values[:-1] + f.values[1:]))


@dataclass(frozen=True)
class Tridiagonal:
    """Matrix over interior nodes: ``sub[i]`` is entry (i+1, i), ``sup[i]`` is (i, i+1)."""

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    def __post_init__(self):
        m = len(self.diag)
        if len(self.sub) != m - 1 or len(self.sup) != m - 1:
            raise ValueError("off-diagonals must have length len(diag) - 1")

    @property
    def size(self) -> int:
        return len(self.diag)

    def __add__(self, other: "Tridiagonal") -> "Tridiagonal":
        return Tridiagonal(self.sub + other.sub, self.diag + other.diag, self.sup + other.sup)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[:-1] += self.sup * x[1:]
        y[1:] += self.sub * x[:-1]
        return y

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.sub, self.sup))

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.sup, 1) + np.diag(self.sub, -1)


def elimination_pivots(T: Tridiagonal) -> np.ndarray:
    """Pivots of Gaussian elimination without row exchanges (Thomas sweep).

    All pivots positive for a symmetric matrix means it is positive definite.
    """
    d = np.empty(T.size)
    d[0] = T.diag[0]
    for i in range(1, T.size):
        d[i] = T.diag[i] - T.sub[i - 1] * T.sup[i - 1] / d[i - 1]
    return d


def solve_tridiagonal(T: Tridiagonal, rhs: np.ndarray) -> np.ndarray:
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (T.size,):
        raise ValueError(f"rhs must have shape ({T.size},)")
    if T.size == 1:
        if T.diag[0] == 0 or not np.isfinite(T.diag[0]):
            raise SingularSystemError("zero pivot")
        return rhs / T.diag
    *_, x, info = lapack.dgtsv(T.sub, T.diag, T.sup, rhs)
    if info > 0:
        raise SingularSystemError(f"zero pivot at row {info - 1}")
    if info < 0 or not np.all(np.isfinite(x)):
        raise SingularSystemError("tridiagonal solve produced non-finite values")
    return x


def assemble_stiffness(mesh: Mesh) -> Tridiagonal:
    a = mesh.diffusion / mesh.h
    off = -a[1:-1]
    return Tridiagonal(off.copy(), a[:-1] + a[1:], off.copy())


def assemble_mass(mesh: Mesh) -> Tridiagonal:
    m = mesh.n_cells - 1
    h = mesh.h
    off = np.full(m - 1, h / 6.0)
    return Tridiagonal(off, np.full(m, 2.0 * h / 3.0), off.copy())


def assemble_reaction(mesh: Mesh, c_gauss: np.ndarray) -> Tridiagonal:
    """Matrix of (c phi_j, phi_i) with c given at the Gauss nodes, shape (n_cells, 2)."""
    w = 0.5 * mesh.h * c_gauss
    l, r = 1.0 - GAUSS_XI, GAUSS_XI
    a00 = w @ (l * l)
    a01 = w @ (l * r)
    a11 = w @ (r * r)
    off = a01[1:-1]
    return Tridiagonal(off.copy(), a11[:-1] + a00[1:], off.copy())


def load_p0(v: FEFunction) -> np.ndarray:
    """Interior load vector (v, phi_i) of a P0 function."""
    if v.kind != P0:
        raise ValueError("expected a P0 function")
    return 0.5 * v.mesh.h * (v.values[:-1] + v.values[1:])


def load_gauss(mesh: Mesh, g: np.ndarray) -> np.ndarray:
    """Interior load vector (g, phi_i) for g given at the Gauss nodes."""
    w = 0.5 * mesh.h * g
    left = w @ (1.0 - GAUSS_XI)
    right = w @ GAUSS_XI
    return right[:-1] + left[1:]


def load_p1(f: FEFunction) -> np.ndarray:
    """Interior load vector (f, phi_i) of a P1 function, boundary values included."""
    if f.kind != P1:
        raise ValueError("expected a P1 function")
    h, v = f.mesh.h, f.values
    return h * (v[:-2] + 4.0 * v[1:-1] + v[2:]) / 6.0


def _pieces(mesh: Mesh, subset):
    """Clipped (cell index, lo, hi) pieces of the mesh covered by ``subset``."""
    x = mesh.nodes
    if subset is None:
        subset = [mesh.domain]
    cells, los, his = [], [], []
    for c, d in subset:
        lo = np.maximum(x[:-1], c)
        hi = np.minimum(x[1:], d)
        k = np.nonzero(hi > lo)[0]
        cells.append(k)
        los.append(lo[k])
        his.append(hi[k])
    if not cells:
        return np.zeros(0, int), np.zeros(0), np.zeros(0)
    return np.concatenate(cells), np.concatenate(los), np.concatenate(his)


def _endpoint_values(f: FEFunction, k, lo, hi):
    if f.kind == P0:
        return f.values[k], f.values[k]
    x0 = f.mesh.nodes[k]
    v0, v1 = f.values[k], f.values[k + 1]
    slope = (v1 - v0) / f.mesh.h
    return v0 + slope * (lo - x0), v0 + slope * (hi - x0)


def linear_abs_integral(va, vb, length):
    """Exact integral of |l| for l linear from va to vb over an interval."""
    va, vb = np.asarray(va, float), np.asarray(vb, float)
    same = va * vb >= 0
    denom = np.where(same, 1.0, np.abs(va) + np.abs(vb))
    return length * np.where(same, 0.5 * (np.abs(va) + np.abs(vb)), 0.5 * (va * va + vb * vb) / denom)


def norm(f: FEFunction, which: str = "L2", subset: Optional[Sequence[tuple[float, float]]] = None) -> float:
    """Exact L1/L2/Linf norm of a P0 or P1 function, optionally over a union of disjoint intervals."""
    k, lo, hi = _pieces(f.mesh, subset)
    if len(k) == 0:
        return 0.0
    va, vb = _endpoint_values(f, k, lo, hi)
    length = hi - lo
    if which == "L1":
        return float(np.sum(linear_abs_integral(va, vb, length)))
    if which == "L2":
        return float(np.sqrt(np.sum(length * (va * va + va * vb + vb * vb) / 3.0)))
    if which == "Linf":
        return float(max(np.max(np.abs(va)), np.max(np.abs(vb))))
    raise ValueError(f"unknown norm {which!r}")


def inner(f: FEFunction, g: FEFunction) -> float:
    """Exact L2 inner product of two functions on the same mesh."""
    if f.kind == P0 and g.kind == P0:
        return float(f.mesh.h * f.values @ g.values)
    if f.kind == P1 and g.kind == P1:
        return float(f.values[1:-1] @ load_p1(g) + _boundary_pairing(f, g))
    if f.kind == P0:
        f, g = g, f
    # P1 against P0: cell average of the P1 factor
    return float(f.mesh.h * to_p0(f).values @ g.values)


def _boundary_pairing(f, g):
    h = f.mesh.h
    a, b = f.values, g.values
    return h * (2 * a[0] * b[0] + a[0] * b[1]) / 6.0 + h * (2 * a[-1] * b[-1] + a[-1] * b[-2]) / 6.0


def band_measure(p: FEFunction, lo: float, hi: float) -> float:
    """Exact measure of {x : lo < |p(x)| < hi} for a P1 function.

    A negative ``lo`` drops the lower bound, i.e. gives the measure of {|p| < hi}.
    """
    if p.kind != P1:
        raise ValueError("band_measure needs a P1 function")
    if hi <= lo:
        return 0.0
    v0, v1 = p.values[:-1], p.values[1:]
    if lo < 0:
        return float(_level_band(v0, v1, -hi, hi, p.mesh.h))
    return float(_level_band(v0, v1, lo, hi, p.mesh.h) + _level_band(v0, v1, -hi, -lo, p.mesh.h))


def _level_band(v0, v1, c1, c2, h):
    vmin = np.minimum(v0, v1)
    vmax = np.maximum(v0, v1)
    span = vmax - vmin
    flat = span == 0
    overlap = np.clip(np.minimum(c2, vmax) - np.maximum(c1, vmin), 0.0, None)
    frac = np.where(flat, ((c1 < v0) & (v0 < c2)).astype(float), overlap / np.where(flat, 1.0, span))
    return h * np.sum(frac)


def pieces_error(u: FEFunction, exact_values: Callable, breaks: Iterable[float], which: str) -> float:
    """Norm of ``u - g`` with u P0 and g piecewise constant with jumps only at ``breaks``.

    ``exact_values(x)`` is evaluated at sub-interval midpoints, so the result is
    exact whenever g is constant between consecutive breaks.
    """
    mesh = u.mesh
    x = mesh.nodes
    cuts = np.unique(np.concatenate([x, [b for b in breaks if x[0] < b < x[-1]]]))
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    lengths = np.diff(cuts)
    k = np.clip(np.searchsorted(x, mids) - 1, 0, mesh.n_cells - 1)
    diff = np.abs(u.values[k] - exact_values(mids))
    if which == "L1":
        return float(np.sum(lengths * diff))
    if which == "L2":
        return float(np.sqrt(np.sum(lengths * diff * diff)))
    if which == "Linf":
        return float(np.max(diff))
    raise ValueError(f"unknown norm {which!r}")


def function_error(f: FEFunction, exact: Callable, which: str = "L2") -> float:
    """Norm of ``f - exact`` by 4-point Gauss per cell (Linf: nodal maximum for P1)."""
    mesh = f.mesh
    if which == "Linf":
        if f.kind == P1:
            return float(np.max(np.abs(f.values - exact(mesh.nodes))))
        return float(np.max(np.abs(f.values - exact(mesh.midpoints))))
    pts = mesh.nodes[:-1, None] + mesh.h * GAUSS4_XI[None, :]
    vals = f(pts.ravel()).reshape(pts.shape) if f.kind == P1 else np.repeat(f.values[:, None], 4, axis=1)
    d = np.abs(vals - exact(pts))
    w = mesh.h * GAUSS4_W
    if which == "L1":
        return float(np.sum(d @ w))
    if which == "L2":
        return float(np.sqrt(np.sum((d * d) @ w)))
    raise ValueError(f"unknown norm {which!r}")
