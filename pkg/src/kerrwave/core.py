"""Grids, piecewise material profiles and broken-norm utilities.

Everything lives on a 1D cross-interface grid (x1, interface at x1 = 0) or on
a 2D grid that is periodic in the propagation direction x2.  Fields that may
jump at the interface are stored as two blocks, one per half-domain, with the
interface node duplicated so that one-sided traces are always available.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np


class InterfaceError(ValueError):
    """Raised when a field lacks the one-sided structure an operation needs."""


class ProfileError(ValueError):
    """Raised when a material profile violates its admissibility bounds."""


class UnsupportedOrderError(ValueError):
    """Raised for derivative/norm orders outside the supported range."""


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on [-d, d] with a node exactly at the interface x1 = 0."""

    d: float
    h: float
    n_minus: int
    n_plus: int
    interface_index: int

    @staticmethod
    def make(d: float, h: float) -> "Grid1D":
        if h <= 0 or d <= 0:
            raise ValueError(f"need positive d and h, got d={d}, h={h}")
        n_side = int(round(d / h))
        if n_side < 2:
            raise ValueError("domain too small for the requested spacing")
        # snap the half-width to an integer number of cells so that x1 = 0
        # is a node; off by at most one h from the request
        return Grid1D(d=n_side * h, h=h, n_minus=n_side, n_plus=n_side,
                      interface_index=n_side)

    @property
    def n_nodes(self) -> int:
        return self.n_minus + self.n_plus + 1

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.n_nodes) - self.interface_index) * self.h

    @property
    def x_minus(self) -> np.ndarray:
        """Nodes of the left block, last entry at x1 = 0."""
        return (np.arange(self.n_minus + 1) - self.n_minus) * self.h

    @property
    def x_plus(self) -> np.ndarray:
        """Nodes of the right block, first entry at x1 = 0."""
        return np.arange(self.n_plus + 1) * self.h

    def subsampling_factor(self, coarse: "Grid1D") -> int:
        """Integer stride mapping this (fine) grid onto ``coarse``."""
        ratio = coarse.h / self.h
        factor = int(round(ratio))
        if abs(ratio - factor) > 1e-12 or factor < 1:
            raise ValueError(f"grids not nested: h={self.h} vs {coarse.h}")
        if self.n_minus != coarse.n_minus * factor or self.n_plus != coarse.n_plus * factor:
            raise ValueError("grids not nested: extents differ")
        return factor


@dataclass(frozen=True)
class Grid2D:
    """Tensor grid: a Grid1D across the interface, periodic in x2."""

    grid_x1: Grid1D
    x2_min: float
    x2_max: float
    n_x2: int

    def __post_init__(self):
        if self.n_x2 & (self.n_x2 - 1) != 0 or self.n_x2 <= 0:
            raise ValueError(f"n_x2 must be a power of two, got {self.n_x2}")
        if self.x2_max <= self.x2_min:
            raise ValueError("empty x2 range")

    @property
    def length_x2(self) -> float:
        return self.x2_max - self.x2_min

    @property
    def dx2(self) -> float:
        return self.length_x2 / self.n_x2

    @property
    def x2(self) -> np.ndarray:
        return self.x2_min + self.dx2 * np.arange(self.n_x2)

    def wavenumbers_x2(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n_x2, d=self.dx2)


def periodic_extent_for_carrier(target_length: float, k0: float) -> float:
    """Smallest multiple of the carrier period 2*pi/k0 at or above target."""
    period = 2.0 * np.pi / abs(k0)
    return period * max(1, int(np.ceil(target_length / period - 1e-9)))


# ---------------------------------------------------------------------------
# one-sided fields


@dataclass
class Field1D:
    """Scalar or component-stacked field on a Grid1D, stored per half-domain.

    ``minus`` covers [-d, 0] (last entry is the one-sided trace at 0-) and
    ``plus`` covers [0, d] (first entry is the trace at 0+).  The x1 axis is
    the last axis, so (3, n) arrays hold three-component fields.
    """

    minus: np.ndarray
    plus: np.ndarray

    def check_on(self, grid: Grid1D) -> "Field1D":
        if self.minus.shape[-1] != grid.n_minus + 1 or self.plus.shape[-1] != grid.n_plus + 1:
            raise InterfaceError(
                f"block shapes {self.minus.shape}/{self.plus.shape} do not match grid "
                f"({grid.n_minus + 1}/{grid.n_plus + 1} nodes incl. interface)")
        return self

    def copy(self) -> "Field1D":
        return Field1D(self.minus.copy(), self.plus.copy())

    def __add__(self, other):
        return Field1D(self.minus + other.minus, self.plus + other.plus)

    def __sub__(self, other):
        return Field1D(self.minus - other.minus, self.plus - other.plus)

    def __mul__(self, c):
        return Field1D(self.minus * c, self.plus * c)

    __rmul__ = __mul__


@dataclass
class Scalar2D:
    """One scalar component on a Grid2D, stored as two (n_x1, n_x2) blocks."""

    minus: np.ndarray
    plus: np.ndarray

    def check_on(self, grid: Grid2D) -> "Scalar2D":
        g1 = grid.grid_x1
        if self.minus.shape != (g1.n_minus + 1, grid.n_x2) or \
                self.plus.shape != (g1.n_plus + 1, grid.n_x2):
            raise InterfaceError("2D block shapes do not match grid")
        return self

    def copy(self) -> "Scalar2D":
        return Scalar2D(self.minus.copy(), self.plus.copy())

    def __add__(self, other):
        return Scalar2D(self.minus + other.minus, self.plus + other.plus)

    def __sub__(self, other):
        return Scalar2D(self.minus - other.minus, self.plus - other.plus)

    def __mul__(self, c):
        return Scalar2D(self.minus * c, self.plus * c)

    __rmul__ = __mul__


@dataclass
class Field2D:
    """Reduced TM state (U1, U2, U3) = (E1, E2, H3) on a two-block 2D grid."""

    u1: Scalar2D
    u2: Scalar2D
    u3: Scalar2D
    time_stamp: float = 0.0

    def components(self):
        return (self.u1, self.u2, self.u3)

    def copy(self) -> "Field2D":
        return Field2D(self.u1.copy(), self.u2.copy(), self.u3.copy(), self.time_stamp)

    def assert_finite(self):
        for c in self.components():
            if not (np.all(np.isfinite(c.minus)) and np.all(np.isfinite(c.plus))):
                raise FloatingPointError("non-finite entries in Field2D")

    @staticmethod
    def zeros(grid: Grid2D, t: float = 0.0) -> "Field2D":
        g1 = grid.grid_x1

        def blk():
            return Scalar2D(np.zeros((g1.n_minus + 1, grid.n_x2)),
                            np.zeros((g1.n_plus + 1, grid.n_x2)))

        return Field2D(blk(), blk(), blk(), t)


def jump_at_interface(f, grid=None):
    """One-sided jump [[f]] = f(0+) - f(0-) from the stored interface traces.

    Works on Field1D (returns a scalar per leading component) and Scalar2D
    (returns one value per x2 node).  No extrapolation is performed.
    """
    if isinstance(f, Field1D):
        if grid is not None:
            f.check_on(grid)
        if f.minus.shape[-1] == 0 or f.plus.shape[-1] == 0:
            raise InterfaceError("field has an empty block, no interface trace")
        return f.plus[..., 0] - f.minus[..., -1]
    if isinstance(f, Scalar2D):
        if grid is not None:
            f.check_on(grid)
        if f.minus.shape[0] == 0 or f.plus.shape[0] == 0:
            raise InterfaceError("field has an empty block, no interface trace")
        return f.plus[0, :] - f.minus[-1, :]
    raise InterfaceError(f"cannot take interface jump of {type(f).__name__}")


# ---------------------------------------------------------------------------
# material profiles


def _const(c: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda x: np.full_like(np.asarray(x, dtype=float), c)


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class PiecewiseProfile:
    """Material coefficients eps1 (linear) and eps3 (cubic) with a jump at x1=0.

    Each side is a smooth function of x1 with a declared limit at +-infinity;
    ``deps1_*`` are analytic x1-derivatives when available (built-ins), else
    None and finite differences of the samples are used downstream.
    """

    eps1_minus: Callable
    eps1_plus: Callable
    eps3_minus: Callable
    eps3_plus: Callable
    eps1_inf_minus: float
    eps1_inf_plus: float
    eps3_inf_minus: float
    eps3_inf_plus: float
    mu0: float = 1.0
    deps1_minus: Optional[Callable] = None
    deps1_plus: Optional[Callable] = None
    eps1_floor_minus: float = 0.0   # declared lower bounds eps_{1,m}^+-
    eps1_floor_plus: float = 0.0
    name: str = "custom"

    def with_eps3(self, eps3_minus, eps3_plus, inf_minus, inf_plus) -> "PiecewiseProfile":
        return replace(self, eps3_minus=eps3_minus, eps3_plus=eps3_plus,
                       eps3_inf_minus=inf_minus, eps3_inf_plus=inf_plus)

    def sample(self, grid: Grid1D) -> "SampledProfile":
        return SampledProfile.from_profile(self, grid)


def example21_profile(eps3: float = 1.0, mu0: float = 1.0) -> PiecewiseProfile:
    """The reference interface profile: eps1 = 1 for x1<0 and 1+exp(-x1) for x1>0."""
    return PiecewiseProfile(
        eps1_minus=_const(1.0),
        eps1_plus=lambda x: 1.0 + np.exp(-np.asarray(x, dtype=float)),
        eps3_minus=_const(eps3),
        eps3_plus=_const(eps3),
        eps1_inf_minus=1.0, eps1_inf_plus=1.0,
        eps3_inf_minus=eps3, eps3_inf_plus=eps3,
        mu0=mu0,
        deps1_minus=_zero,
        deps1_plus=lambda x: -np.exp(-np.asarray(x, dtype=float)),
        eps1_floor_minus=1.0, eps1_floor_plus=1.0,
        name="example21",
    )


def constant_profile(eps1: float = 1.0, eps3: float = 0.0, mu0: float = 1.0) -> PiecewiseProfile:
    return PiecewiseProfile(
        eps1_minus=_const(eps1), eps1_plus=_const(eps1),
        eps3_minus=_const(eps3), eps3_plus=_const(eps3),
        eps1_inf_minus=eps1, eps1_inf_plus=eps1,
        eps3_inf_minus=eps3, eps3_inf_plus=eps3,
        mu0=mu0, deps1_minus=_zero, deps1_plus=_zero,
        eps1_floor_minus=eps1, eps1_floor_plus=eps1,
        name=f"constant(eps1={eps1},eps3={eps3})",
    )


class TabulatedSide:
    """One-sided coefficient given by (x1, value) samples on a uniform grid."""

    def __init__(self, x: np.ndarray, v: np.ndarray):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        if x.ndim != 1 or x.shape != v.shape or x.size < 5:
            raise ProfileError("tabulated side needs >= 5 matching samples")
        dx = np.diff(x)
        if np.any(dx <= 0) or np.ptp(dx) > 1e-9 * abs(dx[0]):
            raise ProfileError("tabulated samples must be strictly uniform")
        self.x = x
        self.v = v
        self.dv = fd_derivative(v, dx[0], order=4)

    def __call__(self, xq):
        return np.interp(xq, self.x, self.v)

    def derivative(self, xq):
        return np.interp(xq, self.x, self.dv)


def profile_from_tables(eps1_minus: TabulatedSide, eps1_plus: TabulatedSide,
                        eps3_minus=None, eps3_plus=None, mu0: float = 1.0) -> PiecewiseProfile:
    e3m = eps3_minus if eps3_minus is not None else _zero
    e3p = eps3_plus if eps3_plus is not None else _zero
    return PiecewiseProfile(
        eps1_minus=eps1_minus, eps1_plus=eps1_plus,
        eps3_minus=e3m, eps3_plus=e3p,
        eps1_inf_minus=float(eps1_minus.v[0]), eps1_inf_plus=float(eps1_plus.v[-1]),
        eps3_inf_minus=float(e3m(eps1_minus.x[0])) if callable(e3m) else 0.0,
        eps3_inf_plus=float(e3p(eps1_plus.x[-1])) if callable(e3p) else 0.0,
        mu0=mu0,
        deps1_minus=eps1_minus.derivative, deps1_plus=eps1_plus.derivative,
        eps1_floor_minus=float(eps1_minus.v.min()), eps1_floor_plus=float(eps1_plus.v.min()),
        name="tabulated",
    )


def load_side_csv(path) -> TabulatedSide:
    data = np.loadtxt(path, delimiter=",", comments="#")
    if data.ndim != 2 or data.shape[1] != 2:
        raise ProfileError(f"{path}: expected two columns (x1, value)")
    return TabulatedSide(data[:, 0], data[:, 1])


@dataclass
class SampledProfile:
    """Profile evaluated on a Grid1D, with one-sided traces at the interface."""

    grid: Grid1D
    eps1: Field1D
    deps1: Field1D
    eps3: Field1D
    mu0: float
    profile: PiecewiseProfile

    @staticmethod
    def from_profile(profile: PiecewiseProfile, grid: Grid1D) -> "SampledProfile":
        xm, xp = grid.x_minus, grid.x_plus
        eps1 = Field1D(np.asarray(profile.eps1_minus(xm), dtype=float),
                       np.asarray(profile.eps1_plus(xp), dtype=float))
        if np.any(eps1.minus <= 0.0) or np.any(eps1.plus <= 0.0):
            raise ProfileError("eps1 must be positive on the sampled grid")
        floor_m = profile.eps1_floor_minus
        floor_p = profile.eps1_floor_plus
        if floor_m > 0 and eps1.minus.min() < floor_m - 1e-12:
            raise ProfileError("eps1 on x1<0 falls below its declared floor")
        if floor_p > 0 and eps1.plus.min() < floor_p - 1e-12:
            raise ProfileError("eps1 on x1>0 falls below its declared floor")
        if profile.deps1_minus is not None and profile.deps1_plus is not None:
            deps1 = Field1D(np.asarray(profile.deps1_minus(xm), dtype=float),
                            np.asarray(profile.deps1_plus(xp), dtype=float))
        else:
            deps1 = Field1D(fd_derivative(eps1.minus, grid.h, order=4),
                            fd_derivative(eps1.plus, grid.h, order=4))
        eps3 = Field1D(np.asarray(profile.eps3_minus(xm), dtype=float),
                       np.asarray(profile.eps3_plus(xp), dtype=float))
        return SampledProfile(grid, eps1, deps1, eps3, profile.mu0, profile)

    def eps1_min(self) -> float:
        return min(self.eps1.minus.min(), self.eps1.plus.min())

    def subsample(self, coarse: Grid1D) -> "SampledProfile":
        return SampledProfile.from_profile(self.profile, coarse)


def audit_profile_decay(profile: PiecewiseProfile, grid: Grid1D,
                        decay_radius: float = 10.0) -> dict:
    """Check that the sampled eps1 approaches its declared limits monotonically
    beyond ``decay_radius``; returns measured deviations, raises nothing."""
    xm, xp = grid.x_minus, grid.x_plus
    out = {}
    for side, x, fn, lim in (("minus", xm[::-1], profile.eps1_minus, profile.eps1_inf_minus),
                             ("plus", xp, profile.eps1_plus, profile.eps1_inf_plus)):
        vals = np.asarray(fn(x), dtype=float)
        tail = np.abs(vals - lim)[np.abs(x) >= decay_radius]
        out[side] = {
            "max_tail_deviation": float(tail.max()) if tail.size else 0.0,
            "monotone": bool(np.all(np.diff(tail) <= 1e-14)) if tail.size > 1 else True,
        }
    return out


# ---------------------------------------------------------------------------
# derivatives

# one-sided closures: row offsets and weights (times 1/h); interior is the
# standard 4th-order central stencil
_EDGE4_FIRST = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_EDGE4_SECOND = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0
_EDGE3_FIRST = np.array([-11.0, 18.0, -9.0, 2.0]) / 6.0
_EDGE3_SECOND = np.array([-2.0, -3.0, 6.0, -1.0]) / 6.0


def fd_derivative(a: np.ndarray, h: float, axis: int = -1, order: int = 4,
                  closure: int = 4) -> np.ndarray:
    """First derivative along ``axis`` on a uniform grid, never differencing
    past the array ends (one-sided closures of accuracy ``closure``).

    order=2 matches np.gradient(edge_order=2); order=4 uses the five-point
    interior stencil with 3rd- or 4th-order one-sided closures.
    """
    a = np.asarray(a)
    if a.shape[axis] < 5 and order == 4:
        order = 2
    if order == 2:
        return np.gradient(a, h, axis=axis, edge_order=2)
    if order != 4:
        raise UnsupportedOrderError(f"unsupported derivative order {order}")
    a = np.moveaxis(a, axis, 0)
    out = np.empty_like(a)
    out[2:-2] = (a[:-4] - 8.0 * a[1:-3] + 8.0 * a[3:-1] - a[4:]) / (12.0 * h)
    first, second = (_EDGE4_FIRST, _EDGE4_SECOND) if closure == 4 else (_EDGE3_FIRST, _EDGE3_SECOND)
    n = first.size
    out[0] = np.tensordot(first, a[:n], axes=(0, 0)) / h
    out[1] = np.tensordot(second, a[:n], axes=(0, 0)) / h
    out[-1] = -np.tensordot(first, a[-n:][::-1], axes=(0, 0)) / h
    out[-2] = -np.tensordot(second, a[-n:][::-1], axes=(0, 0)) / h
    return np.moveaxis(out, 0, axis)


def spectral_derivative(a: np.ndarray, length: float, order: int = 1,
                        axis: int = -1) -> np.ndarray:
    """Fourier derivative along a periodic axis of physical extent ``length``."""
    n = a.shape[axis]
    if np.isrealobj(a):
        xi = 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)
        spec = np.fft.rfft(a, axis=axis)
        shape = [1] * a.ndim
        shape[axis] = xi.size
        spec = spec * (1j * xi.reshape(shape)) ** order
        return np.fft.irfft(spec, n=n, axis=axis)
    xi = 2.0 * np.pi * np.fft.fftfreq(n, d=length / n)
    spec = np.fft.fft(a, axis=axis)
    shape = [1] * a.ndim
    shape[axis] = xi.size
    spec = spec * (1j * xi.reshape(shape)) ** order
    return np.fft.ifft(spec, axis=axis)


# ---------------------------------------------------------------------------
# quadrature and broken norms


def trapz_blocks(minus: np.ndarray, plus: np.ndarray, h: float) -> np.ndarray:
    """Composite trapezoidal integral over both half-domains (last axis)."""
    return np.trapezoid(minus, dx=h, axis=-1) + np.trapezoid(plus, dx=h, axis=-1)


def inner_l2(f: Field1D, g: Field1D, h: float):
    """Plain L2 inner product <f, g> = int f conj(g), summed over components."""
    val = trapz_blocks(f.minus * np.conj(g.minus), f.plus * np.conj(g.plus), h)
    return np.sum(val)


def norm_l2_1d(f: Field1D, h: float) -> float:
    return float(np.sqrt(np.real(inner_l2(f, f, h))))


def _block_derivative_pyramid(block: np.ndarray, h: float, dx2: float, m: int,
                              length_x2: float):
    """All mixed derivatives of total order <= m for one 2D block (or a 1D block
    when dx2 is None): x1 by one-sided 2nd-order FD, x2 spectrally."""
    levels = {(0, 0): block}
    out = [block]
    for total in range(1, m + 1):
        new = {}
        for (i, j), arr in levels.items():
            if i + j != total - 1:
                continue
            new[(i + 1, j)] = np.gradient(arr, h, axis=-1 if dx2 is None else 0,
                                          edge_order=2)
            if dx2 is not None:
                new[(i, j + 1)] = spectral_derivative(arr, length_x2, axis=1)
        levels.update(new)
        out.extend(arr for key, arr in new.items())
    return out


def broken_norm(f, order: int, grid=None, h: Optional[float] = None) -> float:
    """Discrete broken Sobolev norm of order ``order`` (0..3).

    Sums the squared L2 norms of all mixed one-sided derivatives up to the
    requested total order over each half-domain separately (derivatives never
    reach across the interface) and returns the square root.  Trapezoidal
    quadrature in x1; x2 is periodic with uniform weights and spectral
    derivatives.
    """
    if not 0 <= order <= 3:
        raise UnsupportedOrderError(f"broken norm supports orders 0..3, got {order}")
    if isinstance(f, Field2D):
        if grid is None:
            raise ValueError("Field2D norm needs the Grid2D")
        total = 0.0
        for comp in f.components():
            total += broken_norm(comp, order, grid=grid) ** 2
        return float(np.sqrt(total))
    if isinstance(f, Scalar2D):
        g1 = grid.grid_x1
        total = 0.0
        for block in (f.minus, f.plus):
            for darr in _block_derivative_pyramid(block, g1.h, grid.dx2, order,
                                                  grid.length_x2):
                total += np.trapezoid(np.sum(np.abs(darr) ** 2, axis=1) * grid.dx2,
                                      dx=g1.h)
        return float(np.sqrt(total))
    if isinstance(f, Field1D):
        if h is None:
            if grid is None:
                raise ValueError("Field1D norm needs h or the Grid1D")
            h = grid.h
        total = 0.0
        for block in (f.minus, f.plus):
            arr = block
            for _ in range(order + 1):
                total += np.trapezoid(np.sum(np.abs(arr) ** 2, axis=tuple(range(arr.ndim - 1))),
                                      dx=h)
                arr = np.gradient(arr, h, axis=-1, edge_order=2)
        return float(np.sqrt(total))
    raise TypeError(f"cannot take broken norm of {type(f).__name__}")
