"""Effective amplitude equation for the envelope:

    i dA/dT = -(nu2/2) d^2A/dX^2 + kappa |A|^2 A

solved by symmetric Strang splitting on a periodic grid.  The linear substep
is the exact Fourier multiplier exp(-i*(nu2/2)*xi^2*dT); the nonlinear substep
is the exact phase rotation exp(-i*kappa*|A|^2*dT).  Sign conventions are
pinned by the single-mode test: A(X,0)=exp(i xi0 X) must evolve to
exp(i xi0 X) * exp(-i*(nu2/2)*xi0^2*T) when kappa = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import CubicSpline

from .core import UnsupportedOrderError


class StabilityError(RuntimeError):
    """Raised when the requested step violates the declared phase bound."""


@dataclass
class EnvelopeField:
    """Complex envelope samples on a uniform periodic X2 grid."""

    values: np.ndarray
    length: float
    x_min: float = None  # left edge; defaults to -length/2
    T: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        n = self.values.size
        if n & (n - 1) != 0 or n == 0:
            raise ValueError(f"envelope sample count must be a power of two, got {n}")
        if self.x_min is None:
            self.x_min = -0.5 * self.length

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)

    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    def copy(self) -> "EnvelopeField":
        return replace(self, values=self.values.copy())

    def interp_at(self, xq: np.ndarray) -> np.ndarray:
        """Cubic-spline samples at arbitrary points; zero outside the grid
        (the envelope is localized and must be ~0 near the edges anyway)."""
        spl_re = CubicSpline(self.x, self.values.real, extrapolate=False)
        spl_im = CubicSpline(self.x, self.values.imag, extrapolate=False)
        out = spl_re(xq) + 1j * spl_im(xq)
        return np.nan_to_num(out, nan=0.0)


def gaussian_envelope(n: int, length: float, amplitude: float = 1.0,
                      width: float = 1.0, center: float = 0.0,
                      x_min: float = None) -> EnvelopeField:
    env = EnvelopeField(np.zeros(n, dtype=complex), length, x_min)
    env.values = amplitude * np.exp(-((env.x - center) / width) ** 2).astype(complex)
    return env


def soliton_envelope(n: int, length: float, eta: float, nu2: float, kappa: float,
                     center: float = 0.0, x_min: float = None) -> EnvelopeField:
    """Bright soliton eta*sech(eta*sqrt(|kappa/nu2|)(X-c)); needs nu2*kappa < 0."""
    if nu2 * kappa >= 0:
        raise ValueError("bright soliton requires nu2*kappa < 0")
    env = EnvelopeField(np.zeros(n, dtype=complex), length, x_min)
    beta = eta * np.sqrt(abs(kappa / nu2))
    env.values = (eta / np.cosh(beta * (env.x - center))).astype(complex)
    return env


def soliton_exact(env0: EnvelopeField, eta: float, nu2: float, kappa: float,
                  T: float, center: float = 0.0) -> np.ndarray:
    """Closed-form soliton at slow time T on the grid of ``env0``."""
    beta = eta * np.sqrt(abs(kappa / nu2))
    return (eta / np.cosh(beta * (env0.x - center))) * np.exp(-0.5j * kappa * eta ** 2 * T)


# ---------------------------------------------------------------------------
# evolution


def _linear_phase(env: EnvelopeField, nu2: float, dT: float) -> np.ndarray:
    xi = env.wavenumbers()
    return np.exp(-0.5j * nu2 * xi ** 2 * dT)


def evolve(env: EnvelopeField, nu2: float, kappa: float, dT: float, n_steps: int,
           phase_bound: float = 2.0 * np.pi) -> EnvelopeField:
    """Advance the envelope by n_steps Strang splits of size dT.

    Checks the per-step phase increments dT*|nu2|*xi_max^2 and
    dT*|kappa|*max|A|^2 against ``phase_bound`` before stepping; mass is
    conserved to rounding by construction.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    if n_steps == 0:
        return env.copy()
    xi_max = float(np.max(np.abs(env.wavenumbers())))
    amp2 = float(np.max(np.abs(env.values) ** 2))
    phase = dT * max(abs(nu2) * xi_max ** 2, abs(kappa) * amp2)
    if phase > phase_bound:
        raise StabilityError(
            f"per-step phase {phase:.3g} exceeds the bound {phase_bound:.3g}; "
            "reduce dT or refine in time")
    lin = _linear_phase(env, nu2, dT)
    a = env.values.copy()
    for _ in range(n_steps):
        a = a * np.exp(-0.5j * kappa * dT * np.abs(a) ** 2)
        a = np.fft.ifft(np.fft.fft(a) * lin)
        a = a * np.exp(-0.5j * kappa * dT * np.abs(a) ** 2)
        if not np.isfinite(a[0]) or not np.all(np.isfinite(a)):
            raise FloatingPointError("NaN/Inf in envelope evolution")
    return replace(env, values=a, T=env.T + n_steps * dT)


def invariants(env: EnvelopeField, nu2: float, kappa: float):
    """(mass, hamiltonian); H = int (nu2/2)|dA/dX|^2 + (kappa/2)|A|^4 dX.

    With this sign convention i dA/dT = dH/d(conj A) reproduces the evolution
    equation, so both quantities are conserved by the exact flow.
    """
    dx = env.dx
    mass = float(np.sum(np.abs(env.values) ** 2) * dx)
    da = spectral_x_derivative(env, 1)
    ham = float(np.sum(0.5 * nu2 * np.abs(da) ** 2
                       + 0.5 * kappa * np.abs(env.values) ** 4) * dx)
    return mass, ham


# ---------------------------------------------------------------------------
# derivatives


def spectral_x_derivative(env: EnvelopeField, order: int) -> np.ndarray:
    xi = env.wavenumbers()
    return np.fft.ifft(np.fft.fft(env.values) * (1j * xi) ** order)


def derivatives(env: EnvelopeField, order: int):
    """Spectral X2-derivatives up to ``order`` (1..3) as EnvelopeFields."""
    if not 1 <= order <= 3:
        raise UnsupportedOrderError("envelope derivatives support orders 1..3")
    spec = np.fft.fft(env.values)
    xi = env.wavenumbers()
    out = []
    for m in range(1, order + 1):
        out.append(replace(env, values=np.fft.ifft(spec * (1j * xi) ** m)))
    return out


def time_derivative(env: EnvelopeField, nu2: float, kappa: float) -> EnvelopeField:
    """dA/dT evaluated through the equation (never by differencing in T)."""
    rhs = 0.5j * nu2 * spectral_x_derivative(env, 2) \
        - 1j * kappa * np.abs(env.values) ** 2 * env.values
    return replace(env, values=rhs)


def translate(env: EnvelopeField, delta: float) -> EnvelopeField:
    """Exact periodic translation: samples of A(X + delta) on the same grid."""
    xi = env.wavenumbers()
    shifted = np.fft.ifft(np.fft.fft(env.values) * np.exp(1j * xi * delta))
    return replace(env, values=shifted)


def linear_exact(env: EnvelopeField, nu2: float, T: float) -> np.ndarray:
    """Closed-form free-dispersion solution at slow time T (kappa = 0)."""
    xi = env.wavenumbers()
    return np.fft.ifft(np.fft.fft(env.values) * np.exp(-0.5j * nu2 * xi ** 2 * T))


# ---------------------------------------------------------------------------
# seam control


def seam_clearance(env: EnvelopeField):
    """(distance to nearest edge in rms widths, edge amplitude / peak)."""
    a2 = np.abs(env.values) ** 2
    total = a2.sum()
    if total == 0.0:
        return np.inf, 0.0
    x = env.x
    mean = float((x * a2).sum() / total)
    width = float(np.sqrt(((x - mean) ** 2 * a2).sum() / total))
    dist = min(mean - env.x_min, env.x_min + env.length - mean)
    peak = float(np.sqrt(a2.max()))
    edge = float(max(abs(env.values[0]), abs(env.values[-1])))
    return (dist / width if width > 0 else np.inf), edge / peak if peak else 0.0


def assert_clear_of_seam(env: EnvelopeField, min_widths: float = 6.0,
                         max_edge_ratio: float = 1e-8):
    widths, edge_ratio = seam_clearance(env)
    if widths < min_widths or edge_ratio > max_edge_ratio:
        raise ValueError(
            f"envelope too close to the periodic seam: {widths:.2f} widths, "
            f"edge/peak {edge_ratio:.2e}")
