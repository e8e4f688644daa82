"""Linear interface eigenvalue problem: modes and the dispersion relation.

The three-component problem L(k)w + omega*Lambda*w = 0 is reduced to a scalar
second-order equation for w3,

    (-d_xx + (eps1'/eps1) d_x + k^2) w3 = eps1*mu0*omega^2 w3,

with w3 continuous and [[d_x w3 / eps1]] = 0 at the interface.  The derivative
jump is absorbed by writing w3 = (I + L) w3r with a rank-one lifting operator
L, so the unknown w3r is C^1 and plain central differences apply.  The lifted
pencil is tridiagonal plus a rank-one update and is solved by shift-invert
Arnoldi with a banded solve plus the Sherman-Morrison correction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_banded
from scipy.sparse.linalg import LinearOperator, eigs

from .core import (
    Field1D,
    Grid1D,
    PiecewiseProfile,
    ProfileError,
    SampledProfile,
    fd_derivative,
    inner_l2,
    trapz_blocks,
)


class EigenSolverError(RuntimeError):
    """Raised when the eigenvalue iteration fails or loses the tracked mode."""

    def __init__(self, msg, best_residual=None):
        super().__init__(msg)
        self.best_residual = best_residual


# ---------------------------------------------------------------------------
# pencil assembly


@dataclass
class BandedPlusRankOne:
    """Tridiagonal matrix plus the rank-one lift column: T + outer(u, g)."""

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    u: np.ndarray
    g_idx: np.ndarray
    g_w: np.ndarray

    @property
    def n(self) -> int:
        return self.diag.size

    def apply_g(self, x: np.ndarray) -> float:
        return float(np.dot(self.g_w, x[self.g_idx]))

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[:-1] += self.sup * x[1:]
        y[1:] += self.sub * x[:-1]
        return y + self.u * np.dot(self.g_w, x[self.g_idx])

    def dense(self) -> np.ndarray:
        a = np.diag(self.diag) + np.diag(self.sub, -1) + np.diag(self.sup, 1)
        g = np.zeros(self.n)
        g[self.g_idx] = self.g_w
        return a + np.outer(self.u, g)


@dataclass
class DiagPlusRankOne:
    """Diagonal matrix plus the rank-one lift column: D + outer(u, g)."""

    diag: np.ndarray
    u: np.ndarray
    g_idx: np.ndarray
    g_w: np.ndarray

    @property
    def n(self) -> int:
        return self.diag.size

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.diag * x + self.u * np.dot(self.g_w, x[self.g_idx])

    def solve(self, y: np.ndarray) -> np.ndarray:
        z = y / self.diag
        w = self.u / self.diag
        denom = 1.0 + np.dot(self.g_w, w[self.g_idx])
        return z - w * (np.dot(self.g_w, z[self.g_idx]) / denom)

    def dense(self) -> np.ndarray:
        g = np.zeros(self.n)
        g[self.g_idx] = self.g_w
        return np.diag(self.diag) + np.outer(self.u, g)


def lift_coefficient(sampled: SampledProfile) -> float:
    """Relative eps1 jump (eps1(0+) - eps1(0-)) / eps1(0-) driving the lift."""
    e_minus = float(sampled.eps1.minus[-1])
    e_plus = float(sampled.eps1.plus[0])
    if e_minus == 0.0:
        raise ProfileError("eps1(0-) = 0, lift undefined (violates positivity)")
    return (e_plus - e_minus) / e_minus


def lift_profile(grid: Grid1D, eps_t: float) -> np.ndarray:
    """Lift shape on all nodes: -sgn(eps_t) * (1 on x1<0, exp(-|eps_t| x1) on x1>=0)."""
    x = grid.x
    ell = np.where(x < 0.0, 1.0, np.exp(-abs(eps_t) * np.maximum(x, 0.0)))
    return -np.sign(eps_t) * ell


def assemble_reduced_operator(k: float, grid: Grid1D, sampled: SampledProfile,
                              left_bc: str = "lift_consistent"):
    """Assemble the generalized pencil (A, B) for the reduced w3 eigenproblem.

    Unknowns are w3r at the interior nodes; the rank-one columns carry the
    lifting operator, with d_x w3r(0) discretized by a one-sided second-order
    stencil into the right block.  ``left_bc``:

    * "lift_consistent" (default): the left end follows the lift, i.e.
      w3r(-d) = sgn(eps_t) * d_x w3r(0), so the reconstructed w3 vanishes at
      -d; this is the decay-compatible form of the left boundary limit.
    * "zero": literal homogeneous Dirichlet on w3r at both ends.
    """
    if grid.h <= 0:
        raise ValueError("non-positive grid spacing")
    sampled.eps1.check_on(grid)
    h = grid.h
    i0 = grid.interface_index
    n_nodes = grid.n_nodes
    n = n_nodes - 2  # interior unknowns
    if i0 + 2 >= n_nodes - 1:
        raise ValueError("grid too small for the interface derivative stencil")

    # per-node coefficients; the interface node takes the right-side branch,
    # matching the lift's x1 >= 0 exponential
    eps1 = np.concatenate([sampled.eps1.minus[:-1], sampled.eps1.plus])
    deps1 = np.concatenate([sampled.deps1.minus[:-1], sampled.deps1.plus])
    c = deps1 / eps1
    mu0 = sampled.mu0

    idx = np.arange(1, n_nodes - 1)
    cj = c[idx]
    diag = np.full(n, 2.0 / h ** 2 + k ** 2)
    sub = -1.0 / h ** 2 - cj[1:] / (2.0 * h)
    sup = -1.0 / h ** 2 + cj[:-1] / (2.0 * h)
    b_diag = eps1[idx] * mu0

    eps_t = lift_coefficient(sampled)
    ell = lift_profile(grid, eps_t)
    # operator applied to the lift shape, in closed form per side
    op_ell = np.where(grid.x < 0.0,
                      k ** 2 * ell,
                      (k ** 2 - eps_t ** 2 - c * abs(eps_t)) * ell)
    u_a = op_ell[idx].copy()
    u_b = (eps1 * mu0 * ell)[idx].copy()

    # d_x w3r(0) by the one-sided second-order stencil into the right block
    g_idx = np.array([i0 - 1, i0, i0 + 1])  # interior indices of nodes i0..i0+2
    g_w = np.array([-3.0, 4.0, -1.0]) / (2.0 * h)

    if left_bc == "lift_consistent":
        # eliminate w3r(-d) = sgn * g.w3r into the first interior row
        a10 = -1.0 / h ** 2 - cj[0] / (2.0 * h)
        u_a[0] += a10 * np.sign(eps_t)
    elif left_bc != "zero":
        raise ValueError(f"unknown left_bc {left_bc!r}")

    a = BandedPlusRankOne(sub, diag, sup, u_a, g_idx, g_w)
    b = DiagPlusRankOne(b_diag, u_b, g_idx, g_w)
    return a, b


def reconstruct_w3(v: np.ndarray, grid: Grid1D, sampled: SampledProfile,
                   left_bc: str = "lift_consistent") -> np.ndarray:
    """Map the interior eigenvector w3r to w3 = (I + L) w3r on all nodes."""
    eps_t = lift_coefficient(sampled)
    ell = lift_profile(grid, eps_t)
    i0 = grid.interface_index
    g_w = np.array([-3.0, 4.0, -1.0]) / (2.0 * grid.h)
    cval = np.dot(g_w, v[[i0 - 1, i0, i0 + 1]])
    full = np.zeros(grid.n_nodes, dtype=v.dtype)
    full[1:-1] = v
    if left_bc == "lift_consistent":
        full[0] = np.sign(eps_t) * cval
    return full + ell * cval


# ---------------------------------------------------------------------------
# shift-invert solves


class _ShiftFactor:
    """Solver for (A - sigma*B) x = y via a banded solve plus Sherman-Morrison."""

    def __init__(self, a: BandedPlusRankOne, b: DiagPlusRankOne, sigma: float):
        n = a.n
        ab = np.zeros((3, n))
        ab[0, 1:] = a.sup
        ab[1, :] = a.diag - sigma * b.diag
        ab[2, :-1] = a.sub
        self._ab = ab
        self._g_idx = a.g_idx
        self._g_w = a.g_w
        utilde = a.u - sigma * b.u
        w = self._band_solve(utilde)
        denom = 1.0 + np.dot(self._g_w, w[self._g_idx])
        if abs(denom) < 1e-300 or not np.isfinite(denom):
            raise np.linalg.LinAlgError("singular Sherman-Morrison denominator")
        self._w = w
        self._denom = denom

    def _band_solve(self, y):
        return solve_banded((1, 1), self._ab, y)

    def solve(self, y):
        z = self._band_solve(y)
        corr = np.dot(self._g_w, z[self._g_idx]) / self._denom
        return z - self._w * corr


def _default_start_vector(n: int) -> np.ndarray:
    x = np.linspace(-1.0, 1.0, n)
    v0 = 1.0 / (1.0 + 25.0 * x ** 2)
    return v0 / np.linalg.norm(v0)


def _pair_residual(a, b, lam, v) -> float:
    return float(np.linalg.norm(a.matvec(v) - lam * b.matvec(v)) / np.linalg.norm(v))


def _refine_pair(a, b, lam, v, tol, max_steps=3):
    """Inverse-iteration polish of one eigenpair of the pencil (A, B)."""
    res = _pair_residual(a, b, lam, v)
    for _ in range(max_steps):
        if res <= tol:
            break
        shift = lam * (1.0 + 1e-13) + 1e-300
        try:
            fac = _ShiftFactor(a, b, shift)
        except np.linalg.LinAlgError:
            fac = _ShiftFactor(a, b, lam * (1.0 + 1e-9))
        v = fac.solve(b.matvec(v))
        v /= np.linalg.norm(v)
        av, bv = a.matvec(v), b.matvec(v)
        lam = float(np.dot(v, av) / np.dot(v, bv))
        res = _pair_residual(a, b, lam, v)
    return lam, v, res


@dataclass
class EigenPair:
    omega: float
    lam: float
    w3: np.ndarray       # reconstructed on all grid nodes, unit discrete l2
    residual: float      # generalized-pencil residual of the interior pair


def solve_near(a, b, target: float, n_eigs: int, tol: float = 1e-10, *,
               grid: Optional[Grid1D] = None, sampled: Optional[SampledProfile] = None,
               left_bc: str = "lift_consistent") -> list:
    """Eigenpairs of A w = lam B w nearest lam = target**2, via shift-invert.

    Returns EigenPair records sorted by |lam - target^2|; omega carries the
    sign of ``target``.  Pairs whose polished residual exceeds ``tol`` or whose
    lam is not a positive real number are dropped.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    n = a.n
    sigma = float(target) ** 2
    n_eigs = min(n_eigs, n - 2)

    b_solve = b.solve

    def a_std_mv(x):
        return b_solve(a.matvec(x))

    fac = None
    shift = sigma
    for attempt in range(4):
        try:
            fac = _ShiftFactor(a, b, shift)
            break
        except np.linalg.LinAlgError:
            shift = shift * (1.0 + 1e-8) + 1e-12
    if fac is None:
        raise EigenSolverError(f"shift factorization singular near sigma={sigma}")

    def opinv_mv(x):
        return fac.solve(b.matvec(np.real(x)) + 1j * b.matvec(np.imag(x))
                         if np.iscomplexobj(x) else b.matvec(x))

    a_op = LinearOperator((n, n), matvec=a_std_mv, dtype=float)
    op_inv = LinearOperator((n, n), matvec=opinv_mv, dtype=float)
    try:
        vals, vecs = eigs(a_op, k=n_eigs, sigma=shift, OPinv=op_inv,
                          v0=_default_start_vector(n), tol=1e-12, maxiter=5000)
    except Exception as exc:  # ArpackNoConvergence and friends
        partial = getattr(exc, "eigenvalues", None)
        if partial is None or len(partial) == 0:
            raise EigenSolverError(f"Arnoldi iteration failed: {exc}") from exc
        vals, vecs = exc.eigenvalues, exc.eigenvectors

    pairs = []
    sign = 1.0 if target >= 0 else -1.0
    for lam, vec in zip(vals, vecs.T):
        if abs(lam.imag) > 1e-8 * max(1.0, abs(lam.real)):
            continue
        lam_r = float(lam.real)
        v = np.real(vec) if np.linalg.norm(np.real(vec)) >= np.linalg.norm(np.imag(vec)) \
            else np.imag(vec)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            continue
        v = v / nv
        lam_r, v, res = _refine_pair(a, b, lam_r, v, tol)
        if lam_r <= 0.0 or res > tol:
            continue
        if grid is not None and sampled is not None:
            w3 = reconstruct_w3(v, grid, sampled, left_bc=left_bc)
            w3 = w3 / np.linalg.norm(w3)
        else:
            w3 = v / np.linalg.norm(v)
        pairs.append(EigenPair(omega=sign * float(np.sqrt(lam_r)), lam=lam_r,
                               w3=w3, residual=res))
    pairs.sort(key=lambda p: abs(p.lam - sigma))
    if not pairs:
        raise EigenSolverError("no converged real eigenpair near the target",
                               best_residual=None)
    return pairs


def essential_edge(k: float, sampled: SampledProfile) -> float:
    """Onset |omega| of the essential spectrum: |k| / sqrt(mu0 * max eps1_inf).

    Localized modes need two-sided decay rates sqrt(k^2 - omega^2 mu0 eps1_inf)
    to be real, so they live strictly below this edge.
    """
    prof = sampled.profile
    eps_inf = max(prof.eps1_inf_minus, prof.eps1_inf_plus)
    return abs(k) / np.sqrt(sampled.mu0 * eps_inf)


def find_localized(k: float, target: float, grid: Grid1D, sampled: SampledProfile,
                   *, n_eigs: int = 10, tol: float = 1e-10, margin_nodes: int = 100,
                   threshold: float = 1e-6, left_bc: str = "lift_consistent",
                   max_descents: int = 14):
    """Locate localized eigenpairs near ``target``, descending below the edge.

    Box discretizations of the essential spectrum cluster just above the edge
    and can crowd a shift-invert window, so if no localized pair passes the
    filter the shift steps down from min(|target|, edge) deterministically.
    Returns (pairs, kept) from the first successful shift.
    """
    sign = 1.0 if target >= 0 else -1.0
    edge = essential_edge(k, sampled)
    shift = min(abs(target), edge * (1.0 - 1e-9))
    step = 0.0025 * edge
    a, b = assemble_reduced_operator(k, grid, sampled, left_bc=left_bc)
    last_exc = None
    for _ in range(max_descents):
        try:
            pairs = solve_near(a, b, sign * shift, n_eigs, tol, grid=grid,
                               sampled=sampled, left_bc=left_bc)
            kept = filter_localized(pairs, grid, margin_nodes, threshold)
            if kept:
                return pairs, kept
        except EigenSolverError as exc:
            last_exc = exc
        shift -= step
        step *= 1.6
        if shift <= 0:
            break
    raise EigenSolverError(
        f"no localized mode found near omega={target} at k={k} "
        f"(margin threshold {threshold})") from last_exc


def margin_mass(w3: np.ndarray, margin_nodes: int = 100) -> float:
    """Discrete l2 mass of (unit-normalized) w3 on the two outer margins."""
    w = w3 / np.linalg.norm(w3)
    m = margin_nodes + 1
    return float(np.sqrt(np.sum(w[:m] ** 2) + np.sum(w[-m:] ** 2)))


def filter_localized(pairs: list, grid: Grid1D, margin_nodes: int = 100,
                     threshold: float = 1e-6) -> list:
    """Keep only pairs whose w3 mass on the outer margins is below threshold."""
    kept = []
    for p in pairs:
        if margin_mass(p.w3, margin_nodes) < threshold:
            kept.append(p)
    return kept


# ---------------------------------------------------------------------------
# modes


@dataclass
class Mode:
    """Normalized interface eigenmode (w1, w2, w3) at wavenumber k.

    w1, w3 are real and w2 purely imaginary; the normalization is
    int eps1*(|w1|^2 + |w2|^2) + mu0*|w3|^2 dx1 = 1.
    """

    k: float
    omega: float
    w1: Field1D
    w2: Field1D
    w3: Field1D
    grid: Grid1D

    def as_vector(self) -> Field1D:
        minus = np.stack([self.w1.minus.astype(complex),
                          self.w2.minus,
                          self.w3.minus.astype(complex)])
        plus = np.stack([self.w1.plus.astype(complex),
                         self.w2.plus,
                         self.w3.plus.astype(complex)])
        return Field1D(minus, plus)

    def normalization_integral(self, sampled: SampledProfile) -> float:
        e1, mu0 = sampled.eps1, sampled.mu0
        dm = e1.minus * (self.w1.minus ** 2 + np.abs(self.w2.minus) ** 2) \
            + mu0 * self.w3.minus ** 2
        dp = e1.plus * (self.w1.plus ** 2 + np.abs(self.w2.plus) ** 2) \
            + mu0 * self.w3.plus ** 2
        return float(trapz_blocks(dm, dp, self.grid.h))


def reconstruct_mode(w3_nodes: np.ndarray, omega: float, k: float, grid: Grid1D,
                     sampled: SampledProfile) -> Mode:
    """Recover (w1, w2) from w3, fix the phase, and normalize the mode.

    Uses w1 = -k/(eps1*omega) w3 and w2 = -i/(eps1*omega) d_x w3 with
    one-sided differences at the interface, then scales so that the weighted
    normalization integral equals one.
    """
    if omega == 0.0:
        raise ZeroDivisionError("omega = 0: mode reconstruction undefined")
    w3_nodes = np.asarray(w3_nodes)
    if np.iscomplexobj(w3_nodes):
        peak = int(np.argmax(np.abs(w3_nodes)))
        phase = np.angle(w3_nodes[peak])
        w3_nodes = np.real(w3_nodes * np.exp(-1j * phase))
    i0 = grid.interface_index
    h = grid.h
    w3 = Field1D(w3_nodes[:i0 + 1].astype(float), w3_nodes[i0:].astype(float))
    dw3 = Field1D(fd_derivative(w3.minus, h, order=4),
                  fd_derivative(w3.plus, h, order=4))
    e1 = sampled.eps1
    w1 = Field1D(-k / (e1.minus * omega) * w3.minus,
                 -k / (e1.plus * omega) * w3.plus)
    w2 = Field1D(-1j / (e1.minus * omega) * dw3.minus,
                 -1j / (e1.plus * omega) * dw3.plus)
    mode = Mode(k=k, omega=omega, w1=w1, w2=w2, w3=w3, grid=grid)
    integral = mode.normalization_integral(sampled)
    if integral <= 0.0:
        raise EigenSolverError("degenerate mode: normalization integral <= 0")
    s = 1.0 / np.sqrt(integral)
    mode.w1, mode.w2, mode.w3 = s * w1, s * w2, s * w3
    return mode


def solve_mode(k: float, target_omega: float, grid: Grid1D, sampled: SampledProfile,
               n_eigs: int = 10, tol: float = 1e-10, margin_nodes: int = 100,
               threshold: float = 1e-6, left_bc: str = "lift_consistent"):
    """One-stop solve: assemble, shift-invert, filter, pick nearest, reconstruct.

    Returns (mode, extras) where extras carries the filtered pair list and the
    gap to the nearest other computed eigenvalue.
    """
    pairs, kept = find_localized(k, target_omega, grid, sampled, n_eigs=n_eigs,
                                 tol=tol, margin_nodes=margin_nodes,
                                 threshold=threshold, left_bc=left_bc)
    best = min(kept, key=lambda p: abs(p.omega - target_omega))
    others = [p.omega for p in pairs if p is not best]
    gap = min((abs(o - best.omega) for o in others), default=np.inf)
    mode = reconstruct_mode(best.w3, best.omega, k, grid, sampled)
    extras = {"pairs": pairs, "kept": kept, "gap": gap, "residual": best.residual}
    return mode, extras


# ---------------------------------------------------------------------------
# dispersion relation


@dataclass
class DispersionData:
    """Dispersion quantities at k0 plus the sampled curve and assumption audit."""

    k0: float
    nu0: float
    nu1: float
    nu2: float
    curve: list = field(default_factory=list)   # (k, omega, residual, gap)
    gap: float = np.inf
    omega_3k0: Optional[float] = None
    audit: dict = field(default_factory=dict)
    nu1_error: float = 0.0
    nu2_error: float = 0.0


def dispersion_scan(k_values, profile_or_sampled, grid: Grid1D, seed_omega: float,
                    threshold: float = 1e-6, tol: float = 1e-10,
                    left_bc: str = "lift_consistent"):
    """Continuation of the tracked eigenvalue over sorted k values.

    Each solve is seeded with the previous omega.  If the filter rejects all
    candidates at some k the scan stops there and flags the gap.
    """
    sampled = _as_sampled(profile_or_sampled, grid)
    curve = []
    truncated = False
    prev = None  # (k, omega) of the last solved point
    slope = 0.0
    for k in k_values:
        seed = seed_omega if prev is None else prev[1] + slope * (k - prev[0])
        try:
            mode, extras = solve_mode(k, seed, grid, sampled, threshold=threshold,
                                      tol=tol, left_bc=left_bc)
        except EigenSolverError:
            truncated = True
            break
        curve.append((float(k), mode.omega, extras["residual"], extras["gap"]))
        if prev is not None and k != prev[0]:
            slope = (mode.omega - prev[1]) / (k - prev[0])
        prev = (float(k), mode.omega)
    return curve, truncated


def _as_sampled(profile_or_sampled, grid: Grid1D) -> SampledProfile:
    if isinstance(profile_or_sampled, SampledProfile):
        return profile_or_sampled
    return SampledProfile.from_profile(profile_or_sampled, grid)


def derivatives_from_stencil(omega_of_k: Callable[[float, float], float],
                             k0: float, seed_omega: float, dk: float):
    """Central differences of omega(k) at two steps with Richardson blending.

    ``omega_of_k(k, seed)`` must return the continued eigenvalue.  Returns
    (nu0, nu1, nu2, err1, err2) where the errors are the Richardson defects.
    """
    om = {0.0: omega_of_k(k0, seed_omega)}
    # walk outward with linear-in-k seed prediction so the shift never strays
    # toward the essential spectrum between stencil points
    om[dk / 2.0] = omega_of_k(k0 + dk / 2.0, om[0.0])
    om[dk] = omega_of_k(k0 + dk, 2.0 * om[dk / 2.0] - om[0.0])
    om[-dk / 2.0] = omega_of_k(k0 - dk / 2.0, 2.0 * om[0.0] - om[dk / 2.0])
    om[-dk] = omega_of_k(k0 - dk, 2.0 * om[-dk / 2.0] - om[0.0])
    d1_coarse = (om[dk] - om[-dk]) / (2.0 * dk)
    d1_fine = (om[dk / 2] - om[-dk / 2]) / dk
    d2_coarse = (om[dk] - 2.0 * om[0.0] + om[-dk]) / dk ** 2
    d2_fine = (om[dk / 2] - 2.0 * om[0.0] + om[-dk / 2]) / (dk / 2.0) ** 2
    nu1 = (4.0 * d1_fine - d1_coarse) / 3.0
    nu2 = (4.0 * d2_fine - d2_coarse) / 3.0
    err1 = abs(d1_fine - d1_coarse) / 3.0
    err2 = abs(d2_fine - d2_coarse) / 3.0
    return om[0.0], nu1, nu2, err1, err2


def dispersion_derivatives(k0: float, profile_or_sampled, grid: Grid1D,
                           seed_omega: float, dk: float = 0.02,
                           threshold: float = 1e-6,
                           left_bc: str = "lift_consistent"):
    """(nu0, nu1, nu2) at k0 by Richardson-extrapolated finite differences."""
    sampled = _as_sampled(profile_or_sampled, grid)
    lipschitz_guard = [None]

    def omega_solver(k, seed):
        mode, _ = solve_mode(k, seed, grid, sampled, threshold=threshold,
                             left_bc=left_bc)
        if lipschitz_guard[0] is not None:
            om0, k_prev = lipschitz_guard[0]
            slope = abs(mode.omega - om0) / max(abs(k - k_prev), 1e-30)
            if slope > 100.0:
                raise EigenSolverError(
                    f"eigenvalue jump between k={k_prev} and k={k}: "
                    "crossing inside the derivative stencil")
        lipschitz_guard[0] = (mode.omega, k)
        return mode.omega

    return derivatives_from_stencil(omega_solver, k0, seed_omega, dk)


def audit_assumptions(disp: DispersionData, profile: PiecewiseProfile,
                      gap_margin: float = 1e-4, resonance_margin: float = 1e-2) -> dict:
    """Boolean audit of the spectral assumptions with measured margins.

    A5: the tracked eigenvalue is isolated (gap to the nearest other computed
    eigenvalue exceeds ``gap_margin``); A6: k0^2 > nu0^2*mu0*eps1_inf on both
    sides with nu0 and omega(3 k0) nonzero; A7: |3 nu0 - omega(3 k0)| exceeds
    ``resonance_margin``.
    """
    mu0 = profile.mu0
    margin_minus = disp.k0 ** 2 - disp.nu0 ** 2 * mu0 * profile.eps1_inf_minus
    margin_plus = disp.k0 ** 2 - disp.nu0 ** 2 * mu0 * profile.eps1_inf_plus
    a6 = (margin_minus > 0.0 and margin_plus > 0.0 and disp.nu0 != 0.0
          and disp.omega_3k0 is not None and disp.omega_3k0 != 0.0)
    if disp.omega_3k0 is not None:
        res_margin = abs(3.0 * disp.nu0 - disp.omega_3k0)
    else:
        res_margin = np.inf
    report = {
        "A5": bool(disp.gap > gap_margin),
        "A5_gap": float(disp.gap),
        "A6": bool(a6),
        "A6_margin_minus": float(margin_minus),
        "A6_margin_plus": float(margin_plus),
        "A7": bool(res_margin > resonance_margin),
        "A7_margin": float(res_margin),
    }
    return report


def build_dispersion_data(k0: float, profile: PiecewiseProfile, grid: Grid1D,
                          seed_omega: float, dk: float = 0.02,
                          threshold: float = 1e-6, scan: Optional[np.ndarray] = None,
                          left_bc: str = "lift_consistent") -> DispersionData:
    """Assemble the full DispersionData record at k0, including the 3k0 solve."""
    sampled = _as_sampled(profile, grid)
    nu0, nu1, nu2, err1, err2 = dispersion_derivatives(
        k0, sampled, grid, seed_omega, dk=dk, threshold=threshold, left_bc=left_bc)
    mode, extras = solve_mode(k0, nu0, grid, sampled, threshold=threshold,
                              left_bc=left_bc)
    try:
        _, extras3 = solve_mode(3.0 * k0, 3.0 * nu0, grid, sampled,
                                threshold=threshold, left_bc=left_bc)
        kept3 = extras3["kept"]
        omega_3k0 = min((p.omega for p in kept3),
                        key=lambda o: abs(o - 3.0 * nu0), default=None)
    except EigenSolverError:
        omega_3k0 = None
    curve = []
    if scan is not None:
        curve, _ = dispersion_scan(scan, sampled, grid, seed_omega,
                                   threshold=threshold, left_bc=left_bc)
    disp = DispersionData(k0=k0, nu0=nu0, nu1=nu1, nu2=nu2, curve=curve,
                          gap=extras["gap"], omega_3k0=omega_3k0,
                          nu1_error=err1, nu2_error=err2)
    disp.audit = audit_assumptions(disp, profile)
    return disp


def aitken_extrapolate(values) -> float:
    """Aitken delta-squared limit of a three-term (or longer) sequence."""
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        return float(v[-1])
    d1 = v[-2] - v[-3]
    d2 = v[-1] - v[-2]
    denom = d2 - d1
    if abs(denom) < 1e-300:
        return float(v[-1])
    return float(v[-1] - d2 ** 2 / denom)
