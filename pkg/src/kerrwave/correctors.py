"""Corrector fields for the extended wave-packet ansatz.

Solves the four inhomogeneous systems built on T_{k,omega} = L(k) + omega*Lambda,

    row 1:  omega*eps1*v1 + k*v3            = f1
    row 2:  omega*eps1*v2 + i d_x v3        = f2
    row 3:  k*v1 + i d_x v2 + omega*mu0*v3  = f3,

for d_k w(k0), d_k^2 w(k0), the third-harmonic field h and the cubic
self-interaction field p, plus the effective cubic coefficient kappa.  The
discretization keeps all three components: v1 carries one-sided values at the
duplicated interface node, v2 and v3 share the interface node and satisfy zero
Dirichlet conditions at +-d.  Derivatives are fourth-order central with
one-sided closures per half-domain; the two one-sided equations at the
interface are averaged into the single shared row.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .core import Field1D, Grid1D, SampledProfile, fd_derivative, inner_l2, trapz_blocks
from .eigensolver import Mode


class SolvabilityError(RuntimeError):
    """RHS not orthogonal to the kernel of a singular corrector system."""

    def __init__(self, msg, defect):
        super().__init__(msg)
        self.defect = defect


# ---------------------------------------------------------------------------
# operator assembly


def _block_derivative_matrix(n: int, h: float) -> sp.lil_matrix:
    """Dense-bandwidth sparse first-derivative matrix on one block (4th order,
    one-sided 4th-order closures at both block edges)."""
    d = sp.lil_matrix((n, n))
    c = 1.0 / (12.0 * h)
    for i in range(2, n - 2):
        d[i, i - 2] = c
        d[i, i - 1] = -8.0 * c
        d[i, i + 1] = 8.0 * c
        d[i, i + 2] = -c
    edge1 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12.0 * h)
    edge2 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / (12.0 * h)
    d[0, 0:5] = edge1
    d[1, 0:5] = edge2
    d[n - 1, n - 5:n] = -edge1[::-1]
    d[n - 2, n - 5:n] = -edge2[::-1]
    return d


@dataclass
class PencilParts:
    """k-dependent and mass parts of the pencil: T(omega) = L + omega * M."""

    k: float
    grid: Grid1D
    sampled: SampledProfile
    l_mat: sp.csr_matrix
    m_mat: sp.csr_matrix
    n_dof: int

    def at(self, omega: float) -> "TOperator":
        if omega == 0.0:
            raise ZeroDivisionError("omega = 0 makes the reduction singular")
        return TOperator(k=self.k, omega=omega, grid=self.grid,
                         sampled=self.sampled,
                         matrix=(self.l_mat + omega * self.m_mat).tocsr(),
                         n_dof=self.n_dof)


@dataclass
class TOperator:
    """Sparse discretization of T_{k,omega} with its dof bookkeeping."""

    k: float
    omega: float
    grid: Grid1D
    sampled: SampledProfile
    matrix: sp.csr_matrix
    n_dof: int

    # dof layout: v1 minus block (nm+1), v1 plus block (np+1),
    # v2 interior nodes (n_nodes-2), v3 interior nodes (n_nodes-2)

    @property
    def _sizes(self):
        g = self.grid
        return g.n_minus + 1, g.n_plus + 1, g.n_nodes - 2

    def field_to_vec(self, f: Field1D) -> np.ndarray:
        nm1, np1, ni = self._sizes
        i0 = self.grid.interface_index
        v = np.zeros(self.n_dof, dtype=complex)
        v[:nm1] = f.minus[0]
        v[nm1:nm1 + np1] = f.plus[0]
        full2 = np.concatenate([f.minus[1][:-1], [0.5 * (f.minus[1][-1] + f.plus[1][0])],
                                f.plus[1][1:]])
        full3 = np.concatenate([f.minus[2][:-1], [0.5 * (f.minus[2][-1] + f.plus[2][0])],
                                f.plus[2][1:]])
        v[nm1 + np1:nm1 + np1 + ni] = full2[1:-1]
        v[nm1 + np1 + ni:] = full3[1:-1]
        return v

    def vec_to_field(self, v: np.ndarray) -> Field1D:
        nm1, np1, ni = self._sizes
        i0 = self.grid.interface_index
        n_nodes = self.grid.n_nodes
        v1m = v[:nm1]
        v1p = v[nm1:nm1 + np1]
        v2 = np.zeros(n_nodes, dtype=complex)
        v3 = np.zeros(n_nodes, dtype=complex)
        v2[1:-1] = v[nm1 + np1:nm1 + np1 + ni]
        v3[1:-1] = v[nm1 + np1 + ni:]
        minus = np.stack([v1m, v2[:i0 + 1], v3[:i0 + 1]])
        plus = np.stack([v1p, v2[i0:], v3[i0:]])
        return Field1D(minus, plus)

    def rhs_to_vec(self, f: Field1D) -> np.ndarray:
        """Right-hand side layout matching the rows: one equation per v1 node
        (one-sided), averaged one-sided equations at the interface for rows
        2 and 3."""
        nm1, np1, ni = self._sizes
        i0 = self.grid.interface_index
        r = np.zeros(self.n_dof, dtype=complex)
        r[:nm1] = f.minus[0]
        r[nm1:nm1 + np1] = f.plus[0]
        for comp, off in ((1, nm1 + np1), (2, nm1 + np1 + ni)):
            full = np.concatenate([f.minus[comp][:-1],
                                   [0.5 * (f.minus[comp][-1] + f.plus[comp][0])],
                                   f.plus[comp][1:]])
            r[off:off + ni] = full[1:-1]
        return r

    def apply(self, f: Field1D) -> np.ndarray:
        return self.matrix @ self.field_to_vec(f)

    def residual(self, v: Field1D, f: Field1D) -> float:
        """Relative residual ||T v - f|| / max(||f||, scale*||v||)."""
        tv = self.apply(v)
        rv = self.rhs_to_vec(f)
        scale = max(np.linalg.norm(rv),
                    abs(self.matrix).max() * np.linalg.norm(self.field_to_vec(v)))
        if scale == 0.0:
            return 0.0
        return float(np.linalg.norm(tv - rv) / scale)


def assemble_pencil(k: float, grid: Grid1D, sampled: SampledProfile) -> PencilParts:
    """Assemble the omega-independent and mass parts of T_{k,omega}."""
    sampled.eps1.check_on(grid)
    g = grid
    nm1, np1 = g.n_minus + 1, g.n_plus + 1
    ni = g.n_nodes - 2
    i0 = g.interface_index
    n_dof = nm1 + np1 + 2 * ni
    off1m, off1p = 0, nm1
    off2, off3 = nm1 + np1, nm1 + np1 + ni

    eps1m, eps1p = sampled.eps1.minus, sampled.eps1.plus
    mu0 = sampled.mu0

    def dof1(j):
        # one v1 dof per one-sided node; the interface dof is side-dependent
        if j < i0:
            return off1m + j
        if j > i0:
            return off1p + (j - i0)
        raise ValueError("interface v1 dof is side-dependent")

    def dof23(off, j):
        return off + (j - 1) if 1 <= j <= g.n_nodes - 2 else None

    lr, lc, lv = [], [], []
    mr, mc, mv = [], [], []

    def add_l(r, c, v):
        if c is not None and v != 0.0:
            lr.append(r)
            lc.append(c)
            lv.append(v)

    def add_m(r, c, v):
        if c is not None and v != 0.0:
            mr.append(r)
            mc.append(c)
            mv.append(v)

    # row 1 (one per one-sided node): omega*eps1*v1 + k*v3 = f1
    for jj in range(nm1):
        r = off1m + jj
        add_m(r, r, eps1m[jj])
        add_l(r, dof23(off3, jj), k)
    for jj in range(np1):
        r = off1p + jj
        add_m(r, r, eps1p[jj])
        add_l(r, dof23(off3, i0 + jj), k)

    dm = _block_derivative_matrix(nm1, g.h).tocsr()
    dp = _block_derivative_matrix(np1, g.h).tocsr()

    def derivative_entries(j):
        """(node, weight) pairs of d_x at global node j: block-interior rows
        use their block stencil; the interface row averages both one-sided
        ones."""
        if j < i0:
            return _row_entries(dm, j)
        if j > i0:
            return [(i0 + jj, w) for jj, w in _row_entries(dp, j - i0)]
        out = [(jj, 0.5 * w) for jj, w in _row_entries(dm, nm1 - 1)]
        out += [(i0 + jj, 0.5 * w) for jj, w in _row_entries(dp, 0)]
        return out

    for j in range(1, g.n_nodes - 1):
        r2 = off2 + (j - 1)
        r3 = off3 + (j - 1)
        if j < i0:
            e1 = eps1m[j]
        elif j > i0:
            e1 = eps1p[j - i0]
        else:
            e1 = 0.5 * (eps1m[-1] + eps1p[0])
        dent = derivative_entries(j)
        # row 2: omega*eps1*v2 + i d_x v3 = f2
        add_m(r2, r2, e1)
        for jn, w in dent:
            add_l(r2, dof23(off3, jn), 1j * w)
        # row 3: k*v1 + i d_x v2 + omega*mu0*v3 = f3
        if j == i0:
            add_l(r3, off1m + nm1 - 1, 0.5 * k)
            add_l(r3, off1p + 0, 0.5 * k)
        else:
            add_l(r3, dof1(j), k)
        for jn, w in dent:
            add_l(r3, dof23(off2, jn), 1j * w)
        add_m(r3, r3, mu0)

    l_mat = sp.coo_matrix((lv, (lr, lc)), shape=(n_dof, n_dof), dtype=complex).tocsr()
    m_mat = sp.coo_matrix((mv, (mr, mc)), shape=(n_dof, n_dof), dtype=complex).tocsr()
    return PencilParts(k=k, grid=grid, sampled=sampled, l_mat=l_mat, m_mat=m_mat,
                       n_dof=n_dof)


def assemble_T(k: float, omega: float, grid: Grid1D, sampled: SampledProfile,
               parts: Optional[PencilParts] = None) -> TOperator:
    """Sparse T_{k,omega} = L(k) + omega*Lambda on the duplicated-node layout."""
    if parts is None or parts.k != k:
        parts = assemble_pencil(k, grid, sampled)
    return parts.at(omega)


def _row_entries(csr: sp.csr_matrix, row: int):
    sl = slice(csr.indptr[row], csr.indptr[row + 1])
    return list(zip(csr.indices[sl], csr.data[sl]))


# ---------------------------------------------------------------------------
# pointwise operator helpers


def apply_lambda(f: Field1D, sampled: SampledProfile) -> Field1D:
    e1 = sampled.eps1
    mu0 = sampled.mu0
    minus = np.stack([e1.minus * f.minus[0], e1.minus * f.minus[1], mu0 * f.minus[2]])
    plus = np.stack([e1.plus * f.plus[0], e1.plus * f.plus[1], mu0 * f.plus[2]])
    return Field1D(minus, plus)


def apply_l1(f: Field1D) -> Field1D:
    """d_k L of the pencil: (v3, 0, v1)."""
    minus = np.stack([f.minus[2], np.zeros_like(f.minus[1]), f.minus[0]])
    plus = np.stack([f.plus[2], np.zeros_like(f.plus[1]), f.plus[0]])
    return Field1D(minus, plus)


def normalized_defect(f: Field1D, m: Field1D, h: float) -> float:
    nf = np.sqrt(np.real(inner_l2(f, f, h)))
    nm = np.sqrt(np.real(inner_l2(m, m, h)))
    if nf == 0.0 or nm == 0.0:
        return 0.0
    return float(abs(inner_l2(f, m, h)) / (nf * nm))


# ---------------------------------------------------------------------------
# solves


def solve_inhomogeneous(t_op: TOperator, f: Field1D, kernel_basis=None,
                        ortho_tol: float = 1e-8) -> Field1D:
    """Solve T v = f; with a kernel the bordered square system enforces
    <v, kernel> = 0 and absorbs the (checked) kernel component of f."""
    rhs = t_op.rhs_to_vec(f)
    if kernel_basis is None:
        lu = splu(t_op.matrix.tocsc())
        v = lu.solve(rhs)
        return t_op.vec_to_field(v)

    m_field = kernel_basis.as_vector() if isinstance(kernel_basis, Mode) else kernel_basis
    defect = normalized_defect(f, m_field, t_op.grid.h)
    if defect > ortho_tol:
        raise SolvabilityError(
            f"RHS has kernel component {defect:.3e} > {ortho_tol:.1e}", defect)
    m_vec = t_op.field_to_vec(m_field)
    w_vec = _quadrature_weights_vec(t_op)
    border_row = np.conj(m_vec) * w_vec
    n = t_op.n_dof
    bordered = sp.bmat([[t_op.matrix, m_vec.reshape(-1, 1)],
                        [sp.csr_matrix(border_row.reshape(1, -1)), None]],
                       format="csc")
    sol = splu(bordered).solve(np.concatenate([rhs, [0.0]]))
    v = t_op.vec_to_field(sol[:n])
    return v


def _quadrature_weights_vec(t_op: TOperator) -> np.ndarray:
    """Trapezoid weights per dof so that (w .* conj(m)) . v equals <v, m>."""
    g = t_op.grid
    nm1, np1, ni = t_op._sizes
    h = g.h
    wm = np.full(nm1, h)
    wm[0] = wm[-1] = 0.5 * h
    wp = np.full(np1, h)
    wp[0] = wp[-1] = 0.5 * h
    # v2, v3 share the interface node: its weight is the sum of both one-sided
    # half-weights; boundary nodes are excluded (Dirichlet)
    w23 = np.full(g.n_nodes, h)
    w23[0] = w23[-1] = 0.5 * h
    out = np.concatenate([wm, wp, w23[1:-1], w23[1:-1]])
    return out


def refine_eigenpair(mode: Mode, grid: Grid1D, sampled: SampledProfile,
                     iters: int = 5, tol: float = 5e-13,
                     parts: Optional[PencilParts] = None):
    """Polish (omega, m) on the fourth-order discrete pencil by Rayleigh
    updates and shifted inverse iteration; returns (omega, Mode, residual).

    The second-order Appendix-style eigensolve carries an O(h^2) defect in the
    first-order system; the polished pair is what the corrector systems and
    the residual studies must use for their cancellations to reach eps^4.
    """
    if parts is None:
        parts = assemble_pencil(mode.k, grid, sampled)
    omega = mode.omega
    v = mode.as_vector()
    res = np.inf
    scale_ref = abs(parts.l_mat).max()
    for _ in range(iters):
        t_op = parts.at(omega)
        lam_v = apply_lambda(v, sampled)
        vv = t_op.field_to_vec(v)
        w = _quadrature_weights_vec(t_op)
        # Rayleigh update from <T v, v> = <(L + omega*Lambda) v, v> = 0
        num = np.dot(np.conj(vv) * w, t_op.apply(v))
        den = np.dot(np.conj(vv) * w, t_op.field_to_vec(lam_v))
        omega = omega - np.real(num / den)
        t_op = parts.at(omega)
        res = np.linalg.norm(t_op.apply(v)) / (scale_ref * np.linalg.norm(vv))
        if res < tol:
            break
        # shifted inverse iteration amplifies the kernel direction
        t_shift = parts.at(omega * (1.0 + 3e-9))
        rhs = t_shift.rhs_to_vec(apply_lambda(v, sampled))
        v_new = t_shift.vec_to_field(splu(t_shift.matrix.tocsc()).solve(rhs))
        v_new = _project_structure(v_new)
        v = v_new * _normalize_weighted(v_new, sampled, grid)
    refined = Mode(k=mode.k, omega=omega,
                   w1=Field1D(np.real(v.minus[0]), np.real(v.plus[0])),
                   w2=Field1D(1j * np.imag(v.minus[1]) + 0j,
                              1j * np.imag(v.plus[1]) + 0j),
                   w3=Field1D(np.real(v.minus[2]), np.real(v.plus[2])),
                   grid=grid)
    return omega, refined, float(res)


def _project_structure(v: Field1D) -> Field1D:
    minus = np.stack([np.real(v.minus[0]) + 0j, 1j * np.imag(v.minus[1]),
                      np.real(v.minus[2]) + 0j])
    plus = np.stack([np.real(v.plus[0]) + 0j, 1j * np.imag(v.plus[1]),
                     np.real(v.plus[2]) + 0j])
    return Field1D(minus, plus)


def _normalize_weighted(v: Field1D, sampled: SampledProfile, grid: Grid1D) -> float:
    lam_v = apply_lambda(v, sampled)
    integral = np.real(inner_l2(lam_v, v, grid.h))
    if integral <= 0.0:
        raise RuntimeError("degenerate refinement: weighted norm <= 0")
    return 1.0 / np.sqrt(integral)


# ---------------------------------------------------------------------------
# the corrector fields


def variational_nu1(mode: Mode, sampled: SampledProfile) -> float:
    """Group velocity from the Hellmann-Feynman projection of the k-derivative
    of the pencil: nu1 = -<L1 m, m> / <Lambda m, m>."""
    v = mode.as_vector()
    h = mode.grid.h
    num = np.real(inner_l2(apply_l1(v), v, h))
    den = np.real(inner_l2(apply_lambda(v, sampled), v, h))
    return float(-num / den)


def compute_kappa(mode: Mode, sampled: SampledProfile) -> float:
    """Cubic NLS coefficient: kappa = -nu0 int eps3 (3 m1^4 - 2 m1^2 m2^2 + 3 m2^4)."""
    e3 = sampled.eps3
    m1m, m2m = mode.w1.minus, mode.w2.minus
    m1p, m2p = mode.w1.plus, mode.w2.plus
    dm = e3.minus * (3.0 * m1m ** 4 - 2.0 * m1m ** 2 * m2m ** 2 + 3.0 * m2m ** 4)
    dp = e3.plus * (3.0 * m1p ** 4 - 2.0 * m1p ** 2 * m2p ** 2 + 3.0 * m2p ** 4)
    val = -mode.omega * trapz_blocks(dm, dp, mode.grid.h)
    return float(np.real(val))


def _rhs_dkw(mode: Mode, sampled: SampledProfile, nu1: float) -> Field1D:
    """-(L1 + nu1 Lambda) m = -(eps1 nu1 m1 + m3, eps1 nu1 m2, m1 + mu0 nu1 m3)."""
    v = mode.as_vector()
    l1 = apply_l1(v)
    lv = apply_lambda(v, sampled)
    return Field1D(-(l1.minus + nu1 * lv.minus), -(l1.plus + nu1 * lv.plus))


def _rhs_dk2w(mode: Mode, dkw: Field1D, sampled: SampledProfile,
              nu1: float, nu2: float) -> Field1D:
    l1 = apply_l1(dkw)
    lam_dkw = apply_lambda(dkw, sampled)
    lam_m = apply_lambda(mode.as_vector(), sampled)
    minus = -2.0 * (l1.minus + nu1 * lam_dkw.minus) - nu2 * lam_m.minus
    plus = -2.0 * (l1.plus + nu1 * lam_dkw.plus) - nu2 * lam_m.plus
    return Field1D(minus, plus)


def _rhs_p(mode: Mode, sampled: SampledProfile, kappa: float) -> Field1D:
    lam_m = apply_lambda(mode.as_vector(), sampled)
    e3 = sampled.eps3
    m1m, m2m = mode.w1.minus, mode.w2.minus
    m1p, m2p = mode.w1.plus, mode.w2.plus
    nu0 = mode.omega
    cub_m = np.stack([e3.minus * nu0 * (3.0 * m1m ** 3 - m1m * m2m ** 2),
                      e3.minus * nu0 * (-3.0 * m2m ** 3 + m1m ** 2 * m2m),
                      np.zeros_like(m1m, dtype=complex)])
    cub_p = np.stack([e3.plus * nu0 * (3.0 * m1p ** 3 - m1p * m2p ** 2),
                      e3.plus * nu0 * (-3.0 * m2p ** 3 + m1p ** 2 * m2p),
                      np.zeros_like(m1p, dtype=complex)])
    return Field1D(-kappa * lam_m.minus - cub_m, -kappa * lam_m.plus - cub_p)


def _rhs_h(mode: Mode, sampled: SampledProfile) -> Field1D:
    e3 = sampled.eps3
    m1m, m2m = mode.w1.minus, mode.w2.minus
    m1p, m2p = mode.w1.plus, mode.w2.plus
    nu0 = mode.omega
    minus = np.stack([-3.0 * nu0 * e3.minus * (m1m ** 3 + m1m * m2m ** 2),
                      -3.0 * nu0 * e3.minus * (m2m ** 3 + m2m * m1m ** 2),
                      np.zeros_like(m1m, dtype=complex)])
    plus = np.stack([-3.0 * nu0 * e3.plus * (m1p ** 3 + m1p * m2p ** 2),
                     -3.0 * nu0 * e3.plus * (m2p ** 3 + m2p * m1p ** 2),
                     np.zeros_like(m1p, dtype=complex)])
    return Field1D(minus, plus)


@dataclass
class CorrectorSet:
    """The mode plus all corrector fields and coefficients of the ansatz."""

    m: Mode
    dkw: Field1D
    dk2w: Field1D
    h: Field1D
    p: Field1D
    kappa: float
    nu: tuple  # (nu0, nu1, nu2) used consistently downstream
    diagnostics: dict = field(default_factory=dict)

    @property
    def nu0(self):
        return self.nu[0]

    @property
    def nu1(self):
        return self.nu[1]

    @property
    def nu2(self):
        return self.nu[2]


def jump_identities(cs: CorrectorSet, sampled: SampledProfile) -> dict:
    """Interface jump identities for h1 and p1 against the cubic mode terms."""
    e1, e3 = sampled.eps1, sampled.eps3
    m1, m2 = cs.m.w1, cs.m.w2

    def jump(fm, fp):
        return complex(fp[0] - fm[-1])

    out = {}
    lhs_h = jump(e1.minus * cs.h.minus[0], e1.plus * cs.h.plus[0])
    rhs_h = -jump(e3.minus * (m1.minus ** 3 + m1.minus * m2.minus ** 2),
                  e3.plus * (m1.plus ** 3 + m1.plus * m2.plus ** 2))
    out["h1"] = (lhs_h, rhs_h, abs(lhs_h - rhs_h))
    lhs_p = jump(e1.minus * cs.p.minus[0], e1.plus * cs.p.plus[0])
    rhs_p = -jump(e3.minus * (3.0 * m1.minus ** 3 - m1.minus * m2.minus ** 2),
                  e3.plus * (3.0 * m1.plus ** 3 - m1.plus * m2.plus ** 2))
    out["p1"] = (lhs_p, rhs_p, abs(lhs_p - rhs_p))
    return out


def compute_dkw_dk2w(mode: Mode, grid: Grid1D, sampled: SampledProfile,
                     nu1: Optional[float] = None, ortho_tol: float = 1e-6,
                     parts: Optional[PencilParts] = None):
    """Solve the cascaded singular systems for d_k w and d_k^2 w at k0.

    nu1 defaults to the variational value, which makes the first RHS exactly
    compatible; nu2 is then fixed by compatibility of the second system.
    Returns (dkw, dk2w, nu1, nu2, defects).
    """
    t_op = assemble_T(mode.k, mode.omega, grid, sampled, parts=parts)
    m_field = mode.as_vector()
    nu1_var = variational_nu1(mode, sampled)
    nu1_used = nu1 if nu1 is not None else nu1_var
    rhs1 = _rhs_dkw(mode, sampled, nu1_used)
    defect1 = normalized_defect(rhs1, m_field, grid.h)
    dkw = solve_inhomogeneous(t_op, rhs1, kernel_basis=m_field, ortho_tol=ortho_tol)
    # compatibility of the second system pins nu2 (Taylor order k^2 projected
    # on the kernel)
    l1_term = apply_l1(dkw)
    lam_dkw = apply_lambda(dkw, sampled)
    proj = inner_l2(Field1D(l1_term.minus + nu1_used * lam_dkw.minus,
                            l1_term.plus + nu1_used * lam_dkw.plus),
                    m_field, grid.h)
    lam_m = apply_lambda(m_field, sampled)
    norm_m = np.real(inner_l2(lam_m, m_field, grid.h))
    nu2 = float(np.real(-2.0 * proj / norm_m))
    rhs2 = _rhs_dk2w(mode, dkw, sampled, nu1_used, nu2)
    defect2 = normalized_defect(rhs2, m_field, grid.h)
    dk2w = solve_inhomogeneous(t_op, rhs2, kernel_basis=m_field, ortho_tol=ortho_tol)
    defects = {"rhs_dkw": defect1, "rhs_dk2w": defect2, "nu1_var": nu1_var}
    return dkw, dk2w, nu1_used, nu2, defects


def compute_p(mode: Mode, kappa: float, grid: Grid1D, sampled: SampledProfile,
              ortho_tol: float = 1e-6, parts: Optional[PencilParts] = None) -> Field1D:
    """Solve the singular system for the cubic self-interaction corrector p."""
    t_op = assemble_T(mode.k, mode.omega, grid, sampled, parts=parts)
    rhs = _rhs_p(mode, sampled, kappa)
    return solve_inhomogeneous(t_op, rhs, kernel_basis=mode.as_vector(),
                               ortho_tol=ortho_tol)


def compute_h(mode: Mode, grid: Grid1D, sampled: SampledProfile,
              parts: Optional[PencilParts] = None) -> Field1D:
    """Solve the nonsingular third-harmonic system at (3 k0, 3 nu0)."""
    t_op = assemble_T(3.0 * mode.k, 3.0 * mode.omega, grid, sampled, parts=parts)
    rhs = _rhs_h(mode, sampled)
    return solve_inhomogeneous(t_op, rhs, kernel_basis=None)


def build_corrector_set(mode: Mode, grid: Grid1D, sampled: SampledProfile,
                        refine: bool = True, ortho_tol: float = 1e-6) -> CorrectorSet:
    """Refine the eigenpair, solve all four systems, and collect diagnostics."""
    diag = {}
    parts0 = assemble_pencil(mode.k, grid, sampled)
    if refine:
        omega, mode, eig_res = refine_eigenpair(mode, grid, sampled, parts=parts0)
        diag["eigen_residual"] = eig_res
    parts3 = assemble_pencil(3.0 * mode.k, grid, sampled)
    dkw, dk2w, nu1, nu2, defects = compute_dkw_dk2w(mode, grid, sampled,
                                                    ortho_tol=ortho_tol,
                                                    parts=parts0)
    diag.update(defects)
    kappa = compute_kappa(mode, sampled)
    p = compute_p(mode, kappa, grid, sampled, ortho_tol=ortho_tol, parts=parts0)
    h = compute_h(mode, grid, sampled, parts=parts3)
    t0 = parts0.at(mode.omega)
    t3 = parts3.at(3.0 * mode.omega)
    diag["res_dkw"] = t0.residual(dkw, _rhs_dkw(mode, sampled, nu1))
    diag["res_dk2w"] = t0.residual(dk2w, _rhs_dk2w(mode, dkw, sampled, nu1, nu2))
    diag["res_p"] = t0.residual(p, _rhs_p(mode, sampled, kappa))
    diag["res_h"] = t3.residual(h, _rhs_h(mode, sampled))
    m_field = mode.as_vector()
    diag["rhs_p_defect"] = normalized_defect(_rhs_p(mode, sampled, kappa),
                                             m_field, grid.h)
    for name, f in (("dkw", dkw), ("dk2w", dk2w), ("p", p)):
        diag[f"ortho_{name}"] = abs(inner_l2(f, m_field, grid.h))
    cs = CorrectorSet(m=mode, dkw=dkw, dk2w=dk2w, h=h, p=p, kappa=kappa,
                      nu=(mode.omega, nu1, nu2), diagnostics=diag)
    diag["jumps"] = jump_identities(cs, sampled)
    return cs
