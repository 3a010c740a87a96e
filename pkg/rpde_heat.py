"""Rough transport-diffusion on the periodic unit interval,

    du = ν Δu dt + V^k ∂_x u dX^k,

discretized with the unbounded rough driver A1_st = X1^k_st B_k,
A2_st = X2^{jk}_st B_k B_j where B_k = diag(V^k) D and D is the central
periodic difference. The energy G_t = |u_t|^2 + 2 ∫_0^t |∇u_r|^2 dr is checked
against the rough Gronwall bound.
"""
import functools
import warnings
from collections import namedtuple
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.sparse as sp
import scipy.sparse.linalg
from scipy.integrate import cumulative_trapezoid, trapezoid

from gronwall import GronwallCertificate, GronwallInput, default_threshold, fit_constant, gronwall_bound
from rough_paths import ParameterError
from scheme_utils import as_subgrid, coarse_subgrid, dyadic_boundaries
from variation import Control, control_from_matrix, control_from_raw, superadditivity_defects


class CFLError(ParameterError):
    pass


# (operator, test-function level in, level out); labels name the dual step E_{-n} -> E_{-m}
NORM_LEVELS = [("A1", 1, 0), ("A1", 3, 2), ("A2", 2, 0), ("A2", 3, 1)]
NORM_LABELS = [f"{op}:{n_out}->{n_in}" for op, n_in, n_out in NORM_LEVELS]
LEVEL_PAIRS = [(n_in, n_out) for _, n_in, n_out in NORM_LEVELS]


@dataclass
class GridScale:
    """Periodic grid of n_x points on [0, length) with its difference operators
    and the discrete Sobolev norms standing in for the scale E_n."""
    n_x: int
    length: float = 1.0

    def __post_init__(self):
        if self.n_x < 3:
            raise ParameterError(f"periodic grid needs n_x >= 3, got {self.n_x}")
        n = self.n_x
        wrap = n - 1
        self.gradient = (sp.diags([-0.5, 0.5, 0.5, -0.5], [-1, 1, -wrap, wrap], shape=(n, n)) / self.dx).tocsr()
        self.forward = (sp.diags([-1.0, 1.0, 1.0], [0, 1, -wrap], shape=(n, n)) / self.dx).tocsr()
        self.laplacian = (sp.diags([-2.0, 1.0, 1.0, 1.0, 1.0], [0, -1, 1, -wrap, wrap], shape=(n, n))
                          / self.dx ** 2).tocsr()

    @property
    def dx(self):
        return self.length / self.n_x

    @property
    def x(self):
        return np.arange(self.n_x) * self.dx

    def pairing(self, u, phi):
        return float(self.dx * np.dot(u, phi))

    def l2_norm(self, u):
        return float(np.sqrt(self.dx * np.dot(u, u)))

    def sup_norm(self, phi, level=0):
        # discrete W^{level, ∞}
        best = 0.0
        for _ in range(level + 1):
            best = max(best, float(np.max(np.abs(phi))))
            phi = self.forward @ phi
        return best

    def sobolev_weights(self, level):
        lam = (2.0 * np.sin(np.pi * np.arange(self.n_x) / self.n_x) / self.dx) ** 2
        return sum(lam ** k for k in range(level + 1))

    @functools.cached_property
    def _dft(self):
        return scipy.linalg.dft(self.n_x, scale="sqrtn")

    def adjoint_norm(self, op, level_in, level_out, norm="sup"):
        """sup |op^T φ|_{level_out} / |φ|_{level_in}, i.e. the norm of op from
        E_{-level_out} to E_{-level_in}.

        norm="sup" uses the discrete W^{n,∞} norms of `sup_norm` and returns an
        upper bound from local dual representations; norm="l2" is the exact
        spectral value in the discrete W^{n,2} norms.
        """
        if norm == "sup":
            return self._sup_adjoint_norm(op, level_in, level_out)
        elif norm == "l2":
            return self._l2_adjoint_norm(op, level_in, level_out)
        raise ParameterError(f"unknown norm {norm!r}, expected 'sup' or 'l2'")

    def _l2_adjoint_norm(self, op, level_in, level_out):
        op_t = op.T.toarray() if sp.issparse(op) else np.asarray(op).T
        F = self._dft
        M = F @ op_t @ F.conj().T
        M = np.sqrt(self.sobolev_weights(level_out))[:, None] * M / np.sqrt(self.sobolev_weights(level_in))[None, :]
        return float(np.linalg.norm(M, 2))

    def _sup_adjoint_norm(self, op, level_in, level_out):
        # Every output functional a = row of F^j op^T is written as a = Σ_i (F^i)^T k_i
        # with k supported near supp(a); then |a φ| <= Σ_i |k_i|_1 |F^i φ|_∞ <= |k|_1 |φ|_{level_in}.
        # The smallest |k|_1 per row comes from one linear program over all rows.
        n, dx = self.n_x, self.dx
        step = (self.forward * dx).tocsr()
        powers = [sp.identity(n, format="csr")]
        for _ in range(max(level_in, level_out)):
            powers.append((step @ powers[-1]).tocsr())

        op_t = sp.csr_matrix(op).T.tocsr()
        rows = sp.vstack([(powers[j] @ op_t) / dx ** j for j in range(level_out + 1)]).tocsr()
        rows.eliminate_zeros()
        top = float(abs(rows).max()) if rows.nnz else 0.0
        if top == 0.0:
            return 0.0
        rows = rows / top

        # dx^i F^i has integer stencils; k_i = dx^i k~_i keeps the constraints well scaled
        transposed = [P.T.tocsc() for P in powers[:level_in + 1]]
        weights = dx ** np.arange(level_in + 1)
        offsets = np.arange(-(level_in + 1), level_in + 2)
        blocks, rhs, costs, owners = [], [], [], []
        for r in range(rows.shape[0]):
            a = rows[r]
            if a.nnz == 0:
                continue
            window = np.unique((a.indices[:, None] + offsets[None, :]) % n)
            cols = sp.hstack([T[:, window] for T in transposed]).tocsr()
            eqs = np.union1d(np.flatnonzero(np.diff(cols.indptr)), a.indices)
            block = cols[eqs]
            blocks.append(sp.hstack([block, -block]))
            rhs.append(a.toarray().ravel()[eqs])
            cost = np.tile(np.repeat(weights, len(window)), 2)
            costs.append(cost)
            owners.append(np.full(len(cost), len(owners)))

        c = np.concatenate(costs)
        res = scipy.optimize.linprog(c, A_eq=sp.block_diag(blocks, format="csc"), b_eq=np.concatenate(rhs),
                                     bounds=(0, None), method="highs")
        if not res.success:
            # k_0 = a is always feasible
            warnings.warn(f"dual norm program failed ({res.message}); using row sums", RuntimeWarning)
            return top * float(abs(rows).sum(axis=1).max())
        per_row = np.bincount(np.concatenate(owners), weights=c * res.x)
        return top * float(np.max(per_row))


class GridDriver(object):
    """Operators A1, A2 of the transport driver, built on demand for grid pairs."""

    def __init__(self, rp, V, scale):
        self.rp = rp
        self.scale = scale
        self.V = V
        self.B = [(sp.diags(V[k]) @ scale.gradient).tocsr() for k in range(rp.dim)]
        # BB[j][k] = B_k B_j multiplies X2^{jk}
        self.BB = [[(self.B[k] @ self.B[j]).tocsr() for k in range(rp.dim)] for j in range(rp.dim)]
        self.is_zero = not np.any(V)
        self.omega_A = None
        self.field_norms = {}
        self.binding = None

    def __len__(self):
        return len(self.rp)

    @property
    def d(self):
        return self.rp.dim

    def a1(self, i, j):
        x1 = self.rp.x1(i, j)
        return sum(x1[k] * self.B[k] for k in range(self.d))

    def a2(self, i, j):
        x2 = self.rp.x2(i, j)
        return sum(x2[j_, k] * self.BB[j_][k] for j_ in range(self.d) for k in range(self.d))

    def apply_a1(self, i, j, u):
        x1 = self.rp.x1(i, j)
        return sum(x1[k] * (self.B[k] @ u) for k in range(self.d))

    def apply_a2(self, i, j, u):
        x2 = self.rp.x2(i, j)
        Bu = [B @ u for B in self.B]
        out = np.zeros_like(u, dtype=float)
        for k in range(self.d):
            w = sum(x2[j_, k] * Bu[j_] for j_ in range(self.d))
            out += self.B[k] @ w
        return out

    def apply(self, i, j, u):
        return self.apply_a1(i, j, u) + self.apply_a2(i, j, u)


def build_transport_driver(V, rp, scale):
    """V holds one grid vector field per driver component, shape (d, n_x);
    a scalar is a constant field in every component."""
    V = np.asarray(V, dtype=float)
    if V.ndim == 0:
        V = np.full((rp.dim, scale.n_x), float(V))
    elif V.ndim == 1 and rp.dim == 1:
        V = V.reshape(1, -1)
    if V.shape != (rp.dim, scale.n_x):
        raise ParameterError(f"V has shape {V.shape}, expected ({rp.dim}, {scale.n_x})")
    return GridDriver(rp, V, scale)


def driver_chen_defect(gd, i, k, j):
    """Frobenius norms of δA1_ikj and of δA2_ikj - A1_kj A1_ik, relative to
    1 + |A1_ij|^2 + |A2_ij|."""
    fro = functools.partial(scipy.sparse.linalg.norm, ord="fro")
    d1 = gd.a1(i, j) - gd.a1(i, k) - gd.a1(k, j)
    d2 = gd.a2(i, j) - gd.a2(i, k) - gd.a2(k, j) - gd.a1(k, j) @ gd.a1(i, k)
    scale = 1.0 + fro(sp.csr_matrix(gd.a1(i, j))) ** 2 + fro(sp.csr_matrix(gd.a2(i, j)))
    return fro(sp.csr_matrix(d1)) / scale, fro(sp.csr_matrix(d2)) / scale


def _field_norms(gd, norm="sup"):
    if norm not in gd.field_norms:
        adjoint = functools.partial(gd.scale.adjoint_norm, norm=norm)
        n1 = np.array([[adjoint(B, *LEVEL_PAIRS[0]), adjoint(B, *LEVEL_PAIRS[1])] for B in gd.B])
        n2 = np.array([[[adjoint(gd.BB[j][k], *LEVEL_PAIRS[2]), adjoint(gd.BB[j][k], *LEVEL_PAIRS[3])]
                        for k in range(gd.d)] for j in range(gd.d)])
        gd.field_norms[norm] = (n1, n2)
    return gd.field_norms[norm]


def driver_control(gd, subgrid=None, exact=False, norm="sup"):
    """ω_A on the grid points `subgrid`: the largest of |A1|^p and |A2|^(p/2) over
    the levels in NORM_LEVELS, turned into a control by the partition envelope.
    Operator norms are taken in the discrete W^{n,∞} scale, or W^{n,2} with norm="l2".

    By default the operator norms are bounded through the triangle inequality
    with per-field norms; `exact=True` computes them for every pair. The count of
    pairs each (operator, level) binds on is stored in `gd.binding`.
    """
    rp, p = gd.rp, gd.rp.p
    idx = as_subgrid(len(rp), subgrid)
    m = len(idx)
    raw = np.zeros((m, m))
    counts = dict.fromkeys(NORM_LABELS, 0)
    if not gd.is_zero:
        powers = np.array([p, p, p / 2.0, p / 2.0])
        n1, n2 = (None, None) if exact else _field_norms(gd, norm)
        for a in range(m):
            for b in range(a + 1, m):
                i, j = idx[a], idx[b]
                if exact:
                    a1, a2 = gd.a1(i, j), gd.a2(i, j)
                    norms = np.array([gd.scale.adjoint_norm(op, *lv, norm=norm)
                                      for op, lv in zip([a1, a1, a2, a2], LEVEL_PAIRS)])
                else:
                    norms = np.concatenate([np.abs(rp.x1(i, j)) @ n1,
                                            np.einsum("jk,jkl->l", np.abs(rp.x2(i, j)), n2)])
                vals = norms ** powers
                raw[a, b] = np.max(vals)
                if raw[a, b] > 0:
                    counts[NORM_LABELS[int(np.argmax(vals))]] += 1

    omega = control_from_raw(rp.grid[idx], raw, label="omega_A")
    gd.omega_A = omega
    gd.binding = counts
    return omega


def heat_step(u, lap, dt):
    """One explicit Euler step of the periodic heat equation."""
    return u + dt * (lap @ u)


def check_cfl(dt, dx, nu, force=False):
    if nu and dt > dx ** 2 / 2 and not force:
        raise CFLError(f"dt={dt:.3g} exceeds the explicit heat limit dx^2/2={dx ** 2 / 2:.3g}")


def default_dt(dx):
    # keeps the discrete energy nonincreasing for the pure heat step
    return 0.25 * dx ** 2


def transport_number(gd):
    """max over driver steps of sum_k |X1^k| max|V^k| / dx."""
    inc = np.abs(np.array([gd.rp.x1(k, k + 1) for k in range(len(gd.rp) - 1)]))
    vmax = np.max(np.abs(gd.V), axis=1)
    return float(np.max(inc @ vmax) / gd.scale.dx)


def _step(u, gd, nu, dt, i, j):
    u_next = heat_step(u, gd.scale.laplacian, nu * dt)
    if gd.is_zero:
        return u_next
    return u_next + gd.apply(i, j, u)


def step_heat(u, gd, nu, dt, s, t, force=False):
    """u + ν dt Lap u + A1_st u + A2_st u."""
    check_cfl(dt, gd.scale.dx, nu, force)
    return _step(u, gd, nu, dt, gd.rp.index(s), gd.rp.index(t))


@dataclass
class RPDETrajectory:
    times: np.ndarray
    u: np.ndarray
    scale: GridScale
    nu: int = 1
    l2_sq: np.ndarray = field(init=False, repr=False, default=None)
    grad_sq: np.ndarray = field(init=False, repr=False, default=None)
    energy: np.ndarray = field(init=False, repr=False, default=None)

    def __post_init__(self):
        dx = self.scale.dx
        self.l2_sq = dx * np.sum(self.u ** 2, axis=1)
        grad = (self.scale.forward @ self.u.T).T
        self.grad_sq = dx * np.sum(grad ** 2, axis=1)
        self.energy = self.l2_sq + 2.0 * self.nu * cumulative_trapezoid(self.grad_sq, self.times, initial=0.0)

    def __len__(self):
        return len(self.times)


def solve_heat(u0, gd, nu=1, force=False):
    times = gd.rp.grid
    dts = np.diff(times)
    check_cfl(float(np.max(dts)), gd.scale.dx, nu, force)
    if not gd.is_zero:
        number = transport_number(gd)
        if number > 1:
            warnings.warn(f"driver step transport number {number:.3g} > 1", RuntimeWarning)

    u = np.empty((len(times), gd.scale.n_x))
    u[0] = u0
    for k in range(len(times) - 1):
        u[k + 1] = _step(u[k], gd, nu, dts[k], k, k + 1)
    return RPDETrajectory(times, u, gd.scale, nu)


def transport_energy_drift(traj):
    return float(traj.l2_sq[-1] - traj.l2_sq[0])


def u_squared_remainder(traj, gd, phi, s, t):
    """u²♮_st(φ) = δ(u²)_st(φ) + 2ν∫|∇u|²(φ) + 2ν∫(u∇u)(∇φ) - (A1_st u_s² + A2_st u_s²)(φ),
    time integrals by the trapezoid rule on the solver grid."""
    i, j = gd.rp.index(s), gd.rp.index(t)
    scale = traj.scale
    u2s = traj.u[i] ** 2
    u2t = traj.u[j] ** 2
    U = traj.u[i:j + 1].T
    grad_fwd = scale.forward @ U
    grad_c = scale.gradient @ U
    dphi = scale.gradient @ phi

    a = scale.dx * np.sum(grad_fwd ** 2 * phi[:, None], axis=0)
    b = scale.dx * np.sum(U * grad_c * dphi[:, None], axis=0)
    ts = traj.times[i:j + 1]
    integral = 2.0 * traj.nu * (trapezoid(a, ts) + trapezoid(b, ts)) if j > i else 0.0

    driver = 0.0 if gd.is_zero else scale.pairing(gd.apply(i, j, u2s), phi)
    return scale.pairing(u2t - u2s, phi) + integral - driver


def omega_mu(traj):
    """ω_μ(s, t) = ∫|∇u|^2 + (∫|∇u|^2)^{1/2} (∫|u|^2)^{1/2} over [s, t]."""
    A = cumulative_trapezoid(traj.grad_sq, traj.times, initial=0.0)
    Bc = cumulative_trapezoid(traj.l2_sq, traj.times, initial=0.0)

    def evaluator(i, j):
        a = A[j] - A[i]
        return a + np.sqrt(a * (Bc[j] - Bc[i]))

    return Control(traj.times, evaluator, label="omega_mu",
                   row_evaluator=lambda i: (A[i:] - A[i]) + np.sqrt((A[i:] - A[i]) * (Bc[i:] - Bc[i])))


HeatScalingRow = namedtuple("HeatScalingRow", ["depth", "sup_composite", "sup_apriori", "n_pairs"])


def u_squared_scaling_report(traj, gd, phi, p=None, max_depth=6):
    """Per dyadic depth, sup of |u²♮(φ)| / |φ|_3 divided by (ω_A + ω_μ)^{3/p}, and by
    sup|u|^2 ω_A^{3/p} + ω_μ ω_A^{(3-p)/p}; nan where a denominator vanishes."""
    p = gd.rp.p if p is None else p
    n_steps = len(traj) - 1
    depth_max = min(max_depth, int(np.floor(np.log2(n_steps)))) if n_steps >= 2 else 0
    if depth_max == 0:
        return []

    finest = dyadic_boundaries(n_steps, depth_max)
    omega_A = driver_control(gd, finest)
    where = {int(i): a for a, i in enumerate(finest)}
    mu = omega_mu(traj)
    phi_norm = traj.scale.sup_norm(phi, 3)

    rows = []
    for depth in range(1, depth_max + 1):
        bounds = dyadic_boundaries(n_steps, depth)
        comp, prior = [], []
        for i, j in zip(bounds[:-1], bounds[1:]):
            res = abs(u_squared_remainder(traj, gd, phi, traj.times[i], traj.times[j])) / phi_norm
            wA = omega_A.at(where[int(i)], where[int(j)])
            wm = mu.at(i, j)
            denom = (wA + wm) ** (3.0 / p)
            if denom > 0:
                comp.append(res / denom)
            sup_u = float(np.max(traj.l2_sq[i:j + 1]))
            denom = sup_u * wA ** (3.0 / p) + wm * wA ** ((3.0 - p) / p)
            if denom > 0:
                prior.append(res / denom)
        rows.append(HeatScalingRow(depth, max(comp, default=np.nan), max(prior, default=np.nan), len(bounds) - 1))
    return rows


def energy_kappa(p):
    return min(p, p / (3.0 - p))


def energy_omega1(omega_A, p):
    """ω1 = ω_A^{κ/p} + |t-s|^κ ω_A^{(3-p)κ/p} + ω_A^{(3-p)κ/p}, κ = min(p, p/(3-p))."""
    kappa = energy_kappa(p)
    W = np.maximum(omega_A.matrix(), 0.0)
    grid = omega_A.grid
    span = np.abs(grid[None, :] - grid[:, None])
    W1 = W ** (kappa / p) + span ** kappa * W ** ((3.0 - p) * kappa / p) + W ** ((3.0 - p) * kappa / p)
    return control_from_matrix(grid, np.triu(W1), label="omega1")


@dataclass
class EnergyReport:
    certificate: GronwallCertificate
    observed_sup: float
    C: float
    L: float
    kappa: float
    fitted: bool
    binding: dict
    check_indices: np.ndarray
    omega1_superadditivity: float
    omega1: Optional[Control] = field(default=None, repr=False)


def _energy_setup(traj, gd, p, max_points, norm="sup"):
    idx = coarse_subgrid(len(traj), max_points)
    omega_A = driver_control(gd, idx, norm=norm)
    omega1 = energy_omega1(omega_A, p)
    omega2 = control_from_matrix(omega1.grid, np.zeros((len(idx), len(idx))), label="zero")
    return idx, traj.energy[idx], omega1, omega2


def energy_bound_check(traj, gd, p=None, C=None, L=None, margin=1.0, max_points=65, min_intervals=4, tol=None,
                       norm="sup"):
    """Rough Gronwall certificate for the energy of a heat run, on a check grid of
    at most `max_points` solver times. Without C the smallest admissible constant
    on this run is fitted (times `margin`); without L the threshold is the largest
    one leaving `min_intervals` greedy intervals. `norm` picks the scale of ω_A
    as in `driver_control`."""
    p = gd.rp.p if p is None else p
    kappa = energy_kappa(p)
    idx, G, omega1, omega2 = _energy_setup(traj, gd, p, max_points, norm)

    if L is None:
        L = default_threshold(omega1, min_intervals=min_intervals)
    fitted = C is None
    if fitted:
        C = fit_constant(G, omega1, omega2, L, kappa, margin=margin)
        if not np.isfinite(C):
            warnings.warn("no finite constant satisfies the hypothesis on this run", RuntimeWarning)
            C = 1.0

    cert = gronwall_bound(GronwallInput(G, omega1, omega2, C, L, kappa), tol=tol)
    return EnergyReport(cert, cert.observed_sup, C, L, kappa, fitted, dict(gd.binding), idx,
                        superadditivity_defects(omega1)[1], omega1)


def calibrate_energy_constant(runs, p, margin=10.0, max_points=65, min_intervals=4):
    """Largest fitted constant over calibration runs [(traj, gd), ...], each run at
    its own default threshold and never below its resolution constant."""
    kappa = energy_kappa(p)
    C = 0.0
    for traj, gd in runs:
        _, G, omega1, omega2 = _energy_setup(traj, gd, p, max_points)
        L = default_threshold(omega1, min_intervals=min_intervals)
        C = max(C, fit_constant(G, omega1, omega2, L, kappa, margin=margin))
    return C
