"""Step-2 (Davie) scheme for dy = f(y) dX and its remainder

    y♮_st = δy_st - f(y_s) X1_st - f2(y_s) X2_st.
"""
import warnings
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

from fields import VectorField, expansion
from rough_paths import DomainError, ParameterError, RoughPath, SampledPath
from scheme_utils import dyadic_boundaries, as_subgrid
from variation import rough_path_control


class InconsistencyError(RuntimeError):
    pass


@dataclass
class RDESolution:
    grid: np.ndarray
    indices: np.ndarray
    y: np.ndarray
    truncated: bool = False
    diagnostic: str = ""
    rp: RoughPath = field(default=None, repr=False)
    vf: VectorField = field(default=None, repr=False)

    def __len__(self):
        return len(self.grid)

    def position(self, i):
        # position in the solution grid of rough-path grid index i
        k = int(np.searchsorted(self.indices, i))
        if k >= len(self.indices) or self.indices[k] != i:
            raise DomainError(f"grid index {i} is not on the solution subgrid")
        return k

    def remainder(self, s, t):
        return remainder(self, self.vf, self.rp, s, t)


def _check_state(vf, y_in):
    y = np.asarray(y_in, dtype=float).reshape(-1)
    if len(y) != vf.N:
        raise ParameterError(f"initial state of size {len(y)} for a field on R^{vf.N}")
    return y


def _check_driver(vf, rp):
    if rp.dim != vf.d:
        raise ParameterError(f"driver of dimension {rp.dim} for a field expecting {vf.d}")


def solve_step2(vf, rp, y_in, subgrid=None):
    """y_{k+1} = y_k + f(y_k) X1 + f2(y_k) X2 over consecutive subgrid points.

    `subgrid` holds indices into the rough-path grid (all of them by default).
    A state leaving the working box stops the run; the truncated solution is
    returned with a diagnostic.
    """
    _check_driver(vf, rp)
    indices = as_subgrid(len(rp), subgrid)
    y = np.empty((len(indices), vf.N))
    y[0] = _check_state(vf, y_in)

    for k in range(len(indices) - 1):
        i, j = indices[k], indices[k + 1]
        y[k + 1] = y[k] + expansion(vf, y[k], rp.x1(i, j), rp.x2(i, j))
        if not vf.in_box(y[k + 1]):
            msg = f"state left the working box at t={rp.grid[j]:.6g}"
            warnings.warn(msg, RuntimeWarning)
            return RDESolution(rp.grid[indices[:k + 1]], indices[:k + 1], y[:k + 1], True, msg, rp, vf)

    return RDESolution(rp.grid[indices], indices, y, rp=rp, vf=vf)


def _remainder_idx(sol, vf, rp, i, j):
    ys = sol.y[sol.position(i)]
    yt = sol.y[sol.position(j)]
    return yt - ys - expansion(vf, ys, rp.x1(i, j), rp.x2(i, j))


def remainder(sol, vf, rp, s, t):
    return _remainder_idx(sol, vf, rp, rp.index(s), rp.index(t))


ScalingRow = namedtuple("ScalingRow", ["depth", "sup_ratio", "n_pairs"])


def remainder_scaling_report(sol, vf, rp, p=None, max_depth=6, omega=None, atol=1e-14):
    """sup |y♮_st| / ω(s, t)^(3/p) over the dyadic pairs of each depth.

    ω defaults to the control of `rp`, the level-1 p-variation control plus the
    level-2 p/2 control. Depths run from 1 to min(max_depth, log2 of the number
    of solution steps).
    """
    p = rp.p if p is None else p
    omega = rough_path_control(rp) if omega is None else omega
    n_steps = len(sol) - 1
    depth_max = min(max_depth, int(np.floor(np.log2(n_steps)))) if n_steps >= 2 else 0

    rows = []
    for depth in range(1, depth_max + 1):
        bounds = sol.indices[dyadic_boundaries(n_steps, depth)]
        worst = 0.0
        for i, j in zip(bounds[:-1], bounds[1:]):
            res = float(np.linalg.norm(_remainder_idx(sol, vf, rp, i, j)))
            w = omega.at(i, j)
            if w <= 0:
                if res > atol * (1.0 + float(np.max(np.abs(sol.y)))):
                    raise InconsistencyError(
                        f"remainder {res:.3g} on [{rp.grid[i]:.6g}, {rp.grid[j]:.6g}] where the control vanishes")
                continue
            worst = max(worst, res / w ** (3.0 / p))
        rows.append(ScalingRow(depth, worst, len(bounds) - 1))
    return rows


def ode_oracle(vf, x, y_in, substeps=8):
    """Classical RK4 solution of dy = f(y) dx along the piecewise-linear
    interpolant of the sampled path `x`, with `substeps` steps per segment."""
    if not isinstance(x, SampledPath):
        raise ParameterError("ode_oracle expects a SampledPath driver")
    if x.d != vf.d:
        raise ParameterError(f"driver of dimension {x.d} for a field expecting {vf.d}")

    y = np.empty((len(x), vf.N))
    y[0] = _check_state(vf, y_in)
    for k in range(len(x) - 1):
        h = (x.times[k + 1] - x.times[k]) / substeps
        v = (x.values[k + 1] - x.values[k]) / (x.times[k + 1] - x.times[k])
        state = y[k]
        for _ in range(substeps):
            k1 = vf(state) @ v
            k2 = vf(state + 0.5 * h * k1) @ v
            k3 = vf(state + 0.5 * h * k2) @ v
            k4 = vf(state + h * k3) @ v
            state = state + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        y[k + 1] = state
    return y
