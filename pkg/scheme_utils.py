from collections import namedtuple

import numpy as np

from rough_paths import DomainError, ParameterError


ConvergenceRow = namedtuple("ConvergenceRow", ["h", "error", "order"])


def as_subgrid(n, subgrid=None):
    # indices into a grid of n points; defaults to the whole grid
    if subgrid is None:
        return np.arange(n)
    idx = np.asarray(subgrid, dtype=int)
    if idx.ndim != 1 or len(idx) < 2:
        raise DomainError("a subgrid needs at least two points")
    if np.any(np.diff(idx) <= 0) or idx[0] < 0 or idx[-1] >= n:
        raise DomainError(f"subgrid must be strictly increasing indices in [0, {n})")
    return idx


def stride_subgrid(n, stride):
    """Every `stride`-th grid index, always ending at the last point."""
    if stride < 1:
        raise ParameterError(f"stride {stride} must be >= 1")
    idx = np.arange(0, n, stride)
    if idx[-1] != n - 1:
        idx = np.append(idx, n - 1)
    return idx


def coarse_subgrid(n, max_points):
    # at most `max_points` (nearly) evenly spaced grid indices, both ends included
    return np.unique(np.round(np.linspace(0, n - 1, min(max_points, n))).astype(int))


def dyadic_boundaries(n_steps, depth):
    """Positions j * n_steps / 2^depth (rounded, deduplicated) for j = 0..2^depth."""
    pos = np.round(np.arange(2 ** depth + 1) * n_steps / 2 ** depth).astype(int)
    return np.unique(pos)


def empirical_orders(hs, errors):
    # consecutive log-ratio orders; nan where an error vanishes
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(errors[:-1] / errors[1:]) / np.log(hs[:-1] / hs[1:])


def fitted_order(hs, errors):
    """Least-squares slope of log(error) against log(h)."""
    errors = np.asarray(errors, dtype=float)
    if np.any(errors <= 0):
        return np.nan
    slope, _ = np.polyfit(np.log(hs), np.log(errors), 1)
    return float(slope)


def convergence_table(hs, errors):
    orders = empirical_orders(hs, errors)
    rows = [ConvergenceRow(float(hs[0]), float(errors[0]), np.nan)]
    rows.extend(ConvergenceRow(float(h), float(e), float(o)) for h, e, o in zip(hs[1:], errors[1:], orders))
    return rows


def sup_interp_error(times, values, exact, eval_times):
    """sup over `eval_times` of |linear interpolant of (times, values) - exact(t)|."""
    approx = np.interp(eval_times, times, np.asarray(values, dtype=float).reshape(-1))
    return float(np.max(np.abs(approx - exact(eval_times))))


def decreasing_in_trend(values, growth=1.2, final_ratio=0.2):
    """Each entry at most `growth` times the previous, last at most
    `final_ratio` times the first (all-zero tables pass)."""
    values = np.asarray(values, dtype=float)
    if np.all(values == 0):
        return True
    steps_ok = np.all(values[1:] <= growth * values[:-1])
    return bool(steps_ok and values[-1] <= final_ratio * values[0])
