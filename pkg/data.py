import logging
import os

import numpy as np

from fields import get_field
from rough_paths import (ParameterError, RoughPath, SampledPath, brownian_sample, check_p,
                         lift_piecewise_linear)
from variation import control_from_matrix

logger = logging.getLogger(__name__)

FMT = "%.17g"


def write_table_csv(filename, header, rows):
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    dirname = os.path.dirname(filename)
    if dirname:
        os.makedirs(dirname, exist_ok=True)
    np.savetxt(filename, rows, fmt=FMT, delimiter=",", header=",".join(header), comments="")


def read_table_csv(filename):
    logger.info("loading %s", filename)
    with open(filename) as f:
        header = f.readline().strip().split(",")
    rows = np.loadtxt(filename, delimiter=",", skiprows=1, ndmin=2)
    return header, rows


def write_path_csv(x, filename):
    header = ["t"] + [f"x_{k + 1}" for k in range(x.d)]
    write_table_csv(filename, header, np.column_stack([x.times, x.values]))


def read_path_csv(filename):
    _, rows = read_table_csv(filename)
    return SampledPath(rows[:, 0], rows[:, 1:])


def _rough_path_header(d):
    return (["s", "t"] + [f"X1_{a + 1}" for a in range(d)]
            + [f"X2_{a + 1}{b + 1}" for a in range(d) for b in range(d)])


def write_rough_path_csv(rp, filename, all_pairs=False):
    """Rows `s, t, X1, X2` (row-major). By default only the pairs (t_0, t_k),
    from which every other pair follows by Chen's relation."""
    d = rp.dim
    rows = []
    starts = range(len(rp) - 1) if all_pairs else [0]
    for i in starts:
        js = np.arange(i + 1, len(rp))
        x1 = np.array([rp.x1(i, j) for j in js]).reshape(-1, d)
        x2 = np.array([rp.x2(i, j) for j in js]).reshape(-1, d * d)
        rows.append(np.column_stack([np.full(len(js), rp.grid[i]), rp.grid[js], x1, x2]))
    write_table_csv(filename, _rough_path_header(d), np.vstack(rows))


def read_rough_path_csv(filename, p):
    """Rebuild a rough path from the (t_0, t_k) rows of a rough-path CSV."""
    p = check_p(p)
    header, rows = read_table_csv(filename)
    d = sum(1 for name in header if name.startswith("X1_"))
    t0 = rows[0, 0]
    prefix = rows[rows[:, 0] == t0]
    grid = np.concatenate([[t0], prefix[:, 1]])
    path = np.vstack([np.zeros((1, d)), prefix[:, 2:2 + d]])
    area = np.concatenate([np.zeros((1, d, d)), prefix[:, 2 + d:].reshape(-1, d, d)])
    return RoughPath.from_prefix(grid, path, area, p)


def write_control_csv(omega, filename):
    n = len(omega)
    rows = [(omega.grid[i], omega.grid[j], value)
            for i in range(n) for j, value in zip(range(i, n), omega.row(i))]
    write_table_csv(filename, ["s", "t", "omega"], rows)


def read_control_csv(filename):
    """Control from rows `s, t, omega`; missing pairs are zero."""
    _, rows = read_table_csv(filename)
    grid = np.unique(np.concatenate([rows[:, 0], rows[:, 1]]))
    table = np.zeros((len(grid), len(grid)))
    i = np.searchsorted(grid, rows[:, 0])
    j = np.searchsorted(grid, rows[:, 1])
    table[i, j] = rows[:, 2]
    return control_from_matrix(grid, table, label=os.path.basename(filename))


SMOOTH_DRIVERS = {
    "sin": lambda t: 0.5 * np.sin(2 * np.pi * t),
    "parabola": lambda t: np.column_stack([t, t ** 2]),
    "exp": lambda t: np.expm1(t),
}


def get_driver(spec, p, n=1024, T=1.0, d=1):
    """Sampled path and its lift from a driver spec:

    - `brownian:seed` or `brownian:seed,n,d`
    - `line:<slope>`: x_t = slope * t in every component
    - `smooth:<name>` with name in SMOOTH_DRIVERS
    - a CSV path file
    """
    name, _, arg = spec.partition(":")
    if name == "brownian":
        parts = [int(v) for v in arg.split(",")] if arg else [0]
        seed = parts[0]
        if len(parts) == 3:
            n, d = parts[1], parts[2]
        elif len(parts) != 1:
            raise ParameterError(f"expected brownian:seed or brownian:seed,n,d, got {spec}")
        x = brownian_sample(seed, n, d, T)
    elif name == "line":
        slope = float(arg) if arg else 1.0
        t = np.linspace(0.0, T, n + 1)
        x = SampledPath(t, slope * np.repeat(t[:, None], d, axis=1))
    elif name == "smooth":
        if arg not in SMOOTH_DRIVERS:
            raise ParameterError(f"unknown smooth driver {arg}, expected one of {sorted(SMOOTH_DRIVERS)}")
        t = np.linspace(0.0, T, n + 1)
        x = SampledPath(t, SMOOTH_DRIVERS[arg](t))
    elif os.path.isfile(spec):
        x = read_path_csv(spec)
    else:
        raise ParameterError(f"unknown driver {spec}")

    return x, lift_piecewise_linear(x, p)


def get_vector_field(name, N=1, d=1, param=None):
    # `custom-table:<csv>` reads knots and values from a two-column CSV
    if name.startswith("custom-table"):
        _, _, filename = name.partition(":")
        _, rows = read_table_csv(filename)
        return get_field("custom-table", table=(rows[:, 0], rows[:, 1]))
    return get_field(name, N, d, param)


def get_initial_datum(name, x):
    if name == "sin":
        return np.sin(2 * np.pi * x)
    elif name == "bump":
        return np.exp(-100.0 * (x - 0.5) ** 2)
    elif name == "zero":
        return np.zeros_like(x)
    elif os.path.isfile(name):
        _, rows = read_table_csv(name)
        u0 = rows[:, -1]
        if len(u0) != len(x):
            raise ParameterError(f"initial datum has {len(u0)} values for a grid of {len(x)}")
        return u0
    else:
        raise ParameterError(f"unknown initial datum {name}")


def get_velocity(spec, n_x, d=None):
    """`const:<v>` (or a bare number) in every component, or a CSV `x, V_1, ..., V_d`.
    Without `d` a constant has one component and a CSV as many as its V columns."""
    name, _, arg = spec.partition(":")
    if name == "const":
        return np.full((d or 1, n_x), float(arg))
    try:
        return np.full((d or 1, n_x), float(spec))
    except ValueError:
        pass
    if os.path.isfile(spec):
        _, rows = read_table_csv(spec)
        d = max(rows.shape[1] - 1, 1) if d is None else d
        if d > rows.shape[1] or len(rows) != n_x:
            raise ParameterError(f"velocity file {spec} has shape {rows.shape}, expected {n_x} rows "
                                 f"of x and {d} components")
        return rows[:, -d:].T.copy()
    raise ParameterError(f"unknown velocity field {spec}")
