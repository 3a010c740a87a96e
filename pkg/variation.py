"""p-variation of paths and two-index maps, and the controls they induce.

All suprema run over partitions made of grid points. The dynamic program is

    best[j] = max_{i<j} best[i] + |g_{t_i t_j}|^q

started at the left end of the interval; best[j] is then the q-variation (to the
power q) over [t_start, t_j] for every j at once.
"""
import itertools
import threading
from collections import namedtuple
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from rough_paths import ParameterError, DomainError, SampledPath, grid_index


SUPERADDITIVE_RTOL = 1e-10


def _check_exponent(q):
    if q < 1:
        raise ParameterError(f"variation exponent {q} must be >= 1")
    return float(q)


def _row_norms(values):
    values = np.asarray(values, dtype=float)
    return np.sqrt(np.sum(values.reshape(len(values), -1) ** 2, axis=1))


class TwoIndexMap(object):
    """A map (t_i, t_j) -> value on grid pairs, evaluated row by row.

    `row(i0, j)` returns the stacked values g(t_i, t_j) for i in [i0, j).
    """

    def __init__(self, grid, row, label=""):
        self.grid = np.asarray(grid, dtype=float)
        self.row = row
        self.label = label

    def __len__(self):
        return len(self.grid)

    def __call__(self, i, j):
        return self.row(i, j)[0]

    @classmethod
    def path_increments(cls, x):
        values = x.values

        def row(i0, j):
            return values[j] - values[i0:j]

        return cls(x.times, row, label="increments")

    @classmethod
    def level1(cls, rp):
        return cls(rp.grid, rp.level1_row, label="X1")

    @classmethod
    def level2(cls, rp):
        return cls(rp.grid, rp.level2_row, label="X2")

    @classmethod
    def from_function(cls, grid, fn, label=""):
        # fn takes times (s, t)
        grid = np.asarray(grid, dtype=float)

        def row(i0, j):
            return np.array([fn(grid[i], grid[j]) for i in range(i0, j)], dtype=float)

        return cls(grid, row, label=label)

    @classmethod
    def from_matrix(cls, grid, table, label=""):
        table = np.asarray(table, dtype=float)

        def row(i0, j):
            return table[i0:j, j]

        return cls(grid, row, label=label)


def extend_pvar_dp(row, i0, j_end, q, best=None):
    """Run (or continue) the partition DP from grid index i0 up to j_end."""
    m = j_end - i0 + 1
    out = np.zeros(m)
    start = 1
    if best is not None:
        start = len(best)
        out[:start] = best
    for k in range(start, m):
        w = _row_norms(row(i0, i0 + k)) ** q
        out[k] = np.max(out[:k] + w)
    return out


def pvar_2index(g, q, s=None, t=None):
    """q-variation of a two-index map over [s, t] (whole grid by default)."""
    q = _check_exponent(q)
    i0 = 0 if s is None else grid_index(g.grid, s)
    i1 = len(g) - 1 if t is None else grid_index(g.grid, t)
    if i1 < i0:
        raise DomainError(f"interval [{s}, {t}] is reversed")
    if i1 == i0:
        return 0.0
    best = extend_pvar_dp(g.row, i0, i1, q)
    return float(best[-1] ** (1.0 / q))


def pvar_path(g, p, s=None, t=None):
    """p-variation of a sampled path over [s, t]."""
    if not isinstance(g, SampledPath):
        raise ParameterError("pvar_path expects a SampledPath")
    return pvar_2index(TwoIndexMap.path_increments(g), p, s, t)


def pvar_bruteforce(values, p):
    """Exhaustive enumeration over all partitions; only for short paths."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    n = len(values)
    assert n <= 16, "exhaustive enumeration is exponential in the path length"

    best = 0.0
    interior = range(1, n - 1)
    for size in range(n - 1):
        for points in itertools.combinations(interior, size):
            idx = (0,) + points + (n - 1,)
            total = sum(np.linalg.norm(values[b] - values[a]) ** p for a, b in zip(idx[:-1], idx[1:]))
            best = max(best, total)
    return best ** (1.0 / p)


class PvarTable(object):
    """Memoized p-th powers of the q-variation over every grid subinterval.

    Rows are started lazily and extended only as far as they are queried.
    A lock serializes extension so concurrent readers see identical values.
    """

    def __init__(self, g, q):
        self.g = g
        self.q = _check_exponent(q)
        self._rows = {}
        self._lock = threading.Lock()

    def __len__(self):
        return len(self.g)

    def at(self, i, j):
        if j < i:
            raise DomainError(f"reversed grid pair ({i}, {j})")
        if i == j:
            return 0.0
        with self._lock:
            best = self._rows.get(i)
            if best is None or len(best) <= j - i:
                best = extend_pvar_dp(self.g.row, i, j, self.q, best)
                self._rows[i] = best
            return float(best[j - i])

    def row(self, i):
        n = len(self)
        if i >= n - 1:
            return np.zeros(1)
        self.at(i, n - 1)
        with self._lock:
            return np.array(self._rows[i])


@dataclass
class Control:
    """A superadditive map on ordered grid pairs, evaluated by grid index."""
    grid: np.ndarray
    evaluator: Callable[[int, int], float]
    label: str = ""
    row_evaluator: Optional[Callable[[int], np.ndarray]] = None

    def __len__(self):
        return len(self.grid)

    def at(self, i, j):
        return float(self.evaluator(i, j))

    def __call__(self, s, t):
        return self.at(grid_index(self.grid, s), grid_index(self.grid, t))

    def row(self, i):
        if self.row_evaluator is not None:
            return np.asarray(self.row_evaluator(i), dtype=float)
        return np.array([self.at(i, j) for j in range(i, len(self))])

    def matrix(self):
        n = len(self)
        table = np.zeros((n, n))
        for i in range(n):
            table[i, i:] = self.row(i)
        return table


def control_from_pvar(g, p, kind="path"):
    """ω(s, t) = (p-variation of g over [s, t])^p, backed by a PvarTable."""
    if kind == "path":
        gmap = TwoIndexMap.path_increments(g)
    elif kind == "2index":
        gmap = g
    else:
        raise ParameterError(f"unknown control kind {kind}")

    table = PvarTable(gmap, p)
    return Control(gmap.grid, table.at, label=f"pvar({gmap.label},{p:g})", row_evaluator=table.row)


def control_from_matrix(grid, table, label=""):
    table = np.asarray(table, dtype=float)
    return Control(np.asarray(grid, dtype=float), lambda i, j: table[i, j], label=label,
                   row_evaluator=lambda i: table[i, i:])


def control_from_function(grid, fn, label=""):
    grid = np.asarray(grid, dtype=float)
    return Control(grid, lambda i, j: fn(grid[i], grid[j]), label=label)


def control_from_raw(grid, raw, label=""):
    """Smallest control dominating a nonnegative two-index table `raw` on consecutive
    pieces: ω(s, t) = sup over partitions of the sum of raw over the pieces."""
    return control_from_pvar(TwoIndexMap.from_matrix(grid, np.abs(raw), label=label), 1.0, kind="2index")


def rough_path_control(rp):
    """ω = ω_{X1, p} + ω_{X2, p/2}, the control of a p-rough path."""
    c1 = control_from_pvar(TwoIndexMap.level1(rp), rp.p, kind="2index")
    c2 = control_from_pvar(TwoIndexMap.level2(rp), rp.p / 2.0, kind="2index")
    return Control(rp.grid, lambda i, j: c1.at(i, j) + c2.at(i, j), label=f"rough_path({rp.p:g})",
                   row_evaluator=lambda i: c1.row(i) + c2.row(i))


def superadditivity_defects(omega):
    """Worst signed defect ω(s,u) + ω(u,t) - ω(s,t) over all grid triples, both
    absolute and scaled by 1 + ω(s,t)."""
    table = omega.matrix()
    n = len(table)
    worst, worst_rel = -np.inf, -np.inf
    for u in range(1, n - 1):
        defect = table[:u, u][:, None] + table[u, u + 1:][None, :] - table[:u, u + 1:]
        worst = max(worst, float(np.max(defect)))
        worst_rel = max(worst_rel, float(np.max(defect / (1.0 + table[:u, u + 1:]))))
    if n < 3:
        worst = worst_rel = 0.0
    return worst, worst_rel


def check_superadditive(omega):
    return superadditivity_defects(omega)[0]


def is_control(omega, rtol=SUPERADDITIVE_RTOL):
    diag = np.array([omega.at(i, i) for i in range(len(omega))])
    return superadditivity_defects(omega)[1] <= rtol and np.all(np.abs(diag) <= rtol)


Interval = namedtuple("Interval", ["start", "end", "omega", "degenerate"])


def greedy_partition(omega, L):
    """Maximal consecutive intervals with ω <= L, extended greedily from the left.

    A single grid step already above L is returned flagged as degenerate; the grid
    has to be refined before a scheme can work on it.
    """
    if L <= 0:
        raise ParameterError(f"threshold L={L} must be positive")

    grid = omega.grid
    n = len(grid)
    intervals = []
    i = 0
    while i < n - 1:
        j = i + 1
        value = omega.at(i, j)
        if value > L:
            intervals.append(Interval(grid[i], grid[j], value, True))
            i = j
            continue
        while j + 1 < n:
            nxt = omega.at(i, j + 1)
            if nxt > L:
                break
            j, value = j + 1, nxt
        intervals.append(Interval(grid[i], grid[j], value, False))
        i = j
    return intervals


def finest_scale(omega):
    # regularity proxy: largest value on a single grid step
    return max(omega.at(i, i + 1) for i in range(len(omega) - 1))


def is_regular(omega, tol):
    return finest_scale(omega) <= tol
