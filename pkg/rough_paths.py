"""Sampled paths, p-rough paths and their piecewise-linear (geometric) lifts."""
from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    pass


class ParameterError(ValueError):
    pass


GRID_RTOL = 1e-12


def check_p(p, low=2.0, high=3.0):
    if not (low <= p < high):
        raise ParameterError(f"p={p} outside [{low}, {high})")
    return float(p)


def grid_index(grid, t):
    # exact grid membership up to rounding; off-grid times are not interpolated
    k = int(np.searchsorted(grid, t))
    for cand in (k - 1, k):
        if 0 <= cand < len(grid) and abs(grid[cand] - t) <= GRID_RTOL * max(1.0, abs(t)):
            return cand
    raise DomainError(f"t={t} is not a grid point")


@dataclass(frozen=True)
class SampledPath:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)

        if times.ndim != 1 or len(times) < 2:
            raise DomainError("a sampled path needs at least two sample times")
        if len(values) != len(times):
            raise DomainError(f"{len(values)} values for {len(times)} times")
        if np.any(np.diff(times) <= 0):
            raise DomainError("sample times must be strictly increasing")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise DomainError("sampled path contains non-finite entries")

        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def d(self):
        return self.values.shape[1]

    def __len__(self):
        return len(self.times)

    def index(self, t):
        return grid_index(self.times, t)


class RoughPath(object):
    """A pair (X1, X2) of two-index maps on the grid points of `grid`.

    `level1(i, j)` and `level2(i, j)` take grid indices. Paths built with
    `from_prefix` keep X1_{0k}, X2_{0k} and recover every other pair through
    Chen's relation, which also gives vectorized rows for the p-variation DP.
    """

    def __init__(self, grid, p, dim, level1, level2):
        self.grid = np.asarray(grid, dtype=float)
        self.grid.setflags(write=False)
        self.p = check_p(p)
        self.dim = dim
        self._level1 = level1
        self._level2 = level2
        self._path = None
        self._area = None

    @classmethod
    def from_prefix(cls, grid, path, area, p):
        path = np.array(path, dtype=float)
        area = np.array(area, dtype=float)
        assert area.shape == (len(path), path.shape[1], path.shape[1])
        path.setflags(write=False)
        area.setflags(write=False)

        def level1(i, j):
            return path[j] - path[i]

        def level2(i, j):
            return area[j] - area[i] - np.outer(path[i] - path[0], path[j] - path[i])

        rp = cls(grid, p, path.shape[1], level1, level2)
        rp._path = path
        rp._area = area
        return rp

    def __len__(self):
        return len(self.grid)

    def index(self, t):
        return grid_index(self.grid, t)

    def x1(self, i, j):
        return np.asarray(self._level1(i, j), dtype=float)

    def x2(self, i, j):
        return np.asarray(self._level2(i, j), dtype=float)

    def level1(self, s, t):
        return self.x1(self.index(s), self.index(t))

    def level2(self, s, t):
        return self.x2(self.index(s), self.index(t))

    def level1_row(self, i0, j):
        # X1_{t_i t_j} for i in [i0, j)
        if self._path is not None:
            return self._path[j] - self._path[i0:j]
        return np.array([self.x1(i, j) for i in range(i0, j)]).reshape(j - i0, self.dim)

    def level2_row(self, i0, j):
        if self._area is not None:
            left = self._path[i0:j] - self._path[0]
            inc = self._path[j] - self._path[i0:j]
            return self._area[j] - self._area[i0:j] - np.einsum("ia,ib->iab", left, inc)
        return np.array([self.x2(i, j) for i in range(i0, j)]).reshape(j - i0, self.dim, self.dim)

    def with_level2(self, level2):
        """Same level 1 and grid, different level 2 (used to build corrupted paths)."""
        return RoughPath(self.grid, self.p, self.dim, self._level1, level2)


def delta_path(g, s, t):
    """δg_st = g_t - g_s for a sampled path g at grid times s, t."""
    return g.values[g.index(t)] - g.values[g.index(s)]


def delta_2index(g, s, u, t):
    """δg_sut = g_st - g_su - g_ut for a two-index map g(s, t)."""
    if not (s <= u <= t):
        raise DomainError(f"unordered triple ({s}, {u}, {t})")
    return np.asarray(g(s, t)) - np.asarray(g(s, u)) - np.asarray(g(u, t))


def _compose_areas(values):
    # X2_{t0 t_k} by left-to-right Chen composition of the segment terms
    # (x_k - x_0) ⊗ δx_k + ½ δx_k ⊗ δx_k, Kahan-compensated
    n, d = values.shape
    inc = np.diff(values, axis=0)
    anchor = values[:-1] - values[0]
    terms = np.einsum("ka,kb->kab", anchor, inc) + 0.5 * np.einsum("ka,kb->kab", inc, inc)

    area = np.zeros((n, d, d))
    total = np.zeros((d, d))
    comp = np.zeros((d, d))
    for k in range(n - 1):
        y = terms[k] - comp
        s = total + y
        comp = (s - total) - y
        total = s
        area[k + 1] = total
    return area


def lift_piecewise_linear(x, p):
    """Exact iterated integrals of the piecewise-linear interpolant of `x`."""
    p = check_p(p)
    return RoughPath.from_prefix(x.times, x.values, _compose_areas(x.values), p)


def brownian_sample(seed, n, d, T):
    if n < 2:
        raise ParameterError(f"need n >= 2 steps, got {n}")
    if T <= 0:
        raise ParameterError(f"horizon T={T} must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    increments = rng.standard_normal((n, d)) * np.sqrt(T / n)
    values = np.vstack([np.zeros((1, d)), np.cumsum(increments, axis=0)])
    return SampledPath(np.linspace(0.0, T, n + 1), values)


def brownian_sample_lift(seed, n, d, T, p):
    """Brownian path with `n` Gaussian steps and its Stratonovich-consistent lift."""
    p = check_p(p)
    x = brownian_sample(seed, n, d, T)
    return x, lift_piecewise_linear(x, p)


def refine_midpoints(x):
    """Insert the midpoint of every segment; the piecewise-linear path is unchanged."""
    times = np.empty(2 * len(x) - 1)
    times[0::2] = x.times
    times[1::2] = 0.5 * (x.times[:-1] + x.times[1:])
    values = np.empty((2 * len(x) - 1, x.d))
    values[0::2] = x.values
    values[1::2] = 0.5 * (x.values[:-1] + x.values[1:])
    return SampledPath(times, values)


def _chen_defect_idx(rp, i, k, j):
    if not (i <= k <= j):
        raise DomainError(f"unordered triple of grid indices ({i}, {k}, {j})")
    delta = rp.x2(i, j) - rp.x2(i, k) - rp.x2(k, j)
    return float(np.linalg.norm(delta - np.outer(rp.x1(i, k), rp.x1(k, j))))


def chen_defect(rp, s, u, t):
    return _chen_defect_idx(rp, rp.index(s), rp.index(u), rp.index(t))


def geometricity_defect(rp, s, t):
    x1 = rp.level1(s, t)
    x2 = rp.level2(s, t)
    sym = 0.5 * (x2 + x2.T)
    return float(np.linalg.norm(sym - 0.5 * np.outer(x1, x1)))


def lift_defects(rp, n_triples=2000, seed=0):
    """Worst relative Chen and geometricity defects of a rough path.

    Chen is checked on all consecutive triples plus `n_triples` random ones;
    geometricity on every grid pair. Defects are scaled by 1 + |X1|^2 + |X2|.
    """
    n = len(rp)
    rng = np.random.Generator(np.random.PCG64(seed))
    triples = [(k, k + 1, k + 2) for k in range(n - 2)]
    if n >= 3:
        picks = np.sort(rng.integers(0, n, size=(n_triples, 3)), axis=1)
        triples.extend(tuple(int(v) for v in row) for row in picks)

    worst_chen = 0.0
    for i, k, j in triples:
        scale = 1.0 + np.linalg.norm(rp.x1(i, j)) ** 2 + np.linalg.norm(rp.x2(i, j))
        worst_chen = max(worst_chen, _chen_defect_idx(rp, i, k, j) / scale)

    worst_geo = 0.0
    for j in range(1, n):
        x1 = rp.level1_row(0, j)
        x2 = rp.level2_row(0, j)
        sym = 0.5 * (x2 + np.swapaxes(x2, 1, 2))
        defect = np.linalg.norm(sym - 0.5 * np.einsum("ia,ib->iab", x1, x1), axis=(1, 2))
        scale = 1.0 + np.sum(x1 ** 2, axis=1) + np.linalg.norm(x2, axis=(1, 2))
        worst_geo = max(worst_geo, float(np.max(defect / scale)))

    return worst_chen, worst_geo
