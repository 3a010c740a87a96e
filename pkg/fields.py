from collections import namedtuple

import numpy as np
from scipy.interpolate import CubicSpline

from rough_paths import ParameterError


FieldBounds = namedtuple("FieldBounds", ["f", "df", "d2f"])


class VectorField(object):
    """f: R^N -> L(R^d; R^N), returned as an (N, d) matrix, with its derivative
    df[a, i, b] = d f_{a i} / d y_b.

    `box` is the working box (lo, hi) applied to every coordinate; `bounds` are
    sup-norms of f, f', f'' on it, supplied or estimated by sampling.
    """

    def __init__(self, N=1, d=1, box=None, bounds=None, name=""):
        self.N = N
        self.d = d
        self.box = box
        self.bounds = bounds
        self.name = name

    def f(self, y):
        raise NotImplementedError

    def df(self, y):
        raise NotImplementedError

    def __call__(self, y):
        return self.f(np.asarray(y, dtype=float).reshape(self.N))

    def derivative(self, y):
        return self.df(np.asarray(y, dtype=float).reshape(self.N))

    def in_box(self, y):
        if not np.all(np.isfinite(y)):
            return False
        if self.box is None:
            return True
        lo, hi = self.box
        return bool(np.all(y >= lo) and np.all(y <= hi))


class ConstantField(VectorField):
    def __init__(self, N=1, d=1, value=1.0, **kwargs):
        super(ConstantField, self).__init__(N, d, name=f"constant({value:g})", **kwargs)
        self.value = value

    def f(self, y):
        return np.full((self.N, self.d), self.value)

    def df(self, y):
        return np.zeros((self.N, self.d, self.N))


class LinearField(VectorField):
    # f_{a i}(y) = scale * y_a
    def __init__(self, N=1, d=1, scale=1.0, **kwargs):
        super(LinearField, self).__init__(N, d, name=f"linear({scale:g})", **kwargs)
        self.scale = scale

    def f(self, y):
        return self.scale * np.repeat(y.reshape(-1, 1), self.d, axis=1)

    def df(self, y):
        eye = np.eye(self.N) * self.scale
        return np.repeat(eye[:, None, :], self.d, axis=1)


class SinField(VectorField):
    # f_{a i}(y) = sin(y_a + phase); phase = π/2 gives the cosine field
    def __init__(self, N=1, d=1, phase=0.0, **kwargs):
        super(SinField, self).__init__(N, d, name=f"sin({phase:g})", **kwargs)
        self.phase = phase

    def f(self, y):
        return np.repeat(np.sin(y + self.phase).reshape(-1, 1), self.d, axis=1)

    def df(self, y):
        diag = np.diag(np.cos(y + self.phase))
        return np.repeat(diag[:, None, :], self.d, axis=1)


class TableField(VectorField):
    """Scalar field (N = d = 1) given by values on knots, cubic-spline interpolated."""

    def __init__(self, knots, values, **kwargs):
        knots = np.asarray(knots, dtype=float)
        box = kwargs.pop("box", (knots[0], knots[-1]))
        super(TableField, self).__init__(1, 1, box=box, name="custom-table", **kwargs)
        self.spline = CubicSpline(knots, np.asarray(values, dtype=float))
        self.dspline = self.spline.derivative()

    def f(self, y):
        return np.array([[float(self.spline(y[0]))]])

    def df(self, y):
        return np.array([[[float(self.dspline(y[0]))]]])


FIELDS = {
    "constant": ConstantField,
    "linear": LinearField,
    "sin": SinField,
}


def get_field(name, N=1, d=1, param=None, table=None, box=None):
    if name == "custom-table":
        if table is None:
            raise ParameterError("custom-table field needs a (knots, values) table")
        knots, values = table
        return TableField(knots, values)
    if name not in FIELDS:
        raise ParameterError(f"unknown field {name}, expected one of {sorted(FIELDS) + ['custom-table']}")

    kwargs = {"box": box}
    if param is not None:
        key = {"constant": "value", "linear": "scale", "sin": "phase"}[name]
        kwargs[key] = param
    return FIELDS[name](N, d, **kwargs)


def f2(vf, y):
    """f2[i, j] = Df_i · f_j, the derivative of the i-th column in direction f_j.

    Shape (d, d, N). The step-2 expansion contracts it as sum_ij f2[i, j] X2[j, i],
    since X2[j, i] = ∫ δx^j dx^i.
    """
    F = vf(y)
    dF = vf.derivative(y)
    return np.einsum("aib,bj->ija", dF, F)


def expansion(vf, y, x1, x2):
    # f(y) X1 + f2(y) X2
    return vf(y) @ x1 + np.einsum("ija,ji->a", f2(vf, y), x2)


def _sample_box(vf, rng, n):
    lo, hi = vf.box if vf.box is not None else (-10.0, 10.0)
    return rng.uniform(lo, hi, size=(n, vf.N))


def check_derivative(vf, n_points=20, seed=0, step=1e-6, rtol=1e-5):
    """Worst relative mismatch between df and central finite differences of f."""
    rng = np.random.Generator(np.random.PCG64(seed))
    worst = 0.0
    for y in _sample_box(vf, rng, n_points):
        fd = np.empty((vf.N, vf.d, vf.N))
        for b in range(vf.N):
            e = np.zeros(vf.N)
            e[b] = step
            fd[:, :, b] = (vf(y + e) - vf(y - e)) / (2 * step)
        exact = vf.derivative(y)
        worst = max(worst, float(np.max(np.abs(fd - exact)) / (1.0 + np.max(np.abs(exact)))))
    return worst, worst <= rtol


def estimate_bounds(vf, n_samples=10000, seed=0, step=1e-5):
    """Sup-norms of f, f', f'' over the working box by random sampling."""
    if vf.bounds is not None:
        return vf.bounds

    rng = np.random.Generator(np.random.PCG64(seed))
    sup_f = sup_df = sup_d2f = 0.0
    for y in _sample_box(vf, rng, n_samples):
        sup_f = max(sup_f, float(np.max(np.abs(vf(y)))))
        dF = vf.derivative(y)
        sup_df = max(sup_df, float(np.max(np.abs(dF))))
        for b in range(vf.N):
            e = np.zeros(vf.N)
            e[b] = step
            d2 = (vf.derivative(y + e) - vf.derivative(y - e)) / (2 * step)
            sup_d2f = max(sup_d2f, float(np.max(np.abs(d2))))

    vf.bounds = FieldBounds(sup_f, sup_df, sup_d2f)
    return vf.bounds
