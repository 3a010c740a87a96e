"""The rough Gronwall lemma as a computable certificate.

If G >= 0 satisfies, for every grid pair s < t with ω1(s, t) <= L,

    δG_st <= C (sup_{r<=t} G_r) ω1(s, t)^(1/κ) + ω2(s, t),

then sup_{t<=T} G_t <= 2 exp(ω1(0,T)/(αL)) {G_0 + sup_t ω2(0,t) exp(-ω1(0,t)/(αL))}
with α = min(1, 1/(L (2Ce^2)^κ)).
"""
import json
import math
from collections import namedtuple
from dataclasses import dataclass, asdict

import numpy as np

from rough_paths import ParameterError, grid_index
from variation import Control, greedy_partition, finest_scale


def alpha(C, L, kappa):
    if C <= 0 or L <= 0:
        raise ParameterError(f"C={C} and L={L} must be positive")
    if kappa < 1:
        raise ParameterError(f"kappa={kappa} must be >= 1")
    with np.errstate(over="ignore"):
        denom = L * np.power(2.0 * C * math.exp(2.0), kappa)
    return float(min(1.0, 1.0 / denom))


def default_tolerance(G):
    return 1e-9 * (1.0 + float(np.max(G)))


@dataclass
class GronwallInput:
    G: np.ndarray
    omega1: Control
    omega2: Control
    C: float
    L: float
    kappa: float

    def __post_init__(self):
        self.G = np.asarray(self.G, dtype=float)
        if len(self.G) != len(self.omega1) or len(self.G) != len(self.omega2):
            raise ParameterError("G, omega1 and omega2 must live on the same grid")
        if np.any(self.G < 0):
            raise ParameterError("G must be nonnegative")
        alpha(self.C, self.L, self.kappa)

    @property
    def grid(self):
        return self.omega1.grid


@dataclass
class GronwallCertificate:
    alpha: float
    bound: float
    hypothesis_worst_defect: float
    binding_pairs_checked: int
    pairs_skipped: int
    applicable: bool
    observed_sup: float
    tol: float
    C: float
    L: float
    kappa: float
    omega1_total: float
    n_intervals: int
    degenerate: bool

    def as_text(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True)


HypothesisCheck = namedtuple("HypothesisCheck", ["worst_defect", "pairs_checked", "pairs_skipped", "worst_pair"])


def _pair_tables(inp):
    G = inp.G
    W1 = np.maximum(inp.omega1.matrix(), 0.0)
    W2 = inp.omega2.matrix()
    sup_G = np.maximum.accumulate(G)
    dG = G[None, :] - G[:, None]
    upper = np.triu(np.ones_like(W1, dtype=bool), k=1)
    eligible = upper & (W1 <= inp.L)
    return dG, W1, W2, sup_G, upper, eligible


def check_hypothesis(inp):
    """Worst δG_st - C sup_{r<=t} G_r ω1^(1/κ) - ω2 over grid pairs with ω1 <= L."""
    dG, W1, W2, sup_G, upper, eligible = _pair_tables(inp)
    defect = dG - inp.C * sup_G[None, :] * W1 ** (1.0 / inp.kappa) - W2

    checked = int(np.sum(eligible))
    skipped = int(np.sum(upper)) - checked
    if checked == 0:
        return HypothesisCheck(-np.inf, 0, skipped, None)

    masked = np.where(eligible, defect, -np.inf)
    s, t = np.unravel_index(np.argmax(masked), masked.shape)
    return HypothesisCheck(float(masked[s, t]), checked, skipped, (int(s), int(t)))


def gronwall_bound(inp, T=None, tol=None):
    tol = default_tolerance(inp.G) if tol is None else tol
    k = len(inp.G) - 1 if T is None else grid_index(inp.grid, T)

    a = alpha(inp.C, inp.L, inp.kappa)
    aL = a * inp.L
    w1 = inp.omega1.row(0)[:k + 1]
    w2 = inp.omega2.row(0)[:k + 1]
    exponent = w1[k] / aL
    inner = inp.G[0] + float(np.max(w2 * np.exp(-w1 / aL)))
    if inner == 0.0:
        bound = 0.0
    elif exponent > 709.0:
        # exp overflows double precision
        bound = np.inf
    else:
        bound = 2.0 * math.exp(exponent) * inner

    check = check_hypothesis(inp)
    intervals = greedy_partition(inp.omega1, inp.L)
    return GronwallCertificate(
        alpha=a,
        bound=float(bound),
        hypothesis_worst_defect=check.worst_defect,
        binding_pairs_checked=check.pairs_checked,
        pairs_skipped=check.pairs_skipped,
        applicable=bool(check.worst_defect <= tol),
        observed_sup=float(np.max(inp.G[:k + 1])),
        tol=tol,
        C=inp.C,
        L=inp.L,
        kappa=inp.kappa,
        omega1_total=float(w1[k]),
        n_intervals=len(intervals),
        degenerate=any(iv.degenerate for iv in intervals),
    )


def verify(inp, T=None, tol=None):
    cert = gronwall_bound(inp, T=T, tol=tol)
    ok = cert.applicable and cert.observed_sup <= cert.bound + cert.tol
    return ok, cert


def resolution_constant(G, omega1, L, kappa):
    """Smallest C whose term C sup G ω1^(1/κ) reaches the check tolerance on some
    eligible pair. Constants below it are indistinguishable from zero; returns 0
    when no eligible pair carries a positive rate."""
    inp = GronwallInput(G, omega1, omega1, 1.0, L, kappa)
    _, W1, _, sup_G, _, eligible = _pair_tables(inp)
    rate = sup_G[None, :] * W1 ** (1.0 / kappa)
    top = float(np.max(np.where(eligible, rate, 0.0), initial=0.0))
    return default_tolerance(G) / top if top > 0 else 0.0


def fit_constant(G, omega1, omega2, L, kappa, margin=1.0, floor=None):
    """Smallest C for which the hypothesis holds on this run (times `margin`),
    never below `floor`. The floor defaults to the resolution constant of the run.

    Returns inf when some eligible pair grows while ω1 vanishes on it.
    """
    inp = GronwallInput(G, omega1, omega2, 1.0, L, kappa)
    dG, W1, W2, sup_G, upper, eligible = _pair_tables(inp)
    tol = default_tolerance(inp.G)
    if floor is None:
        floor = resolution_constant(G, omega1, L, kappa) or 1e-12

    excess = dG - W2
    rate = sup_G[None, :] * W1 ** (1.0 / kappa)
    positive = eligible & (rate > 0)
    if np.any(eligible & (rate <= 0) & (excess > tol)):
        return np.inf
    if not np.any(positive):
        return floor
    needed = float(np.max(np.where(positive, excess / np.where(positive, rate, 1.0), 0.0)))
    return max(needed * margin, floor)


def default_threshold(omega, min_intervals=4, precision=1e-6):
    """Largest L >= the finest grid scale whose greedy partition still has at least
    `min_intervals` pieces, found by bisection."""
    total = omega.at(0, len(omega) - 1)
    if total <= 0:
        return 1.0

    L_low = max(finest_scale(omega), total * 1e-12)
    L_high = total
    if len(greedy_partition(omega, L_low)) < min_intervals:
        return L_low

    while L_high - L_low > precision * total:
        L_mid = (L_high + L_low) / 2
        if len(greedy_partition(omega, L_mid)) >= min_intervals:
            L_low = L_mid
        else:
            L_high = L_mid

    return L_low


def saturating_family(omega1, omega2, C, L, kappa, G0=1.0, iters=40):
    """A path G growing at the largest uniform fraction θ of the hypothesis rate
    on each grid step for which the hypothesis still holds on every grid pair."""

    def build(theta):
        G = np.empty(len(omega1))
        G[0] = G0
        for i in range(len(G) - 1):
            w1 = omega1.at(i, i + 1)
            step = C * np.max(G[:i + 1]) * w1 ** (1.0 / kappa) + omega2.at(i, i + 1) if w1 <= L else 0.0
            G[i + 1] = G[i] + theta * step
        return G

    def passes(G):
        check = check_hypothesis(GronwallInput(G, omega1, omega2, C, L, kappa))
        return check.worst_defect <= 1e-12 * (1.0 + np.max(G))

    G_high = build(1.0)
    if passes(G_high):
        return G_high, 1.0

    theta_low, theta_high = 0.0, 1.0
    for _ in range(iters):
        theta_mid = (theta_low + theta_high) / 2
        if passes(build(theta_mid)):
            theta_low = theta_mid
        else:
            theta_high = theta_mid

    return build(theta_low), theta_low
