"""Acceptance criteria as runnable experiments, and the `smoke` / `acceptance` suites.

Every criterion writes its table as CSV into the output directory and returns a
CriterionResult. Output files contain no timings, so repeated runs are byte-identical.
"""
import csv
import hashlib
import math
import os
import tempfile
from collections import namedtuple

import numpy as np
from tqdm import tqdm

from data import get_driver, get_initial_datum, write_table_csv
from fields import ConstantField, LinearField, SinField
from gronwall import GronwallInput, alpha, saturating_family, verify
from log import Logger
from rde import ode_oracle, remainder_scaling_report, solve_step2
from reflected import complementarity_defect, solve_reflected_step2, uniqueness_probe
from rough_paths import SampledPath, brownian_sample_lift, lift_defects, lift_piecewise_linear
from rpde_heat import (GridScale, build_transport_driver, calibrate_energy_constant, default_dt,
                       energy_bound_check, solve_heat)
from scheme_utils import decreasing_in_trend, fitted_order, stride_subgrid, sup_interp_error
from variation import control_from_matrix, control_from_pvar, finest_scale, pvar_bruteforce, pvar_path


CriterionResult = namedtuple("CriterionResult", ["name", "passed", "metric", "detail"])

P_DEFAULT = 2.5

SUITES = {
    "smoke": dict(n_lifts=10, max_lift_n=128, n_pvar=40, n_families=20,
                  rde_levels=(4, 5, 6, 7, 8), oracle_n=2 ** 10, remainder_n=2 ** 10,
                  reflected_levels=(4, 5, 6, 7, 8, 9), probe_n=2 ** 11, probe_levels=4,
                  heat_nx=32, heat_T=0.02),
    "acceptance": dict(n_lifts=50, max_lift_n=512, n_pvar=200, n_families=100,
                       rde_levels=(4, 5, 6, 7, 8), oracle_n=2 ** 12, remainder_n=2 ** 14,
                       reflected_levels=(4, 5, 6, 7, 8, 9), probe_n=2 ** 13, probe_levels=4,
                       heat_nx=128, heat_T=0.02),
}


def _rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def check_lifts(out_dir, n_paths=50, max_n=512, seed=0, tol=1e-10):
    """Chen and geometricity defects of randomized piecewise-linear lifts."""
    rng = _rng(seed)
    rows = []
    for k in range(n_paths):
        d = int(rng.integers(1, 4))
        n = int(rng.integers(2, max_n + 1))
        times = np.concatenate([[0.0], np.cumsum(rng.uniform(0.1, 1.0, n - 1))])
        values = np.cumsum(rng.standard_normal((n, d)), axis=0)
        rp = lift_piecewise_linear(SampledPath(times, values), P_DEFAULT)
        chen, geo = lift_defects(rp, n_triples=500, seed=k)
        rows.append((k, d, n, chen, geo))

    write_table_csv(os.path.join(out_dir, "lifts.csv"), ["path", "d", "n", "chen", "geometricity"], rows)
    worst = max(max(r[3], r[4]) for r in rows)
    return CriterionResult("chen_geometricity", worst <= tol, worst, f"worst relative defect {worst:.3g}")


def check_pvar_oracle(out_dir, n_paths=200, seed=1, rtol=1e-12):
    """Dynamic program against exhaustive enumeration on short paths."""
    rng = _rng(seed)
    powers = [1.0, 1.5, 2.0, 2.5]
    rows = []
    for k in range(n_paths):
        n = int(rng.integers(2, 13))
        d = int(rng.integers(1, 4))
        p = powers[k % len(powers)]
        values = rng.standard_normal((n, d))
        x = SampledPath(np.arange(n, dtype=float), values)
        dp = pvar_path(x, p)
        brute = pvar_bruteforce(values, p)
        rows.append((k, n, d, p, dp, brute, abs(dp - brute) / max(brute, 1e-300)))

    write_table_csv(os.path.join(out_dir, "pvar_oracle.csv"),
                    ["path", "n", "d", "p", "dp", "bruteforce", "rel_error"], rows)
    worst = max(r[-1] for r in rows)
    return CriterionResult("pvar_oracle", worst <= rtol, worst, f"worst relative mismatch {worst:.3g}")


def check_gronwall(out_dir, n_families=100, seed=2, n=24):
    """sup G <= bound on hypothesis-saturating synthetic families."""
    rng = _rng(seed)
    grid = np.linspace(0.0, 1.0, n)
    rows = []
    violations = 0
    for k in range(n_families):
        walk = np.cumsum(rng.standard_normal((n, int(rng.integers(1, 3)))), axis=0) * rng.uniform(0.05, 0.5)
        omega1 = control_from_pvar(SampledPath(grid, walk), rng.uniform(1.0, 3.0))
        if k % 2:
            other = np.cumsum(rng.standard_normal(n)) * rng.uniform(0.01, 0.2)
            omega2 = control_from_pvar(SampledPath(grid, other), rng.uniform(1.0, 3.0))
        else:
            omega2 = control_from_matrix(grid, np.zeros((n, n)))
        C = rng.uniform(0.1, 2.0)
        kappa = rng.uniform(1.0, 3.0)
        L = max(finest_scale(omega1), 1e-6) * rng.uniform(1.01, 4.0)
        G0 = rng.uniform(0.1, 2.0)

        G, theta = saturating_family(omega1, omega2, C, L, kappa, G0=G0)
        ok, cert = verify(GronwallInput(G, omega1, omega2, C, L, kappa))
        violations += int(not ok)
        rows.append((k, C, L, kappa, theta, cert.alpha, cert.observed_sup, cert.bound, int(ok)))

    write_table_csv(os.path.join(out_dir, "gronwall_families.csv"),
                    ["family", "C", "L", "kappa", "theta", "alpha", "observed_sup", "bound", "ok"], rows)
    alpha_error = abs(alpha(1.0, 1.0, 1.0) - 1.0 / (2.0 * math.e ** 2))
    passed = violations == 0 and alpha_error <= 1e-15
    return CriterionResult("gronwall_validity", passed, violations,
                           f"{violations} violations, alpha(1,1,1) error {alpha_error:.3g}")


def check_rde_convergence(out_dir, levels=(4, 5, 6, 7, 8), oracle_n=2 ** 12, min_order=1.9):
    """Exponential case against e, sin field against the RK4 oracle."""
    hs, exp_errors = [], []
    for k in levels:
        n = 2 ** k
        _, rp = get_driver("line:1", P_DEFAULT, n=n)
        sol = solve_step2(LinearField(), rp, [1.0])
        hs.append(1.0 / n)
        exp_errors.append(abs(sol.y[-1, 0] - math.e))

    x, rp = get_driver("smooth:sin", P_DEFAULT, n=oracle_n)
    vf = SinField()
    reference = ode_oracle(vf, x, [0.5], substeps=4)
    sin_errors = []
    for k in levels:
        idx = stride_subgrid(len(rp), oracle_n // 2 ** k)
        sol = solve_step2(vf, rp, [0.5], idx)
        sin_errors.append(float(np.max(np.abs(sol.y - reference[idx]))))

    write_table_csv(os.path.join(out_dir, "rde_convergence.csv"), ["h", "exp_error", "sin_error"],
                    np.column_stack([hs, exp_errors, sin_errors]))
    exp_order = fitted_order(hs, exp_errors)
    sin_order = fitted_order(hs, sin_errors)
    passed = exp_order >= min_order and sin_order >= min_order
    return CriterionResult("rde_convergence", passed, min(exp_order, sin_order),
                           f"orders exp={exp_order:.3f} sin={sin_order:.3f}")


def check_remainder_scaling(out_dir, n=2 ** 14, seed=1234, max_spread=50.0):
    _, rp = brownian_sample_lift(seed, n, 1, 1.0, P_DEFAULT)
    vf = SinField()
    sol = solve_step2(vf, rp, [0.5])
    report = remainder_scaling_report(sol, vf, rp, max_depth=6)
    write_table_csv(os.path.join(out_dir, "remainder_scaling.csv"), ["depth", "sup_ratio"],
                    [(r.depth, r.sup_ratio) for r in report])

    ratios = np.array([r.sup_ratio for r in report])
    spread = float(np.max(ratios) / np.min(ratios)) if np.min(ratios) > 0 else np.inf
    return CriterionResult("remainder_scaling", spread <= max_spread, spread, f"max/min ratio {spread:.3g}")


def check_reflected_oracle(out_dir, levels=(4, 5, 6, 7, 8, 9), min_order=0.9):
    """Projection scheme for dy = dx + dm, x_t = -2t, against (1 - 2t)^+.

    Meshes of 2^k + 1 steps put the kink at t = 1/2 mid-cell; the error is
    measured on a fine evaluation grid."""
    eval_times = np.linspace(0.0, 1.0, 2 ** 13 + 1)
    exact = lambda t: np.maximum(1.0 - 2.0 * t, 0.0)
    hs, errors, defects = [], [], []
    for k in levels:
        n = 2 ** k + 1
        _, rp = get_driver("line:-2", P_DEFAULT, n=n)
        sol = solve_reflected_step2(ConstantField(), rp, 1.0)
        hs.append(1.0 / n)
        errors.append(sup_interp_error(sol.grid, sol.y, exact, eval_times))
        defects.append(complementarity_defect(sol))

    write_table_csv(os.path.join(out_dir, "reflected_oracle.csv"), ["h", "sup_error", "complementarity"],
                    np.column_stack([hs, errors, defects]))
    order = fitted_order(hs, errors)
    comp_ok = all(dft <= 10 * h for dft, h in zip(defects, hs))
    return CriterionResult("reflected_oracle", order >= min_order and comp_ok, order,
                           f"order {order:.3f}, complementarity within 10h: {comp_ok}")


def check_uniqueness(out_dir, fine_n=2 ** 13, levels=4, seed=7, epsilon_power=1.5):
    """Projection vs penalized sup-distance over `levels` halvings, smooth and Brownian drivers.

    The pass condition uses ε = h^epsilon_power. Distances for the solver default
    ε = sqrt(h) are written alongside for reference; they shrink like sqrt(h) on the
    smooth driver and slower on the Brownian one.
    """
    strides = [2 ** k for k in range(levels, -1, -1)]
    _, rp_line = get_driver("line:-2", P_DEFAULT, n=fine_n)
    _, rp_bm = brownian_sample_lift(seed, fine_n, 1, 1.0, P_DEFAULT)
    smooth = uniqueness_probe(ConstantField(), rp_line, 1.0, strides, epsilon_power)
    rough = uniqueness_probe(SinField(phase=np.pi / 2), rp_bm, 0.5, strides, epsilon_power)
    smooth_sqrt = uniqueness_probe(ConstantField(), rp_line, 1.0, strides, 0.5)
    rough_sqrt = uniqueness_probe(SinField(phase=np.pi / 2), rp_bm, 0.5, strides, 0.5)

    write_table_csv(os.path.join(out_dir, "uniqueness_probe.csv"),
                    ["h", "epsilon", "smooth_distance", "brownian_distance",
                     "smooth_distance_sqrt_h", "brownian_distance_sqrt_h"],
                    [(a.h, a.epsilon, a.sup_distance, b.sup_distance, c.sup_distance, d.sup_distance)
                     for a, b, c, d in zip(smooth, rough, smooth_sqrt, rough_sqrt)])
    d_smooth = [r.sup_distance for r in smooth]
    d_rough = [r.sup_distance for r in rough]
    passed = decreasing_in_trend(d_smooth) and decreasing_in_trend(d_rough)
    return CriterionResult("uniqueness_probe", passed, d_rough[-1] / d_rough[0] if d_rough[0] > 0 else 0.0,
                           f"ε=h^{epsilon_power:g}, final/first smooth={d_smooth[-1] / max(d_smooth[0], 1e-300):.3f} "
                           f"brownian={d_rough[-1] / max(d_rough[0], 1e-300):.3f}")


def heat_run(seed, n_x=128, T=0.02, V=0.5, p=P_DEFAULT, u0="sin", nu=1):
    """Brownian-driven transport-diffusion run on the default time step."""
    scale = GridScale(n_x)
    dt = default_dt(scale.dx)
    n = max(2, int(round(T / dt)))
    _, rp = brownian_sample_lift(seed, n, 1, n * dt, p)
    gd = build_transport_driver(V, rp, scale)
    return solve_heat(get_initial_datum(u0, scale.x), gd, nu), gd


def check_energy(out_dir, n_x=128, T=0.02, calibration_seeds=(11, 12, 13, 14), validation_seed=21, margin=10.0):
    runs = [heat_run(s, n_x, T) for s in calibration_seeds]
    C = calibrate_energy_constant(runs, P_DEFAULT, margin=margin)
    traj, gd = heat_run(validation_seed, n_x, T)
    report = energy_bound_check(traj, gd, P_DEFAULT, C=C)
    cert = report.certificate
    validated = cert.applicable and cert.observed_sup <= cert.bound + cert.tol

    traj0, gd0 = heat_run(validation_seed, n_x, T, V=0.0, u0="bump")
    cert0 = energy_bound_check(traj0, gd0, P_DEFAULT).certificate
    G0 = traj0.l2_sq[0]
    bound_ok = abs(cert0.bound - 2.0 * G0) <= 1e-12 * G0
    monotone = bool(np.all(np.diff(traj0.energy) <= 1e-12 * G0))

    write_table_csv(os.path.join(out_dir, "energy_validation.csv"), ["t", "G"],
                    np.column_stack([traj.times[report.check_indices], traj.energy[report.check_indices]]))
    with open(os.path.join(out_dir, "energy_certificate.txt"), "w") as f:
        f.write(cert.as_text() + "\n")

    passed = validated and bound_ok and monotone
    return CriterionResult("energy_certificate", passed, cert.bound - cert.observed_sup,
                           f"C={C:.3g} L={report.L:.3g} applicable={cert.applicable} "
                           f"V=0 bound ok={bound_ok} nonincreasing={monotone}")


def digest_dir(path):
    digests = {}
    for name in sorted(os.listdir(path)):
        with open(os.path.join(path, name), "rb") as f:
            digests[name] = hashlib.sha256(f.read()).hexdigest()
    return digests


def check_determinism(out_dir, suite="smoke"):
    """Runs every other criterion of `suite` again in a scratch directory and compares
    the files byte for byte with the ones in `out_dir`, writing those first when missing."""
    others = criteria(suite)[:-1]
    with tempfile.TemporaryDirectory() as scratch:
        for criterion in others:
            criterion(scratch)
        fresh = digest_dir(scratch)
    if any(not os.path.isfile(os.path.join(out_dir, name)) for name in fresh):
        for criterion in others:
            criterion(out_dir)
    kept = digest_dir(out_dir)
    mismatched = sorted(name for name in fresh if kept.get(name) != fresh[name])
    return CriterionResult("determinism", not mismatched, len(mismatched),
                           f"{len(fresh)} files, mismatched: {mismatched}")


def criteria(suite):
    cfg = SUITES[suite]
    return [
        lambda out: check_lifts(out, cfg["n_lifts"], cfg["max_lift_n"]),
        lambda out: check_pvar_oracle(out, cfg["n_pvar"]),
        lambda out: check_gronwall(out, cfg["n_families"]),
        lambda out: check_rde_convergence(out, cfg["rde_levels"], cfg["oracle_n"]),
        lambda out: check_remainder_scaling(out, cfg["remainder_n"]),
        lambda out: check_reflected_oracle(out, cfg["reflected_levels"]),
        lambda out: check_uniqueness(out, cfg["probe_n"], cfg["probe_levels"]),
        lambda out: check_energy(out, cfg["heat_nx"], cfg["heat_T"]),
        lambda out: check_determinism(out, suite),
    ]


def write_summary(results, filename):
    with open(filename, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["criterion", "passed", "metric", "detail"])
        for r in results:
            writer.writerow([r.name, int(r.passed), f"{float(r.metric):.17g}", r.detail])


def run_all(suite="smoke", out_dir="out", logdir=None):
    """Run every criterion of `suite`; returns the list of results."""
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite}, expected one of {sorted(SUITES)}")

    out_dir = os.path.join(out_dir, suite)
    os.makedirs(out_dir, exist_ok=True)
    logger = Logger(logdir)

    results = []
    for step, criterion in enumerate(tqdm(criteria(suite), desc=suite)):
        result = criterion(out_dir)
        print(f"{result.name}: passed={result.passed} {result.detail}")
        logger.log_scalar(f"Criteria/{result.name}", float(result.passed), step)
        results.append(result)

    write_summary(results, os.path.join(out_dir, "summary.csv"))
    logger.close()

    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"failed criteria: {', '.join(failed)}")
    return results
