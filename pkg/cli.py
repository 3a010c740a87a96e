"""Command-line entry point.

    python cli.py <subcommand> [--config FILE] [--key value ...]

Values come from the subcommand defaults, then the `key = value` lines of the
config file, then flags given on the command line. Exit codes: 0 pass,
1 failed verdict, 2 usage error.
"""
import argparse
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from data import (get_driver, get_initial_datum, get_vector_field, get_velocity, read_control_csv,
                  read_path_csv, read_rough_path_csv, read_table_csv, write_control_csv, write_rough_path_csv,
                  write_table_csv)
from experiments import SUITES, run_all
from gronwall import GronwallInput, verify
from log import Logger, make_hparam_str
from rde import InconsistencyError, remainder_scaling_report, solve_step2
from reflected import (complementarity_defect, reflected_scaling_report, solve_reflected_penalized,
                       solve_reflected_step2, uniqueness_probe)
from rough_paths import DomainError, ParameterError, lift_defects
from rpde_heat import (GridScale, build_transport_driver, default_dt, energy_bound_check, solve_heat,
                       transport_energy_drift, u_squared_scaling_report)
from scheme_utils import decreasing_in_trend, stride_subgrid
from variation import (TwoIndexMap, control_from_matrix, control_from_pvar, pvar_2index, pvar_path)

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

REQUIRED = object()


class ConfigError(ValueError):
    pass


def _parse_bool(value):
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value}")


def _in_range(low, high=np.inf, closed_high=False):
    def check(v):
        ok = low <= v <= high if closed_high else low <= v < high
        if not ok:
            raise ConfigError(f"{v} outside [{low}, {high}{']' if closed_high else ')'}")
    return check


def _one_of(*choices):
    def check(v):
        if v not in choices:
            raise ConfigError(f"{v} is not one of {list(choices)}")
    return check


def _positive(v):
    if v <= 0:
        raise ConfigError(f"{v} must be positive")


ROUGH_P = (float, 2.5, _in_range(2.0, 3.0))

COMMON = {
    "seed": (int, 0, None),
    "out_dir": (str, "out", None),
    "logdir": (str, None, None),
}

DRIVER = {
    "driver": (str, "brownian", None),
    "n": (int, 1024, _positive),
    "T": (float, 1.0, _positive),
    "p": ROUGH_P,
}

FIELD = {
    "field": (str, "sin", None),
    "field_param": (float, None, None),
}

HEAT = {
    "nx": (int, 128, _in_range(3)),
    "dt": (float, None, _positive),
    "T": (float, 0.02, _positive),
    "nu": (int, 1, _one_of(0, 1)),
    "V": (str, "const:0.5", None),
    "driver": (str, "brownian", None),
    "p": ROUGH_P,
    "u0": (str, "sin", None),
    "force": (bool, False, None),
    "snapshot_every": (int, 100, _positive),
    "depth": (int, 6, _positive),
}

# {key: (type, default, validator)}
SCHEMAS = {
    "lift": dict(DRIVER, driver=(str, "brownian:0,512,2", None), all_pairs=(bool, False, None)),
    "pvar": {
        "input": (str, REQUIRED, None),
        "p": (float, 2.0, _in_range(1.0)),
        "from": (float, None, None),
        "to": (float, None, None),
        "two_index": (bool, False, None),
        "level": (int, 1, _one_of(1, 2)),
        "dump_control": (str, None, None),
    },
    "gronwall-check": {
        "g": (str, REQUIRED, None),
        "omega1": (str, REQUIRED, None),
        "omega2": (str, "zero", None),
        "C": (float, REQUIRED, _positive),
        "L": (float, REQUIRED, _positive),
        "kappa": (float, 1.0, _in_range(1.0)),
        "tol": (float, None, None),
    },
    "solve-rde": dict(DRIVER, **FIELD, y0=(str, "0.5", None), mesh=(float, None, _positive),
                      depth=(int, 6, _positive)),
    "solve-reflected": dict(DRIVER, **FIELD, y0=(float, 0.5, None), mesh=(float, None, _positive),
                            scheme=(str, "projection", _one_of("projection", "penalized")),
                            epsilon=(float, None, _positive), depth=(int, 6, _positive)),
    "uniqueness-probe": dict(DRIVER, **FIELD, n=(int, 8192, _positive), y0=(float, 0.5, None),
                             levels=(int, 4, _positive), epsilon_power=(float, 1.5, _positive)),
    "solve-heat": dict(HEAT),
    "energy-check": dict(HEAT, C=(float, None, _positive), L=(float, None, _positive),
                         margin=(float, 1.0, _positive), max_points=(int, 65, _in_range(2)),
                         min_intervals=(int, 4, _positive), norm=(str, "sup", _one_of("sup", "l2"))),
    "run-all": {"suite": (str, "smoke", _one_of(*sorted(SUITES)))},
}


@dataclass
class ExperimentConfig:
    command: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    out_dir: str = "out"
    logdir: str = None

    def __getitem__(self, key):
        return self.params[key]


def _schema(command):
    return dict(COMMON, **SCHEMAS[command])


def read_config_file(filename):
    """`key = value` lines; `#` starts a comment."""
    values = {}
    with open(filename) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{filename}:{lineno}: expected `key = value`, got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key] = value
    return values


def _convert(key, value, spec):
    kind, _, validator = spec
    try:
        value = _parse_bool(value) if kind is bool else kind(value)
    except ValueError:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {value!r}")
    if validator is not None:
        try:
            validator(value)
        except ConfigError as e:
            raise ConfigError(f"{key}: {e}")
    return value


def build_parser():
    parser = argparse.ArgumentParser(description="rough-path numerics and experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for command in SCHEMAS:
        p = sub.add_parser(command)
        p.add_argument("--config", default=None)
        for key, (kind, _, _) in _schema(command).items():
            flags = sorted({f"--{key}", f"--{key.replace('_', '-')}"})
            if kind is bool:
                p.add_argument(*flags, dest=key, action="store_const", const=True, default=None)
            else:
                p.add_argument(*flags, dest=key, default=None)
    return parser


def parse_config(argv=None):
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    schema = _schema(command)
    valid = sorted(schema)

    values = {}
    config_file = args.pop("config")
    if config_file is not None:
        if not os.path.isfile(config_file):
            raise ConfigError(f"config file {config_file} not found")
        values = read_config_file(config_file)
        unknown = sorted(set(values) - set(schema))
        if unknown:
            raise ConfigError(f"unknown keys {unknown} for {command}; valid keys: {valid}")

    # only flags actually given override the file
    values.update({k: v for k, v in args.items() if v is not None})

    params = {}
    for key, spec in schema.items():
        if key in values:
            params[key] = _convert(key, values[key], spec)
        elif spec[1] is REQUIRED:
            raise ConfigError(f"missing required key {key} for {command}; valid keys: {valid}")
        else:
            params[key] = spec[1]

    return ExperimentConfig(command, params, params.pop("seed"), params.pop("out_dir"), params.pop("logdir"))


def _driver_spec(config):
    spec = config["driver"]
    return f"brownian:{config.seed}" if spec == "brownian" else spec


def _load_driver(config):
    return get_driver(_driver_spec(config), config["p"], n=config["n"], T=config["T"])


def _subgrid(rp, mesh):
    if mesh is None:
        return None
    h = float(np.max(np.diff(rp.grid)))
    return stride_subgrid(len(rp), max(1, int(round(mesh / h))))


def _logger(config):
    if config.logdir is None:
        return Logger(None)
    return Logger(os.path.join(config.logdir, config.command, make_hparam_str(config.params)))


def _out(config, name):
    os.makedirs(config.out_dir, exist_ok=True)
    return os.path.join(config.out_dir, name)


def cmd_lift(config):
    x, rp = _load_driver(config)
    write_rough_path_csv(rp, _out(config, "lift.csv"), all_pairs=config["all_pairs"])
    chen, geo = lift_defects(rp, seed=config.seed)
    print(f"lifted {len(rp)} points in d={rp.dim}: chen_defect={chen:.3g} geometricity_defect={geo:.3g}")
    return EXIT_PASS


def cmd_pvar(config):
    q = config["p"]
    if config["two_index"]:
        rp = read_rough_path_csv(config["input"], ROUGH_P[1])
        g = TwoIndexMap.level1(rp) if config["level"] == 1 else TwoIndexMap.level2(rp)
        value = pvar_2index(g, q, config["from"], config["to"])
        omega = control_from_pvar(g, q, kind="2index")
    else:
        x = read_path_csv(config["input"])
        value = pvar_path(x, q, config["from"], config["to"])
        omega = control_from_pvar(x, q)
    print(f"pvar={value:.17g}")
    if config["dump_control"] is not None:
        write_control_csv(omega, config["dump_control"])
    return EXIT_PASS


def _load_control(spec, grid):
    if spec == "zero":
        return control_from_matrix(grid, np.zeros((len(grid), len(grid))), label="zero")
    if spec.startswith("pvar:"):
        filename, _, p = spec[len("pvar:"):].rpartition(",")
        return control_from_pvar(read_path_csv(filename), float(p))
    return read_control_csv(spec)


def cmd_gronwall_check(config):
    _, rows = read_table_csv(config["g"])
    grid, G = rows[:, 0], rows[:, -1]
    omega1 = _load_control(config["omega1"], grid)
    omega2 = _load_control(config["omega2"], grid)
    ok, cert = verify(GronwallInput(G, omega1, omega2, config["C"], config["L"], config["kappa"]),
                      tol=config["tol"])
    print(f"verdict: {'PASS' if ok else 'FAIL'}")
    print(cert.as_text())
    _logger(config).log_certificate("Gronwall", cert)
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_solve_rde(config):
    _, rp = _load_driver(config)
    y0 = np.array([float(v) for v in config["y0"].split(",")])
    vf = get_vector_field(config["field"], N=len(y0), d=rp.dim, param=config["field_param"])
    sol = solve_step2(vf, rp, y0, _subgrid(rp, config["mesh"]))
    header = ["t"] + [f"y_{a + 1}" for a in range(vf.N)]
    write_table_csv(_out(config, "rde_trajectory.csv"), header, np.column_stack([sol.grid, sol.y]))

    try:
        report = remainder_scaling_report(sol, vf, rp, max_depth=config["depth"])
    except InconsistencyError as e:
        print(f"inconsistent remainder: {e}")
        return EXIT_FAIL
    write_table_csv(_out(config, "rde_scaling.csv"), ["depth", "sup_ratio"],
                    [(r.depth, r.sup_ratio) for r in report] or np.empty((0, 2)))
    _logger(config).log_table("Remainder/sup_ratio", [r.depth for r in report], [r.sup_ratio for r in report])
    for r in report:
        print(f"depth={r.depth} pairs={r.n_pairs} sup_ratio={r.sup_ratio:.6g}")
    if sol.truncated:
        print(sol.diagnostic)
        return EXIT_FAIL
    return EXIT_PASS


def cmd_solve_reflected(config):
    _, rp = _load_driver(config)
    vf = get_vector_field(config["field"], N=1, d=rp.dim, param=config["field_param"])
    subgrid = _subgrid(rp, config["mesh"])
    if config["scheme"] == "projection":
        sol = solve_reflected_step2(vf, rp, config["y0"], subgrid)
    else:
        sol = solve_reflected_penalized(vf, rp, config["y0"], subgrid, config["epsilon"])
    write_table_csv(_out(config, "reflected_trajectory.csv"), ["t", "y", "m"],
                    np.column_stack([sol.grid, sol.y, sol.m]))
    print(f"scheme={config['scheme']} min_y={np.min(sol.y):.6g} m_T={sol.m[-1]:.6g} "
          f"complementarity={complementarity_defect(sol):.6g}")

    if config["scheme"] == "projection":
        report = reflected_scaling_report(sol, max_depth=config["depth"])
        write_table_csv(_out(config, "reflected_scaling.csv"), ["depth", "sup_ratio"],
                        [(r.depth, r.sup_ratio) for r in report] or np.empty((0, 2)))
        _logger(config).log_table("Reflected/sup_ratio", [r.depth for r in report], [r.sup_ratio for r in report])
        for r in report:
            print(f"depth={r.depth} pairs={r.n_pairs} sup_ratio={r.sup_ratio:.6g}")
    return EXIT_PASS


def cmd_uniqueness_probe(config):
    _, rp = _load_driver(config)
    vf = get_vector_field(config["field"], N=1, d=rp.dim, param=config["field_param"])
    strides = [2 ** k for k in range(config["levels"], -1, -1)]
    rows = uniqueness_probe(vf, rp, config["y0"], strides, config["epsilon_power"])
    write_table_csv(_out(config, "uniqueness.csv"), ["h", "sup_distance"], [(r.h, r.sup_distance) for r in rows])
    for r in rows:
        print(f"h={r.h:.6g} eps={r.epsilon:.6g} sup_distance={r.sup_distance:.6g}")
    ok = decreasing_in_trend([r.sup_distance for r in rows])
    print(f"verdict: {'PASS' if ok else 'FAIL'}")
    return EXIT_PASS if ok else EXIT_FAIL


def _heat(config):
    scale = GridScale(config["nx"])
    dt = default_dt(scale.dx) if config["dt"] is None else config["dt"]
    n = max(2, int(round(config["T"] / dt)))
    V = get_velocity(config["V"], scale.n_x)
    _, rp = get_driver(_driver_spec(config), config["p"], n=n, T=n * dt, d=len(V))
    if rp.dim != len(V) and not os.path.isfile(config["V"]):
        V = get_velocity(config["V"], scale.n_x, rp.dim)
    gd = build_transport_driver(V, rp, scale)
    u0 = get_initial_datum(config["u0"], scale.x)
    traj = solve_heat(u0, gd, config["nu"], force=config["force"])

    every = config["snapshot_every"]
    keep = sorted(set(range(0, len(traj), every)) | {len(traj) - 1})
    write_table_csv(_out(config, "heat_snapshots.csv"), ["t"] + [f"u_{i + 1}" for i in range(scale.n_x)],
                    np.column_stack([traj.times[keep], traj.u[keep]]))
    write_table_csv(_out(config, "heat_energy.csv"), ["t", "G"], np.column_stack([traj.times, traj.energy]))

    report = u_squared_scaling_report(traj, gd, np.cos(2 * np.pi * scale.x), max_depth=config["depth"])
    write_table_csv(_out(config, "heat_scaling.csv"), ["depth", "sup_composite", "sup_apriori"],
                    [(r.depth, r.sup_composite, r.sup_apriori) for r in report] or np.empty((0, 3)))
    for r in report:
        print(f"depth={r.depth} pairs={r.n_pairs} composite={r.sup_composite:.6g} apriori={r.sup_apriori:.6g}")
    return traj, gd


def cmd_solve_heat(config):
    traj, gd = _heat(config)
    print(f"steps={len(traj) - 1} G_0={traj.energy[0]:.6g} G_T={traj.energy[-1]:.6g} "
          f"l2_drift={transport_energy_drift(traj):.6g}")
    return EXIT_PASS


def cmd_energy_check(config):
    traj, gd = _heat(config)
    report = energy_bound_check(traj, gd, C=config["C"], L=config["L"], margin=config["margin"],
                                max_points=config["max_points"], min_intervals=config["min_intervals"],
                                norm=config["norm"])
    cert = report.certificate
    ok = cert.applicable and cert.observed_sup <= cert.bound + cert.tol
    with open(_out(config, "energy_certificate.txt"), "w") as f:
        f.write(cert.as_text() + "\n")
    print(f"verdict: {'PASS' if ok else 'FAIL'} (C {'fitted' if report.fitted else 'given'}, binding={report.binding})")
    print(cert.as_text())
    _logger(config).log_certificate("Energy", cert)
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_run_all(config):
    results = run_all(config["suite"], config.out_dir, config.logdir)
    return EXIT_PASS if all(r.passed for r in results) else EXIT_FAIL


COMMANDS = {
    "lift": cmd_lift,
    "pvar": cmd_pvar,
    "gronwall-check": cmd_gronwall_check,
    "solve-rde": cmd_solve_rde,
    "solve-reflected": cmd_solve_reflected,
    "uniqueness-probe": cmd_uniqueness_probe,
    "solve-heat": cmd_solve_heat,
    "energy-check": cmd_energy_check,
    "run-all": cmd_run_all,
}


def main(argv=None):
    try:
        config = parse_config(argv)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE

    try:
        return COMMANDS[config.command](config)
    except (ParameterError, DomainError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
