from experiments import P_DEFAULT, heat_run
from log import Logger, get_script, make_hparam_str
from rpde_heat import calibrate_energy_constant, energy_bound_check

N_X = 128
T = 0.02
MARGIN = 10.0

CALIBRATION_SEEDS = [11, 12, 13, 14]
VALIDATION_SEEDS = [21, 22, 23, 24, 25]
VELOCITIES = [0.25, 0.5, 1.0]

for V in VELOCITIES:
    runs = [heat_run(s, N_X, T, V=V) for s in CALIBRATION_SEEDS]
    C = calibrate_energy_constant(runs, P_DEFAULT, margin=MARGIN)
    print(f"V={V}, calibrated C={C:.4g}")

    logger = Logger(f"logs/{get_script()}/{make_hparam_str(dict(V=V, nx=N_X, margin=MARGIN))}")
    for step, seed in enumerate(VALIDATION_SEEDS):
        traj, gd = heat_run(seed, N_X, T, V=V)
        cert = energy_bound_check(traj, gd, P_DEFAULT, C=C).certificate
        logger.log_certificate("Energy", cert, step)
        print(f"  seed={seed}, applicable={cert.applicable}, "
              f"sup G={cert.observed_sup:.4g}, bound={cert.bound:.4g}")
    logger.close()
