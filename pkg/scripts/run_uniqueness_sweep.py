import numpy as np

from data import write_table_csv
from fields import SinField
from reflected import uniqueness_probe
from rough_paths import brownian_sample_lift
from scheme_utils import decreasing_in_trend

P = 2.5
FINE_N = 2 ** 13
LEVELS = 4

SEEDS = [7, 8, 9]
EPSILON_POWERS = [0.25, 0.5, 0.75, 1.0, 1.5]

strides = [2 ** k for k in range(LEVELS, -1, -1)]

for seed in SEEDS:
    _, rp = brownian_sample_lift(seed, FINE_N, 1, 1.0, P)
    for power in EPSILON_POWERS:
        rows = uniqueness_probe(SinField(phase=np.pi / 2), rp, 0.5, strides, epsilon_power=power)
        distances = [r.sup_distance for r in rows]

        print(f"seed={seed}, eps=h^{power}, final/first={distances[-1] / distances[0]:.3f}, "
              f"decreasing={decreasing_in_trend(distances)}")

        write_table_csv(f"out/uniqueness_sweep/seed={seed}_power={power}.csv", ["h", "epsilon", "sup_distance"],
                        [(r.h, r.epsilon, r.sup_distance) for r in rows])
