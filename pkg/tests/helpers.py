import math

import numpy as np


def resonance_grid(omega_l, n_pulses, num=60, span=6.0):
    t0 = math.pi / omega_l
    return np.linspace(t0 * (1 - span / n_pulses), t0 * (1 + span / n_pulses), num)
