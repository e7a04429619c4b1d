import numpy as np

from dotflux import units
from dotflux.volterra import TimeGrid

OMEGA_30MEV = units.mev_to_radns(30.0)


def default_step(*scales: float) -> float:
    return 0.05 / max(s for s in scales if s > 0)


def grid_for(env1, env2, omega, horizon, extra_scale=0.0) -> TimeGrid:
    h = default_step(omega, extra_scale, env1.relative_bandwidth * omega,
                     abs(env1.mu_radns - omega), abs(env2.mu_radns - omega))
    return TimeGrid(h, int(np.ceil(horizon / h)))
