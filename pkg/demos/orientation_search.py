"""Orientation search on a ground-plane deployment.

Compares the closed-form azimuth of IRS 1 against a brute-force sweep and
a particle swarm, then shows that tilting the surface off the ground
plane never helps when every node sits at z = 0.
"""
import numpy as np

from rotirs import Orientation, PsoConfig, default_geometry, pso_optimize, surface_gains
from rotirs.rotation import closed_form_azimuth_irs1, penalized_fitness_los

geom = default_geometry().projected_to_ground()
zero = Orientation(0.0, 0.0)

theta = closed_form_azimuth_irs1(geom)
best = float(surface_gains(geom, Orientation(theta, 0.0), zero)[0])
print(f"closed form: theta1 = {np.degrees(theta):7.2f} deg, gain {best:.5f}")

grid = np.linspace(-np.pi / 2, np.pi / 2, 721)
fit = penalized_fitness_los(geom, Orientation(grid, np.zeros_like(grid)), 1e3)
i = int(np.argmax(fit))
print(f"721-point sweep: theta1 = {np.degrees(grid[i]):7.2f} deg, fitness {fit[i]:.5f}")

for seed in range(3):
    res = pso_optimize(lambda x: penalized_fitness_los(geom, Orientation(x[:, 0], x[:, 1]), 1e3),
                       2, PsoConfig(seed=seed))
    th, ph = np.degrees(res.best_position)
    print(f"PSO seed {seed}: theta1 = {th:7.2f} deg, phi1 = {ph:6.2f} deg, "
          f"fitness {res.best_fitness:.5f} ({res.best_fitness / best:.4%} of closed form)")

phis = np.linspace(-np.pi / 2, np.pi / 2, 7)
tilted = surface_gains(geom, Orientation(np.full_like(phis, theta), phis),
                       Orientation(np.zeros_like(phis), np.zeros_like(phis)))[0]
for p, g in zip(np.degrees(phis), tilted):
    print(f"  phi1 = {p:6.1f} deg -> gain {g:.5f}")
