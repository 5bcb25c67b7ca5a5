"""Population exposure: how many people lived where the damage is?

Overlays a coarse (90 m) population raster on the 10 m damage mask with
majority-rule resampling and sweeps the threshold to show the tradeoff.
"""

from pwtt import run_pwtt
from pwtt.population import PopulationRaster, exposure
from pwtt.sim import simulate, synthetic_city, synthetic_population
from pwtt.ttest import composite_significance_threshold

scenario = synthetic_city(seed=11)
out = simulate(scenario.spec, scenario.date_range)
tmap = run_pwtt(out.stack, scenario.window)

values, pop_grid = synthetic_population(scenario.spec.grid, scenario.spec.class_map, seed=11)
pop = PopulationRaster(grid=pop_grid, values=values)
print(f"population raster: {pop_grid.width}x{pop_grid.height} at {pop_grid.pixel_size:.0f} m, "
      f"total {pop.total:.0f} people")

significance = composite_significance_threshold(tmap.stratum_counts.values(), alpha=0.01)
print(f"significance threshold (alpha=0.01, composite): {significance:.2f}\n")

print(f"{'threshold':>10} {'people in damage mask':>22}")
for threshold in (2.0, 3.0, 4.0, significance, 8.0):
    people = exposure(pop, tmap, threshold)
    print(f"{threshold:>10.2f} {people:>22.0f}")
