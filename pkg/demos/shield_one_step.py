"""Commission a plant, then shield a single random action with every method."""

import numpy as np

from greyshield.commissioning import commission
from greyshield.fallback import FallbackConfig, FallbackPolicy
from greyshield.plant import Plant
from greyshield.safety import METHODS, ConstraintSet, SafetyConfig, shield

plant = Plant()
models, scores, _ = commission(plant, seed=0)
print("nominal model holdout NMAE:",
      {k: f"{100 * v.nmae:.2f}%" for k, v in scores.items()})

pi_safe = FallbackPolicy(FallbackConfig.from_models(models, plant.assets))
q_demand = 1.4e6
cs = ConstraintSet(models, q_demand, soc_tess=0.5, assets=plant.assets)
a = np.random.default_rng(3).uniform(-1, 1, 5)
print(f"predicted action {np.round(a, 3)}, balance residual {cs.balance(a) / 1e3:.1f} kW")

for m in METHODS:
    if m == "greyoptlayerpolicy":
        continue  # needs a surrogate learner; see compare_methods.py
    res = shield(a, None, cs, SafetyConfig(m), None if m in ("unsafe", "optlayer") else pi_safe)
    print(f"{m:>15}: action {np.round(res.action, 3)}  d_safe {res.d_safe:.3f}  "
          f"fallback {res.used_fallback}  residual {cs.balance(res.action) / 1e3:.3f} kW")
