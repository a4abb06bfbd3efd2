"""Does the gain-smoothness constraint earn its keep?

Two datasets, one score. Gains that evolve smoothly make the constrained
architecture the clear winner (strongly negative deciHartleys for the
variant that drops the constraint); gains that jump freely flip the
verdict.

Run:  python3 demos/03_score_gain_constraint.py
"""

import numpy as np

from hlcbayes.comparison import NestingSpec, compare_models
from hlcbayes.fitting import Segment, TrainingSet
from hlcbayes.model import (
    HearingLossParams,
    default_priors,
    level_random_walk,
    synthesize_pairs,
)

target = HearingLossParams(alpha=2.0, beta=-90.0)
spec = NestingSpec(omega=0.25)
rng = np.random.default_rng(11)

# smooth listening: levels drift, gains follow gently (step sd ~1 dB)
walk = level_random_walk(2000, 50.0, 85.0, step_sd=2.0, rng=rng)
s, g = synthesize_pairs(walk, target)
smooth = compare_models(TrainingSet([Segment(s, g)]), default_priors(), spec)

# erratic listening: independent levels per frame, gains jump around
iid = rng.uniform(50.0, 85.0, size=2000)
s2, g2 = synthesize_pairs(iid, target)
erratic = compare_models(TrainingSet([Segment(s2, g2)]), default_priors(), spec)

print("score in deciHartleys (positive favors dropping the constraint):")
print(f"  smooth gains : {smooth.deci_hartley:10.1f} dHart   "
      f"(posterior mass in [0, {spec.omega}]: {smooth.posterior_mass:.3e})")
print(f"  erratic gains: {erratic.deci_hartley:10.1f} dHart   "
      f"(posterior mass in [0, {spec.omega}]: {erratic.posterior_mass:.3e})")
print()
print("smooth-gain data rules strongly in favor of keeping the gain")
print("constraint; free-jumping gains push the transition precision into")
print("the nested interval and the constraint-free variant wins.")
