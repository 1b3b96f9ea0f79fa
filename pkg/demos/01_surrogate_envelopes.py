"""Fit the two halves of phi*|phi| and look at the planes the MILP will see.

Run: python demos/01_surrogate_envelopes.py
"""

import numpy as np

from gasplan import TrainConfig, build_envelope, enumerate_hyperplanes, train_pair
from gasplan.icnn import forward

cfg = TrainConfig(lo=(-15.0,), hi=(15.0,))
convex = train_pair("convex-part", cfg)
concave = train_pair("concave-part", cfg)

x = np.linspace(-15, 15, 7)
print("phi        target    convex + concave")
for phi, pos, neg in zip(x, forward(convex, x), forward(concave, x)):
    print(f"{phi:6.1f}  {phi * abs(phi):9.2f}  {pos + neg:9.2f}")

# Every activation pattern gives one affine piece; only the ones that
# actually touch the max (or min) over the box survive screening.
for net in (convex, concave):
    raw = enumerate_hyperplanes(net)
    env = build_envelope(net)
    print(f"\n{net.metadata['target']}: {net.hidden_sizes[0]} hidden units kept, "
          f"{len(raw)} pattern planes, {len(env)} on the envelope")
    for plane, w in zip(env.planes, env.witnesses):
        print(f"  slope {plane.slope[0]:8.3f}  intercept {plane.intercept:9.3f}  active near phi={w[0]:6.2f}")
