"""Oracle for the RBF decay grid and the self-tuning kNN toy weights.

gamma = -log(r_s)/H^2 at the documented (H, r_s) pairs, printed at 3 d.p.
for freezing, and the 3-collinear-node kNN example worked by hand.
"""

import math

for r_s in (0.5, 0.3):
    for H in (1, 5, 10):
        g = -math.log(r_s) / H ** 2
        print(f"r_s={r_s} H={H:2d}  gamma={g:.6f}  rounded={g:.3f}")

# 3 nodes on a line at x = 0, 1, 2 with k0 = k1 = 1:
# sigma_j = distance to the nearest neighbor = 1 for all three, so the
# directed weights 0->1, 1->0, 2->1 are all exp(-1^2/(1*1)) = e^-1 and
# max-symmetrization gives a01 = a12 = e^-1, a02 = 0.
print("e^-1 =", math.exp(-1.0))
