"""Object-level similarity basics.

A multimedia object is a set of feature vectors, not a single point. The
R-object similarity between a query object Q and a data object X is the
fraction of cross pairs (q, x) that lie within distance R of each other, and
the gamma-distance is the smallest R at which that fraction reaches gamma —
which is exactly an order statistic of the |Q|*|X| pairwise distances.
"""

import numpy as np

import mmlsh

rng = np.random.default_rng(0)

# two small objects in the plane: X sits mostly to the right of Q
q = rng.normal(loc=(0.0, 0.0), scale=0.4, size=(5, 2))
x = rng.normal(loc=(2.0, 0.0), scale=0.4, size=(6, 2))

print("R-object similarity grows with the radius R:")
for radius in (0.5, 1.0, 2.0, 3.0, 5.0):
    sim = mmlsh.r_object_similarity(q, x, radius)
    print(f"  sim(Q, X, R={radius:3.1f}) = {sim:.3f}")

print()
print("gamma-distance is the inverse view: the radius needed to reach gamma.")
for gamma in (0.1, 0.25, 0.5, 0.9):
    gdist = mmlsh.gamma_distance(q, x, gamma)
    back = mmlsh.r_object_similarity(q, x, gdist)
    print(f"  gamma={gamma:4.2f}: gamma-distance = {gdist:.3f} "
          f"(similarity there is {back:.3f} >= gamma)")

# the accuracy metric used throughout the benchmarks: mean ratio of the
# returned objects' gamma-distances to the true nearest objects' distances
returned = [1.2, 2.0, 3.1]
truth = [1.2, 1.9, 2.8]
value, flagged = mmlsh.object_ratio(returned, truth)
print()
print(f"object ratio of a slightly-off answer: {value:.4f} (1.0 is perfect, "
      f"flagged={flagged})")
