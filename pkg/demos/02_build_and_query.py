"""Build an index over clustered objects and answer object queries.

The index is a stack of m p-stable projections; a query widens its search by
virtually rehashing (merging c^t adjacent buckets) instead of rebuilding
anything. An object becomes a candidate once enough of its points collide
often enough with the query's points, and candidates are ranked by their
exact gamma-distance.
"""

import numpy as np

import mmlsh

# 200 objects of 20 feature vectors each; clusters are loose enough that
# object-level structure matters
dataset = mmlsh.synth_dataset(S=200, points_per_object=20, d=32,
                              cluster_spread=1.0, seed=7)
print(f"dataset: {dataset.num_objects} objects, {dataset.n} points, "
      f"d={dataset.dimension}")

# delta/beta drive the number of projections m and the collision threshold l
params = mmlsh.derive_params(delta=0.1, beta=0.9, c=2, w=2.184)
print(f"derived: m={params.m} projections, collision threshold l={params.l}, "
      f"p1={params.p1:.4f}, p2={params.p2:.4f}")

index = mmlsh.build_index(dataset, params, seed=7)

gp = mmlsh.GammaParams(gamma=0.5, delta=0.1, beta=0.9, epsilon=0.6)
bound = mmlsh.gamma_min_bound(20, 20, gp.delta, gp.epsilon, gp.beta)
print(f"guarantee bound on gamma for this workload: {bound:.3f} "
      f"(using gamma={gp.gamma})")
print()

rng = np.random.default_rng(3)
for oid in sorted(int(o) for o in rng.choice(200, size=3, replace=False)):
    query = mmlsh.QueryObject.from_object(dataset, oid)
    result = mmlsh.knn_objects(query, 5, index, dataset, gp)
    truth = mmlsh.exact_knn_objects(query, dataset, 5, gp.gamma)
    ratio, _ = mmlsh.object_ratio([d for _, d in result.top_k],
                                  [d for _, d in truth])
    print(f"query object {oid:3d}: stop={result.stop_condition} after "
          f"{result.levels_used} levels, top-5 = {result.object_ids}, "
          f"object ratio vs exact = {ratio:.4f}")
