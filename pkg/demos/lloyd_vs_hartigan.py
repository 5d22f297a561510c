# Lloyd and Hartigan on the same high-dimensional mixture.
#
# Two classes of 20 points, centers drawn with unit variance, and noise set
# at the level where every roughly balanced partition is a Lloyd fixed point.
import numpy as np

from kmeanslab import GmmSpec, init_random_partition, lloyd_run, hartigan_run, nmi, sample_gmm
from kmeanslab.theory import sigma_balanced

sigma_sq = sigma_balanced(1.5, 40, 3) ** 2
print(f"noise variance {sigma_sq:.2f}")

for d in (10, 1000, 10_000):
    ds = sample_gmm(GmmSpec.balanced(2, d, 1.0, sigma_sq, 20, seed=d))
    start = init_random_partition(ds.n, 2, seed=1)
    p_l, rep_l = lloyd_run(ds, start)
    p_h, rep_h = hartigan_run(ds, start)
    print(f"d={d:>6}  lloyd nmi={nmi(p_l.assign, ds.labels):.3f} iters={rep_l.iterations}"
          f"  hartigan nmi={nmi(p_h.assign, ds.labels):.3f} sweeps={rep_h.iterations}")

# In high dimension Lloyd stops after one pass: the random start is already
# a fixed point.  Hartigan keeps moving single points and finds the classes.
