# Count fixed points over every bipartition of twelve points.
#
# 4094 nonempty bipartitions per dataset.  In high dimension almost all
# balanced ones are Lloyd fixed points; Hartigan keeps almost none of the
# incorrect ones.
from kmeanslab.experiments import run_fixed_point_census

for d in (2, 64, 4096):
    recs = run_fixed_point_census(n=12, d=d, datasets=5)
    frac = [round(r.lloyd_fixed_fraction, 3) for r in recs]
    hart = [r.n_hartigan_fixed_incorrect for r in recs]
    print(f"d={d:>5}  Lloyd fixed fraction {frac}  Hartigan incorrect fixed points {hart}")
