# Does one misplaced sample move?
#
# Sample 0 sits in a cluster where only a quarter of the points share its
# class.  Moving it would lower the loss.  We count how often each
# algorithm's rule leaves it where it is, next to the theoretical bounds.
from kmeanslab.experiments import run_divergent

rows = run_divergent(n=40, beta_list=(2.0,), d_list=(50, 500, 3000), trials=500)
for r in rows:
    kind = "lower" if r.algo == "lloyd" else "upper"
    print(f"d={r.d:>5} {r.algo:>8}: stay {r.stay_ratio:.3f} "
          f"[{r.wilson_low:.3f}, {r.wilson_high:.3f}]  {kind} bound {r.theory_bound:.3f}")
