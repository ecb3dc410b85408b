"""
Blow-down to a cone
===================

f_lam(x) = f(lam x) / lam on the unit circle for f(x) = |x| + 1.  The
sequence converges to the cone |x| at rate 1/lam, and the pairwise Cauchy
ratios have a closed form.
"""

# %%
import numpy as np

from mcflab.analysis import cauchy_bound_check, estimate_cone, homogeneity_defect, sample_blowdown
from mcflab.fixtures import abs_plus_one
from mcflab.gridfield import sphere_sampling

S = sphere_sampling(2, 1.0, 256)
seq = sample_blowdown(abs_plus_one(), [1.0, 2.0, 4.0, 8.0], S)
rep = cauchy_bound_check(seq)
for row in rep.rows:
    lam, mu = row["lam"], row["mu"]
    closed = 2 * np.pi * (1 / lam - 1 / mu) / (1 / lam + 1 / mu)
    print(f"lam={lam:g} mu={mu:g}  ratio={row['ratio']:.6f}  closed form={closed:.6f}")
print("fitted C =", rep.C, "<= 2 pi")

# %%
profile, cone = estimate_cone(sample_blowdown(abs_plus_one(), 2.0 ** np.arange(13), S))
print("max |f_inf - 1| =", np.abs(profile.values - 1).max())
print("rate slope      =", cone["rate_slope"])
print("homogeneity of the extension:", [d["defect"] for d in homogeneity_defect(profile)])
