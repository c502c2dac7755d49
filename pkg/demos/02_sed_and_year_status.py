"""
Fixed or random years?
======================

A random year effect recovers between-year information, but with five
years its variance is poorly estimated.  A pragmatic rule is to fit both
models and keep the one with the smaller mean standard error of a
difference (SED).
"""

from turnover import builtin_toy, fit, mean_sed, parse_formula, sed_matrix, select_year_status

ds = builtin_toy()
fixed = parse_formula("S + Y : S.Y", ds.factor_names)
random = parse_formula("S : Y + S.Y", ds.factor_names)

fm_random = fit(ds, random)
vc = fm_random.vc
print(f"REML: year variance {vc.sigma2_random:.3f}, residual {vc.sigma2_residual:.3f}")

# %%
# SEDs vary a lot between pairs because the new systems have a single year
# of data.  For the random-year model the plug-in covariance understates
# uncertainty; the Kenward-Roger adjustment inflates it.

sm_fixed = sed_matrix(fit(ds, fixed), "S", "Y")
sm_plain = sed_matrix(fm_random, "S", "Y")
sm_kr = sed_matrix(fm_random, "S", "Y", covariance="kenward-roger")
print(f"\n{'pair':>6} {'fixed':>8} {'random':>8} {'random*':>8}")
for p in sm_fixed.pairs():
    a, b = p["a"], p["b"]
    print(f"{a + '-' + b:>6} {p['sed']:8.4f} {sm_plain.get(a, b):8.4f} {sm_kr.get(a, b):8.4f}")
print(f"{'mean':>6} {mean_sed(sm_fixed):8.4f} {mean_sed(sm_plain):8.4f} {mean_sed(sm_kr):8.4f}")
print("* Kenward-Roger adjusted covariance")

# %%
# The decision itself:

res = select_year_status(ds, fixed, random, "S", "Y")
print(f"\nmean SED fixed {res.mean_sed_fixed:.4f}, random {res.mean_sed_random:.4f}"
      f" -> use {res.recommended} year effects")
