"""
Letter displays that tell the truth
===================================

With very unequal SEDs, a line-based letter display can put a common
letter on two significantly different means.  Insert-and-absorb never does.
"""

from turnover import (
    LetterDisplay,
    builtin_toy,
    derive_factor,
    fit,
    letter_display,
    parse_formula,
    sed_matrix,
    stratified_display,
    verify_display,
)

ds = builtin_toy()
fm = fit(ds, parse_formula("S + Y : S.Y", ds.factor_names))
sm = sed_matrix(fm, "S", "Y", alpha=0.05)
sig = sm.significance()

ld = letter_display(sig)
for level, est in zip(sm.levels, sm.estimates):
    print(f"{level}  {est:6.1f} {ld.assignment[level]}")
print("checks:", "ok" if verify_display(sig, ld).ok else verify_display(sig, ld).violations)

# %%
# A display that joins systems by lines would give system 1 "c" and systems
# 3, 4 and 6 "bc".  That hides two significant differences:

lines = LetterDisplay.from_assignment({"1": "c", "2": "a", "3": "bc", "4": "bc", "5": "b", "6": "bc"})
for v in verify_display(sig, lines).violations:
    print(" -", v)

# %%
# Comparing only the systems still in the trial: label each system as
# current or ended, fit the nested structure G/S, and stratify by G.  The fit
# still uses all the data.

groups = {"1": "ended", "4": "ended", "2": "current", "3": "current", "5": "current", "6": "current"}
dg = derive_factor(ds, "G", "S", groups)
fm_g = fit(dg, parse_formula("G/S + Y : G.S.Y", dg.factor_names))
sig_g = sed_matrix(fm_g, "S", "Y").significance()
for stratum, disp in stratified_display(sig_g, groups).items():
    print(stratum, disp.assignment)
