"""
Adjusting system means for year effects
=======================================

Six cropping systems were tested over five years.  In the last year two of
them were replaced by new systems, and that year happened to be a good one.
Raw means then flatter the new systems.  A year main effect in the model
corrects for this.
"""

from turnover import (
    adjusted_means,
    builtin_toy,
    fit,
    incidence,
    indirect_difference,
    parse_formula,
    predicted_cells,
    range_means,
)

ds = builtin_toy()
print(incidence(ds, "S", "Y").render())

# %%
# Three models with a fixed system effect.  The colon separates fixed from
# random terms; ``S.Y`` indexes single observations here, so it is just the
# residual.

models = {
    "no year effect": "S : S.Y",
    "random year effect": "S : Y + S.Y",
    "fixed year effect": "S + Y : S.Y",
}
fits = {name: fit(ds, parse_formula(text, ds.factor_names)) for name, text in models.items()}

print(f"\n{'system':>6}" + "".join(f"{name:>22}" for name in models))
means = {name: adjusted_means(fm, "S", "Y") for name, fm in fits.items()}
for s in ds.factor("S").levels:
    print(f"{s:>6}" + "".join(f"{means[name][s]:22.3f}" for name in models))

# %%
# The fixed-year effects, with the last level of each factor as reference:

for label, value in fits["fixed year effect"].effects:
    print(f"{label:<10} {value:8.3f}")

# %%
# Predicting every system-by-year cell, including the ones never observed,
# and averaging across years gives the adjusted means above.

cells = predicted_cells(fits["fixed year effect"], "S", "Y")
for label, row in zip(cells.treatment_labels, cells.values):
    print(label, " ".join(f"{v:7.3f}" for v in row), f"| {row.mean():.3f}")

# %%
# The same numbers fall out of plain arithmetic.  Systems 2 and 3 ran every
# year, so they serve as a yardstick: 2024 was 6.7 units above their
# five-year mean, which is exactly the correction applied to systems 5 and 6.

years = ds.factor("Y").levels
rm = range_means(ds, "S", "Y", [years[:4], ["2024"], years], pooled=[["2", "3"]])
print("\n" + " " * 8 + "".join(f"{r:>11}" for r in rm.range_labels))
for label, row in zip(rm.row_labels, rm.values):
    print(f"{label:>6}  " + "".join(f"{v:11.3f}" if v == v else " " * 11 for v in row))

# %%
# Systems 1 and 6 were never tested together.  Their indirect difference via
# the yardstick pair equals the difference of their adjusted means.

d16 = indirect_difference(ds, "1", "6", ["2", "3"], treatment="S", environment="Y")
print(f"\nindirect 1 - 6: {d16:.3f}")
print(f"adjusted 1 - 6: {means['fixed year effect']['1'] - means['fixed year effect']['6']:.3f}")
