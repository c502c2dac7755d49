import math

import numpy as np
import pytest

from turnover import (
    DataError,
    EstimabilityError,
    adjusted_means,
    back_transform,
    derive_factor,
    direct_difference,
    fit,
    indirect_difference,
    mean_sed,
    parse_formula,
    predicted_cells,
    range_means,
    sed_matrix,
    select_year_status,
    transform_response,
)
from turnover.dataset import Dataset

from conftest import (
    FIXED_YEAR,
    GROUPS,
    MEAN_SED,
    MEANS,
    MEANS_DECIMALS,
    NO_YEAR,
    PREDICTED,
    RANDOM_YEAR,
    RANGE_MEANS,
    SED,
    SYSTEMS,
    YEARS,
)

MODELS = ("no-year", "random-year", "fixed-year")


def test_predicted_cells(fits):
    cells = predicted_cells(fits["fixed-year"], "S", "Y")
    assert cells.margin_labels == tuple(YEARS)
    for s, row in PREDICTED.items():
        for y, v in zip(YEARS, row):
            assert cells.cell(s, y) == pytest.approx(v, abs=1e-9)
    np.testing.assert_allclose(cells.row_means(), MEANS["fixed-year"], atol=1e-9)
    assert cells.observed[0].tolist() == [1, 1, 1, 1, 0]


def test_cell_decomposition(fits):
    cells = predicted_cells(fits["fixed-year"], "S", "Y")
    parts = dict(cells.decomposition(0, 0))
    assert parts == pytest.approx({"Intercept": 63.0, "S: 1": -4.125, "Y: 2020": -6.75})


@pytest.mark.parametrize("model", MODELS)
def test_adjusted_means(fits, model):
    mt = adjusted_means(fits[model], "S", "Y")
    assert mt.labels == tuple(SYSTEMS)
    for got, want, dp in zip(mt.estimates, MEANS[model], MEANS_DECIMALS.get(model, [3] * 6)):
        assert got == pytest.approx(want, abs=max(1e-3, 0.5 * 10.0**-dp))


def test_same_incidence_same_adjustment(fits, toy):
    # systems 1 and 4 share a testing pattern, so both shift by the same amount
    for model in MODELS:
        mt = adjusted_means(fits[model], "S", "Y")
        raw = {s: toy.response[toy.mask("S", [s])].mean() for s in ("1", "4")}
        assert mt["1"] - raw["1"] == pytest.approx(mt["4"] - raw["4"], abs=1e-10)


def test_bridge_means_are_model_free(fits):
    for model in MODELS:
        mt = adjusted_means(fits[model], "S", "Y")
        assert mt["2"] == pytest.approx(91.4) and mt["3"] == pytest.approx(56.2)


@pytest.mark.parametrize("col, model", [(0, "no-year"), (2, "fixed-year")])
def test_sed_least_squares_models(fits, col, model):
    sm = sed_matrix(fits[model], "S", "Y")
    for (a, b), row in SED.items():
        assert sm.get(a, b) == pytest.approx(row[col], abs=1e-3)
        assert sm.get(b, a) == sm.get(a, b)
    assert mean_sed(sm) == pytest.approx(MEAN_SED[col], abs=1e-3)


def test_sed_random_year(fits):
    naive = sed_matrix(fits["random-year"], "S", "Y")
    kr = sed_matrix(fits["random-year"], "S", "Y", covariance="kenward-roger")
    for (a, b), row in SED.items():
        assert naive.get(a, b) == pytest.approx(row[1], rel=0.05)
        assert kr.get(a, b) == pytest.approx(row[1], abs=1e-3)
    assert mean_sed(naive) == pytest.approx(MEAN_SED[1], rel=0.05)


def test_means_are_covariance_invariant(fits):
    a = adjusted_means(fits["random-year"], "S", "Y")
    b = adjusted_means(fits["random-year"], "S", "Y", covariance="kenward-roger")
    np.testing.assert_array_equal(a.estimates, b.estimates)
    assert (b.se >= a.se - 1e-12).all()


def test_significance_pairs(fits):
    sm = sed_matrix(fits["fixed-year"], "S", "Y")
    assert sm.df == 10
    assert sm.t_critical == pytest.approx(2.2281, abs=1e-4)
    sig = {(p["a"], p["b"]) for p in sm.pairs() if p["significant"]}
    assert ("1", "3") in sig and ("1", "4") in sig
    assert ("1", "6") not in sig and ("3", "4") not in sig


def test_sed_subset(fits):
    sm = sed_matrix(fits["fixed-year"], "S", "Y")
    assert mean_sed(sm, ["2", "3", "5", "6"]) == pytest.approx(2.32, abs=5e-3)
    with pytest.raises(DataError):
        mean_sed(sm, ["2"])
    with pytest.raises(DataError, match="unknown"):
        mean_sed(sm, ["2", "9"])


def test_range_means(toy):
    early = YEARS[:4]
    rm = range_means(toy, "S", "Y", [early, ["2024"], YEARS], pooled=[["2", "3"]])
    assert rm.range_labels == ("2020-2023", "2024", "2020-2024")
    for row, expected in RANGE_MEANS.items():
        for rng, v in zip(rm.range_labels, expected):
            got = rm.get(row, rng)
            if v is None:
                assert math.isnan(got)
            else:
                assert round(got, 3) == v


def test_indirect_comparisons(toy, fits):
    ref = ["2", "3"]
    d16 = indirect_difference(toy, "1", "6", ref, treatment="S", environment="Y")
    d45 = indirect_difference(toy, "4", "5", ref, treatment="S", environment="Y")
    assert abs(d16 - (-4.125)) <= 1e-12
    assert abs(d45 - (-4.875)) <= 1e-12
    mt = adjusted_means(fits["fixed-year"], "S", "Y")
    assert d16 == pytest.approx(mt["1"] - mt["6"], abs=1e-8)
    assert d45 == pytest.approx(mt["4"] - mt["5"], abs=1e-8)


def test_direct_difference_requires_shared_years(toy):
    assert direct_difference(toy, "1", ["2", "3"], YEARS[:4], treatment="S", environment="Y") == -21.625
    with pytest.raises(DataError, match="not observed"):
        direct_difference(toy, "1", ["2", "3"], YEARS, treatment="S", environment="Y")


def test_select_year_status(toy):
    f = parse_formula(FIXED_YEAR, toy.factor_names)
    r = parse_formula(RANDOM_YEAR, toy.factor_names)
    res = select_year_status(toy, f, r, "S", "Y")
    assert res.recommended == "fixed"
    assert res.mean_sed_fixed == pytest.approx(2.0930, abs=1e-3)
    assert res.mean_sed_random == pytest.approx(2.1257, abs=1e-3)


def test_nested_group_model_gives_same_means(toy, fits):
    ds = derive_factor(toy, "G", "S", GROUPS)
    fm = fit(ds, parse_formula("G/S + Y : G.S.Y", ds.factor_names))
    mt = adjusted_means(fm, "S", "Y")
    np.testing.assert_allclose(mt.estimates, MEANS["fixed-year"], atol=1e-9)
    sm = sed_matrix(fm, "S", "Y")
    assert mean_sed(sm) == pytest.approx(MEAN_SED[2], abs=1e-3)


def test_disconnected_design_is_not_estimable(toy):
    ds = toy.subset(~toy.mask("S", ["2", "3"]))
    fm = fit(ds, parse_formula("S + Y", ds.factor_names))
    with pytest.raises(EstimabilityError):
        adjusted_means(fm, "S", "Y")


def test_sqrt_transform_and_back(toy):
    ds = transform_response(toy, "sqrt")
    fm = fit(ds, parse_formula(FIXED_YEAR, ds.factor_names))
    mt = adjusted_means(fm, "S", "Y")
    back = back_transform(mt, "sqrt")
    np.testing.assert_allclose(back.estimates, mt.estimates**2)
    assert back.scale == "back-transformed"
    with pytest.raises(DataError):
        transform_response(ds, "sqrt")


def test_sqrt_rejects_negative():
    ds = Dataset.from_records([{"S": "a", "value": -1.0}, {"S": "b", "value": 1.0}], ["S"])
    with pytest.raises(DataError, match="row 1"):
        transform_response(ds, "sqrt")


def _random_trial(rng, complete=False):
    ns, ny = int(rng.integers(3, 7)), int(rng.integers(3, 6))
    present = np.ones((ns, ny), dtype=bool)
    if not complete:
        present = rng.random((ns, ny)) < 0.7
        present[0] = True  # a bridge treatment keeps the design connected
        present[:, 0] = True
    s_eff, y_eff = rng.normal(0, 5, ns), rng.normal(0, 3, ny)
    recs = [
        {"S": f"s{i}", "Y": f"y{j}", "value": 50 + s_eff[i] + y_eff[j] + rng.normal()}
        for i in range(ns) for j in range(ny) if present[i, j]
    ]
    rng.shuffle(recs)
    return Dataset.from_records(recs, ["S", "Y"])


def test_reference_level_invariance():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        ds = _random_trial(rng)
        spec = parse_formula("S + Y", ds.factor_names)
        base = adjusted_means(fit(ds, spec), "S", "Y").as_dict()
        s_ref = ds.factor("S").levels[int(rng.integers(len(ds.factor("S"))))]
        y_ref = ds.factor("Y").levels[int(rng.integers(len(ds.factor("Y"))))]
        moved = ds.relevel("S", s_ref).relevel("Y", y_ref)
        again = adjusted_means(fit(moved, spec), "S", "Y").as_dict()
        for k, v in base.items():
            assert again[k] == pytest.approx(v, abs=1e-8)


def test_complete_tables_make_the_models_agree():
    rng = np.random.default_rng(7)
    for _ in range(20):
        ds = _random_trial(rng, complete=True)
        means = [
            adjusted_means(fit(ds, parse_formula(t, ds.factor_names)), "S", "Y").estimates
            for t in (NO_YEAR, RANDOM_YEAR, FIXED_YEAR)
        ]
        np.testing.assert_allclose(means[0], means[1], atol=1e-8, rtol=0)
        np.testing.assert_allclose(means[0], means[2], atol=1e-8, rtol=0)


def test_predicted_cells_do_not_depend_on_reference(toy, fits):
    moved = toy.relevel("S", "1").relevel("Y", "2022")
    for text, name in ((FIXED_YEAR, "fixed-year"), (RANDOM_YEAR, "random-year")):
        a = predicted_cells(fits[name], "S", "Y")
        b = predicted_cells(fit(moved, parse_formula(text, moved.factor_names)), "S", "Y")
        for s in SYSTEMS:
            for y in YEARS:
                assert b.cell(s, y) == pytest.approx(a.cell(s, y), abs=1e-8)
