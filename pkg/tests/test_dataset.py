import io
import logging

import numpy as np
import pytest

from turnover import DataError, derive_factor, incidence, load_table
from turnover.dataset import toy_csv

from conftest import SYSTEMS, YEARS


def test_toy_shape_and_levels(toy):
    assert toy.n == 20
    assert toy.factor_names == ("S", "Y")
    assert toy.factor("S").levels == tuple(SYSTEMS)
    assert toy.factor("Y").levels == tuple(YEARS)
    assert toy.factor("S").reference == "6"
    assert toy.factor("Y").reference == "2024"


def test_csv_round_trip(toy):
    again = load_table(io.StringIO(toy_csv()))
    np.testing.assert_array_equal(again.response, toy.response)
    assert again.factor("Y").levels == toy.factor("Y").levels


def test_arrays_are_read_only(toy):
    with pytest.raises(ValueError):
        toy.response[0] = 1.0


def test_relevel_moves_reference_to_end(toy):
    ds = toy.relevel("S", "2")
    assert ds.factor("S").levels == ("1", "3", "4", "5", "6", "2")
    assert [o.levels["S"] for o in ds.rows()] == [o.levels["S"] for o in toy.rows()]


def test_relevel_unknown_level(toy):
    with pytest.raises(DataError, match="no level '9'"):
        toy.relevel("S", "9")


def test_empty_response_is_skipped_with_warning(caplog):
    text = "S,Y,value\na,1,1.5\nb,1,\nb,2,2.5\n"
    with caplog.at_level(logging.WARNING):
        ds = load_table(io.StringIO(text))
    assert ds.n == 2 and ds.n_skipped == 1
    assert "skipped 1" in caplog.text


@pytest.mark.parametrize(
    "text, message",
    [
        ("S,Y,value\na,1,x\n", "row 2"),
        ("S,Y,value\na,1\n", "row 2"),
        ("S,Y\na,1\n", "response column"),
        ("S,S,value\na,1,2\n", "duplicate"),
        ("", "header"),
        ("S,Y,value\na,1,inf\n", "non-finite"),
    ],
)
def test_malformed_input_names_the_problem(text, message):
    with pytest.raises(DataError, match=message):
        load_table(io.StringIO(text))


def test_custom_response_column():
    ds = load_table(io.StringIO("yield,S\n3,a\n4,b\n"), "yield")
    assert ds.factor_names == ("S",)
    assert ds.response_name == "yield"


def test_incidence_pattern(toy):
    tab = incidence(toy, "S", "Y")
    present = tab.counts > 0
    assert present[[1, 2]].all()
    assert present[[0, 3], :4].all() and not present[[0, 3], 4].any()
    assert present[[4, 5], 4].all() and not present[[4, 5], :4].any()
    assert "×" in tab.render()


def test_derive_group_factor(toy):
    ds = derive_factor(toy, "G", "S", {"1": "ended", "2": "current", "3": "current",
                                        "4": "ended", "5": "current", "6": "current"})
    assert ds.factor("G").levels == ("ended", "current")
    assert [o.levels["G"] for o in ds.rows() if o.levels["S"] == "4"] == ["ended"] * 4


def test_derive_requires_full_mapping(toy):
    with pytest.raises(DataError, match="does not cover"):
        derive_factor(toy, "G", "S", {"1": "x"})


def test_subset_drops_unused_levels(toy):
    ds = toy.subset(toy.mask("S", ["1", "2"]))
    assert ds.factor("S").levels == ("1", "2")
    assert ds.n == 9
