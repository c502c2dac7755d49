import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from turnover import (
    LetterDisplay,
    SignificanceMatrix,
    letter_display,
    sed_matrix,
    stratified_display,
    verify_display,
)
from turnover.letters import letter_names

from conftest import GROUPS, LETTERS_ALL, LETTERS_CURRENT


def test_all_systems(fits):
    sm = sed_matrix(fits["fixed-year"], "S", "Y")
    ld = letter_display(sm.significance())
    assert ld.assignment == LETTERS_ALL
    assert verify_display(sm.significance(), ld).ok


def test_current_systems(fits):
    sm = sed_matrix(fits["fixed-year"], "S", "Y")
    ld = letter_display(sm.significance(["2", "3", "5", "6"]))
    assert ld.assignment == LETTERS_CURRENT


def test_stratified(fits):
    sig = sed_matrix(fits["fixed-year"], "S", "Y").significance()
    out = stratified_display(sig, GROUPS)
    assert list(out) == ["ended", "current"]
    assert out["current"].assignment == LETTERS_CURRENT
    assert out["ended"].assignment == {"1": "b", "4": "a"}

def test_line_display_counterexample_is_caught(fits):
    sig = sed_matrix(fits["fixed-year"], "S", "Y").significance()
    lines = LetterDisplay.from_assignment({"1": "c", "2": "a", "3": "bc", "4": "bc", "5": "b", "6": "bc"})
    report = verify_display(sig, lines)
    assert not report.ok
    hidden = [v for v in report.violations if v.startswith("significant pair")]
    assert len(hidden) == 2
    assert any("(1, 3)" in v for v in hidden) and any("(1, 4)" in v for v in hidden)


def test_redundant_letter_is_reported():
    sm = SignificanceMatrix.from_pairs(["a", "b", "c"], [("a", "c")])
    ld = LetterDisplay.from_assignment({"a": "xy", "b": "xyz", "c": "z"})
    assert any("redundant" in v for v in verify_display(sm, ld).violations)


def test_no_differences_gives_one_letter():
    sm = SignificanceMatrix.from_pairs(["a", "b", "c"], [])
    assert letter_display(sm).assignment == {"a": "a", "b": "a", "c": "a"}


def test_all_different():
    sm = SignificanceMatrix.from_pairs(["x", "y", "z"], [("x", "y"), ("x", "z"), ("y", "z")],
                                       estimates=[1.0, 3.0, 2.0])
    assert letter_display(sm).assignment == {"x": "c", "y": "a", "z": "b"}


def test_letter_names_continue_past_z():
    names = letter_names(28)
    assert names[:3] == ["a", "b", "c"] and names[25:] == ["z", "aa", "ab"]


@pytest.mark.parametrize(
    "sig, message",
    [
        (np.array([[False, True], [False, False]]), "symmetric"),
        (np.array([[True, False], [False, False]]), "itself"),
        (np.zeros((3, 3), dtype=bool), "2x2"),
    ],
)
def test_invalid_matrix(sig, message):
    with pytest.raises(ValueError, match=message):
        SignificanceMatrix(("a", "b"), sig)


def test_random_matrices_are_displayed_truthfully():
    rng = np.random.default_rng(12345)
    failures = 0
    for trial in range(10_000):
        k = int(rng.integers(1, 9))
        upper = np.triu(rng.random((k, k)) < rng.random(), 1)
        sig = upper | upper.T
        sm = SignificanceMatrix(tuple(f"t{i}" for i in range(k)), sig, rng.normal(size=k))
        if not verify_display(sm, letter_display(sm)).ok:
            failures += 1
    assert failures == 0


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 8).flatmap(
    lambda k: st.tuples(st.just(k), st.lists(st.booleans(), min_size=k * k, max_size=k * k))))
def test_display_is_truthful_and_deterministic(case):
    k, bits = case
    upper = np.triu(np.array(bits).reshape(k, k), 1)
    sm = SignificanceMatrix(tuple(map(str, range(k))), upper | upper.T)
    ld = letter_display(sm)
    assert verify_display(sm, ld).ok
    assert letter_display(sm).assignment == ld.assignment
