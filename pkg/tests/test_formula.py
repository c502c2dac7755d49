import pytest
from hypothesis import given, settings, strategies as st

from turnover import FormulaError, Term, parse_formula, render_formula

FACTORS = ["S", "P", "C", "V", "Y", "G"]


def terms(spec_side):
    return {frozenset(t.factors) for t in spec_side}


def test_fixed_and_random_parts():
    spec = parse_formula("S + Y : S.Y", ["S", "Y"])
    assert terms(spec.fixed_terms) == {frozenset("S"), frozenset("Y")}
    assert terms(spec.random_terms) == {frozenset("SY")}


def test_four_way_interaction_model():
    spec = parse_formula("S.P.C.V + C.Y : S.P.C.V.Y", FACTORS)
    assert [str(t) for t in spec.fixed_terms] == ["S.P.C.V", "C.Y"]
    assert [str(t) for t in spec.random_terms] == ["S.P.C.V.Y"]


def test_nesting_expands_to_main_effect_plus_interaction():
    spec = parse_formula("G/S + Y", ["G", "S", "Y"])
    assert [str(t) for t in spec.fixed_terms] == ["G", "G.S", "Y"]


def test_intercept_only():
    spec = parse_formula("1 : Y", ["S", "Y"])
    assert spec.fixed_terms == ()
    assert render_formula(spec) == "1 : Y"


def test_term_equality_ignores_order():
    assert Term(("S", "Y")) == Term(("Y", "S"))
    assert hash(Term(("S", "Y"))) == hash(Term(("Y", "S")))


@pytest.mark.parametrize(
    "text",
    [
        "S + Q",  # unknown factor
        "S.S",  # repeated factor
        "S + S",  # duplicate term
        "S : ",  # empty random part
        " : Y",  # random part only
        "S : Y : S.Y",  # two colons
        "S + ",  # empty term
        "S : S",  # fixed and random overlap
    ],
)
def test_rejects_malformed(text):
    with pytest.raises(FormulaError):
        parse_formula(text, ["S", "Y"])


def test_error_names_offending_factor():
    with pytest.raises(FormulaError, match="Q"):
        parse_formula("S + Q", ["S", "Y"])


term_st = st.lists(st.sampled_from(FACTORS), min_size=1, max_size=3, unique=True)


@st.composite
def formulas(draw):
    pool = draw(st.lists(term_st, min_size=1, max_size=6, unique_by=lambda t: frozenset(t)))
    split = draw(st.integers(min_value=1, max_value=len(pool)))
    fixed = [".".join(t) for t in pool[:split]]
    random = [".".join(t) for t in pool[split:]]
    text = " + ".join(fixed)
    if random:
        text += " : " + " + ".join(random)
    return text


@settings(max_examples=200, deadline=None)
@given(formulas())
def test_render_round_trip(text):
    spec = parse_formula(text, FACTORS)
    again = parse_formula(render_formula(spec), FACTORS)
    assert again == spec
    assert render_formula(again) == render_formula(spec)


@settings(max_examples=100, deadline=None)
@given(st.permutations(["S", "Y.S", "G"]), st.permutations(["P", "C.V"]))
def test_term_order_and_factor_order_do_not_matter(fixed, random):
    a = parse_formula(" + ".join(fixed) + " : " + " + ".join(random), FACTORS)
    b = parse_formula("G + S.Y + S : C.V + P", FACTORS)
    assert set(a.fixed_terms) == set(b.fixed_terms)
    assert set(a.random_terms) == set(b.random_terms)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(FACTORS), st.sampled_from(FACTORS))
def test_nesting_rule(a, b):
    if a == b:
        with pytest.raises(FormulaError):
            parse_formula(f"{a}/{b}", FACTORS)
        return
    nested = parse_formula(f"{a}/{b}", FACTORS)
    explicit = parse_formula(f"{a} + {a}.{b}", FACTORS)
    assert set(nested.fixed_terms) == set(explicit.fixed_terms)
