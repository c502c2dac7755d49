"""Shared toy-trial fixtures and published reference values."""

import pytest

from turnover import builtin_toy, fit, parse_formula

SYSTEMS = ["1", "2", "3", "4", "5", "6"]
YEARS = ["2020", "2021", "2022", "2023", "2024"]

FIXED_YEAR = "S + Y : S.Y"
RANDOM_YEAR = "S : Y + S.Y"
NO_YEAR = "S : S.Y"

# least-squares effects under fixed years, reference levels last
EFFECTS = {
    "Intercept": 63.0,
    "S: 1": -4.125, "S: 2": 35.1, "S: 3": -0.1, "S: 4": -0.875, "S: 5": 4.0,
    "Y: 2020": -6.75, "Y: 2021": -9.5, "Y: 2022": -8.0, "Y: 2023": -9.25,
}

PREDICTED = {
    "1": [52.125, 49.375, 50.875, 49.625, 58.875],
    "2": [91.35, 88.6, 90.1, 88.85, 98.1],
    "3": [56.15, 53.4, 54.9, 53.65, 62.9],
    "4": [55.375, 52.625, 54.125, 52.875, 62.125],
    "5": [60.25, 57.5, 59.0, 57.75, 67.0],
    "6": [56.25, 53.5, 55.0, 53.75, 63.0],
}

# every entry is printed to 3 decimals except random-year system 4 (1 decimal)
MEANS = {
    "no-year": [50.5, 91.4, 56.2, 53.75, 67.0, 63.0],
    "random-year": [51.952, 91.4, 56.2, 55.2, 61.194, 57.194],
    "fixed-year": [52.175, 91.4, 56.2, 55.425, 60.3, 56.3],
}

# (a, b): (no year, random year, fixed year)
SED = {
    ("1", "2"): (2.3359, 1.3634, 1.3484),
    ("1", "3"): (2.3359, 1.3634, 1.3484),
    ("1", "4"): (2.4622, 1.3967, 1.3834),
    ("1", "5"): (3.8931, 2.7312, 2.6789),
    ("1", "6"): (3.8931, 2.7312, 2.6789),
    ("2", "3"): (2.2023, 1.2492, 1.2373),
    ("2", "4"): (2.3359, 1.3634, 1.3484),
    ("2", "5"): (3.8144, 2.5168, 2.4747),
    ("2", "6"): (3.8144, 2.5168, 2.4747),
    ("3", "4"): (2.3359, 1.3634, 1.3484),
    ("3", "5"): (3.8144, 2.5168, 2.4747),
    ("3", "6"): (3.8144, 2.5168, 2.4747),
    ("4", "5"): (3.8931, 2.7312, 2.6789),
    ("4", "6"): (3.8931, 2.7312, 2.6789),
    ("5", "6"): (4.9244, 2.7933, 2.7668),
}
MEAN_SED = (3.3175, 2.1257, 2.0930)

RANGE_MEANS = {
    "1": (50.5, None, None),
    "2": (89.75, 98.0, 91.4),
    "3": (54.5, 63.0, 56.2),
    "4": (53.75, None, None),
    "5": (None, 67.0, None),
    "6": (None, 63.0, None),
    "2 & 3": (72.125, 80.5, 73.8),
}

MEANS_DECIMALS = {"random-year": [3, 3, 3, 1, 3, 3]}

LETTERS_ALL = {"1": "c", "2": "a", "3": "b", "4": "b", "5": "b", "6": "bc"}
LETTERS_CURRENT = {"2": "a", "3": "b", "5": "b", "6": "b"}
GROUPS = {"1": "ended", "2": "current", "3": "current", "4": "ended", "5": "current", "6": "current"}


@pytest.fixture(scope="session")
def toy():
    return builtin_toy()


@pytest.fixture(scope="session")
def fits(toy):
    return {
        name: fit(toy, parse_formula(text, toy.factor_names))
        for name, text in (("no-year", NO_YEAR), ("random-year", RANDOM_YEAR), ("fixed-year", FIXED_YEAR))
    }
