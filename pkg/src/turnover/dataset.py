"""Factor-labelled observation tables.

A :class:`Dataset` stores each factor as an integer code array into an
ordered tuple of level labels.  Level order is the order of first appearance
unless changed with :meth:`Dataset.relevel`; the *last* level of every factor
is the reference level used by the design coding.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence, TextIO

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

TOY_SYSTEM_NAMES = {
    "1": "Oeko",
    "2": "K-II",
    "3": "NOcsPS I",
    "4": "NOcsPS II",
    "5": "Oeko+",
    "6": "NOcsPS+",
}

# system -> yields for 2020..2024, None where the system was not tested
_TOY_TABLE = {
    "1": (51, 49, 50, 52, None),
    "2": (93, 91, 88, 87, 98),
    "3": (57, 53, 56, 52, 63),
    "4": (54, 51, 56, 54, None),
    "5": (None, None, None, None, 67),
    "6": (None, None, None, None, 63),
}
_TOY_YEARS = ("2020", "2021", "2022", "2023", "2024")


@dataclass(frozen=True)
class Factor:
    name: str
    levels: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.name:
            raise DataError("factor name must be nonempty")
        if not self.levels:
            raise DataError(f"factor {self.name!r} has no levels")
        if len(set(self.levels)) != len(self.levels):
            raise DataError(f"factor {self.name!r} has duplicate level labels")

    @property
    def reference(self) -> str:
        return self.levels[-1]

    def index(self, label: str) -> int:
        try:
            return self.levels.index(label)
        except ValueError:
            raise DataError(f"factor {self.name!r} has no level {label!r}") from None

    def __len__(self) -> int:
        return len(self.levels)


@dataclass(frozen=True)
class Observation:
    levels: Mapping[str, str]
    response: float


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable table of factor codes plus one numeric response.

    Parameters
    ----------
    factors : tuple of Factor
        Declared factors in column order.
    codes : dict
        Factor name -> integer array of level indices, one per row.
    response : ndarray
        Finite response values.
    scale : str
        ``"none"`` or the name of the transform applied to ``response``.
    """

    factors: tuple[Factor, ...]
    codes: Mapping[str, np.ndarray]
    response: np.ndarray
    response_name: str = "value"
    scale: str = "none"
    n_skipped: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        y = np.asarray(self.response, dtype=float)
        if y.ndim != 1 or y.size == 0:
            raise DataError("dataset needs at least one row")
        if not np.all(np.isfinite(y)):
            raise DataError("response values must be finite")
        names = [f.name for f in self.factors]
        if len(set(names)) != len(names):
            raise DataError("factor names must be unique")
        if set(self.codes) != set(names):
            raise DataError("codes must be given for exactly the declared factors")
        frozen = {}
        for f in self.factors:
            c = np.asarray(self.codes[f.name], dtype=np.intp)
            if c.shape != y.shape:
                raise DataError(f"factor {f.name!r} has {c.size} codes for {y.size} rows")
            if c.size and (c.min() < 0 or c.max() >= len(f)):
                raise DataError(f"factor {f.name!r} has codes outside its levels")
            c = c.copy()
            c.flags.writeable = False
            frozen[f.name] = c
        y = y.copy()
        y.flags.writeable = False
        object.__setattr__(self, "codes", frozen)
        object.__setattr__(self, "response", y)

    # construction -----------------------------------------------------------

    @classmethod
    def from_records(
        cls,
        records: Iterable[Mapping[str, object]],
        factor_names: Sequence[str],
        response_name: str = "value",
    ) -> "Dataset":
        """Build a dataset from dict-like rows; level order = first appearance."""
        levels: dict[str, dict[str, int]] = {name: {} for name in factor_names}
        codes: dict[str, list[int]] = {name: [] for name in factor_names}
        y: list[float] = []
        for i, rec in enumerate(records, start=1):
            for name in factor_names:
                if name not in rec:
                    raise DataError(f"row {i}: no level for factor {name!r}")
                label = str(rec[name])
                codes[name].append(levels[name].setdefault(label, len(levels[name])))
            y.append(float(rec[response_name]))  # type: ignore[arg-type]
        if not y:
            raise DataError("no data rows")
        factors = tuple(Factor(name, tuple(levels[name])) for name in factor_names)
        return cls(factors, {k: np.array(v) for k, v in codes.items()}, np.array(y), response_name)

    # access -----------------------------------------------------------------

    @property
    def n(self) -> int:
        return int(self.response.size)

    @property
    def factor_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.factors)

    def factor(self, name: str) -> Factor:
        for f in self.factors:
            if f.name == name:
                return f
        raise DataError(f"unknown factor {name!r}")

    def labels(self, name: str) -> list[str]:
        f = self.factor(name)
        return [f.levels[c] for c in self.codes[name]]

    def rows(self) -> Iterator[Observation]:
        for i in range(self.n):
            levels = {f.name: f.levels[self.codes[f.name][i]] for f in self.factors}
            yield Observation(levels, float(self.response[i]))

    def mask(self, name: str, labels: Iterable[str]) -> np.ndarray:
        f = self.factor(name)
        idx = [f.index(str(lab)) for lab in labels]
        return np.isin(self.codes[name], idx)

    # derived datasets -------------------------------------------------------

    def _replace(self, **changes) -> "Dataset":
        kw = dict(
            factors=self.factors,
            codes=self.codes,
            response=self.response,
            response_name=self.response_name,
            scale=self.scale,
            n_skipped=self.n_skipped,
        )
        kw.update(changes)
        return Dataset(**kw)

    def subset(self, keep: np.ndarray) -> "Dataset":
        """Rows where ``keep`` is true; levels that no longer occur are dropped."""
        keep = np.asarray(keep, dtype=bool)
        if not keep.any():
            raise DataError("subset contains no rows")
        factors, codes = [], {}
        for f in self.factors:
            c = self.codes[f.name][keep]
            used = [i for i in range(len(f)) if np.any(c == i)]
            remap = np.full(len(f), -1)
            remap[used] = np.arange(len(used))
            factors.append(Factor(f.name, tuple(f.levels[i] for i in used)))
            codes[f.name] = remap[c]
        return self._replace(factors=tuple(factors), codes=codes, response=self.response[keep])

    def relevel(self, name: str, reference: str) -> "Dataset":
        """Move ``reference`` to the end of the level order of ``name``."""
        f = self.factor(name)
        old = f.index(reference)
        order = [i for i in range(len(f)) if i != old] + [old]
        remap = np.empty(len(f), dtype=np.intp)
        remap[order] = np.arange(len(f))
        new_factor = Factor(name, tuple(f.levels[i] for i in order))
        factors = tuple(new_factor if g.name == name else g for g in self.factors)
        codes = dict(self.codes)
        codes[name] = remap[self.codes[name]]
        return self._replace(factors=factors, codes=codes)

    def with_response(self, response: np.ndarray, scale: str) -> "Dataset":
        return self._replace(response=response, scale=scale)

    def __repr__(self) -> str:
        fs = ", ".join(f"{f.name}({len(f)})" for f in self.factors)
        return f"Dataset(n={self.n}, factors=[{fs}], response={self.response_name!r})"


@dataclass(frozen=True)
class IncidenceTable:
    row_factor: str
    col_factor: str
    row_levels: tuple[str, ...]
    col_levels: tuple[str, ...]
    counts: np.ndarray

    def render(self, mark: str = "×") -> str:
        width = max([len(self.row_factor)] + [len(r) for r in self.row_levels])
        cw = max([len(c) for c in self.col_levels] + [len(mark)])
        lines = [self.row_factor.ljust(width) + "  " + "  ".join(c.rjust(cw) for c in self.col_levels)]
        for label, row in zip(self.row_levels, self.counts):
            cells = "  ".join((mark if k > 0 else "").rjust(cw) for k in row)
            lines.append(label.ljust(width) + "  " + cells)
        return "\n".join(line.rstrip() for line in lines)


def load_table(source: str | os.PathLike | TextIO, response_column: str = "value") -> Dataset:
    """Read a comma-separated file with a header row.

    ``source`` may be a path, an open text file, or the pseudo-path
    ``"builtin:toy"``.  Every column other than ``response_column`` becomes a
    factor.  Rows with an empty response are skipped and counted in
    ``Dataset.n_skipped``.
    """
    if isinstance(source, str) and source == "builtin:toy":
        return builtin_toy()
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="", encoding="utf-8") as fh:
            return _read_csv(fh, response_column)
    return _read_csv(source, response_column)


def _read_csv(fh: TextIO, response_column: str) -> Dataset:
    reader = csv.reader(fh)
    header = next(reader, None)
    if not header or all(not h.strip() for h in header):
        raise DataError("missing header row")
    header = [h.strip() for h in header]
    if len(set(header)) != len(header):
        raise DataError("duplicate column names in header")
    if response_column not in header:
        raise DataError(f"response column {response_column!r} not in header")
    ycol = header.index(response_column)
    factor_names = [h for h in header if h != response_column]
    records, skipped = [], 0
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise DataError(f"row {lineno}: expected {len(header)} fields, got {len(row)}")
        raw = row[ycol].strip()
        if raw == "":
            skipped += 1
            continue
        try:
            value = float(raw)
        except ValueError:
            raise DataError(f"row {lineno}: non-numeric response {raw!r}") from None
        if not math.isfinite(value):
            raise DataError(f"row {lineno}: non-finite response {raw!r}")
        rec = {h: cell.strip() for h, cell in zip(header, row)}
        rec[response_column] = value
        records.append(rec)
    if skipped:
        logger.warning("skipped %d row(s) with an empty response", skipped)
    if not records:
        raise DataError("no data rows")
    ds = Dataset.from_records(records, factor_names, response_column)
    return ds._replace(n_skipped=skipped)


def builtin_toy() -> Dataset:
    """Toy trial: six systems over 2020-2024, systems 1, 4 replaced by 5, 6 in 2024.

    Factors are ``S`` (system, labels ``"1"``..``"6"``; see
    :data:`TOY_SYSTEM_NAMES` for the Dahnsdorf names) and ``Y`` (year).
    """
    records = [
        {"S": s, "Y": year, "value": float(v)}
        for s, values in _TOY_TABLE.items()
        for year, v in zip(_TOY_YEARS, values)
        if v is not None
    ]
    return Dataset.from_records(records, ["S", "Y"], "value")


def toy_csv() -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["S", "Y", "value"])
    for obs in builtin_toy().rows():
        w.writerow([obs.levels["S"], obs.levels["Y"], f"{obs.response:g}"])
    return buf.getvalue()


def incidence(ds: Dataset, row: str, col: str) -> IncidenceTable:
    rf, cf = ds.factor(row), ds.factor(col)
    counts = np.zeros((len(rf), len(cf)), dtype=int)
    np.add.at(counts, (ds.codes[row], ds.codes[col]), 1)
    return IncidenceTable(row, col, rf.levels, cf.levels, counts)


def derive_factor(ds: Dataset, name: str, source: str, mapping: Mapping[str, str]) -> Dataset:
    """Add factor ``name`` whose level is ``mapping[level of source]``.

    New levels are ordered by first appearance along the source level order.
    """
    if name in ds.factor_names:
        raise DataError(f"factor {name!r} already exists")
    src = ds.factor(source)
    missing = [lab for lab in src.levels if lab not in mapping]
    if missing:
        raise DataError(f"mapping for {name!r} does not cover level(s) {missing} of {source!r}")
    new_levels: dict[str, int] = {}
    lookup = np.array([new_levels.setdefault(str(mapping[lab]), len(new_levels)) for lab in src.levels])
    factor = Factor(name, tuple(new_levels))
    codes = dict(ds.codes)
    codes[name] = lookup[ds.codes[source]]
    return ds._replace(factors=ds.factors + (factor,), codes=codes)
