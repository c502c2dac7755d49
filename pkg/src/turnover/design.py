"""Design matrices under corner-point (last level = reference) coding.

Coding rules for a fixed term ``T``:

* a factor ``f`` in ``T`` drops its reference level when the marginal term
  ``T`` without ``f`` is also in the model (the intercept counts as the
  empty term, so main effects always drop their last level);
* a compound term none of whose margins is in the model is coded as one
  composite factor over the observed level combinations, dropping the last
  observed combination;
* only observed combinations get a column.

Columns that are linear combinations of earlier columns are reported as
aliased and carry a zero coefficient in the fits.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from .dataset import Dataset
from .errors import DataError, DesignError, EstimabilityError
from .formula import ModelSpec, Term

RANK_RTOL = 1e-8
ESTIMABLE_RTOL = 1e-7


@dataclass(frozen=True)
class TermCoding:
    term: Term
    contrast: tuple[bool, ...]
    composite: bool
    reference: tuple[int, ...] | None
    columns: Mapping[tuple[int, ...], int]
    observed: frozenset

    def column_for(self, combo: tuple[int, ...], refs: tuple[int, ...]) -> int | None:
        """Column index for a level combination, ``None`` for a zero row.

        Raises
        ------
        EstimabilityError
            If the combination has no column and is not a reference.
        """
        if self.composite:
            if combo == self.reference:
                return None
        elif any(c and lvl == r for c, lvl, r in zip(self.contrast, combo, refs)):
            return None
        col = self.columns.get(combo)
        if col is None:
            raise EstimabilityError(
                f"combination {combo} of term {self.term} was never observed"
            )
        return col


@dataclass(frozen=True, eq=False)
class DesignMatrices:
    X: np.ndarray
    Z: np.ndarray
    x_labels: tuple[str, ...]
    z_labels: tuple[str, ...]
    residual_alias: Mapping[Term, bool]
    rank: int
    rank_xz: int
    aliased: tuple[int, ...]
    codings: tuple[TermCoding, ...]
    random_term: Term | None
    factor_levels: Mapping[str, tuple[str, ...]]
    _row_basis: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def kept(self) -> np.ndarray:
        keep = np.ones(self.p, dtype=bool)
        keep[list(self.aliased)] = False
        return keep

    def row(self, assignment: Mapping[str, int]) -> np.ndarray:
        """Coefficient vector of the fixed-effect linear predictor for one cell.

        ``assignment`` maps every factor of the fixed terms to a level index.
        """
        out = np.zeros(self.p)
        out[0] = 1.0
        for coding in self.codings:
            try:
                combo = tuple(int(assignment[f]) for f in coding.term.factors)
            except KeyError as exc:
                raise EstimabilityError(f"no level given for factor {exc.args[0]!r}") from None
            refs = tuple(len(self.factor_levels[f]) - 1 for f in coding.term.factors)
            col = coding.column_for(combo, refs)
            if col is not None:
                out[col] = 1.0
        return out

    def estimable(self, L: np.ndarray) -> np.ndarray:
        """Flag rows of ``L`` that lie in the row space of ``X``."""
        L = np.atleast_2d(np.asarray(L, dtype=float))
        proj = (L @ self._row_basis) @ self._row_basis.T
        resid = np.linalg.norm(L - proj, axis=1)
        scale = np.maximum(np.linalg.norm(L, axis=1), 1.0)
        return resid <= ESTIMABLE_RTOL * scale

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["matrix", "row"] + list(self.x_labels))
        for i, r in enumerate(self.X):
            w.writerow(["X", i + 1] + [f"{v:g}" for v in r])
        if self.Z.shape[1]:
            w.writerow(["matrix", "row"] + list(self.z_labels))
            for i, r in enumerate(self.Z):
                w.writerow(["Z", i + 1] + [f"{v:g}" for v in r])
        return buf.getvalue()


def column_rank(A: np.ndarray) -> int:
    """Numerical rank from a column-pivoted QR factorization."""
    if A.size == 0:
        return 0
    _, R, _ = scipy.linalg.qr(A, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    tol = RANK_RTOL * max(np.linalg.norm(A, axis=0).max(), np.finfo(float).tiny)
    return int(np.sum(d > tol))


def aliased_columns(A: np.ndarray) -> tuple[int, ...]:
    """Columns that are (numerically) combinations of earlier columns."""
    tol = RANK_RTOL * max(np.linalg.norm(A, axis=0).max(initial=0.0), np.finfo(float).tiny)
    basis = np.zeros((A.shape[0], 0))
    aliased = []
    for j in range(A.shape[1]):
        v = A[:, j].astype(float)
        for _ in range(2):  # reorthogonalize once
            v = v - basis @ (basis.T @ v)
        nv = np.linalg.norm(v)
        if nv > tol:
            basis = np.column_stack([basis, v / nv])
        else:
            aliased.append(j)
    return tuple(aliased)


def _combos(ds: Dataset, factors: Sequence[str]) -> np.ndarray:
    return np.column_stack([ds.codes[f] for f in factors])


def _code_fixed_term(
    ds: Dataset, spec: ModelSpec, term: Term, start: int
) -> tuple[TermCoding, list[tuple[int, ...]]]:
    combos = _combos(ds, term.factors)
    observed = sorted({tuple(int(v) for v in row) for row in combos})
    contrast = tuple(spec.has_fixed(term.without(f)) for f in term.factors)
    composite = len(term) > 1 and not any(contrast)
    if composite:
        reference = observed[-1]
        coded = observed[:-1]
    else:
        reference = None
        refs = [len(ds.factor(f)) - 1 for f in term.factors]
        coded = [
            c for c in observed
            if not any(flag and lvl == r for flag, lvl, r in zip(contrast, c, refs))
        ]
    columns = {c: start + k for k, c in enumerate(coded)}
    coding = TermCoding(term, contrast, composite, reference, columns, frozenset(observed))
    return coding, coded


def _label(ds: Dataset, term: Term, combo: tuple[int, ...]) -> str:
    levels = ".".join(ds.factor(f).levels[c] for f, c in zip(term.factors, combo))
    return f"{term}: {levels}"


def _is_residual_alias(ds: Dataset, term: Term) -> bool:
    combos = _combos(ds, term.factors)
    return len({tuple(r) for r in combos}) == ds.n


def build_design(ds: Dataset, spec: ModelSpec) -> DesignMatrices:
    """Fixed (X) and random (Z) design matrices for ``spec`` on ``ds``.

    A random term whose level combinations index the rows one-to-one is the
    residual itself: it is flagged in ``residual_alias`` and contributes no
    columns.  At most one other random term is supported.
    """
    names = set(ds.factor_names)
    for term in spec.fixed_terms + spec.random_terms:
        for f in term.factors:
            if f not in names:
                raise DesignError(f"factor {f!r} in term {term} is not in the data")

    n = ds.n
    cols = [np.ones(n)]
    labels = ["Intercept"]
    codings = []
    for term in spec.fixed_terms:
        coding, coded = _code_fixed_term(ds, spec, term, len(cols))
        combos = _combos(ds, term.factors)
        for c in coded:
            cols.append(np.all(combos == np.array(c), axis=1).astype(float))
            labels.append(_label(ds, term, c))
        codings.append(coding)
    X = np.column_stack(cols)

    residual_alias = {t: _is_residual_alias(ds, t) for t in spec.random_terms}
    fittable = [t for t in spec.random_terms if not residual_alias[t]]
    if len(fittable) > 1:
        raise DesignError(
            "unsupported random structure: at most one random term besides the "
            f"residual can be fitted, got {', '.join(map(str, fittable))}"
        )
    random_term = fittable[0] if fittable else None
    if random_term is not None:
        combos = _combos(ds, random_term.factors)
        observed = sorted({tuple(int(v) for v in r) for r in combos})
        Z = np.column_stack([np.all(combos == np.array(c), axis=1).astype(float) for c in observed])
        z_labels = tuple(_label(ds, random_term, c) for c in observed)
    else:
        Z = np.zeros((n, 0))
        z_labels = ()

    aliased = aliased_columns(X)
    rank = column_rank(X)
    if rank != X.shape[1] - len(aliased):
        raise DesignError("inconsistent rank determination; design is numerically ill-conditioned")
    rank_xz = column_rank(np.column_stack([X, Z])) if Z.shape[1] else rank

    _, s, vt = np.linalg.svd(X, full_matrices=False)
    basis = vt[: int(np.sum(s > RANK_RTOL * s[0]))].T

    return DesignMatrices(
        X=X,
        Z=Z,
        x_labels=tuple(labels),
        z_labels=z_labels,
        residual_alias=residual_alias,
        rank=rank,
        rank_xz=rank_xz,
        aliased=aliased,
        codings=tuple(codings),
        random_term=random_term,
        factor_levels={f.name: f.levels for f in ds.factors},
        _row_basis=basis,
    )


@dataclass(frozen=True)
class ConnectivityReport:
    treatment: str
    environment: str
    components: tuple[tuple[str, ...], ...]

    @property
    def connected(self) -> bool:
        return len(self.components) == 1


def connectivity(ds: Dataset, treatment: str, environment: str) -> ConnectivityReport:
    """Group treatment levels linked through chains of shared environments."""
    tf, ef = ds.factor(treatment), ds.factor(environment)
    nt = len(tf)
    parent = list(range(nt + len(ef)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for t, e in zip(ds.codes[treatment], ds.codes[environment]):
        a, b = find(int(t)), find(nt + int(e))
        if a != b:
            parent[max(a, b)] = min(a, b)
    groups: dict[int, list[str]] = {}
    for t in range(nt):
        groups.setdefault(find(t), []).append(tf.levels[t])
    return ConnectivityReport(treatment, environment, tuple(tuple(g) for g in groups.values()))


def level_grid(levels: Mapping[str, Sequence[int]]) -> list[dict[str, int]]:
    names = list(levels)
    return [dict(zip(names, combo)) for combo in itertools.product(*(levels[n] for n in names))]


def check_factors(ds: Dataset, factors: Sequence[str]) -> None:
    for f in factors:
        if f not in ds.factor_names:
            raise DataError(f"unknown factor {f!r}")
