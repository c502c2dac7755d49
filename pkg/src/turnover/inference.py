"""Adjusted means, SEDs, direct/indirect differences and response transforms.

Adjusted means are equal-weight averages of predicted cells over the full
set of margin levels.  Random effects contribute zero to the predictions.
Factors that are functions of the treatment (e.g. a crop within a
system-crop combination, or a group containing each system) are held at the
level implied by the treatment instead of being averaged.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .dataset import Dataset
from .errors import DataError, EstimabilityError
from .formula import ModelSpec, Term
from .letters import SignificanceMatrix
from .solver import FittedModel, fit

TermLike = Term | str | Sequence[str] | None


def as_term(term: TermLike) -> Term | None:
    if term is None or isinstance(term, Term):
        return term
    if isinstance(term, str):
        names = [t.strip() for t in term.split(".") if t.strip()]
        return Term(tuple(names)) if names else None
    return Term(tuple(term))


@dataclass(frozen=True, eq=False)
class CellTable:
    """Predicted cells for every treatment level x margin combination.

    ``coef[i, j]`` is the coefficient vector on the fixed effects for the cell
    ``(treatment_labels[i], margin_labels[j])``, so ``values = coef @ beta``.
    """

    treatment: Term
    margin_factors: tuple[str, ...]
    treatment_labels: tuple[str, ...]
    margin_labels: tuple[str, ...]
    coef: np.ndarray
    values: np.ndarray
    effect_labels: tuple[str, ...]
    beta: np.ndarray
    observed: np.ndarray

    def decomposition(self, i: int, j: int) -> list[tuple[str, float]]:
        """Additive contributions ``(effect, weight * estimate)`` of one cell."""
        c = self.coef[i, j]
        return [
            (label, float(w * b))
            for label, w, b in zip(self.effect_labels, c, self.beta)
            if w != 0.0
        ]

    def row_means(self) -> np.ndarray:
        return self.values.mean(axis=1)

    def cell(self, treatment_label: str, margin_label: str) -> float:
        i = self.treatment_labels.index(treatment_label)
        j = self.margin_labels.index(margin_label)
        return float(self.values[i, j])


@dataclass(frozen=True, eq=False)
class MeansTable:
    labels: tuple[str, ...]
    estimates: np.ndarray
    treatment: str
    margin_over: tuple[str, ...] = ()
    scale: str = "analysis"
    transform: str = "none"
    se: np.ndarray | None = None
    coef: np.ndarray | None = field(default=None, repr=False)
    letters: tuple[str, ...] | None = None

    def __getitem__(self, label: str) -> float:
        return float(self.estimates[self.labels.index(str(label))])

    def as_dict(self) -> dict[str, float]:
        return {lab: float(v) for lab, v in zip(self.labels, self.estimates)}


@dataclass(frozen=True, eq=False)
class SedMatrix:
    """Pairwise comparisons of adjusted means with t tests on ``df``."""

    levels: tuple[str, ...]
    estimates: np.ndarray
    sed: np.ndarray
    t: np.ndarray
    p: np.ndarray
    df: int
    alpha: float
    covariance: str = "model"

    @property
    def t_critical(self) -> float:
        return float(stats.t.ppf(1.0 - self.alpha / 2.0, self.df))

    @property
    def significant(self) -> np.ndarray:
        sig = np.abs(self.t) > self.t_critical
        np.fill_diagonal(sig, False)
        return sig

    def pairs(self) -> list[dict]:
        sig = self.significant
        out = []
        for i, j in itertools.combinations(range(len(self.levels)), 2):
            out.append(
                dict(
                    a=self.levels[i],
                    b=self.levels[j],
                    difference=float(self.estimates[i] - self.estimates[j]),
                    sed=float(self.sed[i, j]),
                    df=self.df,
                    t=float(self.t[i, j]),
                    p=float(self.p[i, j]),
                    significant=bool(sig[i, j]),
                )
            )
        return out

    def get(self, a: str, b: str) -> float:
        return float(self.sed[self.levels.index(str(a)), self.levels.index(str(b))])

    def significance(self, subset: Iterable[str] | None = None) -> SignificanceMatrix:
        idx = self._indices(subset)
        return SignificanceMatrix(
            tuple(self.levels[i] for i in idx),
            self.significant[np.ix_(idx, idx)],
            self.estimates[idx],
        )

    def _indices(self, subset: Iterable[str] | None) -> list[int]:
        if subset is None:
            return list(range(len(self.levels)))
        wanted = [str(s) for s in subset]
        unknown = [s for s in wanted if s not in self.levels]
        if unknown:
            raise DataError(f"unknown level(s) {unknown}")
        return [i for i, lev in enumerate(self.levels) if lev in wanted]


def _determined_by(ds: Dataset, treatment: Term, candidates: Iterable[str]) -> dict[str, dict]:
    """Factors whose level is a function of the treatment combination."""
    keys = [tuple(int(v) for v in row) for row in np.column_stack([ds.codes[f] for f in treatment.factors])]
    out = {}
    for g in candidates:
        mapping: dict[tuple, int] = {}
        ok = True
        for k, lvl in zip(keys, ds.codes[g]):
            if mapping.setdefault(k, int(lvl)) != int(lvl):
                ok = False
                break
        if ok:
            out[g] = mapping
    return out


def predicted_cells(fm: FittedModel, treatment: TermLike, margin: TermLike = None) -> CellTable:
    """Predictions for all treatment x margin-level cells, including empty ones.

    Raises
    ------
    EstimabilityError
        If a cell's linear predictor is not estimable (e.g. disconnected
        design, or an unobserved cell of a fixed interaction).
    """
    ds, design = fm.dataset, fm.design
    tr = as_term(treatment)
    if tr is None:
        raise DataError("a treatment term is required")
    mg = as_term(margin)
    for f in tr.factors + (mg.factors if mg else ()):
        ds.factor(f)
    fixed_factors = [f for t in fm.spec.fixed_terms for f in t.factors]
    fixed_factors = list(dict.fromkeys(fixed_factors))
    margin_factors = [f for f in (mg.factors if mg else ()) if f not in tr]
    others = [f for f in fixed_factors if f not in tr and f not in margin_factors]
    determined = _determined_by(ds, tr, margin_factors + others)
    free_margin = [f for f in margin_factors if f not in determined]
    free_other = [f for f in others if f not in determined]

    tcodes = np.column_stack([ds.codes[f] for f in tr.factors])
    combos = sorted({tuple(int(v) for v in row) for row in tcodes})
    t_labels = tuple(
        ".".join(ds.factor(f).levels[c] for f, c in zip(tr.factors, combo)) for combo in combos
    )
    m_grid = list(itertools.product(*(range(len(ds.factor(f))) for f in free_margin)))
    m_labels = tuple(
        ".".join(ds.factor(f).levels[c] for f, c in zip(free_margin, mc)) for mc in m_grid
    )
    o_grid = list(itertools.product(*(range(len(ds.factor(f))) for f in free_other)))

    coef = np.zeros((len(combos), len(m_grid), design.p))
    observed = np.zeros((len(combos), len(m_grid)), dtype=int)
    for i, combo in enumerate(combos):
        base = dict(zip(tr.factors, combo))
        for g, mapping in determined.items():
            base[g] = mapping[combo]
        tmask = np.all(tcodes == np.array(combo), axis=1)
        for j, mc in enumerate(m_grid):
            assign = dict(base)
            assign.update(zip(free_margin, mc))
            mmask = tmask.copy()
            for f, c in zip(free_margin, mc):
                mmask &= ds.codes[f] == c
            observed[i, j] = int(mmask.sum())
            rows = []
            for oc in o_grid:
                a = dict(assign)
                a.update(zip(free_other, oc))
                try:
                    rows.append(design.row(a))
                except EstimabilityError as exc:
                    cell = t_labels[i] + (f" x {m_labels[j]}" if m_labels[j] else "")
                    raise EstimabilityError(f"cell {cell}: {exc}") from None
            coef[i, j] = np.mean(rows, axis=0)

    flat = coef.reshape(-1, design.p)
    ok = design.estimable(flat).reshape(coef.shape[:2])
    if not ok.all():
        i, j = map(int, np.argwhere(~ok)[0])
        cell = t_labels[i] + (f" x {m_labels[j]}" if m_labels[j] else "")
        raise EstimabilityError(f"cell {cell} is not estimable (disconnected design?)")

    return CellTable(
        treatment=tr,
        margin_factors=tuple(free_margin),
        treatment_labels=t_labels,
        margin_labels=m_labels,
        coef=coef,
        values=coef @ fm.beta,
        effect_labels=design.x_labels,
        beta=fm.beta,
        observed=observed,
    )


def _vcov(fm: FittedModel, covariance: str) -> np.ndarray:
    if covariance == "model":
        return fm.vcov_beta
    if covariance in ("kenward-roger", "kr"):
        return fm.vcov_kenward_roger
    raise ValueError(f"unknown covariance {covariance!r}")


def adjusted_means(
    fm: FittedModel, treatment: TermLike, margin: TermLike = None, covariance: str = "model"
) -> MeansTable:
    """Equal-weight means of :func:`predicted_cells` over the margin levels."""
    cells = predicted_cells(fm, treatment, margin)
    L = cells.coef.mean(axis=1)
    V = _vcov(fm, covariance)
    se = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", L, V, L), 0.0))
    return MeansTable(
        labels=cells.treatment_labels,
        estimates=L @ fm.beta,
        treatment=str(cells.treatment),
        margin_over=cells.margin_factors,
        scale="analysis",
        transform=fm.dataset.scale,
        se=se,
        coef=L,
    )


def sed_matrix(
    fm: FittedModel,
    treatment: TermLike,
    margin: TermLike = None,
    alpha: float = 0.05,
    covariance: str = "model",
) -> SedMatrix:
    """Standard errors of differences between adjusted means.

    ``covariance="kenward-roger"`` uses the Kenward-Roger adjusted covariance
    of the fixed effects; degrees of freedom stay at ``fm.df`` either way.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    means = adjusted_means(fm, treatment, margin)
    L = means.coef
    V = _vcov(fm, covariance)
    k = len(means.labels)
    D = L[:, None, :] - L[None, :, :]
    var = np.einsum("ijp,pq,ijq->ij", D, V, D)
    sed = np.sqrt(np.maximum(var, 0.0))
    diff = means.estimates[:, None] - means.estimates[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(sed > 0, diff / sed, 0.0)
    p = 2.0 * stats.t.sf(np.abs(t), fm.df)
    np.fill_diagonal(p, 1.0)
    return SedMatrix(means.labels, means.estimates, sed, t, p, fm.df, alpha, covariance)


def mean_sed(sm: SedMatrix, subset: Iterable[str] | None = None) -> float:
    idx = sm._indices(subset)
    if len(idx) < 2:
        raise DataError("mean SED needs at least two levels")
    return math.fsum(sm.sed[i, j] for i, j in itertools.combinations(idx, 2)) / math.comb(len(idx), 2)


@dataclass(frozen=True, eq=False)
class YearStatus:
    mean_sed_fixed: float
    mean_sed_random: float
    recommended: str
    fixed_fit: FittedModel = field(repr=False)
    random_fit: FittedModel = field(repr=False)


def select_year_status(
    ds: Dataset,
    spec_fixed: ModelSpec,
    spec_random: ModelSpec,
    treatment: TermLike,
    margin: TermLike = None,
    covariance: str = "kenward-roger",
    tie_tol: float = 1e-6,
) -> YearStatus:
    """Fit both models and recommend the one with the smaller mean SED.

    Ties within ``tie_tol`` favour the fixed model.
    """
    f_fit, r_fit = fit(ds, spec_fixed), fit(ds, spec_random)
    ms_f = mean_sed(sed_matrix(f_fit, treatment, margin, covariance=covariance))
    ms_r = mean_sed(sed_matrix(r_fit, treatment, margin, covariance=covariance))
    rec = "random" if ms_r < ms_f - tie_tol else "fixed"
    return YearStatus(ms_f, ms_r, rec, f_fit, r_fit)


# -- arithmetic comparisons -----------------------------------------------------


def _pooled_mean(ds: Dataset, treatment: str, levels: Sequence[str], environment: str,
                 envs: Sequence[str]) -> float:
    mask = ds.mask(treatment, levels) & ds.mask(environment, envs)
    return math.fsum(ds.response[mask]) / int(mask.sum())


def _observed_envs(ds: Dataset, treatment: str, level: str, environment: str) -> set[str]:
    f = ds.factor(environment)
    m = ds.mask(treatment, [level])
    return {f.levels[c] for c in np.unique(ds.codes[environment][m])}


def _as_levels(levels: str | Iterable[str]) -> list[str]:
    if isinstance(levels, str):
        return [levels]
    return [str(v) for v in levels]


def direct_difference(
    ds: Dataset,
    a: str | Iterable[str],
    b: str | Iterable[str],
    environments: Iterable[str],
    *,
    treatment: str,
    environment: str,
) -> float:
    """Pooled arithmetic mean of ``a`` minus that of ``b`` within ``environments``.

    Every treatment in ``a`` and ``b`` must be observed in every listed
    environment.
    """
    a, b, envs = _as_levels(a), _as_levels(b), _as_levels(environments)
    if not envs:
        raise DataError("no environments given")
    for lev in a + b:
        missing = set(envs) - _observed_envs(ds, treatment, lev, environment)
        if missing:
            raise DataError(
                f"{treatment}={lev} is not observed in {environment}={sorted(missing)}"
            )
    return _pooled_mean(ds, treatment, a, environment, envs) - _pooled_mean(
        ds, treatment, b, environment, envs
    )


def shared_environments(ds: Dataset, levels: Iterable[str], treatment: str, environment: str) -> list[str]:
    """Environments in which every one of ``levels`` was observed, in level order."""
    sets = [_observed_envs(ds, treatment, lev, environment) for lev in _as_levels(levels)]
    common = set.intersection(*sets) if sets else set()
    return [e for e in ds.factor(environment).levels if e in common]


def indirect_difference(
    ds: Dataset,
    a: str | Iterable[str],
    b: str | Iterable[str],
    reference: Iterable[str],
    *,
    treatment: str,
    environment: str,
) -> float:
    """Difference of the direct differences of ``a`` and ``b`` to ``reference``."""
    a, b, ref = _as_levels(a), _as_levels(b), _as_levels(reference)
    env_a = shared_environments(ds, a + ref, treatment, environment)
    env_b = shared_environments(ds, b + ref, treatment, environment)
    for side, envs in (("a", env_a), ("b", env_b)):
        if not envs:
            raise DataError(f"treatment set {side} shares no {environment} level with the reference")
    d_a = direct_difference(ds, a, ref, env_a, treatment=treatment, environment=environment)
    d_b = direct_difference(ds, b, ref, env_b, treatment=treatment, environment=environment)
    return d_a - d_b


@dataclass(frozen=True)
class RangeMeans:
    row_labels: tuple[str, ...]
    range_labels: tuple[str, ...]
    values: np.ndarray  # NaN where a row has no data in a range

    def get(self, row: str, rng: str) -> float:
        return float(self.values[self.row_labels.index(row), self.range_labels.index(rng)])


def _range_label(ds: Dataset, environment: str, envs: Sequence[str]) -> str:
    levels = ds.factor(environment).levels
    idx = sorted(levels.index(e) for e in envs)
    if len(idx) == 1:
        return levels[idx[0]]
    if idx == list(range(idx[0], idx[-1] + 1)):
        return f"{levels[idx[0]]}-{levels[idx[-1]]}"
    return ",".join(levels[i] for i in idx)


def range_means(
    ds: Dataset,
    treatment: str,
    environment: str,
    ranges: Sequence[Iterable[str]],
    pooled: Sequence[Iterable[str]] = (),
) -> RangeMeans:
    """Arithmetic means per treatment (and pooled treatment set) per range.

    A cell is NaN unless every treatment of its row was observed in every
    environment of the range; a partial mean would not be comparable.
    """
    ranges = [_as_levels(r) for r in ranges]
    if any(not r for r in ranges) or not ranges:
        raise DataError("every range needs at least one level")
    for r in ranges:
        for e in r:
            ds.factor(environment).index(e)
    rows = [[lev] for lev in ds.factor(treatment).levels] + [_as_levels(p) for p in pooled]
    labels = [r[0] if len(r) == 1 else " & ".join(r) for r in rows]
    values = np.full((len(rows), len(ranges)), np.nan)
    for i, lv in enumerate(rows):
        for j, rg in enumerate(ranges):
            mask = ds.mask(treatment, lv) & ds.mask(environment, rg)
            if all(set(rg) <= _observed_envs(ds, treatment, t, environment) for t in lv):
                values[i, j] = math.fsum(ds.response[mask]) / int(mask.sum())
    return RangeMeans(tuple(labels), tuple(_range_label(ds, environment, r) for r in ranges), values)


# -- transforms -----------------------------------------------------------------

TRANSFORMS = ("none", "sqrt")


def transform_response(ds: Dataset, kind: str) -> Dataset:
    if kind not in TRANSFORMS:
        raise ValueError(f"unknown transform {kind!r}")
    if kind == "none":
        return ds
    if ds.scale != "none":
        raise DataError(f"response is already on the {ds.scale!r} scale")
    if np.any(ds.response < 0):
        row = int(np.flatnonzero(ds.response < 0)[0]) + 1
        raise DataError(f"row {row}: negative response cannot be square-root transformed")
    return ds.with_response(np.sqrt(ds.response), "sqrt")


def back_transform(mt: MeansTable, kind: str) -> MeansTable:
    """Map analysis-scale means back to the data scale (medians under sqrt).

    Standard errors and letters are carried over unchanged; they describe the
    analysis scale.
    """
    if kind not in TRANSFORMS:
        raise ValueError(f"unknown transform {kind!r}")
    if kind == "none":
        return mt
    if mt.scale != "analysis" or mt.transform != kind:
        raise DataError(f"means are on scale {mt.scale!r}/{mt.transform!r}, not analysis/{kind!r}")
    return replace(mt, estimates=mt.estimates**2, scale="back-transformed")
