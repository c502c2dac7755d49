"""Synthetic multi-year trials in which some treatments are replaced.

System labels are ``"1" .. str(n_old + n_new)``: the first ``n_bridge`` are
tested in every year, the remaining old systems only in the pre-change years
and the new systems only in the post-change years.  Year labels are
``"1" .. str(n_years_pre + n_years_post)``.

Replicate ``r`` of a study draws from ``Philox(seed).jumped(r)``, so its data
do not depend on which other replicates are run or in what order.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .dataset import Dataset
from .errors import TurnoverError
from .formula import parse_formula
from .inference import adjusted_means, mean_sed, sed_matrix
from .solver import fit

MODELS = {
    "model1": "S",
    "model2": "S : Y",
    "model3": "S + Y",
}


@dataclass(frozen=True)
class SimConfig:
    n_systems_old: int = 4
    n_systems_new: int = 2
    n_bridge: int = 2
    n_years_pre: int = 4
    n_years_post: int = 1
    true_system_effects: Sequence[float] | None = None
    true_year_effects: Sequence[float] | None = None
    sigma_e: float = 1.0
    sigma_year: float = 0.0
    replicates: int = 1
    grand_mean: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        counts = dict(
            n_systems_old=self.n_systems_old,
            n_systems_new=self.n_systems_new,
            n_bridge=self.n_bridge,
            n_years_pre=self.n_years_pre,
            n_years_post=self.n_years_post,
            replicates=self.replicates,
        )
        for name, v in counts.items():
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v}")
        if self.n_bridge > self.n_systems_old:
            raise ValueError("n_bridge cannot exceed n_systems_old")
        if self.sigma_e < 0 or self.sigma_year < 0:
            raise ValueError("standard deviations must be nonnegative")
        if len(self.system_effects) != self.n_systems:
            raise ValueError(f"need {self.n_systems} system effects")
        if len(self.year_effects) != self.n_years:
            raise ValueError(f"need {self.n_years} year effects")

    @property
    def n_systems(self) -> int:
        return self.n_systems_old + self.n_systems_new

    @property
    def n_years(self) -> int:
        return self.n_years_pre + self.n_years_post

    @property
    def system_effects(self) -> np.ndarray:
        if self.true_system_effects is None:
            return np.zeros(self.n_systems)
        return np.asarray(self.true_system_effects, dtype=float)

    @property
    def year_effects(self) -> np.ndarray:
        if self.true_year_effects is None:
            return np.zeros(self.n_years)
        return np.asarray(self.true_year_effects, dtype=float)

    @property
    def bridge_systems(self) -> list[str]:
        return [str(i + 1) for i in range(self.n_bridge)]

    @property
    def ended_systems(self) -> list[str]:
        return [str(i + 1) for i in range(self.n_bridge, self.n_systems_old)]

    @property
    def new_systems(self) -> list[str]:
        return [str(i + 1) for i in range(self.n_systems_old, self.n_systems)]

    def tested(self, system: int, year: int) -> bool:
        if system < self.n_bridge:
            return True
        if system < self.n_systems_old:
            return year < self.n_years_pre
        return year >= self.n_years_pre


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed).jumped(replicate))


def simulate_trial(cfg: SimConfig, replicate: int = 0) -> Dataset:
    """One synthetic trial: grand mean + system + year effect + Gaussian noise.

    With ``sigma_year > 0`` a fresh N(0, sigma_year^2) deviation is added to
    every year effect.
    """
    rng = replicate_rng(cfg.seed, replicate)
    years = cfg.year_effects
    if cfg.sigma_year > 0:
        years = years + rng.normal(0.0, cfg.sigma_year, size=cfg.n_years)
    records = []
    for s, y in itertools.product(range(cfg.n_systems), range(cfg.n_years)):
        if not cfg.tested(s, y):
            continue
        mu = cfg.grand_mean + cfg.system_effects[s] + years[y]
        noise = rng.normal(0.0, cfg.sigma_e, size=cfg.replicates) if cfg.sigma_e > 0 else np.zeros(cfg.replicates)
        for e in noise:
            records.append({"S": str(s + 1), "Y": str(y + 1), "value": mu + e})
    # bridge system "1" is tested every year, so first appearance is numeric order
    return Dataset.from_records(records, ["S", "Y"], "value")


@dataclass(frozen=True)
class BiasEntry:
    model: str
    a: str
    b: str
    kind: str
    mean_estimate: float
    true_difference: float
    bias: float
    mc_se: float
    n_ok: int


@dataclass(frozen=True)
class BiasReport:
    """Per-model, per-pair Monte Carlo summaries.

    ``pooled[(model, kind)]`` holds ``(bias, mc_se)`` of the per-replicate
    average error over all pairs of one kind, e.g. ``"old-new"`` for
    replaced-vs-new systems.  ``mean_seds`` is the average mean SED per model.
    """

    config: SimConfig
    n_reps: int
    entries: tuple[BiasEntry, ...]
    failures: dict
    mean_seds: dict
    pooled: dict

    def get(self, model: str, a: str, b: str) -> BiasEntry:
        for e in self.entries:
            if e.model == model and e.a == a and e.b == b:
                return e
        raise KeyError((model, a, b))


def _pair_kind(cfg: SimConfig, a: str, b: str) -> str:
    def role(s: str) -> str:
        if s in cfg.bridge_systems:
            return "bridge"
        return "old" if s in cfg.ended_systems else "new"

    return f"{role(a)}-{role(b)}"


def _one_replicate(cfg: SimConfig, r: int, models: Sequence[str]) -> dict:
    ds = simulate_trial(cfg, r)
    out = {}
    for m in models:
        try:
            fm = fit(ds, parse_formula(MODELS[m], ["S", "Y"]))
            sm = sed_matrix(fm, "S", "Y")
            means = adjusted_means(fm, "S", "Y")
            out[m] = (means.as_dict(), mean_sed(sm))
        except (TurnoverError, np.linalg.LinAlgError) as exc:
            out[m] = exc
    return out


def bias_study(cfg: SimConfig, n_reps: int = 1000, threads: int = 1) -> BiasReport:
    """Monte Carlo bias of pairwise system differences under Models 1-3.

    Model 2 (random years) is fitted only when ``cfg.sigma_year > 0``.  Fit
    failures are counted per model and excluded from the averages.
    """
    if n_reps < 100:
        raise ValueError("n_reps must be at least 100")
    models = ["model1", "model3"] + (["model2"] if cfg.sigma_year > 0 else [])
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(lambda r: _one_replicate(cfg, r, models), range(n_reps)))
    else:
        results = [_one_replicate(cfg, r, models) for r in range(n_reps)]

    labels = [str(i + 1) for i in range(cfg.n_systems)]
    eff = cfg.system_effects
    entries, failures, msed, pooled = [], {}, {}, {}
    for m in sorted(models):
        ok = [res[m] for res in results if not isinstance(res[m], Exception)]
        failures[m] = n_reps - len(ok)
        msed[m] = math.fsum(v[1] for v in ok) / len(ok) if ok else math.nan
        by_kind: dict[str, list[np.ndarray]] = {}
        for i, j in itertools.combinations(range(cfg.n_systems), 2):
            a, b = labels[i], labels[j]
            est = np.array([v[0][a] - v[0][b] for v in ok])
            truth = float(eff[i] - eff[j])
            mean_est = math.fsum(est) / len(est) if len(est) else math.nan
            se = float(np.std(est, ddof=1) / math.sqrt(len(est))) if len(est) > 1 else math.nan
            kind = _pair_kind(cfg, a, b)
            entries.append(BiasEntry(m, a, b, kind, mean_est, truth, mean_est - truth, se, len(est)))
            by_kind.setdefault(kind, []).append(est - truth)
        for kind, errs in by_kind.items():
            per_rep = np.mean(np.vstack(errs), axis=0)
            pooled[(m, kind)] = (
                math.fsum(per_rep) / len(per_rep),
                float(np.std(per_rep, ddof=1) / math.sqrt(len(per_rep))),
            )
    return BiasReport(cfg, n_reps, tuple(entries), failures, msed, pooled)


def with_years(cfg: SimConfig, n_years_pre: int, n_years_post: int) -> SimConfig:
    """Same scenario with a different number of years and zero year effects."""
    return replace(
        cfg,
        n_years_pre=n_years_pre,
        n_years_post=n_years_post,
        true_year_effects=None,
    )
