"""Command-line entry point: ``turnover <command> [options]``.

Exit status is 0 on success, 1 on usage errors and 2 on data or model
errors.  Every command accepts ``--format text|csv|json``; JSON documents
follow :data:`JSON_SCHEMA`.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import logging
import shlex
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .dataset import Dataset, derive_factor, incidence, load_table
from .errors import TurnoverError
from .formula import parse_formula, render_formula
from .inference import (
    adjusted_means,
    back_transform,
    direct_difference,
    indirect_difference,
    mean_sed,
    sed_matrix,
    select_year_status,
    shared_environments,
    transform_response,
)
from .letters import letter_display
from .simulator import SimConfig, bias_study, simulate_trial
from .solver import fit

COMMANDS = ("fit", "means", "sed", "letters", "indirect", "incidence", "simulate", "select-year")

FOOTNOTE = (
    "Means followed by a common letter are not significantly different "
    "according to a t-test at the {pct:g}% level of significance."
)

_num = {"type": "number"}
_str = {"type": "string"}
_int = {"type": "integer"}


def _obj(props: dict, required: Sequence[str] | None = None) -> dict:
    return {
        "type": "object",
        "properties": props,
        "required": list(required if required is not None else props),
    }


JSON_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "oneOf": [
        _obj({
            "command": {"const": "fit"},
            "model": _str, "method": _str, "n": _int, "df": _int,
            "effects": {"type": "array", "items": _obj(
                {"effect": _str, "estimate": _num, "aliased": {"type": "boolean"}})},
            "variance_components": _obj(
                {"sigma2_residual": _num, "sigma2_random": _num, "gamma": _num}),
            "reml_loglik": {"type": ["number", "null"]},
            "converged": {"type": "boolean"}, "boundary": {"type": "boolean"},
            "vcov_beta": {"type": "array", "items": {"type": "array", "items": _num}},
        }),
        _obj({
            "command": {"const": "means"},
            "model": _str, "treatment": _str, "margin": {"type": ["string", "null"]},
            "transform": _str,
            "means": {"type": "array", "items": _obj(
                {"level": _str, "estimate": _num, "se": _num,
                 "back_transformed": {"type": ["number", "null"]}})},
        }),
        _obj({
            "command": {"const": "sed"},
            "model": _str, "treatment": _str, "df": _int, "alpha": _num,
            "covariance": _str, "mean_sed": _num,
            "pairs": {"type": "array", "items": _obj(
                {"a": _str, "b": _str, "difference": _num, "sed": _num, "df": _int,
                 "t": _num, "p": _num, "significant": {"type": "boolean"}})},
        }),
        _obj({
            "command": {"const": "letters"},
            "model": _str, "treatment": _str, "alpha": _num, "df": _int, "mean_sed": _num,
            "means": {"type": "array", "items": _obj(
                {"level": _str, "estimate": _num, "letters": _str,
                 "back_transformed": {"type": ["number", "null"]}})},
        }),
        _obj({
            "command": {"const": "indirect"},
            "a": {"type": "array", "items": _str}, "b": {"type": "array", "items": _str},
            "reference": {"type": "array", "items": _str},
            "env_a": {"type": "array", "items": _str}, "env_b": {"type": "array", "items": _str},
            "direct_a": _num, "direct_b": _num, "indirect": _num,
        }),
        _obj({
            "command": {"const": "incidence"},
            "row": _str, "col": _str,
            "row_levels": {"type": "array", "items": _str},
            "col_levels": {"type": "array", "items": _str},
            "counts": {"type": "array", "items": {"type": "array", "items": _int}},
        }),
        _obj({
            "command": {"const": "simulate"},
            "study": {"const": "bias"}, "n_reps": _int,
            "failures": {"type": "object"}, "mean_sed": {"type": "object"},
            "pooled": {"type": "array", "items": _obj(
                {"model": _str, "kind": _str, "bias": _num, "mc_se": _num})},
            "entries": {"type": "array", "items": _obj(
                {"model": _str, "a": _str, "b": _str, "kind": _str, "mean_estimate": _num,
                 "true_difference": _num, "bias": _num, "mc_se": _num, "n_ok": _int})},
        }),
        _obj({
            "command": {"const": "simulate"},
            "study": {"type": "null"},
            "factors": {"type": "array", "items": _str},
            "rows": {"type": "array", "items": {"type": "object"}},
        }),
        _obj({
            "command": {"const": "select-year"},
            "fixed_model": _str, "random_model": _str, "covariance": _str,
            "mean_sed_fixed": _num, "mean_sed_random": _num,
            "recommended": {"enum": ["fixed", "random"]},
        }),
    ],
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit status 1 for usage errors
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, data: bool = True) -> None:
    if data:
        p.add_argument("--data", required=True, help="CSV file or builtin:toy")
        p.add_argument("--response", default="value", help="response column (default: value)")
        p.add_argument("--transform", choices=("none", "sqrt"), default="none")
        p.add_argument("--relevel", action="append", default=[], metavar="FACTOR=LEVEL",
                       help="make LEVEL the reference (last) level of FACTOR")
        p.add_argument("--derive", action="append", default=[], metavar="NAME=SOURCE:LEVEL=NEW,...",
                       help="add a factor NAME mapping levels of SOURCE, e.g. G=S:1=ended,2=current")
    p.add_argument("--format", choices=("text", "csv", "json"), default="text")
    p.add_argument("--precision", type=int, default=4)
    p.add_argument("--config", help="file of key=value lines used as default options")


def _model_opts(p: argparse.ArgumentParser, model_required: bool = True) -> None:
    p.add_argument("--model", required=model_required, help='formula, e.g. "S + Y : S.Y"')
    p.add_argument("--treatment", required=True)
    p.add_argument("--margin", default=None, help="term averaged over with equal weights")


def _stat_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--within", action="append", default=[], metavar="FACTOR=LEVEL",
                   help="compare only treatment levels with FACTOR=LEVEL")
    p.add_argument("--covariance", choices=("model", "kenward-roger"), default="model")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="turnover", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit a model and print effect estimates")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--dump-design", metavar="PATH", help="write X and Z with column labels as CSV")

    p = sub.add_parser("means", help="adjusted treatment means")
    _common(p)
    _model_opts(p)
    p.add_argument("--covariance", choices=("model", "kenward-roger"), default="model")

    p = sub.add_parser("sed", help="standard errors of differences and t tests")
    _common(p)
    _model_opts(p)
    _stat_opts(p)

    p = sub.add_parser("letters", help="compact letter display")
    _common(p)
    _model_opts(p)
    _stat_opts(p)

    p = sub.add_parser("indirect", help="indirect comparison through a reference set")
    _common(p)
    p.add_argument("--a", required=True, help="treatment level(s), comma separated")
    p.add_argument("--b", required=True)
    p.add_argument("--ref", required=True, help="reference level(s), comma separated")
    p.add_argument("--env", required=True, help="environment factor")
    p.add_argument("--treatment", default=None)

    p = sub.add_parser("incidence", help="treatment x environment incidence table")
    _common(p)
    p.add_argument("--row", required=True)
    p.add_argument("--col", required=True)

    p = sub.add_parser("select-year", help="choose fixed or random year effects by mean SED")
    _common(p)
    _model_opts(p, model_required=False)
    p.add_argument("--random-model", default=None)
    p.add_argument("--covariance", choices=("model", "kenward-roger"), default="kenward-roger")

    p = sub.add_parser("simulate", help="simulate a trial or run a bias study")
    _common(p, data=False)
    p.add_argument("--n-old", type=int, default=4)
    p.add_argument("--n-new", type=int, default=2)
    p.add_argument("--n-bridge", type=int, default=2)
    p.add_argument("--years-pre", type=int, default=4)
    p.add_argument("--years-post", type=int, default=1)
    p.add_argument("--system-effects", default=None, help="comma separated")
    p.add_argument("--year-effects", default=None, help="comma separated")
    p.add_argument("--grand-mean", type=float, default=0.0)
    p.add_argument("--sigma-e", type=float, default=1.0)
    p.add_argument("--sigma-year", type=float, default=0.0)
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--study", choices=("bias",), default=None)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default=None, help="write the dataset here instead of stdout")
    return parser


# -- helpers -------------------------------------------------------------------------


def _split(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _pairs(items: Sequence[str], flag: str) -> list[tuple[str, str]]:
    out = []
    for item in items:
        key, sep, val = item.partition("=")
        if not sep or not key or not val:
            raise UsageError(f"{flag} expects FACTOR=LEVEL, got {item!r}")
        out.append((key.strip(), val.strip()))
    return out


def _config_argv(path: str) -> list[str]:
    argv: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            argv += ["--" + key.strip().replace("_", "-"), val.strip()]
    return argv


def _load(args) -> Dataset:
    ds = load_table(args.data, args.response)
    for spec in args.derive:
        name, sep, rest = spec.partition("=")
        source, sep2, body = rest.partition(":")
        if not (sep and sep2 and name and source and body):
            raise UsageError(f"--derive expects NAME=SOURCE:LEVEL=NEW,..., got {spec!r}")
        mapping = dict(_pairs(_split(body), "--derive"))
        ds = derive_factor(ds, name.strip(), source.strip(), mapping)
    for factor, level in _pairs(args.relevel, "--relevel"):
        ds = ds.relevel(factor, level)
    return transform_response(ds, args.transform)


def _within_levels(ds: Dataset, treatment: str, within: Sequence[str]) -> list[str] | None:
    conds = _pairs(within, "--within")
    if not conds:
        return None
    names = treatment.split(".")
    keep = np.ones(ds.n, dtype=bool)
    for factor, level in conds:
        keep &= ds.mask(factor, [level])
    labels = set()
    for i in np.flatnonzero(keep):
        labels.add(".".join(ds.factor(f).levels[ds.codes[f][i]] for f in names))
    return sorted(labels)


class _Out:
    def __init__(self, fmt: str, precision: int):
        self.fmt = fmt
        self.precision = precision

    def num(self, v) -> str:
        if v is None or (isinstance(v, float) and np.isnan(v)):
            return ""
        return f"{float(v):.{self.precision}f}"

    def rnd(self, v):
        if v is None:
            return None
        v = float(v)
        if not np.isfinite(v):
            return None
        return round(v, self.precision) + 0.0

    def table(self, header: Sequence[str], rows: Sequence[Sequence]) -> str:
        cells = [[c if isinstance(c, str) else self.num(c) for c in r] for r in rows]
        if self.fmt == "csv":
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(header)
            w.writerows(cells)
            return buf.getvalue().rstrip("\n")
        widths = [max([len(h)] + [len(r[i]) for r in cells]) for i, h in enumerate(header)]
        lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
        for r in cells:
            lines.append(
                "  ".join(
                    (c.ljust(w) if k == 0 else c.rjust(w)) for k, (c, w) in enumerate(zip(r, widths))
                ).rstrip()
            )
        return "\n".join(lines)


def _dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=False, ensure_ascii=False)


# -- commands ------------------------------------------------------------------------


def _cmd_fit(args, out: _Out) -> str:
    ds = _load(args)
    spec = parse_formula(args.model, ds.factor_names)
    fm = fit(ds, spec)
    if args.dump_design:
        with open(args.dump_design, "w", encoding="utf-8", newline="") as fh:
            fh.write(fm.design.to_csv())
    aliased = set(fm.design.aliased)
    vc = fm.vc
    if out.fmt == "json":
        return _dumps({
            "command": "fit",
            "model": render_formula(spec),
            "method": fm.method,
            "n": ds.n,
            "df": fm.df,
            "effects": [
                {"effect": lab, "estimate": out.rnd(b), "aliased": i in aliased}
                for i, (lab, b) in enumerate(fm.effects)
            ],
            "variance_components": {
                "sigma2_residual": out.rnd(vc.sigma2_residual),
                "sigma2_random": out.rnd(vc.sigma2_random),
                "gamma": out.rnd(vc.gamma),
            },
            "reml_loglik": out.rnd(fm.reml_loglik),
            "converged": fm.converged,
            "boundary": fm.boundary,
            "vcov_beta": [[out.rnd(v) for v in row] for row in fm.vcov_beta],
        })
    rows = [[lab + (" (aliased)" if i in aliased else ""), b] for i, (lab, b) in enumerate(fm.effects)]
    text = out.table(["Effect", "Estimate"], rows)
    comps = [["residual", vc.sigma2_residual]]
    if fm.design.random_term is not None:
        comps.insert(0, [str(fm.design.random_term), vc.sigma2_random])
    vtext = out.table(["Variance component", "Estimate"], comps)
    if out.fmt == "csv":
        return text + "\n\n" + vtext
    extra = f"Model: {render_formula(spec)}   method: {fm.method}   n={ds.n}   df={fm.df}"
    if fm.boundary:
        extra += "   (random variance on the zero boundary)"
    return extra + "\n\n" + text + "\n\n" + vtext


def _fit_model(args):
    ds = _load(args)
    spec = parse_formula(args.model, ds.factor_names)
    return ds, spec, fit(ds, spec)


def _cmd_means(args, out: _Out) -> str:
    ds, spec, fm = _fit_model(args)
    mt = adjusted_means(fm, args.treatment, args.margin, covariance=args.covariance)
    back = back_transform(mt, ds.scale).estimates if ds.scale != "none" else None
    if out.fmt == "json":
        return _dumps({
            "command": "means",
            "model": render_formula(spec),
            "treatment": args.treatment,
            "margin": args.margin,
            "transform": ds.scale,
            "means": [
                {"level": lab, "estimate": out.rnd(e), "se": out.rnd(s),
                 "back_transformed": out.rnd(back[i]) if back is not None else None}
                for i, (lab, e, s) in enumerate(zip(mt.labels, mt.estimates, mt.se))
            ],
        })
    header = [args.treatment, "Mean", "SE"] + (["Median"] if back is not None else [])
    rows = [
        [lab, e, s] + ([back[i]] if back is not None else [])
        for i, (lab, e, s) in enumerate(zip(mt.labels, mt.estimates, mt.se))
    ]
    return out.table(header, rows)


def _cmd_sed(args, out: _Out) -> str:
    ds, spec, fm = _fit_model(args)
    sm = sed_matrix(fm, args.treatment, args.margin, args.alpha, args.covariance)
    subset = _within_levels(ds, args.treatment, args.within)
    idx = sm._indices(subset)
    keep = {sm.levels[i] for i in idx}
    pairs = [p for p in sm.pairs() if p["a"] in keep and p["b"] in keep]
    msed = mean_sed(sm, subset)
    if out.fmt == "json":
        return _dumps({
            "command": "sed",
            "model": render_formula(spec),
            "treatment": args.treatment,
            "df": sm.df,
            "alpha": args.alpha,
            "covariance": args.covariance,
            "mean_sed": out.rnd(msed),
            "pairs": [
                {k: (out.rnd(v) if isinstance(v, float) else v) for k, v in p.items()} for p in pairs
            ],
        })
    rows = [
        [f"{p['a']} - {p['b']}", p["difference"], p["sed"], p["t"], p["p"], "*" if p["significant"] else ""]
        for p in pairs
    ]
    if out.fmt == "csv":
        return out.table(["comparison", "difference", "sed", "t", "p", "significant"], rows)
    rows.append(["Mean SED", None, msed, None, None, ""])
    return out.table(["Comparison", "Difference", "SED", "t", "p", "sig"], rows) + f"\ndf = {sm.df}"


def _cmd_letters(args, out: _Out) -> str:
    ds, spec, fm = _fit_model(args)
    sm = sed_matrix(fm, args.treatment, args.margin, args.alpha, args.covariance)
    subset = _within_levels(ds, args.treatment, args.within)
    sig = sm.significance(subset)
    ld = letter_display(sig)
    letters = ld.assignment
    msed = mean_sed(sm, subset)
    est = {lab: e for lab, e in zip(sm.levels, sm.estimates)}
    back = None
    if ds.scale != "none":
        back = {lab: e**2 for lab, e in est.items()}
    if out.fmt == "json":
        return _dumps({
            "command": "letters",
            "model": render_formula(spec),
            "treatment": args.treatment,
            "alpha": args.alpha,
            "df": sm.df,
            "mean_sed": out.rnd(msed),
            "means": [
                {"level": lab, "estimate": out.rnd(est[lab]), "letters": letters[lab],
                 "back_transformed": out.rnd(back[lab]) if back else None}
                for lab in sig.levels
            ],
        })
    header = [args.treatment, "Mean", "Letters"] + (["Median"] if back else [])
    rows = [
        [lab, est[lab], letters[lab]] + ([back[lab]] if back else []) for lab in sig.levels
    ]
    text = out.table(header, rows)
    if out.fmt == "csv":
        return text
    return (
        text
        + f"\nMean SED  {out.num(msed)}\n"
        + FOOTNOTE.format(pct=100 * args.alpha)
    )


def _cmd_indirect(args, out: _Out) -> str:
    ds = _load(args)
    env = args.env
    treatment = args.treatment
    if treatment is None:
        others = [f for f in ds.factor_names if f != env]
        if len(others) != 1:
            raise UsageError("--treatment is required when the data have several factors")
        treatment = others[0]
    a, b, ref = _split(args.a), _split(args.b), _split(args.ref)
    env_a = shared_environments(ds, a + ref, treatment, env)
    env_b = shared_environments(ds, b + ref, treatment, env)
    value = indirect_difference(ds, a, b, ref, treatment=treatment, environment=env)
    d_a = direct_difference(ds, a, ref, env_a, treatment=treatment, environment=env)
    d_b = direct_difference(ds, b, ref, env_b, treatment=treatment, environment=env)
    if out.fmt == "json":
        return _dumps({
            "command": "indirect",
            "a": a, "b": b, "reference": ref, "env_a": env_a, "env_b": env_b,
            "direct_a": out.rnd(d_a), "direct_b": out.rnd(d_b), "indirect": out.rnd(value),
        })
    ref_label = " & ".join(ref)
    rows = [
        [f"{'&'.join(a)} - ({ref_label})", ",".join(env_a), d_a],
        [f"{'&'.join(b)} - ({ref_label})", ",".join(env_b), d_b],
        [f"{'&'.join(a)} - {'&'.join(b)} (indirect)", "", value],
    ]
    return out.table(["Comparison", env, "Difference"], rows)


def _cmd_incidence(args, out: _Out) -> str:
    ds = _load(args)
    tab = incidence(ds, args.row, args.col)
    if out.fmt == "json":
        return _dumps({
            "command": "incidence",
            "row": args.row, "col": args.col,
            "row_levels": list(tab.row_levels), "col_levels": list(tab.col_levels),
            "counts": tab.counts.tolist(),
        })
    if out.fmt == "csv":
        rows = [[lab] + [str(int(c)) for c in r] for lab, r in zip(tab.row_levels, tab.counts)]
        return out.table([args.row] + list(tab.col_levels), rows)
    return tab.render()


def _floats(text: str | None) -> list[float] | None:
    if text is None:
        return None
    try:
        return [float(v) for v in _split(text)]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _cmd_simulate(args, out: _Out) -> str:
    try:
        cfg = SimConfig(
            n_systems_old=args.n_old,
            n_systems_new=args.n_new,
            n_bridge=args.n_bridge,
            n_years_pre=args.years_pre,
            n_years_post=args.years_post,
            true_system_effects=_floats(args.system_effects),
            true_year_effects=_floats(args.year_effects),
            sigma_e=args.sigma_e,
            sigma_year=args.sigma_year,
            replicates=args.replicates,
            grand_mean=args.grand_mean,
            seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.study == "bias":
        if args.reps < 100:
            raise UsageError("--reps must be at least 100")
        rep = bias_study(cfg, args.reps, threads=max(1, args.threads))
        if out.fmt == "json":
            return _dumps({
                "command": "simulate",
                "study": "bias",
                "n_reps": rep.n_reps,
                "failures": rep.failures,
                "mean_sed": {k: out.rnd(v) for k, v in rep.mean_seds.items()},
                "pooled": [
                    {"model": m, "kind": k, "bias": out.rnd(b), "mc_se": out.rnd(se)}
                    for (m, k), (b, se) in sorted(rep.pooled.items())
                ],
                "entries": [
                    {"model": e.model, "a": e.a, "b": e.b, "kind": e.kind,
                     "mean_estimate": out.rnd(e.mean_estimate),
                     "true_difference": out.rnd(e.true_difference),
                     "bias": out.rnd(e.bias), "mc_se": out.rnd(e.mc_se), "n_ok": e.n_ok}
                    for e in rep.entries
                ],
            })
        rows = [
            [e.model, f"{e.a} - {e.b}", e.kind, e.mean_estimate, e.true_difference, e.bias, e.mc_se]
            for e in rep.entries
        ]
        text = out.table(["model", "pair", "kind", "mean_estimate", "true", "bias", "mc_se"], rows)
        if out.fmt == "csv":
            return text
        pooled = [[m, k, b, se] for (m, k), (b, se) in sorted(rep.pooled.items())]
        return (
            f"Bias study: {rep.n_reps} replicates, seed {cfg.seed}\n\n" + text + "\n\n"
            + out.table(["model", "kind", "pooled bias", "mc_se"], pooled)
        )

    ds = simulate_trial(cfg)
    if out.fmt == "json":
        doc = _dumps({
            "command": "simulate",
            "study": None,
            "factors": list(ds.factor_names),
            "rows": [
                {**obs.levels, ds.response_name: out.rnd(obs.response)} for obs in ds.rows()
            ],
        })
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(ds.factor_names) + [ds.response_name])
        for obs in ds.rows():
            w.writerow([obs.levels[f] for f in ds.factor_names] + [out.num(obs.response)])
        doc = buf.getvalue().rstrip("\n")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(doc + "\n")
        return ""
    return doc


def _cmd_select_year(args, out: _Out) -> str:
    ds = _load(args)
    tr, mg = args.treatment, args.margin
    if mg is None and (args.model is None or args.random_model is None):
        raise UsageError("--margin is needed to build the default models")
    fixed_text = args.model or f"{tr} + {mg} : {tr}.{mg}"
    random_text = args.random_model or f"{tr} : {mg} + {tr}.{mg}"
    f_spec = parse_formula(fixed_text, ds.factor_names)
    r_spec = parse_formula(random_text, ds.factor_names)
    res = select_year_status(ds, f_spec, r_spec, tr, mg, covariance=args.covariance)
    if out.fmt == "json":
        return _dumps({
            "command": "select-year",
            "fixed_model": render_formula(f_spec),
            "random_model": render_formula(r_spec),
            "covariance": args.covariance,
            "mean_sed_fixed": out.rnd(res.mean_sed_fixed),
            "mean_sed_random": out.rnd(res.mean_sed_random),
            "recommended": res.recommended,
        })
    rows = [
        ["fixed", render_formula(f_spec), res.mean_sed_fixed],
        ["random", render_formula(r_spec), res.mean_sed_random],
    ]
    text = out.table(["status", "model", "mean SED"], rows)
    if out.fmt == "csv":
        return text
    return text + f"\nrecommended: {res.recommended} year effects"


_DISPATCH = {
    "fit": _cmd_fit,
    "means": _cmd_means,
    "sed": _cmd_sed,
    "letters": _cmd_letters,
    "indirect": _cmd_indirect,
    "incidence": _cmd_incidence,
    "simulate": _cmd_simulate,
    "select-year": _cmd_select_year,
}


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    """Execute one command; returns the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        if "--config" in argv:
            k = argv.index("--config")
            if k + 1 >= len(argv):
                raise UsageError("--config needs a path")
            path = argv[k + 1]
            rest = argv[:k] + argv[k + 2:]
            if not rest or rest[0] not in COMMANDS:
                raise UsageError("the command must come first when using --config")
            argv = [rest[0]] + _config_argv(path) + rest[1:]
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            args = parser.parse_args(argv)
        if hasattr(args, "alpha") and not 0.0 < args.alpha < 1.0:
            raise UsageError("--alpha must be in (0, 1)")
        if args.precision < 0:
            raise UsageError("--precision must be nonnegative")
        text = _DISPATCH[args.command](args, _Out(args.format, args.precision))
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"turnover: error: {exc}", file=stderr)
        return 1
    except (TurnoverError, OSError) as exc:
        print(f"turnover: {type(exc).__name__}: {exc}", file=stderr)
        return 2
    if text:
        print(text, file=stdout)
    return 0


def main() -> None:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    sys.exit(run())


if __name__ == "__main__":
    main()
