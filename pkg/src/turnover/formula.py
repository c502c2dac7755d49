"""Symbolic model formulas of the form ``fixed terms : random terms``.

Terms are built from factor names joined with ``.`` (crossing) or ``/``
(nesting, ``A/B`` expands to ``A + A.B``).  The intercept is implicit on the
fixed side and ``1`` denotes an intercept-only fixed part.

>>> spec = parse_formula("S + Y : S.Y", ["S", "Y"])
>>> render_formula(spec)
'S + Y : S.Y'
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import FormulaError

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


@dataclass(frozen=True, eq=False)
class Term:
    """A main effect or interaction of one or more factors.

    Identity ignores factor order, so ``Term(("S", "Y")) == Term(("Y", "S"))``.
    """

    factors: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.factors:
            raise FormulaError("empty term")
        if len(set(self.factors)) != len(self.factors):
            raise FormulaError(f"repeated factor in term {'.'.join(self.factors)!r}")

    @property
    def key(self) -> frozenset[str]:
        return frozenset(self.factors)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Term):
            return NotImplemented
        return self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __len__(self) -> int:
        return len(self.factors)

    def __contains__(self, name: object) -> bool:
        return name in self.factors

    def ordered(self, declared: Sequence[str]) -> "Term":
        rank = {name: i for i, name in enumerate(declared)}
        return Term(tuple(sorted(self.factors, key=lambda f: rank.get(f, len(rank)))))

    def without(self, name: str) -> frozenset[str]:
        return self.key - {name}

    def __str__(self) -> str:
        return ".".join(self.factors)

    def __repr__(self) -> str:
        return f"Term({str(self)!r})"


@dataclass(frozen=True)
class ModelSpec:
    fixed_terms: tuple[Term, ...] = ()
    random_terms: tuple[Term, ...] = ()
    factors: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        for name, terms in (("fixed", self.fixed_terms), ("random", self.random_terms)):
            if len(set(terms)) != len(terms):
                raise FormulaError(f"duplicate term in {name} part")
        overlap = set(self.fixed_terms) & set(self.random_terms)
        if overlap:
            names = ", ".join(sorted(str(t) for t in overlap))
            raise FormulaError(f"term(s) both fixed and random: {names}")

    @property
    def all_factors(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for term in self.fixed_terms + self.random_terms:
            for f in term.factors:
                seen.setdefault(f, None)
        if self.factors:
            return tuple(f for f in self.factors if f in seen)
        return tuple(seen)

    def has_fixed(self, factors: Iterable[str]) -> bool:
        key = frozenset(factors)
        if not key:
            return True  # intercept
        return any(t.key == key for t in self.fixed_terms)

    def __str__(self) -> str:
        return render_formula(self)


def _split_termlist(text: str, where: str) -> list[str]:
    parts = [p.strip() for p in text.split("+")]
    if any(not p for p in parts):
        raise FormulaError(f"empty term in {where} part of formula")
    return parts


def _expand(token: str, known: Sequence[str]) -> list[Term]:
    # '/' nests left to right: A/B/C -> A + A.B + A.B.C, where each operand
    # may itself be a crossed term.
    chunks = [c.strip() for c in token.split("/")]
    terms: list[Term] = []
    prefix: tuple[str, ...] = ()
    for chunk in chunks:
        names = [n.strip() for n in chunk.split(".")]
        for n in names:
            if not n:
                raise FormulaError(f"empty factor name in term {token!r}")
            if not _IDENT.match(n):
                raise FormulaError(f"invalid factor name {n!r}")
            if n not in known:
                raise FormulaError(f"unknown factor {n!r}")
        prefix = prefix + tuple(names)
        terms.append(Term(prefix).ordered(known))
    return terms


def _parse_side(text: str, known: Sequence[str], where: str) -> tuple[Term, ...]:
    terms: list[Term] = []
    explicit: set[Term] = set()
    for token in _split_termlist(text, where):
        if token == "1":
            if where == "fixed" and text.strip() == "1":
                return ()
            raise FormulaError("'1' is only allowed as the whole fixed part")
        expanded = _expand(token, known)
        last = expanded[-1]
        if last in explicit:
            raise FormulaError(f"duplicate term {str(last)!r}")
        explicit.add(last)
        for term in expanded:
            if term in terms:
                if term is last:
                    raise FormulaError(f"duplicate term {str(term)!r}")
                continue
            terms.append(term)
    return tuple(terms)


def parse_formula(text: str, known_factors: Sequence[str]) -> ModelSpec:
    """Parse ``termlist [":" termlist]`` into a :class:`ModelSpec`.

    Raises
    ------
    FormulaError
        On unknown factors, repeated factors within a term, empty terms,
        duplicate terms, or a random part with no fixed part.
    """
    known = tuple(known_factors)
    if len(set(known)) != len(known):
        raise FormulaError("factor names must be unique")
    if text.count(":") > 1:
        raise FormulaError("at most one ':' is allowed")
    fixed_text, colon, random_text = text.partition(":")
    if not fixed_text.strip():
        raise FormulaError("formula needs a fixed part (use '1' for intercept only)")
    fixed = _parse_side(fixed_text, known, "fixed")
    random: tuple[Term, ...] = ()
    if colon:
        if not random_text.strip():
            raise FormulaError("empty random term list after ':'")
        random = _parse_side(random_text, known, "random")
    return ModelSpec(fixed, random, known)


def render_formula(spec: ModelSpec) -> str:
    fixed = " + ".join(str(t) for t in spec.fixed_terms) or "1"
    if not spec.random_terms:
        return fixed
    return fixed + " : " + " + ".join(str(t) for t in spec.random_terms)
