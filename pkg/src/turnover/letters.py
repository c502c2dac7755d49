"""Compact letter displays that never hide a significant difference.

Groups are built by insert-and-absorb: start from one group holding every
level; for each significant pair, every group containing both members is
replaced by two copies, each missing one of the pair; groups contained in
another group are then absorbed.  The surviving groups are exactly the
maximal sets of mutually non-significant levels, so two levels share a
letter if and only if they are not significantly different.
"""

from __future__ import annotations

import itertools
import string
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np


@dataclass(frozen=True, eq=False)
class SignificanceMatrix:
    levels: tuple[str, ...]
    sig: np.ndarray
    estimates: np.ndarray | None = None

    def __post_init__(self) -> None:
        sig = np.asarray(self.sig, dtype=bool)
        k = len(self.levels)
        if sig.shape != (k, k):
            raise ValueError(f"significance matrix must be {k}x{k}")
        if not np.array_equal(sig, sig.T):
            raise ValueError("significance matrix must be symmetric")
        if sig.diagonal().any():
            raise ValueError("a level cannot differ significantly from itself")
        if len(set(self.levels)) != k:
            raise ValueError("level labels must be unique")
        object.__setattr__(self, "sig", sig)
        if self.estimates is not None:
            est = np.asarray(self.estimates, dtype=float)
            if est.shape != (k,):
                raise ValueError("need one estimate per level")
            object.__setattr__(self, "estimates", est)

    @classmethod
    def from_pairs(cls, levels: Sequence[str], pairs, estimates=None) -> "SignificanceMatrix":
        levels = tuple(str(v) for v in levels)
        sig = np.zeros((len(levels), len(levels)), dtype=bool)
        for a, b in pairs:
            i, j = levels.index(str(a)), levels.index(str(b))
            sig[i, j] = sig[j, i] = True
        return cls(levels, sig, estimates)

    def display_order(self) -> list[int]:
        """Level indices by descending estimate, ties by level order."""
        k = len(self.levels)
        if self.estimates is None:
            return list(range(k))
        return sorted(range(k), key=lambda i: (-self.estimates[i], i))


def letter_names(count: int) -> list[str]:
    """``a .. z, aa, ab, ...`` in spreadsheet-column style."""
    out = []
    for n in range(count):
        name = ""
        n += 1
        while n:
            n, rem = divmod(n - 1, 26)
            name = string.ascii_lowercase[rem] + name
        out.append(name)
    return out


@dataclass(frozen=True)
class LetterDisplay:
    levels: tuple[str, ...]
    groups: tuple[frozenset[int], ...]
    letters: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if not self.letters:
            object.__setattr__(self, "letters", tuple(letter_names(len(self.groups))))

    @property
    def assignment(self) -> dict[str, str]:
        out = {lev: "" for lev in self.levels}
        for letter, g in zip(self.letters, self.groups):
            for i in sorted(g):
                out[self.levels[i]] += letter
        return out

    @property
    def columns(self) -> dict[str, tuple[str, ...]]:
        return {
            letter: tuple(self.levels[i] for i in sorted(g))
            for letter, g in zip(self.letters, self.groups)
        }

    @classmethod
    def from_assignment(cls, assignment: Mapping[str, str]) -> "LetterDisplay":
        """Build from single-character letter strings, e.g. ``{"1": "c", "6": "bc"}``."""
        levels = tuple(str(k) for k in assignment)
        used = sorted({ch for s in assignment.values() for ch in s})
        groups = tuple(
            frozenset(i for i, lev in enumerate(levels) if ch in assignment[lev]) for ch in used
        )
        return cls(levels, groups, tuple(used))


def _absorb(groups: list[frozenset[int]]) -> list[frozenset[int]]:
    unique = list(dict.fromkeys(groups))
    return [g for g in unique if not any(g < h for h in unique)]


def letter_display(sm: SignificanceMatrix) -> LetterDisplay:
    """Truthful, irredundant letter display for a significance matrix.

    Letters are assigned in the order in which the groups are first hit when
    levels are walked by descending estimate.
    """
    k = len(sm.levels)
    if k == 0:
        return LetterDisplay((), ())
    groups = [frozenset(range(k))]
    for i, j in itertools.combinations(range(k), 2):
        if not sm.sig[i, j]:
            continue
        nxt = []
        for g in groups:
            if i in g and j in g:
                nxt.extend([g - {i}, g - {j}])
            else:
                nxt.append(g)
        groups = _absorb(nxt)
    rank = {lev: r for r, lev in enumerate(sm.display_order())}
    groups.sort(key=lambda g: sorted(rank[i] for i in g))
    return LetterDisplay(sm.levels, tuple(groups))


@dataclass(frozen=True)
class DisplayReport:
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_display(sm: SignificanceMatrix, ld: LetterDisplay) -> DisplayReport:
    """List every way ``ld`` misrepresents ``sm``.

    Checks that significant pairs share no letter, that non-significant
    pairs share at least one, and that no letter's level set is contained in
    another's.
    """
    if tuple(ld.levels) != tuple(sm.levels):
        idx = [ld.levels.index(lev) for lev in sm.levels]
        remap = {old: new for new, old in enumerate(idx)}
        groups = tuple(frozenset(remap[i] for i in g) for g in ld.groups)
        ld = LetterDisplay(sm.levels, groups, ld.letters)
    out = []
    k = len(sm.levels)
    for i, j in itertools.combinations(range(k), 2):
        shared = [ltr for ltr, g in zip(ld.letters, ld.groups) if i in g and j in g]
        a, b = sm.levels[i], sm.levels[j]
        if sm.sig[i, j] and shared:
            out.append(f"significant pair shares a letter: ({a}, {b}) via {''.join(shared)}")
        elif not sm.sig[i, j] and not shared:
            out.append(f"non-significant pair shares no letter: ({a}, {b})")
    for (la, ga), (lb, gb) in itertools.permutations(zip(ld.letters, ld.groups), 2):
        if ga <= gb and (ga < gb or la < lb):
            out.append(f"redundant letter: group {la} is contained in group {lb}")
    for i in range(k):
        if not any(i in g for g in ld.groups):
            out.append(f"level {sm.levels[i]} has no letter")
    return DisplayReport(tuple(out))


def stratified_display(sm: SignificanceMatrix, strata: Mapping[str, str]) -> dict[str, LetterDisplay]:
    """Separate displays per stratum, each restricted to within-stratum pairs.

    ``strata`` maps each level to its stratum label; the significance of each
    pair is taken from ``sm`` unchanged.
    """
    out: dict[str, LetterDisplay] = {}
    for stratum in dict.fromkeys(strata[lev] for lev in sm.levels):
        idx = [i for i, lev in enumerate(sm.levels) if strata[lev] == stratum]
        est = sm.estimates[idx] if sm.estimates is not None else None
        sub = SignificanceMatrix(
            tuple(sm.levels[i] for i in idx), sm.sig[np.ix_(idx, idx)], est
        )
        out[stratum] = letter_display(sub)
    return out
