"""Exact mod-1 bookkeeping of eta invariants against Pontryagin counterterms.

Everything here is :class:`fractions.Fraction`; no float ever enters.  A
condition is a family of congruences

    ν q_e ≡ c w_e  (mod 1)

with ``q_e`` a quarter-eta value, ``w_e`` the Pontryagin weight of entry ``e``
(``p1(N)`` when N is oriented, ``p1(Ñ)/2`` for the oriented double cover
otherwise) and ``c`` the counterterm coefficient of ``c * p1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import yaml

ORIENTED_ONLY = {"AnnomFinal", "AnnomFinalU", "AnnomFinalW"}
MAPPING_TORUS_SCOPE = {"AnnomFinal", "Anomaly2"}
CONDITIONS = ("AnnomFinal", "AnnomFinalU", "AnnomFinalW", "Anomaly2", "AnnomFinalU2")


class LedgerError(ValueError):
    pass


def frac(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise LedgerError(f"floating point value {value!r} in exact ledger; write it as 'p/q'")
    return Fraction(str(value).strip())


def mod1(x: Fraction) -> Fraction:
    """Canonical representative in [0, 1)."""
    return x - math.floor(x)


@dataclass(frozen=True)
class LedgerEntry:
    name: str
    dimension: int
    orientable: bool
    signature: Fraction | None = None
    p1: Fraction | None = None
    double_cover: str | None = None
    eta_quarter: Mapping[str, Fraction] = field(default_factory=dict)
    is_mapping_torus: bool = False
    source: str = "quoted"
    reference: str = ""

    def __post_init__(self):
        for attr in ("signature", "p1"):
            v = getattr(self, attr)
            if v is not None:
                object.__setattr__(self, attr, frac(v))
        object.__setattr__(self, "eta_quarter", {k: frac(v) for k, v in dict(self.eta_quarter).items()})
        if self.orientable:
            if self.signature is None and self.p1 is None:
                raise LedgerError(f"{self.name}: oriented entry needs a signature or p1")
            if self.p1 is None:
                object.__setattr__(self, "p1", 3 * self.signature)
            if self.signature is None:
                object.__setattr__(self, "signature", self.p1 / 3)
            if self.p1 != 3 * self.signature:
                raise LedgerError(f"{self.name}: p1 = {self.p1} but 3*signature = {3 * self.signature}")
            if self.double_cover is not None:
                raise LedgerError(f"{self.name}: an oriented entry has no double cover")
        else:
            if not self.double_cover:
                raise LedgerError(f"{self.name}: unorientable entry must name its oriented double cover")
        if self.source == "external" and not self.reference:
            raise LedgerError(f"{self.name}: externally sourced values need a reference")


@dataclass(frozen=True)
class OperatorFamily:
    """Quarter-eta assignment: ``rule`` is linear in entry invariants, ``table`` overrides per entry."""

    name: str
    dimension: int
    multiplicity: int = 1
    rule: Mapping[str, Fraction] = field(default_factory=dict)
    table: Mapping[str, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        if int(self.multiplicity) < 1:
            raise LedgerError("multiplicity must be a positive integer")
        object.__setattr__(self, "rule", {k: frac(v) for k, v in dict(self.rule).items()})
        object.__setattr__(self, "table", {k: frac(v) for k, v in dict(self.table).items()})
        bad = set(self.rule) - {"signature", "p1"}
        if bad:
            raise LedgerError(f"eta rule may only use signature and p1, not {sorted(bad)}")

    def with_multiplicity(self, nu: int) -> "OperatorFamily":
        return OperatorFamily(self.name, self.dimension, nu, self.rule, self.table)


@dataclass(frozen=True)
class Counterterm:
    """``c * p1`` with integer-normalized ``p1``."""

    c: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "c", frac(self.c))


def eta_quarter(fam: OperatorFamily, e: LedgerEntry) -> Fraction:
    """``η/4`` of one copy of the operator on ``e``, reduced to [0, 1)."""
    if fam.name in e.eta_quarter:
        return mod1(e.eta_quarter[fam.name])
    if e.name in fam.table:
        return mod1(fam.table[e.name])
    if e.orientable and fam.rule:
        total = Fraction(0)
        for invariant, coef in fam.rule.items():
            total += coef * getattr(e, invariant)
        return mod1(total)
    raise LedgerError(f"family {fam.name!r} has no eta value for entry {e.name!r}")


# -- conditions -------------------------------------------------------------------


@dataclass(frozen=True)
class EntryVerdict:
    name: str
    eta_quarter: Fraction
    weight: Fraction
    residue: Fraction
    passed: bool


@dataclass(frozen=True)
class ConditionVerdict:
    condition: str
    multiplicity: int
    counterterm: Fraction
    entries: tuple
    passed: bool

    def as_dict(self) -> dict:
        return {
            "condition": self.condition,
            "multiplicity": self.multiplicity,
            "counterterm": str(self.counterterm),
            "passed": self.passed,
            "entries": [
                {"name": v.name, "eta_quarter": str(v.eta_quarter), "weight": str(v.weight), "residue": str(v.residue), "passed": v.passed}
                for v in self.entries
            ],
        }


class Ledger:
    """A table of entries with double-cover references resolved."""

    def __init__(self, entries: Iterable[LedgerEntry], families: Iterable[OperatorFamily] = ()):
        self.entries = {}
        for e in entries:
            if e.name in self.entries:
                raise LedgerError(f"duplicate entry {e.name!r}")
            self.entries[e.name] = e
        self.families = {f.name: f for f in families}
        for e in self.entries.values():
            if not e.orientable:
                cover = self.entries.get(e.double_cover)
                if cover is None:
                    raise LedgerError(f"{e.name}: double cover {e.double_cover!r} not in the ledger")
                if not cover.orientable:
                    raise LedgerError(f"{e.name}: double cover {cover.name!r} is not orientable")

    def __getitem__(self, name) -> LedgerEntry:
        try:
            return self.entries[name]
        except KeyError:
            raise LedgerError(f"unknown ledger entry {name!r}; known: {sorted(self.entries)}") from None

    def select(self, names: Iterable[str] | None = None) -> list[LedgerEntry]:
        if names is None:
            return list(self.entries.values())
        return [self[n] for n in names]

    def family(self, name: str) -> OperatorFamily:
        try:
            return self.families[name]
        except KeyError:
            raise LedgerError(f"unknown operator family {name!r}; known: {sorted(self.families)}") from None

    def weight(self, e: LedgerEntry) -> Fraction:
        if e.orientable:
            return e.p1
        return self[e.double_cover].p1 / 2


def _load_entry(raw: dict) -> LedgerEntry:
    return LedgerEntry(
        name=str(raw["name"]),
        dimension=int(raw.get("dimension", 4)),
        orientable=bool(raw["orientable"]),
        signature=raw.get("signature"),
        p1=raw.get("p1"),
        double_cover=raw.get("double_cover"),
        eta_quarter=raw.get("eta_quarter") or {},
        is_mapping_torus=bool(raw.get("mapping_torus", False)),
        source=str(raw.get("source", "quoted")),
        reference=str(raw.get("reference", "")),
    )


def load_ledger(path: str | Path | None = None) -> Ledger:
    """Read a ledger data file; ``None`` loads the built-in table."""
    if path is None:
        text = resources.files("gravanom").joinpath("data/ledger.yaml").read_text()
    else:
        text = Path(path).read_text()
    raw = yaml.safe_load(text) or {}
    entries = [_load_entry(r) for r in raw.get("entries", [])]
    families = [
        OperatorFamily(
            name=str(f["name"]),
            dimension=int(f.get("dimension", 4)),
            multiplicity=int(f.get("multiplicity", 1)),
            rule=f.get("rule") or {},
            table=f.get("table") or {},
        )
        for f in raw.get("families", [])
    ]
    return Ledger(entries, families)


def _scoped(ledger: Ledger, condition: str, entries: Sequence[LedgerEntry], mapping_torus_only: bool) -> list[LedgerEntry]:
    if condition not in CONDITIONS:
        raise LedgerError(f"unknown condition {condition!r}; choose from {list(CONDITIONS)}")
    if condition in ORIENTED_ONLY:
        bad = [e.name for e in entries if not e.orientable]
        if bad:
            raise LedgerError(f"{condition} is stated for oriented manifolds only; got unorientable {bad}")
    if mapping_torus_only or condition in MAPPING_TORUS_SCOPE:
        return [e for e in entries if e.is_mapping_torus]
    return list(entries)


def _congruences(ledger, fam, condition, entries, mapping_torus_only, nu):
    nu = fam.multiplicity if nu is None else int(nu)
    rows = []
    for e in _scoped(ledger, condition, entries, mapping_torus_only):
        rows.append((e, eta_quarter(fam, e), ledger.weight(e)))
    return nu, rows


def check_condition(
    ledger: Ledger,
    condition: str,
    fam: OperatorFamily,
    ct: Counterterm | Fraction | int,
    entries: Sequence[LedgerEntry] | None = None,
    mapping_torus_only: bool = False,
    nu: int | None = None,
) -> ConditionVerdict:
    """Check ``ν q_e ≡ c w_e (mod 1)`` entry by entry; the W variant forces ``c = 0``."""
    entries = ledger.select() if entries is None else entries
    c = ct.c if isinstance(ct, Counterterm) else frac(ct)
    if condition == "AnnomFinalW":
        c = Fraction(0)
    nu, rows = _congruences(ledger, fam, condition, entries, mapping_torus_only, nu)
    verdicts = []
    for e, q, w in rows:
        residue = mod1(nu * q - c * w)
        verdicts.append(EntryVerdict(e.name, q, w, residue, residue == 0))
    return ConditionVerdict(condition, nu, c, tuple(verdicts), all(v.passed for v in verdicts))


def _crt_pair(r1: int, m1: int, r2: int, m2: int):
    g = math.gcd(m1, m2)
    if (r2 - r1) % g:
        return None
    l = m1 // g * m2
    # r1 + m1 t ≡ r2 (mod m2)
    t = ((r2 - r1) // g * pow(m1 // g, -1, m2 // g)) % (m2 // g) if m2 // g > 1 else 0
    return (r1 + m1 * t) % l, l


def solve_counterterm(
    ledger: Ledger,
    fam: OperatorFamily,
    condition: str,
    entries: Sequence[LedgerEntry] | None = None,
    mapping_torus_only: bool = False,
    nu: int | None = None,
) -> Fraction | None:
    """Smallest-magnitude ``c`` with ``ν q_e ≡ c w_e (mod 1)`` for every entry, or ``None``.

    Each congruence with ``w ≠ 0`` pins ``c`` to the coset ``(νq + Z)/w``;
    after clearing denominators the cosets are intersected by the Chinese
    remainder theorem for non-coprime moduli.
    """
    entries = ledger.select() if entries is None else entries
    nu, rows = _congruences(ledger, fam, condition, entries, mapping_torus_only, nu)
    if condition == "AnnomFinalW":
        return Fraction(0) if all(mod1(nu * q) == 0 for _, q, _ in rows) else None
    cosets = []
    for _, q, w in rows:
        a = nu * q
        if w == 0:
            if mod1(a) != 0:
                return None
            continue
        cosets.append((a / w, 1 / abs(w)))
    if not cosets:
        return Fraction(0)
    D = 1
    for r, m in cosets:
        D = math.lcm(D, r.denominator, m.denominator)
    residue, modulus = 0, 1
    for r, m in cosets:
        ri, mi = int(r * D), int(m * D)
        merged = _crt_pair(residue, modulus, ri % mi, mi)
        if merged is None:
            return None
        residue, modulus = merged
    if 2 * residue > modulus:
        residue -= modulus
    return Fraction(residue, D)


@dataclass(frozen=True)
class MultiplicityResult:
    nu: int | None
    counterterm: Fraction | None
    bound: int

    def describe(self) -> str:
        if self.nu is None:
            return f"none ≤ {self.bound}"
        return f"ν = {self.nu} with c = {self.counterterm}"


def min_multiplicity(
    ledger: Ledger,
    fam: OperatorFamily,
    condition: str,
    entries: Sequence[LedgerEntry] | None = None,
    mapping_torus_only: bool = False,
    bound: int = 64,
) -> MultiplicityResult:
    """Smallest ``ν`` in ``1..bound`` for which the condition is solvable."""
    for nu in range(1, bound + 1):
        c = solve_counterterm(ledger, fam, condition, entries, mapping_torus_only, nu)
        if c is not None:
            return MultiplicityResult(nu, c, bound)
    return MultiplicityResult(None, None, bound)
