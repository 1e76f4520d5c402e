"""Invariant polynomials, Chern-Weil forms, transgressions and Chern-Simons actions.

Polynomials are kept in the trace basis: a monomial is a sorted tuple of even
powers, ``(2,)`` meaning ``tr(X^2)`` and ``(2, 2)`` meaning ``tr(X^2)^2``.
Coefficients are exact rationals; an optional float ``scale`` carries the
``1/(2π)^{2k}`` factors of the integer-normalized Pontryagin classes so they
never leak into the rational part.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np

from .fields import FormField, MatrixFormField, integrate_top, trace, wedge
from .geometry import OrientedMetric, apply_diffeo, curvature, levi_civita

# Gauss-Legendre rule in the homotopy parameter, mapped to [0, 1]
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
GL_NODES = 0.5 * (_GL_NODES + 1.0)
GL_WEIGHTS = 0.5 * _GL_WEIGHTS


class PolynomialError(ValueError):
    pass


_MONOMIAL_RE = re.compile(r"^tr(\d+)(?:\^(\d+))?$")
_SUPERSCRIPTS = str.maketrans("⁰¹²³⁴⁵⁶⁷⁸⁹", "0123456789")


def parse_monomial(name: str) -> tuple[int, ...]:
    """``"tr2"`` -> (2,), ``"tr2^2"`` / ``"tr2*tr2"`` / ``"(tr²)²"`` -> (2, 2), ``"tr4"`` -> (4,)."""
    text = name.strip().translate(_SUPERSCRIPTS).replace(" ", "")
    m = re.fullmatch(r"\((tr\d+)\)(\d+)", text)
    if m:
        text = f"{m.group(1)}^{m.group(2)}"
    parts: list[int] = []
    for factor in text.split("*"):
        m = _MONOMIAL_RE.match(factor)
        if not m:
            raise PolynomialError(f"cannot parse monomial {name!r}")
        power, times = int(m.group(1)), int(m.group(2) or 1)
        if power <= 0 or power % 2:
            raise PolynomialError(f"only even trace powers are invariant on so(n): {name!r}")
        parts.extend([power] * times)
    return tuple(sorted(parts))


def monomial_name(mono: tuple[int, ...]) -> str:
    counts: dict[int, int] = {}
    for p in mono:
        counts[p] = counts.get(p, 0) + 1
    return "*".join(f"tr{p}" + (f"^{c}" if c > 1 else "") for p, c in sorted(counts.items()))


@dataclass(frozen=True)
class InvariantPolynomial:
    """``scale * sum_mono coef * prod tr(X^{2m})``, homogeneous of degree ``k``."""

    terms: Mapping[tuple[int, ...], Fraction]
    scale: float = 1.0
    label: str = ""

    def __post_init__(self):
        clean = {}
        for mono, coef in dict(self.terms).items():
            mono = parse_monomial(mono) if isinstance(mono, str) else tuple(sorted(mono))
            if any(p % 2 or p <= 0 for p in mono):
                raise PolynomialError("only even trace powers are allowed")
            c = Fraction(coef)
            if c:
                clean[mono] = clean.get(mono, Fraction(0)) + c
        degrees = {sum(m) for m in clean}
        if len(degrees) > 1:
            raise PolynomialError(f"polynomial is not homogeneous: degrees {sorted(degrees)}")
        object.__setattr__(self, "terms", dict(sorted(clean.items())))

    @property
    def degree(self) -> int:
        return sum(next(iter(self.terms))) if self.terms else 0

    @classmethod
    def from_spec(cls, spec: Mapping[str, object], scale: float = 1.0) -> "InvariantPolynomial":
        return cls({parse_monomial(k): Fraction(str(v)) for k, v in spec.items()}, scale)

    def __add__(self, other):
        if not math.isclose(self.scale, other.scale):
            raise PolynomialError("cannot add polynomials with different float scales")
        merged = dict(self.terms)
        for m, c in other.terms.items():
            merged[m] = merged.get(m, Fraction(0)) + c
        return InvariantPolynomial(merged, self.scale)

    def __mul__(self, c):
        if isinstance(c, float):
            return InvariantPolynomial(self.terms, self.scale * c, self.label)
        c = Fraction(c)
        return InvariantPolynomial({m: v * c for m, v in self.terms.items()}, self.scale)

    __rmul__ = __mul__

    def evaluate_matrix(self, X: np.ndarray) -> float:
        """Value on a plain matrix (no forms); used for conjugation-invariance tests."""
        total = 0.0
        for mono, coef in self.terms.items():
            total += float(coef) * math.prod(float(np.trace(np.linalg.matrix_power(X, p))) for p in mono)
        return self.scale * total

    def describe(self) -> dict:
        return {
            "terms": {monomial_name(m): str(c) for m, c in self.terms.items()},
            "scale": self.scale,
            "label": self.label,
        }


def trace_power(power: int) -> InvariantPolynomial:
    return InvariantPolynomial({(power,): Fraction(1)}, label=f"tr{power}")


def pontryagin(i: int, c=1) -> InvariantPolynomial:
    """Integer-normalized ``c * p_i`` in the trace basis, from ``det(1 - X/2π)``.

    ``p1 = -tr(X^2)/(8π^2)``; ``p2 = (tr(X^2)^2 - 2 tr(X^4)) / (128 π^4)``.
    """
    c = Fraction(c)
    if i == 1:
        return InvariantPolynomial({(2,): -c}, 1.0 / (8 * math.pi**2), label=f"{c}*p1")
    if i == 2:
        return InvariantPolynomial({(2, 2): c, (4,): -2 * c}, 1.0 / (128 * math.pi**4), label=f"{c}*p2")
    raise PolynomialError("only p1 and p2 are tabulated")


# -- polarization --------------------------------------------------------------


def _matrix_power_form(args, order):
    out = args[order[0]]
    for j in order[1:]:
        out = wedge(out, args[j])
    return trace(out)


class PolarizedEvaluator:
    """Symmetric multilinear form ``p(B_1, ..., B_k)`` of an invariant polynomial.

    Arguments are matrix-valued forms; permuting odd-degree arguments past
    each other contributes the Koszul sign.
    """

    def __init__(self, poly: InvariantPolynomial):
        self.poly = poly
        self.k = poly.degree

    def __call__(self, *args: MatrixFormField) -> FormField:
        if len(args) != self.k:
            raise PolynomialError(f"expected {self.k} arguments, got {len(args)}")
        degrees = [a.degree for a in args]
        total = None
        perms = list(itertools.permutations(range(self.k)))
        for mono, coef in self.poly.terms.items():
            acc = None
            for perm in perms:
                sign = 1
                for x in range(self.k):
                    for y in range(x + 1, self.k):
                        if perm[x] > perm[y] and degrees[perm[x]] % 2 and degrees[perm[y]] % 2:
                            sign = -sign
                term = None
                pos = 0
                for power in mono:
                    factor = _matrix_power_form(args, perm[pos : pos + power])
                    term = factor if term is None else wedge(term, factor)
                    pos += power
                term = term * sign
                acc = term if acc is None else acc + term
            acc = acc * (float(coef) / len(perms))
            total = acc if total is None else total + acc
        if total is None:
            base = args[0].base
            return FormField.zeros(base, sum(degrees))
        return total * self.poly.scale


def _power_trace(F: MatrixFormField, power: int) -> FormField:
    out = F
    for _ in range(power - 1):
        out = wedge(out, F)
    return trace(out)


def chern_weil(p: InvariantPolynomial, F: MatrixFormField) -> FormField:
    """``p(F)`` as a closed 2k-form (direct product of trace powers)."""
    if F.degree != 2:
        raise PolynomialError("chern_weil needs a curvature 2-form")
    if 2 * p.degree > F.base.dim:
        raise PolynomialError(f"p(F) has degree {2 * p.degree} > dim {F.base.dim}")
    total = FormField.zeros(F.base, 2 * p.degree)
    cache: dict[int, FormField] = {}
    for mono, coef in p.terms.items():
        term = None
        for power in mono:
            if power not in cache:
                cache[power] = _power_trace(F, power)
            term = cache[power] if term is None else wedge(term, cache[power])
        total = total + term * float(coef)
    return total * p.scale


def transgression(p: InvariantPolynomial, A1: MatrixFormField, A0: MatrixFormField) -> FormField:
    """``Tp(A1, A0) = k ∫_0^1 p(A1 - A0, F_t, ..., F_t) dt`` with ``A_t = A0 + t (A1 - A0)``.

    Satisfies ``d Tp(A1, A0) = p(F1) - p(F0)``.
    """
    if A1.base != A0.base or A1.data.shape != A0.data.shape:
        raise PolynomialError("connections live on different bundles or grids")
    k = p.degree
    if 2 * k - 1 > A1.base.dim:
        raise PolynomialError("transgression degree exceeds dimension")
    a = A1 - A0
    polar = PolarizedEvaluator(p)
    total = FormField.zeros(A1.base, 2 * k - 1)
    if not p.terms:
        return total
    for t, w in zip(GL_NODES, GL_WEIGHTS):
        Ft = curvature(A0 + a * float(t))
        total = total + polar(a, *([Ft] * (k - 1))) * (k * float(w))
    return total


def _cs_degree_check(p: InvariantPolynomial, n: int):
    if n % 2 == 0 or 2 * p.degree != n + 1:
        raise PolynomialError(f"Chern-Simons action needs odd n and deg p = (n+1)/2; got n={n}, deg={p.degree}")


def cs_action(p: InvariantPolynomial, g, A0: MatrixFormField | None = None, use_generator: bool = True) -> float:
    """``CS_{p,A0}(g, o) = ∫_{(M, o)} Tp(ω^g, A0)``.

    ``g`` may be an :class:`OrientedMetric` or a plain metric (grid orientation).
    ``A0 = None`` means the flat connection of the coordinate trivialization.
    """
    og = g if isinstance(g, OrientedMetric) else OrientedMetric.of(g)
    base = og.base
    _cs_degree_check(p, base.dim)
    omega = levi_civita(og.metric, use_generator)
    if A0 is None:
        A0 = MatrixFormField.zeros(base, 1, base.dim, base.dim)
    return integrate_top(transgression(p, omega, A0), orientation=og.orientation)


def delta_phi(p: InvariantPolynomial, phi, g, A0: MatrixFormField | None = None, use_generator: bool = True) -> float:
    """``δ_φ^p(g) = CS(φ·g) − CS(g)`` with the same background in both terms."""
    og = g if isinstance(g, OrientedMetric) else OrientedMetric.of(g)
    moved = apply_diffeo(phi, og)
    return cs_action(p, moved, A0, use_generator) - cs_action(p, og, A0, use_generator)
