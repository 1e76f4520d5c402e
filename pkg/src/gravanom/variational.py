"""Functional derivatives of the Chern-Simons action and the classical Cotton tensor.

For ``p = tr(X^2)`` on an oriented 3-manifold the first variation of the
action is

    d/ds CS(g + s h)|_0 = -2 ∫_M C^{ij} h_ij vol_g,

with ``C^{ij} = ε^{ikl} ∇_k (R^j_l - R δ^j_l / 4)`` (``ε`` the volume tensor).
Hence ``∫ C·h vol = COTTON_NORMALIZATION * sigma_pairing(tr2, g, h)`` with
``COTTON_NORMALIZATION = -1/2``; the derivation is in docs/cotton_normalization.md.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .charclass import InvariantPolynomial, cs_action
from .fields import GridManifold, MatrixFormField, axis_weights, build_grid, integrate_nodal, _diff_array
from .geometry import (
    Diffeomorphism,
    GeometryError,
    MetricField,
    NotPositiveDefinite,
    OrientedMetric,
    SymmetricTensorField,
    apply_diffeo,
    christoffel,
    push_tensor,
    tensor_gradient,
)
from .torusbundle import build_mapping_torus, pontryagin_number

COTTON_NORMALIZATION = -0.5


class VariationalError(ValueError):
    pass


def _oriented(g) -> OrientedMetric:
    return g if isinstance(g, OrientedMetric) else OrientedMetric.of(g)


def _cs_nodal(p, values, base, orientation, A0) -> float:
    metric = MetricField(base, values)
    return cs_action(p, OrientedMetric(metric, orientation), A0, use_generator=False)


def sigma_pairing(p: InvariantPolynomial, g, h: SymmetricTensorField, A0: MatrixFormField | None = None, rel_step: float = 1e-4) -> float:
    """``σ^p_g(h) = d/ds CS_{p,A0}(g + s h)`` by central differences plus one Richardson step.

    All actions are evaluated on nodal metrics (stencil derivatives), so the
    result is the exact derivative of the discrete action up to O(s^4).
    """
    og = _oriented(g)
    base = og.base
    g_vals = og.metric.values
    h_vals = np.asarray(h.values, float)
    hn = float(np.sqrt(np.mean(np.sum(h_vals**2, axis=(-1, -2)))))
    if hn == 0.0:
        return 0.0
    gn = float(np.sqrt(np.mean(np.sum(g_vals**2, axis=(-1, -2)))))
    s = rel_step * gn / hn
    for _ in range(40):
        try:
            def central(step):
                plus = _cs_nodal(p, g_vals + step * h_vals, base, og.orientation, A0)
                minus = _cs_nodal(p, g_vals - step * h_vals, base, og.orientation, A0)
                return (plus - minus) / (2.0 * step)

            coarse = central(s)
            fine = central(0.5 * s)
            return (4.0 * fine - coarse) / 3.0
        except NotPositiveDefinite:
            s *= 0.5
    raise VariationalError("step size underflow: g ± s h not positive definite")


# -- classical Cotton tensor -------------------------------------------------------


def _levi_civita_symbol(n: int) -> np.ndarray:
    eps = np.zeros((n,) * n)
    for perm in itertools.permutations(range(n)):
        eps[perm] = np.linalg.det(np.eye(n)[list(perm)])
    return eps


def ricci_from_christoffel(gamma: np.ndarray, base: GridManifold) -> np.ndarray:
    """``R_{bj} = ∂_a Γ^a_{jb} - ∂_j Γ^a_{ab} + Γ^a_{ac} Γ^c_{jb} - Γ^a_{jc} Γ^c_{ab}``."""
    dG = tensor_gradient(gamma, base)  # (..., k, a, i, b) = ∂_k Γ^a_{ib}
    term1 = np.einsum("...aajb->...bj", dG)
    term2 = np.einsum("...jaab->...bj", dG)
    term3 = np.einsum("...aac,...cjb->...bj", gamma, gamma)
    term4 = np.einsum("...ajc,...cab->...bj", gamma, gamma)
    return term1 - term2 + term3 - term4


def cotton_classical(g, use_generator: bool = True) -> SymmetricTensorField:
    """Symmetrized Cotton tensor density ``√g C^{ij}`` of a 3-metric (contravariant).

    Built from Christoffel symbols and the Schouten tensor by direct stencil
    differentiation, independently of the Chern-Simons machinery.
    """
    og = _oriented(g)
    metric = og.metric
    base = metric.base
    if base.dim != 3:
        raise VariationalError("the classical Cotton tensor is defined in dimension 3")
    gamma = christoffel(metric, use_generator)
    ginv = metric.inverse()
    ric = ricci_from_christoffel(gamma, base)
    ric = 0.5 * (ric + np.swapaxes(ric, -1, -2))
    scalar = np.einsum("...ij,...ij->...", ginv, ric)
    schouten = ric - 0.25 * scalar[..., None, None] * metric.values
    mixed = np.einsum("...lm,...mk->...lk", ginv, schouten)  # P^l_k
    dP = tensor_gradient(mixed, base)  # (..., j, l, k)
    cov = dP + np.einsum("...ljm,...mk->...jlk", gamma, mixed) - np.einsum("...mjk,...lm->...jlk", gamma, mixed)
    eps = _levi_civita_symbol(3) * og.orientation
    dens = np.einsum("ijk,...jlk->...il", eps, cov)
    return SymmetricTensorField(base, dens)


def cotton_pairing(cotton: SymmetricTensorField, h: SymmetricTensorField) -> float:
    """``∫ C^{ij} h_ij vol`` for a Cotton density."""
    return integrate_nodal(np.einsum("...ij,...ij->...", cotton.values, h.values), cotton.base)


def cotton_divergence(g, cotton: SymmetricTensorField, use_generator: bool = True) -> np.ndarray:
    """``∇_i C^{ij}`` from the density: ``∂_i D^{ij} + Γ^j_{ik} D^{ik}`` (divided by √g)."""
    metric = _oriented(g).metric
    gamma = christoffel(metric, use_generator)
    dD = tensor_gradient(cotton.values, metric.base)  # (..., k, i, j)
    div = np.einsum("...iij->...j", dD) + np.einsum("...jik,...ik->...j", gamma, cotton.values)
    return div / metric.volume_density()[..., None]


# -- paths in the space of metrics ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class MetricPath:
    """Metrics ``γ(s_0), ..., γ(s_m)`` on a uniform grid of ``[0, 1]``."""

    samples: tuple
    orientation: int = 1
    glue: Diffeomorphism | None = None
    endpoint_tolerance: float = 1e-5

    def __post_init__(self):
        if len(self.samples) < 3:
            raise VariationalError("a metric path needs at least 3 samples")
        samples = tuple(s if isinstance(s, MetricField) else MetricField(self.samples[0].base, s) for s in self.samples)
        object.__setattr__(self, "samples", samples)
        if self.glue is not None:
            target = apply_diffeo(self.glue, samples[0]).values
            gap = float(np.max(np.abs(samples[-1].values - target)))
            if gap > self.endpoint_tolerance:
                raise VariationalError(f"path endpoint misses φ·γ(0) by {gap:.3g}")

    @property
    def base(self) -> GridManifold:
        return self.samples[0].base

    @property
    def s(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, len(self.samples))

    @classmethod
    def interpolate(cls, g0: MetricField, g1: MetricField, m: int = 8, bump: SymmetricTensorField | None = None, orientation: int = 1, glue=None) -> "MetricPath":
        """``γ(s) = (1-s) g0 + s g1 + s(1-s) bump`` sampled at ``m+1`` points."""
        samples = []
        for s in np.linspace(0.0, 1.0, m + 1):
            vals = (1.0 - s) * g0.values + s * g1.values
            if bump is not None:
                vals = vals + s * (1.0 - s) * bump.values
            try:
                samples.append(MetricField(g0.base, vals))
            except NotPositiveDefinite as exc:
                raise VariationalError(f"path leaves the positive cone at s={s:.3f}: {exc}") from None
        return cls(tuple(samples), orientation, glue)

    @classmethod
    def in_class(cls, g0: MetricField, phi: Diffeomorphism, m: int = 8, bump=None, orientation: int = 1) -> "MetricPath":
        """A path from ``g0`` to ``φ·g0`` (an element of the class C^φ)."""
        g1 = apply_diffeo(phi, g0)
        return cls.interpolate(g0, g1, m, bump, orientation, glue=phi)

    def reparametrized(self, warp: Callable[[np.ndarray], np.ndarray], m: int | None = None) -> "MetricPath":
        """Resample ``γ∘warp`` (warp a monotone map of [0,1] onto itself) by exact polynomial interpolation in s."""
        m = len(self.samples) - 1 if m is None else m
        s_old = self.s
        stack = np.stack([g.values for g in self.samples])
        new = []
        for s in warp(np.linspace(0.0, 1.0, m + 1)):
            weights = _lagrange_weights(s_old, float(s))
            new.append(MetricField(self.base, np.tensordot(weights, stack, axes=1)))
        return MetricPath(tuple(new), self.orientation, None)


def _lagrange_weights(nodes: np.ndarray, x: float) -> np.ndarray:
    w = np.ones(len(nodes))
    for j, xj in enumerate(nodes):
        for k, xk in enumerate(nodes):
            if k != j:
                w[j] *= (x - xk) / (xj - xk)
    return w


def _s_weights(m: int) -> np.ndarray:
    if m + 1 >= 8:
        return axis_weights(build_grid(1, [m + 1], [1.0], topology="torus×interval"), 0)
    h = 1.0 / m
    if m % 2 == 0:
        w = np.ones(m + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return w * h / 3.0
    w = np.full(m + 1, h)
    w[0] = w[-1] = 0.5 * h
    return w


def path_velocity(path: MetricPath) -> list[SymmetricTensorField]:
    stack = np.stack([g.values for g in path.samples])
    m = len(path.samples) - 1
    h = 1.0 / m
    if m + 1 >= 5:
        vel = _diff_array(stack, 0, h, periodic=False)
    else:
        vel = np.gradient(stack, h, axis=0, edge_order=2)
    return [SymmetricTensorField(path.base, v) for v in vel]


def path_integral_sigma(p: InvariantPolynomial, path: MetricPath, A0: MatrixFormField | None = None) -> float:
    """``∫_γ σ^p = ∫_0^1 σ^p_{γ(s)}(γ'(s)) ds`` by composite quadrature."""
    velocities = path_velocity(path)
    weights = _s_weights(len(path.samples) - 1)
    values = []
    for g, v in zip(path.samples, velocities):
        values.append(sigma_pairing(p, OrientedMetric(g, path.orientation), v, A0))
    return float(np.dot(weights, values))


# -- flat equivariant holonomy ---------------------------------------------------------


@dataclass(frozen=True)
class FlatHolonomyDatum:
    name: str
    phi: Diffeomorphism
    kappa: Fraction | float | None


@dataclass(frozen=True)
class HolonomyVerdict:
    name: str
    kappa: float | None
    characteristic_number: float | None
    distance: float | None
    passed: bool | None
    notice: str = ""


def mod_one_distance(x: float) -> float:
    return abs(x - round(x))


def flat_holonomy_check(
    p: InvariantPolynomial,
    data: Iterable[FlatHolonomyDatum],
    metric,
    eps: float = 0.15,
    nt: int = 33,
    tolerance: float = 1e-3,
    characteristic: Callable[[Diffeomorphism], float] | None = None,
) -> list[HolonomyVerdict]:
    """Compare ``κ_φ`` with ``p(M_φ)`` mod Z for each supplied mapping class.

    ``characteristic`` overrides how ``p(M_φ)`` is obtained (default: the
    4-dimensional mapping-torus integral built on ``metric``).
    """
    if characteristic is None:
        def characteristic(phi):
            return pontryagin_number(p, build_mapping_torus(metric, phi, eps, nt))

    out = []
    for datum in data:
        if datum.kappa is None:
            out.append(HolonomyVerdict(datum.name, None, None, None, None, "κ not supplied; skipped"))
            continue
        kappa = float(datum.kappa)
        number = float(characteristic(datum.phi))
        dist = mod_one_distance(kappa - number)
        out.append(HolonomyVerdict(datum.name, kappa, number, dist, dist < tolerance))
    return out
