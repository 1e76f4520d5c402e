"""Mapping tori over a torus fibre and their characteristic numbers.

The mapping torus is represented by its fundamental domain ``M x [0, 1]``
with the interval as the *last* grid axis.  Since the cutoff is flat near both
ends, the t = 1 slice of the interpolated connection is exactly the
φ-transform of the t = 0 slice and no derivative is ever taken across the seam.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .charclass import InvariantPolynomial, PolynomialError, chern_weil
from .fields import GridManifold, MatrixFormField, build_grid, integrate_top
from .geometry import Diffeomorphism, OrientedMetric, apply_diffeo, curvature, levi_civita


class MappingTorusError(ValueError):
    pass


def quintic_step(s):
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10.0 - 15.0 * s + 6.0 * s**2)


def cosine_step(s):
    s = np.clip(s, 0.0, 1.0)
    return 0.5 - 0.5 * np.cos(np.pi * s)


CUTOFFS = {"quintic": quintic_step, "cosine": cosine_step}


def cutoff_profile(t, eps: float, kind: str = "quintic") -> np.ndarray:
    """χ(t): 0 on [0, ε], 1 on [1-ε, 1], a smooth ramp in between."""
    try:
        step = CUTOFFS[kind]
    except KeyError:
        raise MappingTorusError(f"unknown cutoff {kind!r}; choose from {sorted(CUTOFFS)}") from None
    return step((np.asarray(t, float) - eps) / (1.0 - 2.0 * eps))


def product_grid(fibre: GridManifold, nt: int, orientation: int = 1) -> GridManifold:
    """``M x [0, 1]`` with the interval appended as the last axis."""
    if fibre.interval_axis is not None:
        raise MappingTorusError("the fibre must be a closed torus")
    return build_grid(
        fibre.dim + 1,
        list(fibre.shape) + [nt],
        list(fibre.periods) + [1.0],
        orientation,
        "torus×interval",
    )


def interpolated_connection(A_start: MatrixFormField, A_end: MatrixFormField, eps: float, nt: int, cutoff: str = "quintic") -> MatrixFormField:
    """``(1-χ(t)) A_start + χ(t) A_end`` on ``M x [0, 1]``, without a dt component."""
    fibre = A_start.base
    if A_end.base != fibre or A_end.data.shape != A_start.data.shape:
        raise MappingTorusError("end connections live on different bundles")
    if not 0.0 < eps < 0.5:
        raise MappingTorusError("ε must lie in (0, 1/2)")
    h = 1.0 / (nt - 1)
    if (1.0 - 2.0 * eps) < 8 * h:
        raise MappingTorusError(f"ε={eps} leaves fewer than 8 t-nodes on the ramp at nt={nt}")
    base = product_grid(fibre, nt)
    n = fibre.dim
    m = A_start.data.shape[-1]
    chi = cutoff_profile(base.axis_coords(n), eps, cutoff)
    chi = chi.reshape((1,) * n + (nt, 1, 1))
    data = np.zeros((n + 1, *base.shape, m, m))
    for i in range(n):
        a0 = A_start.data[i][..., None, :, :]
        a1 = A_end.data[i][..., None, :, :]
        data[i] = (1.0 - chi) * a0 + chi * a1
    return MatrixFormField(base, 1, data)


def product_orientation(fibre_orientation: int, n: int) -> int:
    """Coordinate sign of ``dt ∧ vol_M`` when t is the last of n+1 axes."""
    return fibre_orientation * (-1) ** n


def characteristic_integral(p: InvariantPolynomial, omega_bar: MatrixFormField, fibre_orientation: int = 1) -> float:
    """``∫_{M x I} p(F̄)`` with the product orientation ``dt ∧ vol_M``."""
    base = omega_bar.base
    if 2 * p.degree != base.dim:
        raise PolynomialError(f"need deg p = {base.dim // 2} on a {base.dim}-dimensional product")
    F = curvature(omega_bar)
    return integrate_top(chern_weil(p, F), orientation=product_orientation(fibre_orientation, base.dim - 1))


@dataclass(frozen=True, eq=False)
class MappingTorus:
    metric: OrientedMetric
    glue: Diffeomorphism
    eps: float
    cutoff: str
    interpolant: MatrixFormField = field(repr=False)
    moved: OrientedMetric = field(repr=False)

    @property
    def base(self) -> GridManifold:
        return self.interpolant.base

    @property
    def orientable(self) -> bool:
        return self.glue.orientation > 0


def build_mapping_torus(g, phi: Diffeomorphism, eps: float = 0.15, nt: int = 33, cutoff: str = "quintic", use_generator: bool = True) -> MappingTorus:
    """Glue ``ω^g`` (near t = 0) to ``ω^{φ·g}`` (near t = 1) across ``M x [0, 1]``."""
    og = g if isinstance(g, OrientedMetric) else OrientedMetric.of(g)
    moved = apply_diffeo(phi, og)
    w0 = levi_civita(og.metric, use_generator)
    w1 = levi_civita(moved.metric, use_generator)
    bar = interpolated_connection(w0, w1, eps, nt, cutoff)
    return MappingTorus(og, phi, eps, cutoff, bar, moved)


def pontryagin_number(p: InvariantPolynomial, mt: MappingTorus) -> float:
    """``p(M_φ) = ∫_{M x [0,1]} p(F̄)`` for orientation-preserving glue maps."""
    if not mt.orientable:
        raise MappingTorusError("mapping torus of an orientation-reversing map is unorientable; use double_cover")
    return characteristic_integral(p, mt.interpolant, mt.metric.orientation)


def double_cover(phi: Diffeomorphism, g, eps: float = 0.15, nt: int = 33, cutoff: str = "quintic", use_generator: bool = True) -> MappingTorus:
    """Mapping torus of ``φ²``, the orientable double cover of ``M_φ``."""
    if phi.orientation > 0:
        raise MappingTorusError("no double cover needed: φ preserves orientation")
    return build_mapping_torus(g, phi.squared(), eps, nt, cutoff, use_generator)
