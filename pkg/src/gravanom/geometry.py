"""Metrics, Levi-Civita connections, curvature and the diffeomorphism action.

Connections are matrix-valued 1-forms in the coordinate frame:
``omega.data[i][..., a, b] = Gamma^a_{i b}``.  Curvature is
``F = d omega + omega ∧ omega`` and its component on ``dx^i ∧ dx^j`` (i < j)
is the Riemann tensor ``R^a_{b i j}`` with the convention
``R^a_{bij} = ∂_i Γ^a_{jb} - ∂_j Γ^a_{ib} + Γ^a_{ic} Γ^c_{jb} - Γ^a_{jc} Γ^c_{ib}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import (
    GridManifold,
    MatrixFormField,
    exterior_derivative,
    nodal_derivative,
    wedge,
)

TWO_PI = 2.0 * np.pi


class GeometryError(ValueError):
    pass


class NotPositiveDefinite(GeometryError):
    pass


class DiffeomorphismError(GeometryError):
    pass


# -- trigonometric interpolation ---------------------------------------------


class TrigInterpolant:
    """Band-limited periodic interpolant of nodal samples on a torus grid.

    Values may carry trailing component axes.  Modes whose coefficient is
    below ``cutoff`` (relative to the largest) are dropped.
    """

    def __init__(self, values, base: GridManifold, cutoff: float = 0.0):
        if base.interval_axis is not None:
            raise GeometryError("trigonometric interpolation needs a fully periodic grid")
        values = np.asarray(values, dtype=float)
        n = base.dim
        self.base = base
        self.comp_shape = values.shape[n:]
        flat = values.reshape(*base.shape, -1)
        coefs = np.fft.fftn(flat, axes=tuple(range(n))) / base.num_nodes
        freqs = [np.rint(np.fft.fftfreq(N) * N).astype(int) for N in base.shape]
        modes = np.stack(np.meshgrid(*freqs, indexing="ij"), axis=-1).reshape(-1, n)
        coefs = coefs.reshape(-1, flat.shape[-1])
        keep = np.max(np.abs(coefs), axis=1) > cutoff * max(np.max(np.abs(coefs)), 1e-300)
        if cutoff <= 0.0:
            keep[:] = True
        self.modes = modes[keep]
        self.coefs = coefs[keep]

    def _phases(self, pts):
        pts = np.asarray(pts, dtype=float)
        scaled = pts / np.asarray(self.base.periods)
        return np.exp(1j * TWO_PI * (scaled @ self.modes.T))

    def __call__(self, pts, chunk: int = 2048) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, self.base.dim)
        out = np.empty((len(pts), self.coefs.shape[1]))
        for start in range(0, len(pts), chunk):
            E = self._phases(pts[start : start + chunk])
            out[start : start + chunk] = (E @ self.coefs).real
        return out.reshape(len(pts), *self.comp_shape)

    def gradient(self, pts, chunk: int = 2048) -> np.ndarray:
        """Derivatives with shape ``(P, *comp_shape, dim)``."""
        pts = np.asarray(pts, dtype=float).reshape(-1, self.base.dim)
        n = self.base.dim
        wave = 1j * TWO_PI * self.modes / np.asarray(self.base.periods)
        out = np.empty((len(pts), self.coefs.shape[1], n))
        for start in range(0, len(pts), chunk):
            E = self._phases(pts[start : start + chunk])
            for axis in range(n):
                out[start : start + chunk, :, axis] = (E @ (self.coefs * wave[:, axis, None])).real
        return out.reshape(len(pts), *self.comp_shape, n)


# -- metric generators -------------------------------------------------------


class MetricGenerator:
    """Closed-form metric family evaluated at arbitrary points."""

    dim: int
    periods: tuple[float, ...]

    def values(self, pts) -> np.ndarray:
        raise NotImplementedError

    def derivatives(self, pts) -> np.ndarray | None:
        """``out[p, k, i, j] = ∂_k g_ij`` or ``None`` if unavailable."""
        return None

    def describe(self) -> dict:
        return {"family": type(self).__name__}


def _as_terms(terms, dim):
    out = []
    for k, amp, phase in terms:
        out.append((np.asarray(k, dtype=float).reshape(dim), amp, float(phase)))
    return out


class FourierMetric(MetricGenerator):
    """``g(x) = G0 + sum_m S_m cos(2π k_m·x/L + θ_m)`` with symmetric ``S_m``."""

    def __init__(self, base_matrix, terms, periods):
        self.G0 = np.asarray(base_matrix, dtype=float)
        self.dim = self.G0.shape[0]
        self.periods = tuple(float(p) for p in periods)
        self.terms = [(k, 0.5 * (np.asarray(S, float) + np.asarray(S, float).T), ph) for k, S, ph in _as_terms(terms, self.dim)]

    def _angles(self, pts):
        pts = np.asarray(pts, float) / np.asarray(self.periods)
        return [TWO_PI * (pts @ k) + ph for k, _, ph in self.terms]

    def values(self, pts):
        pts = np.asarray(pts, float)
        out = np.broadcast_to(self.G0, (len(pts), self.dim, self.dim)).copy()
        for (k, S, _), ang in zip(self.terms, self._angles(pts)):
            out += np.cos(ang)[:, None, None] * S
        return out

    def derivatives(self, pts):
        pts = np.asarray(pts, float)
        out = np.zeros((len(pts), self.dim, self.dim, self.dim))
        L = np.asarray(self.periods)
        for (k, S, _), ang in zip(self.terms, self._angles(pts)):
            rate = TWO_PI * k / L
            out += -np.sin(ang)[:, None, None, None] * rate[None, :, None, None] * S[None, None]
        return out

    def describe(self):
        return {
            "family": "fourier",
            "base": self.G0.tolist(),
            "terms": [{"k": k.tolist(), "S": S.tolist(), "phase": ph} for k, S, ph in self.terms],
        }


class ConformalMetric(MetricGenerator):
    """``g(x) = exp(2 f(x)) G0`` with ``f = sum_m a_m cos(2π k_m·x/L + θ_m)``."""

    def __init__(self, base_matrix, terms, periods):
        self.G0 = np.asarray(base_matrix, dtype=float)
        self.dim = self.G0.shape[0]
        self.periods = tuple(float(p) for p in periods)
        self.terms = [(k, float(a), ph) for k, a, ph in _as_terms(terms, self.dim)]

    def factor(self, pts):
        pts = np.asarray(pts, float) / np.asarray(self.periods)
        f = np.zeros(len(pts))
        df = np.zeros((len(pts), self.dim))
        L = np.asarray(self.periods)
        for k, a, ph in self.terms:
            ang = TWO_PI * (pts @ k) + ph
            f += a * np.cos(ang)
            df += -a * np.sin(ang)[:, None] * (TWO_PI * k / L)[None, :]
        return f, df

    def values(self, pts):
        f, _ = self.factor(pts)
        return np.exp(2 * f)[:, None, None] * self.G0

    def derivatives(self, pts):
        f, df = self.factor(pts)
        e = np.exp(2 * f)
        return 2 * (e[:, None] * df)[:, :, None, None] * self.G0[None, None]

    def describe(self):
        return {
            "family": "conformal",
            "base": self.G0.tolist(),
            "terms": [{"k": k.tolist(), "a": a, "phase": ph} for k, a, ph in self.terms],
        }


class PulledBackGenerator(MetricGenerator):
    """Values of ``(φ^{-1})^* g`` for a generator ``g``; derivatives not provided."""

    def __init__(self, inner: MetricGenerator, phi: "Diffeomorphism"):
        self.inner = inner
        self.phi = phi
        self.dim = inner.dim
        self.periods = inner.periods

    def values(self, pts):
        pts = np.asarray(pts, float)
        y = self.phi.inverse(pts)
        J = np.linalg.inv(self.phi.jacobian(y))
        return np.einsum("pai,pab,pbj->pij", J, self.inner.values(y), J)

    def describe(self):
        return {"family": "pullback", "inner": self.inner.describe(), "phi": self.phi.describe()}


# -- tensor fields -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SymmetricTensorField:
    """Nodal symmetric 2-tensor ``h_ij(x)``, shape ``(*grid, n, n)``."""

    base: GridManifold
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        n = self.base.dim
        if v.shape != (*self.base.shape, n, n):
            raise ValueError(f"tensor array has shape {v.shape}, expected {(*self.base.shape, n, n)}")
        v = 0.5 * (v + np.swapaxes(v, -1, -2))
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def norm(self) -> float:
        return float(np.sqrt(np.mean(np.sum(self.values**2, axis=(-1, -2)))))

    def __add__(self, other):
        return SymmetricTensorField(self.base, self.values + other.values)

    def __sub__(self, other):
        return SymmetricTensorField(self.base, self.values - other.values)

    def __mul__(self, s):
        return SymmetricTensorField(self.base, self.values * float(s))

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class MetricField(SymmetricTensorField):
    """Positive-definite metric, optionally backed by a closed-form generator."""

    generator: MetricGenerator | None = None

    def __post_init__(self):
        super().__post_init__()
        try:
            np.linalg.cholesky(self.values)
        except np.linalg.LinAlgError:
            eig = np.linalg.eigvalsh(self.values)
            bad = np.argwhere(eig[..., 0] <= 0)
            node = tuple(int(i) for i in bad[0]) if len(bad) else None
            raise NotPositiveDefinite(f"metric is not positive definite at node {node}") from None

    @classmethod
    def from_generator(cls, base: GridManifold, generator: MetricGenerator) -> "MetricField":
        vals = generator.values(base.points()).reshape(*base.shape, base.dim, base.dim)
        return cls(base, vals, generator)

    @classmethod
    def flat(cls, base: GridManifold) -> "MetricField":
        n = base.dim
        gen = FourierMetric(np.eye(n), [], base.periods)
        return cls.from_generator(base, gen)

    def scaled(self, lam2: float) -> "MetricField":
        gen = None
        if isinstance(self.generator, FourierMetric):
            gen = FourierMetric(self.generator.G0 * lam2, [(k, S * lam2, ph) for k, S, ph in self.generator.terms], self.generator.periods)
        return MetricField(self.base, self.values * lam2, gen)

    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.values)

    def volume_density(self) -> np.ndarray:
        return np.sqrt(np.linalg.det(self.values))

    def derivatives(self, use_generator: bool = True) -> np.ndarray:
        """``out[..., k, i, j] = ∂_k g_ij`` at every node."""
        if use_generator and self.generator is not None:
            d = self.generator.derivatives(self.base.points())
            if d is not None:
                n = self.base.dim
                return d.reshape(*self.base.shape, n, n, n)
        return tensor_gradient(self.values, self.base)


def tensor_gradient(values: np.ndarray, base: GridManifold) -> np.ndarray:
    """Stencil gradient of a nodal array ``(*grid, ...)``, derivative axis placed before the trailing ones."""
    n = base.dim
    grads = [nodal_derivative(values, base, k) for k in range(n)]
    return np.stack(grads, axis=n)  # (*grid, k, ...)


def as_metric(values, base: GridManifold) -> MetricField:
    return MetricField(base, np.asarray(values, dtype=float))


@dataclass(frozen=True, eq=False)
class OrientedMetric:
    metric: MetricField
    orientation: int = 1

    def __post_init__(self):
        if self.orientation not in (1, -1):
            raise GeometryError("orientation must be +1 or -1")

    @classmethod
    def of(cls, metric: MetricField, orientation: int | None = None) -> "OrientedMetric":
        return cls(metric, metric.base.orientation if orientation is None else orientation)

    @property
    def base(self) -> GridManifold:
        return self.metric.base

    def flipped(self) -> "OrientedMetric":
        return OrientedMetric(self.metric, -self.orientation)


def _unwrap(g):
    return g.metric if isinstance(g, OrientedMetric) else g


# -- connections and curvature ------------------------------------------------


def christoffel(g: MetricField, use_generator: bool = True) -> np.ndarray:
    """``Gamma[..., a, i, b] = Γ^a_{ib}``."""
    dg = g.derivatives(use_generator)  # (..., k, i, j)
    low = 0.5 * (
        np.moveaxis(dg, -1, -3)  # [l,i,b] <- dg[i,b,l]
        + np.swapaxes(dg, -3, -1)  # [l,i,b] <- dg[b,i,l]
        - dg
    )
    return np.einsum("...al,...lib->...aib", g.inverse(), low)


def levi_civita(g, use_generator: bool = True) -> MatrixFormField:
    """Levi-Civita connection as a gl(n)-valued 1-form in the coordinate frame."""
    g = _unwrap(g)
    gamma = christoffel(g, use_generator)
    data = np.moveaxis(gamma, -2, 0)  # (i, ..., a, b)
    return MatrixFormField(g.base, 1, np.ascontiguousarray(data))


def curvature(A: MatrixFormField) -> MatrixFormField:
    if A.degree != 1:
        raise GeometryError("curvature needs a connection 1-form")
    return exterior_derivative(A) + wedge(A, A)


def covariant_exterior(A: MatrixFormField, F: MatrixFormField) -> MatrixFormField:
    """``dF + A∧F - F∧A`` (vanishes for the curvature of ``A``)."""
    return exterior_derivative(F) + wedge(A, F) - wedge(F, A)


# -- diffeomorphisms ----------------------------------------------------------


def _integer_inverse(B: np.ndarray) -> np.ndarray:
    inv = np.rint(np.linalg.inv(B)).astype(np.int64)
    if not np.array_equal(B @ inv, np.eye(len(B), dtype=np.int64)):
        raise DiffeomorphismError("linear part is not invertible over the integers")
    return inv


class Diffeomorphism:
    """Self-map of the torus ``R^n / (L_1 Z x ... x L_n Z)`` acting on unwrapped coordinates."""

    dim: int
    periods: tuple[float, ...]

    @property
    def linear_part(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def orientation(self) -> int:
        return int(round(np.linalg.det(self.linear_part)))

    @property
    def isotopic_to_identity(self) -> bool:
        raise NotImplementedError

    @property
    def is_identity(self) -> bool:
        return False

    def __call__(self, pts) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, pts) -> np.ndarray:
        raise NotImplementedError

    def inverse(self, pts) -> np.ndarray:
        raise NotImplementedError

    def compose(self, other: "Diffeomorphism") -> "Diffeomorphism":
        """``self ∘ other``."""
        return ComposedDiffeo(self, other)

    def squared(self) -> "Diffeomorphism":
        return self.compose(self)

    def describe(self) -> dict:
        raise NotImplementedError


class AffinePerturbedDiffeo(Diffeomorphism):
    """``φ(y) = B y + c + f(y)`` with ``B ∈ GL(n, Z)`` and periodic Fourier ``f``.

    ``f(y) = Re sum_m coefs[m] * exp(2πi k_m · y / L)``.
    """

    max_iterations = 50
    tolerance = 1e-12

    def __init__(self, B, c=None, modes=None, coefs=None, periods=None, isotopic=None):
        B = np.asarray(B)
        if not np.allclose(B, np.rint(B)):
            raise DiffeomorphismError("linear part must be an integer matrix")
        self.B = np.rint(B).astype(np.int64)
        n = len(self.B)
        self.dim = n
        self.periods = tuple(float(p) for p in (periods if periods is not None else [1.0] * n))
        if abs(round(np.linalg.det(self.B))) != 1:
            raise DiffeomorphismError("linear part must have determinant ±1")
        L = np.asarray(self.periods)
        lattice = self.B * L[None, :] / L[:, None]
        if not np.allclose(lattice, np.rint(lattice)):
            raise DiffeomorphismError("linear part does not preserve the period lattice")
        self.B_inv = _integer_inverse(self.B)
        self.c = np.zeros(n) if c is None else np.asarray(c, dtype=float).reshape(n)
        if modes is None or len(modes) == 0:
            self.modes = np.zeros((0, n), dtype=np.int64)
            self.coefs = np.zeros((0, n), dtype=complex)
        else:
            self.modes = np.asarray(modes, dtype=np.int64).reshape(-1, n)
            self.coefs = np.asarray(coefs, dtype=complex).reshape(-1, n)
        self._wave = TWO_PI * self.modes / L[None, :]
        self._isotopic = isotopic
        bound = self.perturbation_lipschitz()
        if bound >= 0.5:
            raise DiffeomorphismError(f"perturbation Jacobian bound {bound:.3g} is not below 1/2")
        if bound * np.max(np.sum(np.abs(self.B_inv), axis=1)) >= 1.0:
            raise DiffeomorphismError("perturbation too large relative to the linear part for a contractive inverse")

    def perturbation_lipschitz(self) -> float:
        """Row-sum bound on ``sup |Df|``."""
        if not len(self.modes):
            return 0.0
        rows = np.abs(self.coefs).T @ np.abs(self._wave)  # (a, i)
        return float(np.max(np.sum(rows, axis=1)))

    @property
    def linear_part(self):
        return self.B

    @property
    def isotopic_to_identity(self):
        if self._isotopic is not None:
            return self._isotopic
        return bool(np.array_equal(self.B, np.eye(self.dim, dtype=np.int64)))

    @property
    def is_identity(self):
        return (
            np.array_equal(self.B, np.eye(self.dim, dtype=np.int64))
            and not np.any(self.c)
            and not np.any(self.coefs)
        )

    def _phase(self, pts):
        return np.exp(1j * (np.asarray(pts, float) @ self._wave.T))

    def perturbation(self, pts) -> np.ndarray:
        pts = np.asarray(pts, float)
        if not len(self.modes):
            return np.zeros_like(pts)
        return (self._phase(pts) @ self.coefs).real

    def perturbation_jacobian(self, pts) -> np.ndarray:
        pts = np.asarray(pts, float)
        if not len(self.modes):
            return np.zeros((len(pts), self.dim, self.dim))
        E = self._phase(pts)
        return np.einsum("pm,ma,mi->pai", E, self.coefs, 1j * self._wave).real

    def __call__(self, pts):
        pts = np.asarray(pts, float)
        return pts @ self.B.T + self.c + self.perturbation(pts)

    def jacobian(self, pts):
        pts = np.asarray(pts, float)
        return self.B[None].astype(float) + self.perturbation_jacobian(pts)

    def inverse(self, pts):
        """Newton iteration for ``B y + c + f(y) = x`` started from the affine inverse."""
        x = np.asarray(pts, float)
        y = (x - self.c) @ self.B_inv.T.astype(float)
        if not len(self.modes):
            return y
        for _ in range(self.max_iterations):
            r = self(y) - x
            if np.max(np.abs(r)) < self.tolerance:
                return y
            y = y - np.linalg.solve(self.jacobian(y), r[..., None])[..., 0]
        r = self(y) - x
        if np.max(np.abs(r)) < self.tolerance:
            return y
        raise DiffeomorphismError(f"inverse iteration did not converge in {self.max_iterations} steps")

    def describe(self):
        return {
            "B": self.B.tolist(),
            "c": self.c.tolist(),
            "modes": self.modes.tolist(),
            "coefs": [[[z.real, z.imag] for z in row] for row in self.coefs],
        }


class ComposedDiffeo(Diffeomorphism):
    def __init__(self, outer: Diffeomorphism, inner: Diffeomorphism):
        if outer.dim != inner.dim or not np.allclose(outer.periods, inner.periods):
            raise DiffeomorphismError("cannot compose maps of different tori")
        self.outer = outer
        self.inner = inner
        self.dim = outer.dim
        self.periods = outer.periods

    @property
    def linear_part(self):
        return self.outer.linear_part @ self.inner.linear_part

    @property
    def isotopic_to_identity(self):
        # on T^n (n <= 3) the mapping class is detected by the linear part
        return bool(np.array_equal(self.linear_part, np.eye(self.dim, dtype=np.int64)))

    def __call__(self, pts):
        return self.outer(self.inner(pts))

    def jacobian(self, pts):
        y = self.inner(pts)
        return self.outer.jacobian(y) @ self.inner.jacobian(pts)

    def inverse(self, pts):
        return self.inner.inverse(self.outer.inverse(pts))

    def describe(self):
        return {"compose": [self.outer.describe(), self.inner.describe()]}


def affine_diffeo(B, c=None, periods=None) -> AffinePerturbedDiffeo:
    return AffinePerturbedDiffeo(B, c, periods=periods)


def identity_diffeo(dim: int, periods=None) -> AffinePerturbedDiffeo:
    return AffinePerturbedDiffeo(np.eye(dim, dtype=np.int64), periods=periods)


def invert_diffeo(phi: Diffeomorphism, point) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(point, float))
    out = phi.inverse(pts)
    return out[0] if np.ndim(point) == 1 else out


# -- the action on metrics ------------------------------------------------------


def _pullback_values(phi: Diffeomorphism, h: SymmetricTensorField, generator=None) -> np.ndarray:
    base = h.base
    n = base.dim
    x = base.points()
    y = phi.inverse(x)
    J = np.linalg.inv(phi.jacobian(y))  # D(φ^{-1})(x)
    if generator is not None:
        hy = generator.values(y)
    else:
        hy = TrigInterpolant(h.values, base)(y)
    out = np.einsum("pai,pab,pbj->pij", J, hy, J)
    return out.reshape(*base.shape, n, n)


def push_tensor(phi: Diffeomorphism, h: SymmetricTensorField) -> SymmetricTensorField:
    """``(φ^{-1})^* h`` for a symmetric 2-tensor, resampled by trigonometric interpolation."""
    if isinstance(phi, AffinePerturbedDiffeo) and phi.is_identity:
        return h
    return SymmetricTensorField(h.base, _pullback_values(phi, h))


def apply_diffeo(phi: Diffeomorphism, g):
    """``φ·(g, o) = ((φ^{-1})^* g, φ·o)``.

    Accepts a :class:`MetricField` (returns one) or an :class:`OrientedMetric`.
    """
    oriented = isinstance(g, OrientedMetric)
    metric = _unwrap(g)
    if phi.dim != metric.base.dim:
        raise GeometryError("diffeomorphism and metric dimensions differ")
    if isinstance(phi, AffinePerturbedDiffeo) and phi.is_identity:
        return g
    gen = metric.generator
    values = _pullback_values(phi, metric, gen)
    new_gen = PulledBackGenerator(gen, phi) if gen is not None else None
    new_metric = MetricField(metric.base, values, new_gen)
    if oriented:
        return OrientedMetric(new_metric, g.orientation * phi.orientation)
    return new_metric


# -- vector fields, Lie derivatives and flows ----------------------------------


@dataclass(frozen=True, eq=False)
class VectorFieldOnM:
    """Periodic nodal vector field, shape ``(*grid, n)``."""

    base: GridManifold
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (*self.base.shape, self.base.dim):
            raise ValueError("vector field has the wrong shape")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_fourier(cls, base: GridManifold, terms, constant=None) -> "VectorFieldOnM":
        """``X = constant + sum_m v_m cos(2π k_m·x/L + θ_m)``."""
        pts = base.points() / np.asarray(base.periods)
        X = np.zeros((len(pts), base.dim))
        if constant is not None:
            X += np.asarray(constant, float)
        for k, v, ph in terms:
            X += np.cos(TWO_PI * (pts @ np.asarray(k, float)) + ph)[:, None] * np.asarray(v, float)
        return cls(base, X.reshape(*base.shape, base.dim))

    def __mul__(self, s):
        return VectorFieldOnM(self.base, self.values * float(s))

    __rmul__ = __mul__

    def __add__(self, other):
        return VectorFieldOnM(self.base, self.values + other.values)

    def __neg__(self):
        return VectorFieldOnM(self.base, -self.values)


def lie_derivative_metric(X: VectorFieldOnM, g) -> SymmetricTensorField:
    """``(L_X g)_ij = X^k ∂_k g_ij + g_kj ∂_i X^k + g_ik ∂_j X^k``."""
    g = _unwrap(g)
    dg = g.derivatives() if isinstance(g, MetricField) else tensor_gradient(g.values, g.base)
    dX = tensor_gradient(X.values, X.base)  # (..., i, k) = ∂_i X^k
    term = np.einsum("...k,...kij->...ij", X.values, dg)
    term = term + np.einsum("...kj,...ik->...ij", g.values, dX)
    term = term + np.einsum("...ik,...jk->...ij", g.values, dX)
    return SymmetricTensorField(g.base, term)


def _rk4(field_fn, x, t, steps):
    dt = t / steps
    for _ in range(steps):
        k1 = field_fn(x)
        k2 = field_fn(x + 0.5 * dt * k1)
        k3 = field_fn(x + 0.5 * dt * k2)
        k4 = field_fn(x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def isotopy_flow(X: VectorFieldOnM, t: float, steps_per_unit: int = 64, cutoff: float = 1e-14) -> AffinePerturbedDiffeo:
    """Time-``t`` flow of ``X`` in the ``B = I`` Fourier representation (an element of D⁰)."""
    if not 0.0 <= t <= 1.0:
        raise GeometryError("flow time must lie in [0, 1]")
    base = X.base
    n = base.dim
    if t == 0.0:
        return identity_diffeo(n, base.periods)
    interp = TrigInterpolant(X.values, base, cutoff=cutoff)
    steps = max(8, int(np.ceil(steps_per_unit * t)))
    x0 = base.points()
    xt = _rk4(interp, x0, t, steps)
    disp = TrigInterpolant((xt - x0).reshape(*base.shape, n), base, cutoff=cutoff)
    zero = np.all(disp.modes == 0, axis=1)
    c = disp.coefs[zero].real.sum(axis=0) if np.any(zero) else np.zeros(n)
    try:
        return AffinePerturbedDiffeo(
            np.eye(n, dtype=np.int64), c, disp.modes[~zero], disp.coefs[~zero], base.periods, isotopic=True
        )
    except DiffeomorphismError as exc:
        raise DiffeomorphismError(f"flow leaves the admissible class ({exc}); use a smaller vector field") from None


# -- random families ------------------------------------------------------------


def _random_sym(rng, dim, amplitude):
    S = rng.normal(size=(dim, dim))
    S = 0.5 * (S + S.T)
    return S * (amplitude / np.max(np.abs(np.linalg.eigvalsh(S))))


def _distinct_wavevectors(rng, dim, count, kmax):
    """``count`` nonzero integer wavevectors, pairwise distinct up to sign."""
    seen = set()
    out = []
    if count > ((2 * kmax + 1) ** dim - 1) // 2:
        raise ValueError("not enough distinct wavevectors for the requested number of modes")
    while len(out) < count:
        k = rng.integers(-kmax, kmax + 1, size=dim)
        key = tuple(k)
        if not np.any(k) or key in seen or tuple(-k) in seen:
            continue
        seen.add(key)
        out.append(k)
    return out


def random_fourier_metric(rng, dim, periods, modes=3, amplitude=0.1, kmax=1) -> FourierMetric:
    """Identity plus ``modes`` helical waves ``S cos(θ) + S' sin(θ)`` with independent ``S, S'``.

    Standing waves with a single real polarization have vanishing Chern-Simons
    density at quadratic order, so each wavevector gets two polarizations.
    """
    terms = []
    for k in _distinct_wavevectors(rng, dim, modes, kmax):
        theta = float(rng.uniform(0, TWO_PI))
        terms.append((k, _random_sym(rng, dim, amplitude), theta))
        terms.append((k, _random_sym(rng, dim, amplitude), theta - 0.5 * np.pi))
    return FourierMetric(np.eye(dim), terms, periods)


def random_vector_field(rng, base: GridManifold, modes=2, amplitude=0.02, kmax=1) -> VectorFieldOnM:
    terms = []
    for _ in range(modes):
        k = rng.integers(-kmax, kmax + 1, size=base.dim)
        if not np.any(k):
            k[rng.integers(base.dim)] = 1
        terms.append((k, rng.normal(size=base.dim) * amplitude, float(rng.uniform(0, TWO_PI))))
    return VectorFieldOnM.from_fourier(base, terms)


def random_perturbation(rng, dim, modes=2, amplitude=0.01, kmax=1):
    ks, cs = [], []
    for _ in range(modes):
        k = rng.integers(-kmax, kmax + 1, size=dim)
        if not np.any(k):
            k[rng.integers(dim)] = 1
        ks.append(k)
        cs.append((rng.normal(size=dim) + 1j * rng.normal(size=dim)) * amplitude)
    return np.array(ks), np.array(cs)


def random_connection(rng, base: GridManifold, modes=2, amplitude=0.05, kmax=1, matrix_size=None) -> MatrixFormField:
    """Smooth periodic gl(m)-valued 1-form with a few Fourier modes per component."""
    n = base.dim
    m = matrix_size or n
    pts = base.points() / np.asarray(base.periods)
    data = np.zeros((n, len(pts), m, m))
    for i in range(n):
        for _ in range(modes):
            k = rng.integers(-kmax, kmax + 1, size=n)
            M = rng.normal(size=(m, m)) * amplitude
            data[i] += np.cos(TWO_PI * (pts @ k) + rng.uniform(0, TWO_PI))[:, None, None] * M
    return MatrixFormField(base, 1, data.reshape(n, *base.shape, m, m))
