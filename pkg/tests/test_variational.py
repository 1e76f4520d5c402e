import math
from fractions import Fraction

import numpy as np
import pytest

from gravanom.charclass import cs_action, delta_phi, pontryagin, trace_power
from gravanom.fields import build_grid
from gravanom.geometry import (
    AffinePerturbedDiffeo,
    ConformalMetric,
    MetricField,
    OrientedMetric,
    SymmetricTensorField,
    affine_diffeo,
    apply_diffeo,
    lie_derivative_metric,
    push_tensor,
    random_fourier_metric,
    random_perturbation,
    random_vector_field,
)
from gravanom.variational import (
    COTTON_NORMALIZATION,
    FlatHolonomyDatum,
    MetricPath,
    VariationalError,
    cotton_classical,
    cotton_divergence,
    cotton_pairing,
    flat_holonomy_check,
    mod_one_distance,
    path_integral_sigma,
    sigma_pairing,
)

P1 = pontryagin(1)
TR2 = trace_power(2)
ROTATION = affine_diffeo([[1, 0, 0], [0, 0, -1], [0, 1, 0]])


def nodal(N, seed=0, amplitude=0.06, modes=3):
    gen = random_fourier_metric(np.random.default_rng(seed), 3, (1, 1, 1), modes, amplitude)
    g = MetricField.from_generator(build_grid(3, N, 1.0), gen)
    return MetricField(g.base, g.values)


def direction(g, seed):
    """A variation sharing the Fourier content of g, plus a small independent part."""
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(3, 3))
    mixed = np.einsum("...ik,kj->...ij", g.values - np.eye(3), M)
    h = mixed + np.swapaxes(mixed, -1, -2)
    extra = nodal(g.base.shape[0], seed + 100, 0.1, 2).values - np.eye(3)
    return SymmetricTensorField(g.base, h / np.max(np.abs(h)) + extra)


def fd_sigma(p, g, h, step):
    plus = cs_action(p, MetricField(g.base, g.values + step * h.values), use_generator=False)
    minus = cs_action(p, MetricField(g.base, g.values - step * h.values), use_generator=False)
    return (plus - minus) / (2 * step)


# -- the variational one-form ----------------------------------------------------------


def test_sigma_matches_plain_difference_quotient():
    g = nodal(12)
    h = direction(g, 1)
    s = sigma_pairing(P1, g, h)
    assert abs(s) > 1e-4
    assert abs(s - fd_sigma(P1, g, h, 1e-3)) < 1e-6 * max(1.0, abs(s)) + 1e-8


def test_sigma_zero_direction():
    g = nodal(8)
    assert sigma_pairing(P1, g, SymmetricTensorField(g.base, np.zeros_like(g.values))) == 0.0


def test_sigma_basic():
    g = nodal(16)
    for seed in (0, 1):
        X = random_vector_field(np.random.default_rng(seed), g.base, amplitude=0.05)
        scale = abs(sigma_pairing(P1, g, direction(g, seed)))
        assert abs(sigma_pairing(P1, g, lie_derivative_metric(X, g))) < 1e-3 * scale


def test_sigma_radial_direction_vanishes():
    g = nodal(12)
    assert abs(sigma_pairing(P1, g, g)) < 1e-12


def test_sigma_linear():
    g = nodal(12)
    h1, h2 = direction(g, 1), direction(g, 2)
    a, b = sigma_pairing(P1, g, h1), sigma_pairing(P1, g, h2)
    assert abs(sigma_pairing(P1, g, h1 + h2 * 2.0) - a - 2 * b) < 1e-7


def test_sigma_orientation_flip():
    g = nodal(12)
    h = direction(g, 1)
    og = OrientedMetric.of(g)
    assert math.isclose(sigma_pairing(P1, og.flipped(), h), -sigma_pairing(P1, og, h), rel_tol=1e-12)


def test_sigma_closed_mixed_partials():
    # σ is exact, so  ∂_k σ(h) = ∂_h σ(k)
    g = nodal(10)
    h, k = direction(g, 1), direction(g, 2)
    eps = 2e-3

    def shifted(v, s):
        return MetricField(g.base, g.values + s * v.values)

    hk = (sigma_pairing(P1, shifted(k, eps), h) - sigma_pairing(P1, shifted(k, -eps), h)) / (2 * eps)
    kh = (sigma_pairing(P1, shifted(h, eps), k) - sigma_pairing(P1, shifted(h, -eps), k)) / (2 * eps)
    assert abs(hk) > 1e-4
    assert abs(hk - kh) < 1e-4 * abs(hk)


def test_sigma_equivariant_under_rotation():
    g = nodal(12)
    h = direction(g, 1)
    moved = apply_diffeo(ROTATION, g)
    a = sigma_pairing(P1, g, h)
    b = sigma_pairing(P1, MetricField(moved.base, moved.values), push_tensor(ROTATION, h))
    assert abs(a - b) < 1e-9 * abs(a)


def test_sigma_step_underflow():
    g = MetricField.flat(build_grid(3, 6, 1.0))
    h = SymmetricTensorField(g.base, np.broadcast_to(np.diag([1.0, 0, 0]), g.values.shape))
    # forty halvings cannot bring g - s h back into the positive cone
    with pytest.raises(VariationalError):
        sigma_pairing(P1, g, h, rel_step=1e20)


# -- classical Cotton tensor ----------------------------------------------------------------


def test_cotton_flat_zero():
    assert np.all(cotton_classical(MetricField.flat(build_grid(3, 8, 1.0))).values == 0.0)


def test_cotton_requires_three_dimensions():
    with pytest.raises(Exception):
        cotton_classical(MetricField.flat(build_grid(4, 6, 1.0)))


def test_cotton_conformally_flat():
    G = build_grid(3, 16, 1.0)
    g = MetricField.from_generator(G, ConformalMetric(np.eye(3), [((1, 0, 0), 0.1, 0.3), ((0, 1, 1), 0.05, 1.0)], (1, 1, 1)))
    C = cotton_classical(g)
    reference = np.max(np.abs(cotton_classical(nodal(16)).values))
    # the classical route differentiates Ricci by stencils: zero up to truncation
    assert np.max(np.abs(C.values)) < 1e-3 * reference
    generic = nodal(16)
    h = direction(generic, 3)
    assert abs(sigma_pairing(TR2, g, h)) < 1e-3 * abs(sigma_pairing(TR2, generic, h))


def test_cotton_symmetric():
    C = cotton_classical(nodal(12)).values
    assert np.max(np.abs(C - np.swapaxes(C, -1, -2))) < 1e-12 * np.max(np.abs(C))


def test_cotton_trace_and_divergence_converge():
    res = {}
    for N in (16, 32):
        g = nodal(N, amplitude=0.02, modes=1)
        C = cotton_classical(g)
        scale = np.max(np.abs(C.values))
        tr = np.max(np.abs(np.einsum("...ij,...ij->...", C.values, g.values))) / scale
        div = np.max(np.abs(cotton_divergence(g, C))) / scale
        res[N] = max(tr, div)
    assert res[32] < 1e-3
    assert math.log2(res[16] / res[32]) > 3.3


def test_cotton_two_routes_agree():
    g = nodal(16)
    h = direction(g, 4)
    variational = COTTON_NORMALIZATION * sigma_pairing(TR2, g, h)
    classical = cotton_pairing(cotton_classical(g), h)
    assert abs(classical) > 1e-3
    assert abs(variational - classical) < 5e-3 * abs(classical)


# -- paths ----------------------------------------------------------------------------------


def test_path_needs_three_samples():
    g = nodal(6)
    with pytest.raises(VariationalError):
        MetricPath((g, g))


def test_path_endpoint_checked():
    g = nodal(8)
    with pytest.raises(VariationalError, match="endpoint"):
        MetricPath.interpolate(g, g, 4, glue=ROTATION)


def test_constant_path_zero():
    g = nodal(8)
    assert path_integral_sigma(P1, MetricPath.interpolate(g, g, 4)) == 0.0


def test_free_path_endpoint_difference():
    g0, g1 = nodal(12, 0), nodal(12, 1)
    path = MetricPath.interpolate(g0, g1, 8)
    integral = path_integral_sigma(P1, path)
    diff = cs_action(P1, g1, use_generator=False) - cs_action(P1, g0, use_generator=False)
    assert abs(diff) > 1e-4
    assert abs(integral - diff) < 1e-6


def shear():
    modes, coefs = random_perturbation(np.random.default_rng(1), 3, 2, 0.004)
    return AffinePerturbedDiffeo([[1, 1, 0], [0, 1, 0], [0, 0, 1]], None, modes, coefs)


def test_class_path_independence():
    g, phi = nodal(12), shear()
    bump = SymmetricTensorField(g.base, nodal(12, 7, 0.05, 2).values - np.eye(3))
    straight = path_integral_sigma(P1, MetricPath.in_class(g, phi, 8))
    bent = path_integral_sigma(P1, MetricPath.in_class(g, phi, 8, bump=bump))
    d = delta_phi(P1, phi, g, use_generator=False)
    assert abs(straight - bent) < 5e-5
    assert abs(straight - d) < 5e-5


def test_reparametrization_invariance():
    g0, g1 = nodal(10, 0), nodal(10, 1)
    path = MetricPath.interpolate(g0, g1, 8)
    warped = path.reparametrized(lambda s: 0.5 * (s + s**2), 12)
    assert abs(path_integral_sigma(P1, warped) - path_integral_sigma(P1, path)) < 1e-6


# -- flat holonomy --------------------------------------------------------------------------


def test_mod_one_distance():
    assert mod_one_distance(0.0) == 0.0
    assert mod_one_distance(2.75) == 0.25
    assert math.isclose(mod_one_distance(-0.9), 0.1)


def test_holonomy_verdicts():
    data = [
        FlatHolonomyDatum("matched", ROTATION, Fraction(1)),
        FlatHolonomyDatum("half", ROTATION, Fraction(1, 2)),
        FlatHolonomyDatum("absent", ROTATION, None),
    ]
    verdicts = flat_holonomy_check(P1, data, None, characteristic=lambda phi: 1e-6)
    assert [v.passed for v in verdicts] == [True, False, None]
    assert verdicts[1].distance == pytest.approx(0.5 - 1e-6)
    assert "skipped" in verdicts[2].notice


def test_holonomy_flat_metric_isotopic_glue():
    g = MetricField.flat(build_grid(3, 8, 1.0))
    X = random_vector_field(np.random.default_rng(0), build_grid(3, 8, 1.0), amplitude=0.005)
    from gravanom.geometry import isotopy_flow

    verdict = flat_holonomy_check(P1, [FlatHolonomyDatum("flow", isotopy_flow(X, 1.0), 0)], g, nt=17)[0]
    assert verdict.passed
    assert verdict.distance < 1e-6
