import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gravanom.charclass import PolynomialError, delta_phi, pontryagin
from gravanom.fields import MatrixFormField, build_grid
from gravanom.geometry import (
    AffinePerturbedDiffeo,
    MetricField,
    affine_diffeo,
    identity_diffeo,
    levi_civita,
    random_fourier_metric,
    random_perturbation,
)
from gravanom.torusbundle import (
    MappingTorusError,
    build_mapping_torus,
    characteristic_integral,
    cutoff_profile,
    double_cover,
    interpolated_connection,
    pontryagin_number,
    product_grid,
    product_orientation,
)

P1 = pontryagin(1)
ROTATION = affine_diffeo([[1, 0, 0], [0, 0, -1], [0, 1, 0]])
REFLECTION = affine_diffeo(np.diag([-1, 1, 1]))


def bumpy(N, seed=0):
    gen = random_fourier_metric(np.random.default_rng(seed), 3, (1, 1, 1), 3, 0.06)
    return MetricField.from_generator(build_grid(3, N, 1.0), gen)


def shear():
    modes, coefs = random_perturbation(np.random.default_rng(1), 3, 2, 0.004)
    return AffinePerturbedDiffeo([[1, 1, 0], [0, 1, 0], [0, 0, 1]], None, modes, coefs)


def number(g, phi, **kw):
    # both ends of the interpolant on the stencil route, so no mixed-route bias
    return pontryagin_number(P1, build_mapping_torus(g, phi, use_generator=False, **kw))


@pytest.mark.parametrize("kind", ["quintic", "cosine"])
@given(t=st.floats(0, 1))
def test_cutoff_profile(kind, t):
    eps = 0.15
    chi = float(cutoff_profile(t, eps, kind))
    if t <= eps:
        assert chi == 0.0
    elif t >= 1 - eps:
        assert chi == 1.0
    else:
        assert 0.0 <= chi <= 1.0
    assert float(cutoff_profile(min(1.0, t + 0.01), eps, kind)) >= chi


def test_cutoff_rejects_unknown_kind():
    with pytest.raises(MappingTorusError):
        cutoff_profile(0.5, 0.1, "linear")


def test_product_grid_and_orientation():
    G = build_grid(3, 8, 1.0)
    P = product_grid(G, 17)
    assert P.shape == (8, 8, 8, 17)
    assert P.interval_axis == 3
    assert product_orientation(1, 3) == -1
    assert product_orientation(-1, 4) == -1
    with pytest.raises(MappingTorusError):
        product_grid(P, 9)


def test_interpolant_endpoint_slices():
    g = bumpy(8)
    mt = build_mapping_torus(g, shear(), nt=17)
    w0 = levi_civita(g)
    w1 = levi_civita(mt.moved.metric)
    for i in range(3):
        assert np.array_equal(mt.interpolant.data[i][..., 0, :, :], w0.data[i])
        assert np.array_equal(mt.interpolant.data[i][..., -1, :, :], w1.data[i])
    assert np.all(mt.interpolant.data[3] == 0.0)


def test_interpolant_rejects_bad_eps():
    A = levi_civita(bumpy(6))
    with pytest.raises(MappingTorusError):
        interpolated_connection(A, A, 0.5, 17)
    with pytest.raises(MappingTorusError):
        interpolated_connection(A, A, 0.45, 17)


def test_identity_glue_gives_zero():
    assert abs(number(bumpy(8), identity_diffeo(3), nt=17)) < 1e-17


def test_translation_of_flat_gives_zero():
    g = MetricField.flat(build_grid(3, 8, 1.0))
    mt = build_mapping_torus(g, affine_diffeo(np.eye(3), [0.3, 0.0, 0.1]), nt=17)
    assert mt.interpolant.max_abs() < 1e-15
    assert pontryagin_number(P1, mt) == 0.0


def test_shear_of_flat_gives_zero():
    g = MetricField.flat(build_grid(3, 8, 1.0))
    assert number(g, affine_diffeo([[1, 1, 0], [0, 1, 0], [0, 0, 1]]), nt=17) == 0.0


@pytest.mark.parametrize("phi", [ROTATION, shear()], ids=["rotation", "shear"])
def test_number_agrees_with_delta(phi):
    g = bumpy(16)
    P = number(g, phi)
    d = delta_phi(P1, phi, g, use_generator=False)
    # the 4-manifold number vanishes; both sides are at truncation level and track each other
    assert abs(P) < 1e-6
    assert abs(P - d) < 1e-7


def test_independent_of_cutoff_and_eps():
    g, phi = bumpy(12), shear()
    base = number(g, phi)
    assert abs(number(g, phi, eps=0.2, cutoff="cosine") - base) < 5e-9
    assert abs(number(g, phi, eps=0.1) - base) < 5e-9


def test_independent_of_metric():
    phi = shear()
    assert abs(number(bumpy(12, 0), phi, nt=17) - number(bumpy(12, 5), phi, nt=17)) < 5e-6


def test_glue_additivity():
    # every term vanishes in the limit; the defect is truncation on the strongly mixed composite
    a, b = shear(), ROTATION
    defect = {}
    for N in (12, 16):
        g = bumpy(N)
        defect[N] = abs(number(g, a.compose(b)) - number(g, a) - number(g, b))
        assert abs(number(g, a.compose(b)) - delta_phi(P1, a.compose(b), g, use_generator=False)) < 1e-8
    assert np.log(defect[12] / defect[16]) / np.log(16 / 12) > 3.3


def test_unorientable_glue_needs_double_cover():
    g = bumpy(8)
    with pytest.raises(MappingTorusError, match="double_cover"):
        pontryagin_number(P1, build_mapping_torus(g, REFLECTION, nt=17))
    with pytest.raises(MappingTorusError):
        double_cover(ROTATION, g)


def test_reflection_half_double_cover():
    g = bumpy(12)
    d = delta_phi(P1, REFLECTION, g, use_generator=False)
    cover = pontryagin_number(P1, double_cover(REFLECTION, g, nt=17, use_generator=False))
    assert abs(d) < 1e-15
    assert abs(d - 0.5 * cover) < 1e-15


def test_characteristic_integral_degree():
    g = bumpy(6)
    mt = build_mapping_torus(g, ROTATION, nt=17)
    with pytest.raises(PolynomialError):
        characteristic_integral(pontryagin(2), mt.interpolant)
