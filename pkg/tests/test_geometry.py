import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from xychain.chain import ChainParams, Sector
from xychain.errors import DegenerateMetric, DomainError, SingularPoint, StencilCrossesSingularLine
from xychain.geometry import (
    _brioschi,
    _r_paper,
    berry_phase_thermo,
    curvature,
    fidelity_susceptibility,
    metric_derivatives,
    qgt_components,
    ricci_difference,
    ricci_field,
    ricci_scalar,
    ricci_thermo,
)

# Hessian metric of x^3/6 + x e^y + y^4/12 at (x, y) = (1, 0.3), u = x and v = y,
# ordered (E, F, G, E_u, F_u, G_u, E_v, F_v, G_v); second derivatives all vanish.
HESSIAN_PARTS = [1.0, 1.3498588075760032, 1.4398588075760033, 1.0, 0.0,
                 1.3498588075760032, 0.0, 1.3498588075760032, 1.9498588075760033]
# Unit sphere E = 1, F = 0, G = sin^2 u at u = 0.7; G_uu = 2 cos(1.4).
SPHERE_PARTS = [1.0, 0.0, 0.41501642854987947, 0.0, 0.0, 0.9854497299884603, 0.0, 0.0, 0.0]
SPHERE_SECOND = (0.0, 0.33993428580048224, 0.0)


def test_brioschi_on_sphere():
    assert _brioschi(SPHERE_PARTS, *SPHERE_SECOND) == pytest.approx(2.0)


def test_determinant_expression_matches_brioschi_for_hessian_metrics():
    assert _r_paper(HESSIAN_PARTS) == pytest.approx(_brioschi(HESSIAN_PARTS, 0.0, 0.0, 0.0))


@pytest.mark.parametrize(
    "gamma,h,L,sector,e,f,g",
    [
        # 60-digit mpmath sums of the Bogoliubov-angle derivatives.
        (0.3, 0.5, 8, Sector.NS, 4.912318753503476, -1.7419859851532375, 1.5590936821972372),
        (0.7, 1.3, 9, Sector.R, 0.5191950470963315, -0.4904101326955275, 0.5548228864293155),
    ],
)
def test_metric_against_high_precision_oracle(gamma, h, L, sector, e, f, g):
    q = qgt_components(ChainParams(L, gamma, h), sector)
    assert (q.q_hh, q.q_hg, q.q_gg) == pytest.approx((e, f, g), rel=1e-12)
    assert q.omega_hg == 0.0
    qm = qgt_components(ChainParams(L, gamma, h), sector, dps=40)
    assert qm.q_hh == pytest.approx(e, rel=1e-14)


@pytest.mark.parametrize("gamma,h", [(0.5, 0.3), (1.3, 0.6)])
def test_metric_density_thermodynamic_limit(gamma, h):
    # Symbolic integral of the angle derivatives: g_hh / L -> 1 / (8 |gamma| (1 - h^2)) for |h| < 1.
    q = qgt_components(ChainParams(4000, gamma, h), Sector.R)
    assert q.q_hh / 4000 == pytest.approx(1 / (8 * gamma * (1 - h * h)), rel=1e-3)


def test_fidelity_susceptibility():
    q = qgt_components(ChainParams(8, 0.3, 0.5), Sector.NS)
    assert fidelity_susceptibility(q, (1.0, 0.0)) == pytest.approx(q.q_hh)
    assert fidelity_susceptibility(q, (1.0, 1.0)) == pytest.approx(q.q_hh + q.q_gg + 2 * q.q_hg)
    with pytest.raises(ValueError):
        fidelity_susceptibility(q, (0.0, 0.0))


def test_singular_point():
    with pytest.raises(SingularPoint) as exc:
        qgt_components(ChainParams(4, 0.5, 1.0), Sector.R)
    assert exc.value.k == 4


def test_degenerate_metric_on_xx_line():
    with pytest.raises(DegenerateMetric):
        ricci_scalar(ChainParams(16, 0.0, 0.5), Sector.R)


def test_fd_stencil_crossing():
    with pytest.raises(StencilCrossesSingularLine) as exc:
        metric_derivatives(ChainParams(4, 0.5, 1.0 + 5e-6), Sector.R, scheme="finite-difference")
    assert exc.value.k == 4
    # The NS sector has no mode at phi = 0, so the same stencil is fine there.
    metric_derivatives(ChainParams(4, 0.5, 1.0 + 5e-6), Sector.NS, scheme="finite-difference")


@settings(max_examples=60, deadline=None)
@given(st.integers(4, 40), st.floats(0.05, 1.8), st.floats(-1.8, 1.8), st.sampled_from(list(Sector)))
def test_analytic_derivatives_match_finite_differences(L, gamma, h, sector):
    assume(abs(abs(h) - 1) > 0.05)
    p = ChainParams(L, gamma, h)
    a = metric_derivatives(p, sector).as_array()
    fd = metric_derivatives(p, sector, scheme="finite-difference").as_array()
    scale = np.abs(a).max()
    assert np.max(np.abs(a - fd)) <= 1e-6 * scale


@settings(max_examples=100, deadline=None)
@given(st.integers(4, 60), st.floats(-2, 2), st.floats(-2, 2), st.sampled_from(list(Sector)))
def test_metric_positive_semidefinite(L, gamma, h, sector):
    try:
        q = qgt_components(ChainParams(L, gamma, h), sector)
    except SingularPoint:
        return
    assert q.q_hh >= 0 and q.q_gg >= 0
    assert q.q_hg**2 <= q.q_hh * q.q_gg * (1 + 1e-12) + 1e-300


@settings(max_examples=60, deadline=None)
@given(st.integers(4, 40), st.floats(0.05, 1.8), st.floats(0.05, 1.8))
def test_mirror_symmetries(L, gamma, h):
    assume(abs(h - 1) > 0.05)
    p = ChainParams(L, gamma, h)
    # h -> -h swaps NS and R for odd L.
    mirror_sector = {Sector.R: Sector.R if L % 2 == 0 else Sector.NS}
    q = qgt_components(p, Sector.R)
    for g2, h2, sec in ((-gamma, h, Sector.R), (gamma, -h, mirror_sector[Sector.R])):
        m = qgt_components(ChainParams(L, g2, h2), sec)
        assert m.q_hh == pytest.approx(q.q_hh, rel=1e-9)
        assert m.q_gg == pytest.approx(q.q_gg, rel=1e-9)
        # The off-diagonal component is odd: it transforms as a tensor under the flip.
        assert m.q_hg == pytest.approx(-q.q_hg, rel=1e-9, abs=1e-12 * q.q_hh)
        try:
            r = curvature(p, Sector.R)
        except DegenerateMetric:
            # A single mode pair gives a rank-one metric; the mirror must agree.
            with pytest.raises(DegenerateMetric):
                curvature(ChainParams(L, g2, h2), sec)
            continue
        assert curvature(ChainParams(L, g2, h2), sec) == pytest.approx(r, rel=1e-6, abs=1e-9)


@pytest.mark.parametrize(
    "gamma,h,L,sector,dps,value",
    [
        # Determinant expression from 60-digit mpmath sums.
        (0.5, 1.3, 16, Sector.R, None, -6.875966290875252),
        (0.7, 1.1, 32, Sector.NS, None, -0.3409657480093194),
        (0.3, 0.5, 20, Sector.NS, 50, 0.007196946396444671),
        (0.3, 0.5, 20, Sector.R, 50, 0.1398977146785872),
    ],
)
def test_r_paper_against_oracle(gamma, h, L, sector, dps, value):
    r = ricci_scalar(ChainParams(L, gamma, h), sector, dps=dps)
    assert r.r_paper == pytest.approx(value, rel=1e-8)
    assert curvature(ChainParams(L, gamma, h), sector, "determinant", dps) == pytest.approx(value, rel=1e-8)


@pytest.mark.parametrize(
    "gamma,h,L,value",
    [
        # Brioschi formula with Richardson-extrapolated differences, independent implementation.
        (1.0, 0.5, 400, -16.0),
        (0.5, 1.3, 400, 18.7267809678),
        (0.3, 0.5, 64, -34.666596),
    ],
)
def test_r_christoffel_against_oracle(gamma, h, L, value):
    r = ricci_scalar(ChainParams(L, gamma, h), Sector.R)
    assert not r.singular
    assert r.r_christoffel * L == pytest.approx(value, rel=1e-5)
    assert r.gaussian_curvature == pytest.approx(r.r_christoffel / 2)


def test_christoffel_is_twice_thermodynamic_closed_form():
    # The closed form normalizes the metric half as large as the angle sums here.
    for gamma, h in ((1.0, 0.5), (0.5, 1.3)):
        r = ricci_scalar(ChainParams(800, gamma, h), Sector.R).r_christoffel
        assert r == pytest.approx(2 * ricci_thermo(gamma, h, 800), rel=2e-3)


def test_christoffel_near_guarded_line_is_singular():
    r = ricci_scalar(ChainParams(16, 1e-3, 0.5), Sector.R)
    assert r.singular and math.isnan(r.r_christoffel)
    with pytest.raises(StencilCrossesSingularLine):
        curvature(ChainParams(16, 1e-3, 0.5), Sector.R, "christoffel")


def test_ricci_difference():
    p = ChainParams(24, 0.6, 1.2)
    want = (ricci_scalar(p, Sector.R).r_christoffel - ricci_scalar(p, Sector.NS).r_christoffel)
    assert ricci_difference(p) == pytest.approx(want)
    assert ricci_difference(p, "determinant") == pytest.approx(
        curvature(p, Sector.R) - curvature(p, Sector.NS))


@pytest.mark.parametrize("method", ["determinant", "christoffel"])
def test_ricci_field_matches_pointwise(method):
    g = np.array([0.3, 0.7, 1.2, 0.0])
    h = np.array([0.5, 1.3, 0.4, 0.5])
    vals, sing = ricci_field(g, h, 12, Sector.NS, method)
    assert list(sing) == [False, False, False, True]
    _, sing_r = ricci_field(0.5, 1.0, 12, Sector.R, method)
    assert sing_r
    for i in range(3):
        want = ricci_scalar(ChainParams(12, g[i], h[i]), Sector.NS).value(method)
        assert vals[i] == pytest.approx(want, rel=1e-7)


def test_thermodynamic_closed_forms():
    assert ricci_thermo(1.0, 0.5, 10) == pytest.approx(-0.8)
    assert ricci_thermo(0.5, 1.3, 1) == pytest.approx(4 * (1.3 + math.sqrt(0.94)) / math.sqrt(0.94))
    with pytest.raises(DomainError):
        ricci_thermo(0.5, 1.0, 10)
    with pytest.raises(DomainError):
        ricci_thermo(0.0, 0.5, 10)
    assert berry_phase_thermo(0.5, 0.0) == pytest.approx(-math.pi)
    assert berry_phase_thermo(0.5, 1.2) == 0.0


def test_hand_evaluated_metric():
    # gamma = 1, h = 0: all mode energies are 1, so g_hh = sum(sin^2 phi) / 4.
    q = qgt_components(ChainParams(4, 1.0, 0.0), Sector.R)
    assert q.q_hh == pytest.approx(0.5)
    q = qgt_components(ChainParams(8, 0.0, 0.5), Sector.NS)
    assert q.q_hh == 0 and q.q_hg == 0


def test_analytic_derivatives_at_reference_point_and_step_halving():
    p = ChainParams(10, 0.3, 0.5)
    ana = metric_derivatives(p, Sector.NS).as_array()
    fd = metric_derivatives(p, Sector.NS, "finite-difference").as_array()
    assert np.max(np.abs(ana - fd)) / np.max(np.abs(ana)) < 1e-6

    def central(d):
        a = qgt_components(ChainParams(10, 0.3, 0.5 + d), Sector.NS).q_hh
        b = qgt_components(ChainParams(10, 0.3, 0.5 - d), Sector.NS).q_hh
        return (a - b) / (2 * d)

    e1, e2 = abs(central(2e-3) - ana[0]), abs(central(1e-3) - ana[0])
    assert e1 / e2 == pytest.approx(4.0, rel=0.02)


def test_metric_derivative_odd_in_field():
    plus = metric_derivatives(ChainParams(12, 0.4, 0.3), Sector.NS)
    minus = metric_derivatives(ChainParams(12, 0.4, -0.3), Sector.NS)
    assert plus.dhh_dh == pytest.approx(-minus.dhh_dh)
    assert metric_derivatives(ChainParams(12, 0.0, 0.5), Sector.NS).dhh_dh == 0
