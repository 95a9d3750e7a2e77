import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special, stats

from laseruav.errors import ValidationError
from laseruav.link import LinkParams, comm_energy, marcum_q1, max_comm_distance, outage_probability

LP = LinkParams()
D_STAR = 501.48359901274944  # noncentral chi-square + brentq oracle


def q1_quadrature(a, b):
    """Q1(a, b) as the integral of the Rice density beyond b."""
    f = lambda x: x * math.exp(-(x - a) ** 2 / 2) * special.i0e(a * x)
    val, _ = integrate.quad(f, b, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400)
    return val


@pytest.mark.parametrize("a, b", [(0.5, 0.3), (2.0, 5.0), (6.3, 6.3), (9.0, 1.0), (0.1, 8.0)])
def test_marcum_against_quadrature(a, b):
    assert marcum_q1(a, b) == pytest.approx(q1_quadrature(a, b), abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(a=st.floats(0.0, 30.0), b=st.floats(1e-3, 30.0))
def test_marcum_against_chi_square(a, b):
    assert marcum_q1(a, b) == pytest.approx(stats.ncx2.sf(b * b, 2, a * a), abs=1e-12)


def test_marcum_edges():
    assert marcum_q1(3.0, 0.0) == 1.0
    assert marcum_q1(0.0, 2.0) == pytest.approx(math.exp(-2.0))
    with pytest.raises(ValueError):
        marcum_q1(-1.0, 1.0)


def test_rayleigh_outage_closed_form():
    lp = LinkParams(k_factor=0.0)
    for d in (50.0, 200.0, 700.0):
        snr_ratio = lp.gamma_th * lp.n0 * d ** lp.beta / lp.p_u
        assert outage_probability(d, lp) == pytest.approx(1 - math.exp(-snr_ratio), abs=1e-12)


def test_max_comm_distance_default():
    d = max_comm_distance(LP)
    assert d == pytest.approx(D_STAR, abs=2e-4)
    assert outage_probability(d, LP) == pytest.approx(LP.epsilon, abs=1e-7)


def test_range_shrinks_with_stricter_outage():
    ds = [max_comm_distance(LinkParams(epsilon=e)) for e in (0.05, 0.01, 0.001)]
    assert ds[0] > ds[1] > ds[2]


@given(st.floats(1.0, 3000.0), st.floats(1.0, 3000.0))
def test_outage_monotone_in_distance(d1, d2):
    lo, hi = sorted((d1, d2))
    assert outage_probability(lo, LP) <= outage_probability(hi, LP) + 1e-15


def test_comm_energy():
    assert comm_energy(5.0, 100.0) == 500.0
    with pytest.raises(ValueError):
        comm_energy(5.0, -1.0)


def test_validation_collects_fields():
    with pytest.raises(ValidationError) as exc:
        LinkParams(p_u=0.0, epsilon=2.0)
    assert len(exc.value.problems) == 2
