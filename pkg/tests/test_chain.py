import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from xychain.chain import (
    ChainParams,
    RegionTag,
    Sector,
    canonicalize,
    classify_region,
    ptl_degeneracy_angle,
)
from xychain.errors import DomainError, OddLengthNegativeCoupling


def test_params_validation():
    with pytest.raises(DomainError):
        ChainParams(1, 0.5, 0.5)
    with pytest.raises(DomainError):
        ChainParams(4, math.nan, 0.5)
    assert ChainParams(4, 0.5, 0.5).with_length(9).L == 9


def test_sector_parse_and_labels():
    assert Sector.parse("ns") is Sector.NS
    assert Sector.parse("-1") is Sector.R
    assert Sector.NS.n_l == 1 and Sector.R.n_l == -1
    assert Sector.NS.other is Sector.R
    with pytest.raises(ValueError):
        Sector.parse("x")


@pytest.mark.parametrize(
    "gamma,h,tag",
    [
        (0.3, 0.5, RegionTag.Sigma1Minus),
        (1.3, 0.5, RegionTag.Sigma2Minus),
        (0.7, 1.1, RegionTag.SigmaPlus),
        (0.6, 0.8, RegionTag.LinePTL),
        (0.5, 1.0, RegionTag.LineCLMinus),
        (1.5, 1.0, RegionTag.LineCLPlus),
        (0.0, 0.3, RegionTag.LineXXMinus),
        (0.0, 1.3, RegionTag.LineXXPlus),
        (0.3, 0.0, RegionTag.LineTRSMinus),
        (1.2, 0.0, RegionTag.LineTRSPlus),
        (0.0, 0.5, RegionTag.PointXX),
        (1.0, 0.5, RegionTag.LineIsing),
        (1.0, 1.0, RegionTag.PointCI),
    ],
)
def test_classify_region(gamma, h, tag):
    assert classify_region(gamma, h) == tag


def test_region_memberships_and_precedence():
    # (0, 1) sits on the XX point, the PTL circle, the critical line and the XX line.
    label = classify_region(0.0, 1.0)
    assert label.tag is RegionTag.PointXX
    assert label.multiple
    assert RegionTag.LinePTL in label.memberships
    assert classify_region(1.0, 0.0).tag is RegionTag.LinePTL


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_region_symmetric_in_signs(gamma, h):
    assert classify_region(gamma, h) == classify_region(-gamma, -h)


def test_canonicalize():
    p = canonicalize(ChainParams(6, -0.4, -0.7, -1.0))
    assert (p.gamma, p.h, p.J) == (0.4, 0.7, 1.0)
    with pytest.raises(OddLengthNegativeCoupling):
        canonicalize(ChainParams(5, 0.4, 0.7, -1.0))


def test_ptl_angle():
    assert ptl_degeneracy_angle(0.0) == 0.0
    assert ptl_degeneracy_angle(1.0) == pytest.approx(math.pi / 4)
    chi = ptl_degeneracy_angle(0.6)
    assert math.cos(2 * chi) ** 2 == pytest.approx(0.4 / 1.6)
    with pytest.raises(DomainError):
        ptl_degeneracy_angle(1.5)
