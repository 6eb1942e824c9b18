"""Chain parameters, fermionic sectors and the (gamma, h) region taxonomy.

The XY chain with periodic boundaries is

    H = -J sum_l [(1+gamma)/4 sx_l sx_{l+1} + (1-gamma)/4 sy_l sy_{l+1}] - h/2 sum_l sz_l

and everything downstream is evaluated at a :class:`ChainParams` point.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

from .errors import DomainError, OddLengthNegativeCoupling


@dataclass(frozen=True)
class ChainParams:
    """A point (L, J, gamma, h) of the XY chain."""

    L: int
    gamma: float
    h: float
    J: float = 1.0

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 2:
            raise DomainError(f"chain length must be an integer >= 2, got {self.L!r}")
        for name in ("gamma", "h", "J"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        object.__setattr__(self, "L", int(self.L))

    def with_length(self, L: int) -> "ChainParams":
        return replace(self, L=L)


class Sector(enum.Enum):
    """Fermionic boundary sector: NS is antiperiodic (n_l=+1), R is periodic (n_l=-1)."""

    NS = "NS"
    R = "R"

    @property
    def n_l(self) -> int:
        return 1 if self is Sector.NS else -1

    @property
    def other(self) -> "Sector":
        return Sector.R if self is Sector.NS else Sector.NS

    @classmethod
    def parse(cls, value) -> "Sector":
        if isinstance(value, Sector):
            return value
        text = str(value).strip().upper()
        if text in ("NS", "+1", "1"):
            return cls.NS
        if text in ("R", "-1"):
            return cls.R
        raise ValueError(f"unknown sector {value!r}")


class RegionTag(enum.Enum):
    Sigma1Minus = "Sigma1Minus"
    Sigma2Minus = "Sigma2Minus"
    SigmaPlus = "SigmaPlus"
    LinePTL = "LinePTL"
    LineCLMinus = "LineCLMinus"
    LineCLPlus = "LineCLPlus"
    LineTRSMinus = "LineTRSMinus"
    LineTRSPlus = "LineTRSPlus"
    LineXXMinus = "LineXXMinus"
    LineXXPlus = "LineXXPlus"
    PointXX = "PointXX"
    LineIsing = "LineIsing"
    PointCI = "PointCI"


AREAS = (RegionTag.Sigma1Minus, RegionTag.Sigma2Minus, RegionTag.SigmaPlus)


@dataclass(frozen=True)
class RegionLabel:
    """Region of a (gamma, h) point.

    ``memberships`` lists every point/line set the point lies on, in
    precedence order; ``tag`` is the first of them, or the area when empty.
    """

    tag: RegionTag
    memberships: tuple = field(default=())

    @property
    def multiple(self) -> bool:
        return len(self.memberships) > 1

    def __eq__(self, other):
        if isinstance(other, RegionTag):
            return self.tag is other
        if isinstance(other, str):
            return self.tag.value == other
        if isinstance(other, RegionLabel):
            return self.tag is other.tag and self.memberships == other.memberships
        return NotImplemented

    def __hash__(self):
        return hash((self.tag, self.memberships))


def classify_region(gamma: float, h: float, tol: float = 1e-9) -> RegionLabel:
    """Classify a point of the (gamma, h) plane.

    Precedence is PointCI > PointXX > lines > areas. Among lines the order is
    PTL, CL, XX, TRS, Ising. A point is on a set when its distance to the set
    is below ``tol``.
    """
    g, a = abs(gamma), abs(h)
    on = []
    if math.hypot(g - 1.0, a - 1.0) < tol:
        on.append(RegionTag.PointCI)
    if g < tol and abs(a - round(2 * a) / 2) < tol:
        on.append(RegionTag.PointXX)
    if abs(math.hypot(g, a) - 1.0) < tol:
        on.append(RegionTag.LinePTL)
    if abs(a - 1.0) < tol and abs(g - 1.0) >= tol:
        on.append(RegionTag.LineCLMinus if g < 1.0 else RegionTag.LineCLPlus)
    if g < tol:
        on.append(RegionTag.LineXXMinus if a <= 1.0 else RegionTag.LineXXPlus)
    if a < tol and g >= tol and abs(g - 1.0) >= tol:
        on.append(RegionTag.LineTRSMinus if g < 1.0 else RegionTag.LineTRSPlus)
    if abs(g - 1.0) < tol and abs(a - 1.0) >= tol:
        on.append(RegionTag.LineIsing)
    if on:
        return RegionLabel(on[0], tuple(on))
    if g * g + a * a < 1.0:
        return RegionLabel(RegionTag.Sigma1Minus)
    if a < 1.0:
        return RegionLabel(RegionTag.Sigma2Minus)
    return RegionLabel(RegionTag.SigmaPlus)


def canonicalize(params: ChainParams) -> ChainParams:
    """Map a point to gamma >= 0, h >= 0, J >= 0 using the chain's spectral symmetries.

    The sign of J can only be absorbed for even L (staggered rotation of odd sites).
    """
    if params.J < 0 and params.L % 2 == 1:
        raise OddLengthNegativeCoupling(
            f"J={params.J} < 0 cannot be absorbed for odd L={params.L}"
        )
    return replace(params, gamma=abs(params.gamma), h=abs(params.h), J=abs(params.J))


def ptl_degeneracy_angle(gamma: float) -> float:
    """Angle chi in [0, pi/4] of the degenerate product states on gamma^2 + h^2 = 1.

    Satisfies cos^2(2 chi) = (1 - gamma) / (1 + gamma).
    """
    if not (0.0 <= gamma <= 1.0):
        raise DomainError(f"gamma must lie in [0, 1], got {gamma}")
    return 0.5 * math.acos(math.sqrt((1.0 - gamma) / (1.0 + gamma)))
