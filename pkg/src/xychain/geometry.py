"""Quantum geometric tensor, metric derivatives and Ricci scalar of a sector ground state.

With theta_k the Bogoliubov angles, the metric on (h, gamma) is

    g_hh = 1/4 sum_k a_k^2,  g_hg = 1/4 sum_k a_k b_k,  g_gg = 1/4 sum_k b_k^2

where a_k = d theta_k / dh = -gamma S/D, b_k = d theta_k / d gamma = S c/D,
S = J sin phi_k, c = h - J cos phi_k and D = c^2 + gamma^2 S^2.

Two curvatures are provided. ``r_paper`` is the first-derivative determinant
expression

    R = -det[[E, F, G], [E_h, F_h, G_h], [E_g, F_g, G_g]] / (2 (EG - F^2)^2)

(E = g_hh, F = g_hg, G = g_gg). ``r_christoffel`` is twice the Gaussian
curvature from the Brioschi formula, which also needs second derivatives.
For metrics that are Hessians of a potential the two agree; the sector metric
is not of that form and the two differ substantially (see the test-suite).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .chain import ChainParams, Sector
from .errors import DegenerateMetric, DomainError, SingularPoint, StencilCrossesSingularLine
from .fermions import GAPLESS_EPS, mode_phases

DET_THRESHOLD = 1e-30
DET_RELATIVE = 1e-12
FD_STEP_FIRST = 1e-5
FD_STEP_SECOND = 1e-3
LINE_GUARD = 10.0

# Index of each sum in the tuple returned by the ``_parts`` helpers.
E, F, G, EH, FH, GH, EG, FG, GG = range(9)


def _parts(gamma, h, phi, J=1.0):
    """Metric sums and their analytic first derivatives.

    ``gamma`` and ``h`` broadcast against ``phi`` along leading axes; the mode
    axis is last. Returns (stack of the 9 sums, gapless mask, index of the
    first gapless mode or -1).
    """
    gamma = np.asarray(gamma, dtype=float)[..., None]
    h = np.asarray(h, dtype=float)[..., None]
    S = J * np.sin(phi)
    c = h - J * np.cos(phi)
    D = c * c + gamma * gamma * S * S
    gapless = D < GAPLESS_EPS**2
    D = np.where(gapless, 1.0, D)
    a = -gamma * S / D
    b = S * c / D
    D2 = D * D
    ah = 2.0 * gamma * S * c / D2
    ag = -S / D + 2.0 * gamma * gamma * S**3 / D2
    bh = S / D - 2.0 * S * c * c / D2
    bg = -2.0 * gamma * S**3 * c / D2
    sums = np.stack(
        [
            0.25 * np.sum(a * a, axis=-1),
            0.25 * np.sum(a * b, axis=-1),
            0.25 * np.sum(b * b, axis=-1),
            0.5 * np.sum(a * ah, axis=-1),
            0.25 * np.sum(ah * b + a * bh, axis=-1),
            0.5 * np.sum(b * bh, axis=-1),
            0.5 * np.sum(a * ag, axis=-1),
            0.25 * np.sum(ag * b + a * bg, axis=-1),
            0.5 * np.sum(b * bg, axis=-1),
        ]
    )
    any_gapless = np.any(gapless, axis=-1)
    first = np.where(any_gapless, np.argmax(gapless, axis=-1), -1)
    return sums, any_gapless, first


def _parts_mp(gamma, h, L, sector, J=1.0):
    """Same sums as :func:`_parts` for one point, in mpmath at the working precision."""
    n_l = Sector.parse(sector).n_l
    g, hh, JJ = mpmath.mpf(gamma), mpmath.mpf(h), mpmath.mpf(J)
    acc = [[] for _ in range(9)]
    eps2 = mpmath.mpf(GAPLESS_EPS) ** 2
    for k in range(1, L + 1):
        phi = 2 * mpmath.pi * k / L - mpmath.pi * (n_l + 1) / (2 * L)
        S = JJ * mpmath.sin(phi)
        c = hh - JJ * mpmath.cos(phi)
        D = c * c + g * g * S * S
        if D < eps2:
            raise SingularPoint(k)
        a, b = -g * S / D, S * c / D
        D2 = D * D
        ah = 2 * g * S * c / D2
        ag = -S / D + 2 * g * g * S**3 / D2
        bh = S / D - 2 * S * c * c / D2
        bg = -2 * g * S**3 * c / D2
        for i, t in enumerate(
            (a * a / 4, a * b / 4, b * b / 4, a * ah / 2, (ah * b + a * bh) / 4,
             b * bh / 2, a * ag / 2, (ag * b + a * bg) / 4, b * bg / 2)
        ):
            acc[i].append(t)
    return [mpmath.fsum(t) for t in acc]


def _point_parts(params: ChainParams, sector, dps=None):
    if dps is not None:
        with mpmath.workdps(dps):
            return _parts_mp(params.gamma, params.h, params.L, sector, params.J)
    sums, gapless, first = _parts(params.gamma, params.h, mode_phases(params.L, sector), params.J)
    if gapless:
        raise SingularPoint(int(first) + 1)
    return [float(x) for x in sums]


@dataclass(frozen=True)
class QgtPoint:
    """Metric components at a point. ``omega_hg`` is identically zero for real angles."""

    params: ChainParams
    sector: Sector
    q_hh: float
    q_gg: float
    q_hg: float
    omega_hg: float = 0.0

    @property
    def metric(self) -> np.ndarray:
        return np.array([[self.q_hh, self.q_hg], [self.q_hg, self.q_gg]])

    @property
    def det(self) -> float:
        return self.q_hh * self.q_gg - self.q_hg**2


def qgt_components(params: ChainParams, sector, dps: int | None = None) -> QgtPoint:
    """Metric components of the sector ground state at ``params``.

    Raises
    ------
    SingularPoint
        When a mode is gapless; ``k`` is carried on the exception.
    """
    sector = Sector.parse(sector)
    p = _point_parts(params, sector, dps)
    if dps is not None:
        p = [float(x) for x in p]
    return QgtPoint(params, sector, p[E], p[G], p[F], 0.0)


def fidelity_susceptibility(point: QgtPoint, v) -> float:
    """chi = sum g_{mu nu} v_mu v_nu with v = (v_h, v_gamma)."""
    v = np.asarray(v, dtype=float)
    if v.shape != (2,) or not np.any(v):
        raise ValueError("direction must be a nonzero 2-vector (v_h, v_gamma)")
    return float(v @ point.metric @ v)


@dataclass(frozen=True)
class MetricDerivs:
    dhh_dh: float
    dhh_dg: float
    dgg_dh: float
    dgg_dg: float
    dhg_dh: float
    dhg_dg: float
    method: str

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.dhh_dh, self.dhh_dg, self.dgg_dh, self.dgg_dg, self.dhg_dh, self.dhg_dg]
        )


def _scale(params):
    return max(1.0, abs(params.gamma), abs(params.h))


def metric_derivatives(params: ChainParams, sector, scheme: str = "analytic") -> MetricDerivs:
    """First derivatives of the metric components.

    Parameters
    ----------
    scheme : {"analytic", "finite-difference"}
        ``finite-difference`` uses central differences of :func:`qgt_components`
        with step 1e-5 * max(1, |gamma|, |h|).
    """
    sector = Sector.parse(sector)
    if scheme == "analytic":
        p = _point_parts(params, sector)
        return MetricDerivs(p[EH], p[EG], p[GH], p[GG], p[FH], p[FG], "analytic")
    if scheme != "finite-difference":
        raise ValueError(f"unknown scheme {scheme!r}")
    _point_parts(params, sector)
    d = FD_STEP_FIRST * _scale(params)
    out = {}
    for name, dg, dh in (("h", 0.0, d), ("g", d, 0.0)):
        k = _stencil_crossing(params, sector, dg, dh)
        if k is not None:
            raise StencilCrossesSingularLine(k)
        vals = []
        for sgn in (1, -1):
            q = ChainParams(params.L, params.gamma + sgn * dg, params.h + sgn * dh, params.J)
            try:
                vals.append(qgt_components(q, sector))
            except SingularPoint as exc:
                raise StencilCrossesSingularLine(exc.k) from exc
        plus, minus = vals
        out[name] = (
            (plus.q_hh - minus.q_hh) / (2 * d),
            (plus.q_gg - minus.q_gg) / (2 * d),
            (plus.q_hg - minus.q_hg) / (2 * d),
        )
    return MetricDerivs(
        out["h"][0], out["g"][0], out["h"][1], out["g"][1], out["h"][2], out["g"][2],
        "finite-difference",
    )


def _degenerate(p):
    """det g under the absolute floor, or within rounding of zero relative to E G."""
    det = p[E] * p[G] - p[F] ** 2
    return (det < DET_THRESHOLD) | (det < DET_RELATIVE * p[E] * p[G])


def _stencil_crossing(params, sector, dg, dh):
    """First mode (1-based) whose energy vanishes between the two stencil points, else None."""
    phi = mode_phases(params.L, sector)
    S = params.J * np.sin(phi)
    c = params.h - params.J * np.cos(phi)
    cm, cp = c - dh, c + dh
    ym, yp = (params.gamma - dg) * S, (params.gamma + dg) * S
    # Each component is linear along the segment; a zero of both needs a shared root.
    hit = (
        ((np.abs(ym) < GAPLESS_EPS) & (np.abs(yp) < GAPLESS_EPS) & (cm * cp <= 0))
        | ((np.abs(cm) < GAPLESS_EPS) & (np.abs(cp) < GAPLESS_EPS) & (ym * yp <= 0))
    )
    idx = np.flatnonzero(hit)
    return int(idx[0]) + 1 if idx.size else None


def _r_paper(p):
    """Determinant expression from the metric sums (works for floats, arrays and mpf)."""
    e, f, g = p[E], p[F], p[G]
    eh, fh, gh, eg, fg, gg = p[EH], p[FH], p[GH], p[EG], p[FG], p[GG]
    det3 = e * (fh * gg - gh * fg) - f * (eh * gg - gh * eg) + g * (eh * fg - fh * eg)
    w = e * g - f * f
    return -det3 / (2 * w * w)


def _brioschi(p, evv, guu, fuv):
    """Twice the Gaussian curvature, u = h and v = gamma."""
    e, f, g = p[E], p[F], p[G]
    eu, fu, gu, ev, fv, gv = p[EH], p[FH], p[GH], p[EG], p[FG], p[GG]
    a11 = -0.5 * evv + fuv - 0.5 * guu
    a12, a13 = 0.5 * eu, fu - 0.5 * ev
    a21 = fv - 0.5 * gu
    a31 = 0.5 * gv
    det_a = (
        a11 * (e * g - f * f)
        - a12 * (a21 * g - f * a31)
        + a13 * (a21 * f - e * a31)
    )
    b12, b13 = 0.5 * ev, 0.5 * gu
    det_b = -b12 * (b12 * g - f * b13) + b13 * (b12 * f - e * b13)
    w = e * g - f * f
    return 2 * (det_a - det_b) / (w * w)


def _second_derivs(parts_at, gamma, h, d):
    """Richardson-extrapolated central differences of the analytic first derivatives.

    Returns (E_gg, G_hh, F_hg).
    """

    def central(step):
        ph, mh = parts_at(gamma, h + step), parts_at(gamma, h - step)
        pg, mg = parts_at(gamma + step, h), parts_at(gamma - step, h)
        evv = (pg[EG] - mg[EG]) / (2 * step)
        guu = (ph[GH] - mh[GH]) / (2 * step)
        fuv = 0.5 * ((pg[FH] - mg[FH]) / (2 * step) + (ph[FG] - mh[FG]) / (2 * step))
        return evv, guu, fuv

    coarse, fine = central(d), central(d / 2)
    return tuple((4 * f - c) / 3 for c, f in zip(coarse, fine))


def _near_guarded_line(gamma, h, d):
    band = LINE_GUARD * d
    return np.minimum(np.abs(gamma), np.abs(np.abs(h) - 1.0)) < band + d


@dataclass(frozen=True)
class RicciResult:
    """Both curvature evaluations at a point.

    ``singular`` is set when the second-derivative stencil is unusable; in
    that case ``r_christoffel`` is NaN while ``r_paper`` is still reported.
    """

    r_paper: float
    r_christoffel: float
    discrepancy: float
    singular: bool

    @property
    def gaussian_curvature(self) -> float:
        return 0.5 * self.r_christoffel

    def value(self, method: str) -> float:
        if method == "determinant":
            return self.r_paper
        if method == "christoffel":
            return self.r_christoffel
        raise ValueError(f"unknown curvature method {method!r}")


def ricci_scalar(params: ChainParams, sector, dps: int | None = None) -> RicciResult:
    """Ricci scalar of the sector ground-state metric by both methods.

    Parameters
    ----------
    dps : int, optional
        Evaluate in mpmath at this precision. In the disk gamma^2 + h^2 < 1
        the determinant expression is exponentially small in L and needs it.

    Raises
    ------
    SingularPoint
        A mode is gapless at the point itself.
    DegenerateMetric
        det g < 1e-30 (for example on gamma = 0), or det g < 1e-12 E G, where
        it is rounding noise (a single mode pair gives a rank-one metric).
    """
    sector = Sector.parse(sector)
    p = _point_parts(params, sector, dps)
    if _degenerate(p):
        raise DegenerateMetric(f"det g below {DET_THRESHOLD:g} or at rounding level at {params}")
    d = FD_STEP_SECOND * _scale(params)
    singular = bool(_near_guarded_line(params.gamma, params.h, d))

    def parts_at(g, h):
        try:
            return _point_parts(ChainParams(params.L, g, h, params.J), sector, dps)
        except SingularPoint as exc:
            raise StencilCrossesSingularLine(exc.k) from exc

    if dps is None:
        r_paper = float(_r_paper(p))
        r_chr = math.nan
        if not singular:
            try:
                r_chr = float(_brioschi(p, *_second_derivs(parts_at, params.gamma, params.h, d)))
            except StencilCrossesSingularLine:
                singular = True
    else:
        with mpmath.workdps(dps):
            r_paper = float(_r_paper(p))
            r_chr = math.nan
            if not singular:
                try:
                    second = _second_derivs(parts_at, mpmath.mpf(params.gamma), mpmath.mpf(params.h), mpmath.mpf(d))
                    r_chr = float(_brioschi(p, *second))
                except StencilCrossesSingularLine:
                    singular = True
    discrepancy = abs(r_paper - r_chr) if not singular else math.nan
    return RicciResult(r_paper, r_chr, discrepancy, singular)


def curvature(params: ChainParams, sector, method: str = "determinant", dps: int | None = None) -> float:
    """One curvature value; skips the second-derivative stencil for ``method="determinant"``."""
    if method == "christoffel":
        r = ricci_scalar(params, sector, dps).r_christoffel
        if math.isnan(r):
            raise StencilCrossesSingularLine(-1, f"curvature stencil is singular at {params}")
        return r
    if method != "determinant":
        raise ValueError(f"unknown curvature method {method!r}")
    p = _point_parts(params, Sector.parse(sector), dps)
    if _degenerate(p):
        raise DegenerateMetric(f"det g below {DET_THRESHOLD:g} or at rounding level at {params}")
    if dps is None:
        return float(_r_paper(p))
    with mpmath.workdps(dps):
        return float(_r_paper(p))


def ricci_difference(params: ChainParams, method: str = "christoffel", dps: int | None = None) -> float:
    """R_R - R_NS with the chosen curvature method."""
    r = ricci_scalar(params, Sector.R, dps).value(method)
    ns = ricci_scalar(params, Sector.NS, dps).value(method)
    if math.isnan(r) or math.isnan(ns):
        raise StencilCrossesSingularLine(-1, f"curvature stencil is singular at {params}")
    return r - ns


def ricci_field(gamma, h, L: int, sector, method: str = "determinant", J: float = 1.0, chunk: int = 4096):
    """Vectorized curvature over arrays of points.

    Returns
    -------
    values : ndarray
        Curvature, NaN where singular.
    singular : ndarray of bool
        Gapless mode, degenerate metric or unusable stencil.
    """
    gamma = np.asarray(gamma, dtype=float)
    h = np.asarray(h, dtype=float)
    shape = np.broadcast(gamma, h).shape
    gflat = np.broadcast_to(gamma, shape).ravel()
    hflat = np.broadcast_to(h, shape).ravel()
    phi = mode_phases(L, sector)
    values = np.full(gflat.shape, np.nan)
    singular = np.zeros(gflat.shape, dtype=bool)
    for start in range(0, gflat.size, chunk):
        sl = slice(start, start + chunk)
        g, hh = gflat[sl], hflat[sl]
        p, gap, _ = _parts(g, hh, phi, J)
        bad = gap | _degenerate(p)
        with np.errstate(all="ignore"):
            if method == "determinant":
                val = _r_paper(p)
            elif method == "christoffel":
                d = FD_STEP_SECOND * np.maximum.reduce([np.ones_like(g), np.abs(g), np.abs(hh)])
                bad |= _near_guarded_line(g, hh, d)
                gap_any = np.zeros_like(bad)

                def parts_at(gg, hv):
                    q, gp, _ = _parts(gg, hv, phi, J)
                    gap_any[:] |= gp
                    return q

                val = _brioschi(p, *_second_derivs(parts_at, g, hh, d))
                bad |= gap_any
            else:
                raise ValueError(f"unknown curvature method {method!r}")
        bad |= ~np.isfinite(val)
        values[sl] = np.where(bad, np.nan, val)
        singular[sl] = bad
    return values.reshape(shape), singular.reshape(shape)


def berry_phase_thermo(gamma: float, h: float) -> float:
    """Thermodynamic-limit Berry phase: -pi + pi h gamma / sqrt((1-gamma^2)(1-gamma^2-h^2)) inside the disk, else 0."""
    if gamma * gamma + h * h < 1.0:
        radicand = (1.0 - gamma * gamma) * (1.0 - gamma * gamma - h * h)
        if radicand <= 0.0:
            raise DomainError(f"radicand {radicand} <= 0 at gamma={gamma}, h={h}")
        return -math.pi + math.pi * h * gamma / math.sqrt(radicand)
    return 0.0


def ricci_thermo(gamma: float, h: float, L: int, tol: float = 1e-9) -> float:
    """Large-L closed form of the Ricci scalar.

    -(4/L)(1+|gamma|)/|gamma| for |h| < 1 and gamma != 0;
    (4/L)(|h| + r)/r with r = sqrt(h^2 + gamma^2 - 1) for |h| > 1.
    """
    a, g = abs(h), abs(gamma)
    if abs(a - 1.0) < tol:
        raise DomainError("closed form undefined on |h| = 1")
    if a < 1.0:
        if g < tol:
            raise DomainError("closed form diverges on gamma = 0, |h| < 1")
        return -(4.0 / L) * (1.0 + g) / g
    r = math.sqrt(h * h + gamma * gamma - 1.0)
    return (4.0 / L) * (a + r) / r
