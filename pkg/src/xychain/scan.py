"""Grid scans over (gamma, h): case maps, curvature sign maps, zero curves and arc fits."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .chain import ChainParams, Sector
from .errors import DomainError, Unclassifiable
from .exact import CaseTag, classify_case
from .fermions import delta_gs
from .geometry import ricci_field

LINE_CLEARANCE = 1e-6
ZERO_THRESHOLD = 1e-30
ARC_RESIDUAL = 0.05

CASE_FIELD = {
    CaseTag.Case1: 1.0,
    CaseTag.Case3: 1.0,
    CaseTag.Case2: -1.0,
    CaseTag.Case4: 0.0,
    CaseTag.Case5: 0.0,
    CaseTag.Unclassifiable: 0.0,
}


def _vertical_distance(g):
    a = abs(g)
    return min(a, abs(a - 1.0))


def _horizontal_distance(g, h):
    a, b = abs(g), abs(h)
    return min(b, abs(b - 1.0), abs(math.hypot(a, b) - 1.0))


def _nudge(x, lo, hi):
    """Step x by 2e-6 towards the interior of [lo, hi]."""
    return x + 2 * LINE_CLEARANCE if x + 2 * LINE_CLEARANCE < hi else x - 2 * LINE_CLEARANCE


@dataclass(frozen=True)
class Grid:
    """Cell-centred grid on [gamma_min, gamma_max] x [h_min, h_max].

    Nodes sit at half-cell offsets from the edges. A node within 1e-6 of
    gamma = 0 or |gamma| = 1 is moved by 2e-6 in gamma, and one within 1e-6
    of h = 0, |h| = 1 or gamma^2 + h^2 = 1 by 2e-6 in h, towards the interior
    of the rectangle, until clear.
    """

    gamma_min: float
    gamma_max: float
    h_min: float
    h_max: float
    n_gamma: int
    n_h: int

    def __post_init__(self):
        if self.n_gamma < 2 or self.n_h < 2:
            raise DomainError("grids need at least 2 nodes per axis")
        if not (self.gamma_max > self.gamma_min and self.h_max > self.h_min):
            raise DomainError("grid bounds must satisfy min < max")

    @classmethod
    def parse(cls, spec: str) -> "Grid":
        """Parse ``gmin:gmax:ngxhmin:hmax:nh``."""
        try:
            gpart, hpart = spec.lower().split("x")
            g0, g1, ng = gpart.split(":")
            h0, h1, nh = hpart.split(":")
            return cls(float(g0), float(g1), float(h0), float(h1), int(ng), int(nh))
        except ValueError as exc:
            raise ValueError(f"bad grid spec {spec!r}; expected min:max:countxmin:max:count") from exc

    @property
    def gammas(self) -> np.ndarray:
        step = (self.gamma_max - self.gamma_min) / self.n_gamma
        return self.gamma_min + (np.arange(self.n_gamma) + 0.5) * step

    @property
    def hs(self) -> np.ndarray:
        step = (self.h_max - self.h_min) / self.n_h
        return self.h_min + (np.arange(self.n_h) + 0.5) * step

    def mesh(self):
        """Node coordinates as two (n_gamma, n_h) arrays, with line clearance applied."""
        G, H = np.meshgrid(self.gammas, self.hs, indexing="ij")
        H = H.copy()
        G = G.copy()
        for idx in np.ndindex(G.shape):
            while _vertical_distance(G[idx]) <= LINE_CLEARANCE:
                G[idx] = _nudge(G[idx], self.gamma_min, self.gamma_max)
            while _horizontal_distance(G[idx], H[idx]) <= LINE_CLEARANCE:
                H[idx] = _nudge(H[idx], self.h_min, self.h_max)
        return G, H

    def nodes(self):
        G, H = self.mesh()
        return list(zip(G.ravel(), H.ravel()))

    @property
    def step(self):
        return (
            (self.gamma_max - self.gamma_min) / self.n_gamma,
            (self.h_max - self.h_min) / self.n_h,
        )


# ---------------------------------------------------------------- case maps


@dataclass
class CaseMap:
    grid: Grid
    L: int
    gamma: np.ndarray
    h: np.ndarray
    labels: np.ndarray

    @property
    def field(self) -> np.ndarray:
        """+1 where the NS vacuum is the ground state (Case1/Case3), -1 for Case2, 0 otherwise."""
        return np.vectorize(CASE_FIELD.get, otypes=[float])(self.labels)

    @property
    def unclassifiable(self) -> np.ndarray:
        return self.labels == CaseTag.Unclassifiable

    def counts(self) -> dict:
        tags, n = np.unique(self.labels, return_counts=True)
        return {str(t): int(c) for t, c in zip(tags, n)}


def _classify_row(args):
    gammas, hs, L, tol, source = args
    row = []
    for g, h in zip(gammas, hs):
        try:
            row.append(classify_case(ChainParams(L, float(g), float(h)), tol, source).tag)
        except Unclassifiable:
            row.append(CaseTag.Unclassifiable)
    return row


def resolve_threads(threads=None) -> int:
    """Worker count: ``XYCHAIN_THREADS`` beats the argument, which beats the CPU count."""
    env = os.environ.get("XYCHAIN_THREADS")
    if env:
        threads = int(env)
    if threads is None:
        threads = os.cpu_count() or 1
    return max(1, int(threads))


def _map_rows(fn, jobs, threads):
    if threads <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs))


def scan_cases(grid: Grid, L: int, tol: float = 1e-8, source: str = "fermionic",
               threads: int | None = 1) -> CaseMap:
    """Case label at every grid node.

    ``source="exact"`` classifies with full exact diagonalization (L <= 13);
    the default assembles the spin levels from the fermionic sectors, which
    agrees with the exact path and is fast enough for fine grids.
    """
    G, H = grid.mesh()
    jobs = [(G[i], H[i], L, tol, source) for i in range(G.shape[0])]
    rows = _map_rows(_classify_row, jobs, resolve_threads(threads))
    return CaseMap(grid, L, G, H, np.array(rows, dtype=object))


# ---------------------------------------------------------------- sign maps

SIGN_QUANTITIES = ("ricciR", "ricciNS", "ricciProduct", "deltaRicci")


@dataclass
class SignMap:
    """Curvature field on a grid with a clamped copy for display.

    ``raw`` is NaN at singular nodes; ``clamped`` is ``raw`` clipped to
    [-delta, delta] and 0 at singular nodes.
    """

    grid: Grid
    quantity: str
    L: int
    delta: float
    gamma: np.ndarray
    h: np.ndarray
    raw: np.ndarray
    singular: np.ndarray
    zero_threshold: float = ZERO_THRESHOLD

    @property
    def clamped(self) -> np.ndarray:
        return clamp(np.where(self.singular, 0.0, self.raw), self.delta)

    @property
    def signs(self) -> np.ndarray:
        s = np.sign(np.where(self.singular, 0.0, self.raw)).astype(int)
        s[np.abs(np.nan_to_num(self.raw)) < self.zero_threshold] = 0
        return s


def clamp(values, delta: float):
    if delta <= 0:
        raise ValueError("clamp bound must be positive")
    return np.clip(values, -delta, delta)


def scan_sign(grid: Grid, L: int, quantity: str, delta: float = 1.0, method: str = "determinant") -> SignMap:
    """Curvature-derived field on a grid.

    Parameters
    ----------
    quantity : {"ricciR", "ricciNS", "ricciProduct", "deltaRicci"}
        Product is R_R * R_NS and difference is R_R - R_NS.
    method : {"determinant", "christoffel"}
        Curvature evaluation; see :mod:`xychain.geometry`.
    """
    if quantity not in SIGN_QUANTITIES:
        raise ValueError(f"quantity must be one of {SIGN_QUANTITIES}")
    if delta <= 0:
        raise ValueError("clamp bound must be positive")
    G, H = grid.mesh()
    need = {"ricciR": (Sector.R,), "ricciNS": (Sector.NS,)}.get(quantity, (Sector.R, Sector.NS))
    vals, sing = {}, np.zeros(G.shape, dtype=bool)
    for sector in need:
        v, s = ricci_field(G, H, L, sector, method)
        vals[sector] = v
        sing |= s
    if quantity == "ricciR":
        raw = vals[Sector.R]
    elif quantity == "ricciNS":
        raw = vals[Sector.NS]
    elif quantity == "ricciProduct":
        raw = vals[Sector.R] * vals[Sector.NS]
    else:
        raw = vals[Sector.R] - vals[Sector.NS]
    raw = np.where(sing, np.nan, raw)
    return SignMap(grid, quantity, L, float(delta), G, H, raw, sing)


# ---------------------------------------------------------------- zero curves


@dataclass
class ZeroCurve:
    """Polyline of (gamma, h) points along a zero level."""

    points: np.ndarray
    closed: bool = False
    saddle_cells: int = 0

    def __len__(self):
        return len(self.points)


def _edge_point(G, H, F, edge):
    kind, i, j = edge
    i2, j2 = (i + 1, j) if kind == "g" else (i, j + 1)
    f0, f1 = F[i, j], F[i2, j2]
    t = f0 / (f0 - f1)
    return (
        G[i, j] + t * (G[i2, j2] - G[i, j]),
        H[i, j] + t * (H[i2, j2] - H[i, j]),
    )


def marching_squares(G, H, F, mask=None):
    """Zero-level polylines of ``F`` sampled at nodes (G, H).

    Corners with F > 0 are inside. Crossings are placed by linear
    interpolation along cell edges. Cells touching a masked node are skipped.
    A saddle cell is split according to the sign of the mean of its corners.

    Returns
    -------
    list of ZeroCurve
    """
    F = np.asarray(F, dtype=float)
    n0, n1 = F.shape
    valid = np.isfinite(F) if mask is None else (~np.asarray(mask)) & np.isfinite(F)
    inside = F > 0
    links = {}
    saddle_of = {}

    def link(a, b, saddle):
        links.setdefault(a, []).append(b)
        links.setdefault(b, []).append(a)
        if saddle:
            saddle_of[a] = saddle_of[b] = True

    for i in range(n0 - 1):
        for j in range(n1 - 1):
            if not (valid[i, j] and valid[i + 1, j] and valid[i + 1, j + 1] and valid[i, j + 1]):
                continue
            c = (inside[i, j], inside[i + 1, j], inside[i + 1, j + 1], inside[i, j + 1])
            if all(c) or not any(c):
                continue
            bottom, right = ("g", i, j), ("h", i + 1, j)
            top, left = ("g", i, j + 1), ("h", i, j)
            edges = [e for e, (a, b) in zip(
                (bottom, right, top, left), ((c[0], c[1]), (c[1], c[2]), (c[3], c[2]), (c[0], c[3]))
            ) if a != b]
            if len(edges) == 2:
                link(edges[0], edges[1], False)
                continue
            centre = 0.25 * (F[i, j] + F[i + 1, j] + F[i + 1, j + 1] + F[i, j + 1])
            if (centre > 0) == c[0]:
                link(bottom, right, True)
                link(top, left, True)
            else:
                link(bottom, left, True)
                link(top, right, True)

    curves = []
    seen = set()

    def walk(start):
        chain = [start]
        seen.add(start)
        prev, cur = None, start
        while True:
            nxt = [n for n in links[cur] if n != prev and n not in seen]
            if not nxt:
                closed = len(chain) > 2 and start in links[cur] and prev is not None
                return chain, closed
            prev, cur = cur, nxt[0]
            chain.append(cur)
            seen.add(cur)

    ends = [e for e, nb in links.items() if len(nb) == 1]
    for e in ends + list(links):
        if e in seen:
            continue
        chain, closed = walk(e)
        pts = np.array([_edge_point(G, H, F, x) for x in chain])
        if closed:
            pts = np.vstack([pts, pts[:1]])
        curves.append(ZeroCurve(pts, closed, sum(1 for x in chain if saddle_of.get(x))))
    return curves


def extract_zero_curves(signmap, min_points: int = 3):
    """Zero curves of a :class:`SignMap` (raw values) or :class:`CaseMap`.

    Singular or unclassifiable nodes are excluded; curves with fewer than
    ``min_points`` points are dropped.
    """
    if isinstance(signmap, CaseMap):
        G, H, F, mask = signmap.gamma, signmap.h, signmap.field, signmap.unclassifiable
    else:
        G, H, F, mask = signmap.gamma, signmap.h, signmap.raw, signmap.singular
    return [c for c in marching_squares(G, H, F, mask) if len(c) >= min_points]


@dataclass(frozen=True)
class ArcFit:
    index: int
    h0: float
    residual: float
    n_points: int


@dataclass
class ArcReport:
    arcs: list
    rejected: list = field(default_factory=list)
    L: int | None = None

    @property
    def count(self) -> int:
        return len(self.arcs)

    @property
    def outermost_h0(self) -> float:
        return self.arcs[-1].h0 if self.arcs else math.nan


def fit_ellipse_arc(points) -> tuple:
    """Least-squares h0 for gamma^2 + (h/h0)^2 = 1; returns (h0, rms residual)."""
    pts = np.asarray(points, dtype=float)
    g2, h2 = pts[:, 0] ** 2, pts[:, 1] ** 2
    denom = float(np.sum(h2 * h2))
    if denom == 0.0:
        return math.nan, math.inf
    u = float(np.sum(h2 * (1.0 - g2))) / denom
    if u <= 0:
        return math.nan, math.inf
    resid = g2 + h2 * u - 1.0
    return 1.0 / math.sqrt(u), float(np.sqrt(np.mean(resid**2)))


def fit_arcs(curves, L: int | None = None, threshold: float = ARC_RESIDUAL) -> ArcReport:
    """Fit gamma^2 + (h/h0)^2 = 1 to each curve and count the elliptic ones.

    Accepted arcs are indexed 1..M in increasing h0.
    """
    fits, rejected = [], []
    for c in curves:
        h0, rms = fit_ellipse_arc(c.points)
        (fits if rms <= threshold else rejected).append((h0, rms, len(c)))
    fits.sort(key=lambda t: t[0])
    arcs = [ArcFit(i + 1, h0, rms, n) for i, (h0, rms, n) in enumerate(fits)]
    rej = [ArcFit(0, h0, rms, n) for h0, rms, n in rejected]
    return ArcReport(arcs, rej, L)


def arc_scan(L: int, n: int = 96, gamma_max: float = 0.85, h_max: float = 1.05,
             threads: int | None = 1) -> ArcReport:
    """Case-boundary arcs inside the unit disk for chain length ``L``.

    The grid covers gamma in [0, gamma_max] and h in [0, h_max]; it extends
    past gamma^2 + h^2 = 1 so the outermost boundary is included, and stops
    short of gamma = 1: the arcs meet there and the sector gap drops below the
    case tolerance, which would merge neighbouring arcs.
    """
    grid = Grid(0.0, gamma_max, 0.0, h_max, n, n)
    cmap = scan_cases(grid, L, threads=threads)
    return fit_arcs(extract_zero_curves(cmap), L)


# ---------------------------------------------------------------- sign sequences


@dataclass
class SignSequenceReport:
    gamma: float
    h: float
    Ls: list
    values: list
    signs: list

    @property
    def changes(self) -> int:
        nz = [s for s in self.signs if s != 0]
        return sum(1 for a, b in zip(nz, nz[1:]) if a != b)

    @property
    def runs(self) -> list:
        """Maximal runs as (sign, first L, last L)."""
        out = []
        for L, s in zip(self.Ls, self.signs):
            if out and out[-1][0] == s:
                out[-1] = (s, out[-1][1], L)
            else:
                out.append((s, L, L))
        return out

    @property
    def constant_from(self):
        """Smallest L from which the sign never changes again."""
        return self.runs[-1][1] if self.runs else None

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "h": self.h,
            "L": list(self.Ls),
            "value": list(self.values),
            "sign": list(self.signs),
            "changes": self.changes,
            "runs": [list(r) for r in self.runs],
            "constant_from": self.constant_from,
        }


def sign_sequence_scan(gamma: float, h: float, L_list, dps: int = 50) -> SignSequenceReport:
    """Sign of E_NS - E_R for each L, with |value| < 1e-30 counted as 0."""
    Ls = [int(L) for L in L_list]
    values = [delta_gs(ChainParams(L, gamma, h), dps=dps) for L in Ls]
    signs = [0 if abs(v) < ZERO_THRESHOLD else (1 if v > 0 else -1) for v in values]
    return SignSequenceReport(float(gamma), float(h), Ls, values, signs)
