"""Single-particle and many-body spectra of the NS and R fermionic sectors.

After the Jordan-Wigner and Bogoliubov transformations each sector is a set of
free modes with phases phi_k = 2 pi k / L - pi (n_l + 1) / (2 L), k = 1..L, and
energies eps_k = sqrt((h - J cos phi_k)^2 + (gamma J sin phi_k)^2).

Only half of each sector's 2^L levels belong to the spin chain. Which half is
fixed by the quasiparticle parity of the sector vacuum (see
:func:`physical_parity`); the rule is validated against exact
diagonalization in the test-suite.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .chain import ChainParams, Sector
from .errors import CapacityError, GaplessMode

GAPLESS_EPS = 1e-14
UNPAIRED_SIN = 1e-12
MAX_FULL_ENUMERATION = 24


def _sector(sector) -> Sector:
    return Sector.parse(sector)


def mode_phases(L: int, sector) -> np.ndarray:
    """Phases phi_k for k = 1..L as a float array."""
    n_l = _sector(sector).n_l
    k = np.arange(1, L + 1)
    return 2.0 * np.pi * k / L - np.pi * (n_l + 1) / (2.0 * L)


def mode_phase(k: int, params: ChainParams, sector) -> float:
    """Phase of mode ``k`` (1-based)."""
    L = params.L
    if not 1 <= k <= L:
        raise IndexError(f"mode index {k} outside 1..{L}")
    n_l = _sector(sector).n_l
    return 2.0 * math.pi * k / L - math.pi * (n_l + 1) / (2.0 * L)


def _components(params: ChainParams, phi):
    """Return (gamma J sin phi, h - J cos phi)."""
    return params.gamma * params.J * np.sin(phi), params.h - params.J * np.cos(phi)


def mode_energies(params: ChainParams, sector) -> np.ndarray:
    """All single-particle energies of a sector, ordered by k."""
    y, x = _components(params, mode_phases(params.L, sector))
    return np.hypot(x, y)


def single_particle_energy(params: ChainParams, sector, k: int) -> float:
    y, x = _components(params, mode_phase(k, params, sector))
    return float(math.hypot(x, y))


def bogoliubov_angle(params: ChainParams, sector, k: int) -> float:
    """Bogoliubov angle theta_k = atan2(gamma J sin phi, h - J cos phi)."""
    y, x = _components(params, mode_phase(k, params, sector))
    if abs(y) < GAPLESS_EPS and abs(x) < GAPLESS_EPS:
        raise GaplessMode(k)
    return float(math.atan2(y, x))


@dataclass(frozen=True)
class SingleParticleSpectrum:
    params: ChainParams
    sector: Sector
    phases: np.ndarray
    energies: np.ndarray
    angles: np.ndarray
    gapless: tuple = ()

    @property
    def singular(self) -> bool:
        return bool(self.gapless)


def single_particle_spectrum(params: ChainParams, sector) -> SingleParticleSpectrum:
    """Phases, energies and angles of every mode; angles are NaN at gapless modes."""
    sector = _sector(sector)
    phi = mode_phases(params.L, sector)
    y, x = _components(params, phi)
    eps = np.hypot(x, y)
    gapless = (np.abs(x) < GAPLESS_EPS) & (np.abs(y) < GAPLESS_EPS)
    theta = np.where(gapless, np.nan, np.arctan2(y, x))
    return SingleParticleSpectrum(
        params, sector, phi, eps, theta, tuple(int(k) + 1 for k in np.flatnonzero(gapless))
    )


def _mp_energies(params: ChainParams, sector):
    n_l = _sector(sector).n_l
    L = params.L
    g, h, J = mpmath.mpf(params.gamma), mpmath.mpf(params.h), mpmath.mpf(params.J)
    out = []
    for k in range(1, L + 1):
        phi = 2 * mpmath.pi * k / L - mpmath.pi * (n_l + 1) / (2 * L)
        out.append(mpmath.sqrt((h - J * mpmath.cos(phi)) ** 2 + (g * J * mpmath.sin(phi)) ** 2))
    return out


def sector_ground_energy(params: ChainParams, sector, dps: int | None = None) -> float:
    """Vacuum energy -1/2 sum_k eps_k of a sector.

    With ``dps`` the sum is evaluated in mpmath at that many digits; otherwise
    an exactly rounded float sum in ascending k is used.
    """
    if dps is None:
        return -0.5 * math.fsum(mode_energies(params, sector))
    with mpmath.workdps(dps):
        return float(-mpmath.fsum(_mp_energies(params, sector)) / 2)


def sector_first_excited(params: ChainParams, sector) -> float:
    """Lowest single-quasiparticle level of a sector, ignoring parity constraints."""
    eps = mode_energies(params, sector)
    return sector_ground_energy(params, sector) + float(eps.min())


def delta_gs(params: ChainParams, dps: int | None = None) -> float:
    """Sector gap E_NS^GS - E_R^GS.

    The two vacuum energies agree to many digits away from criticality, so
    pass ``dps`` (e.g. 50) when the gap is far below float resolution.
    """
    if dps is None:
        ns = mode_energies(params, Sector.NS)
        r = mode_energies(params, Sector.R)
        return -0.5 * math.fsum(np.concatenate([ns, -r]))
    with mpmath.workdps(dps):
        ns = mpmath.fsum(_mp_energies(params, Sector.NS))
        r = mpmath.fsum(_mp_energies(params, Sector.R))
        return float((r - ns) / 2)


def vacuum_parity(params: ChainParams, sector) -> int:
    """Bare fermion-number parity of the sector vacuum.

    Paired modes (phi, -phi) contribute an even number of bare fermions. An
    unpaired mode (sin phi = 0) is occupied in the vacuum when h - J cos phi < 0.
    """
    phi = mode_phases(params.L, sector)
    unpaired = np.abs(np.sin(phi)) < UNPAIRED_SIN
    x = params.h - params.J * np.cos(phi[unpaired])
    return -1 if int(np.count_nonzero(x < 0)) % 2 else 1


def spin_parity(sector) -> int:
    """Eigenvalue of prod_l sz_l on the spin states represented by a sector."""
    return 1 if _sector(sector) is Sector.NS else -1


def physical_parity(params: ChainParams, sector) -> int:
    """Quasiparticle parity (+1 even, -1 odd) of the sector levels present in the spin chain.

    NS levels must carry an even total number of bare fermions and R levels an
    odd number, so the allowed quasiparticle parity is the vacuum parity
    times +1 (NS) or -1 (R).
    """
    return vacuum_parity(params, sector) * spin_parity(sector)


@dataclass(frozen=True)
class ManyBodyLevel:
    energy: float
    occupation: int
    parity: int


@dataclass(frozen=True)
class ManyBodySpectrum:
    """Sorted many-body levels of one sector.

    ``occupations`` are bitmasks with bit ``k-1`` set when mode ``k`` is excited.
    """

    sector: Sector
    energies: np.ndarray
    occupations: np.ndarray
    truncated: bool
    ground_energy: float

    @property
    def parities(self) -> np.ndarray:
        counts = np.array([bin(int(m)).count("1") for m in self.occupations], dtype=np.int64)
        return np.where(counts % 2 == 0, 1, -1)

    @property
    def levels(self) -> list:
        return [
            ManyBodyLevel(float(e), int(m), int(p))
            for e, m, p in zip(self.energies, self.occupations, self.parities)
        ]

    def __len__(self):
        return len(self.energies)


_PARITY_FILTERS = {"any": None, "even": 1, "odd": -1}


def _popcount_parity(masks: np.ndarray) -> np.ndarray:
    m = masks.astype(np.uint64)
    count = np.zeros(m.shape, dtype=np.uint64)
    while np.any(m):
        count += m & np.uint64(1)
        m = m >> np.uint64(1)
    return np.where(count % 2 == 0, 1, -1)


def enumerate_many_body(
    params: ChainParams,
    sector,
    parity_filter: str = "any",
    cap: int | None = None,
    e_max: float | None = None,
) -> ManyBodySpectrum:
    """Levels E^GS + sum_k n_k eps_k of a sector, lowest first.

    Parameters
    ----------
    parity_filter : {"any", "even", "odd"}
        Keep only occupations with this quasiparticle-number parity.
    cap : int, optional
        Maximum number of levels to return (default: all 2^L).
    e_max : float, optional
        Stop once levels exceed this energy.

    Truncated requests use a best-first expansion over the sorted mode
    energies, so the cost scales with the number of levels returned.
    """
    sector = _sector(sector)
    if parity_filter not in _PARITY_FILTERS:
        raise ValueError(f"parity_filter must be one of {sorted(_PARITY_FILTERS)}")
    want = _PARITY_FILTERS[parity_filter]
    L = params.L
    full = 2**L
    if cap is None:
        cap = full
    if cap < 1:
        raise ValueError("cap must be >= 1")
    total = full if want is None else full // 2
    eps = mode_energies(params, sector)
    e0 = -0.5 * math.fsum(eps)

    if cap >= total and e_max is None:
        if L > MAX_FULL_ENUMERATION:
            raise CapacityError(f"full enumeration of 2^{L} levels exceeds the L<=24 guard")
        sums = np.zeros(1)
        for e in eps:
            sums = np.concatenate([sums, sums + e])
        masks = np.arange(full, dtype=np.int64)
        if want is not None:
            keep = _popcount_parity(masks) == want
            sums, masks = sums[keep], masks[keep]
        order = np.argsort(sums, kind="stable")
        return ManyBodySpectrum(sector, e0 + sums[order], masks[order], False, e0)

    order = np.argsort(eps, kind="stable")
    sorted_eps = eps[order]
    energies, masks = [], []
    heap = [(0.0, 0, -1, 0, 0)]  # (offset, tiebreak, last position, mode mask, popcount)
    counter = 1
    while heap and len(energies) < cap:
        offset, _, last, mask, npop = heapq.heappop(heap)
        if e_max is not None and e0 + offset > e_max:
            break
        if want is None or (1 if npop % 2 == 0 else -1) == want:
            occupied = [eps[j] for j in range(L) if mask >> j & 1]
            energies.append(e0 + math.fsum(occupied))
            masks.append(mask)
        nxt = last + 1
        if nxt < L:
            bit_next = 1 << int(order[nxt])
            heapq.heappush(heap, (offset + sorted_eps[nxt], counter, nxt, mask | bit_next, npop + 1))
            counter += 1
            if last >= 0:
                swapped = (mask ^ (1 << int(order[last]))) | bit_next
                heapq.heappush(
                    heap, (offset - sorted_eps[last] + sorted_eps[nxt], counter, nxt, swapped, npop)
                )
                counter += 1
    energies = np.array(energies)
    masks = np.array(masks, dtype=np.int64)
    idx = np.argsort(energies, kind="stable")
    return ManyBodySpectrum(sector, energies[idx], masks[idx], len(energies) < total, e0)


def physical_levels(params: ChainParams, cap: int | None = None, e_max: float | None = None):
    """Spin-chain levels assembled from both sectors under the parity rule.

    Returns
    -------
    energies : ndarray
        Sorted energies.
    labels : list of (Sector, int)
        Sector and quasiparticle parity of each level.
    """
    parts = []
    for sector in (Sector.NS, Sector.R):
        p = physical_parity(params, sector)
        spec = enumerate_many_body(
            params, sector, "even" if p == 1 else "odd", cap=cap, e_max=e_max
        )
        parts.append((spec.energies, [(sector, p)] * len(spec)))
    energies = np.concatenate([parts[0][0], parts[1][0]])
    labels = parts[0][1] + parts[1][1]
    order = np.argsort(energies, kind="stable")
    return energies[order], [labels[i] for i in order]
