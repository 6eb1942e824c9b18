import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import loop_spin_hamiltonian
from xychain.chain import ChainParams, Sector, canonicalize
from xychain.errors import CapacityError, GaplessMode
from xychain.fermions import (
    bogoliubov_angle,
    delta_gs,
    enumerate_many_body,
    mode_energies,
    mode_phase,
    mode_phases,
    physical_levels,
    physical_parity,
    sector_ground_energy,
    single_particle_spectrum,
    vacuum_parity,
)


def test_mode_phases():
    assert mode_phases(4, Sector.R) == pytest.approx(np.pi / 2 * np.arange(1, 5))
    assert mode_phases(4, "NS") == pytest.approx(np.pi / 2 * np.arange(1, 5) - np.pi / 4)
    assert mode_phase(2, ChainParams(4, 0.5, 0.5), Sector.NS) == pytest.approx(3 * np.pi / 4)
    with pytest.raises(IndexError):
        mode_phase(0, ChainParams(4, 0.5, 0.5), Sector.NS)


def test_ising_energies():
    # gamma = 1, h = 0: every mode has energy J.
    assert mode_energies(ChainParams(7, 1.0, 0.0), Sector.R) == pytest.approx(np.ones(7))


def test_gapless_angle():
    p = ChainParams(4, 0.5, 1.0)  # R sector has phi = 2 pi, a zero mode at h = J
    with pytest.raises(GaplessMode) as exc:
        bogoliubov_angle(p, Sector.R, 4)
    assert exc.value.k == 4
    sp = single_particle_spectrum(p, Sector.R)
    assert sp.singular and sp.gapless == (4,)
    assert math.isnan(sp.angles[3])


@pytest.mark.parametrize(
    "L,gamma,h,e0",
    [
        # Lowest eigenvalue of the loop-built spin Hamiltonian.
        (6, 0.3, 0.5, -2.352900187606247),
        (7, 1.2, 0.2, -3.8916501390663276),
        (5, 0.5, 1.5, -3.871359500675276),
    ],
)
def test_ground_energy_matches_spin_oracle(L, gamma, h, e0):
    p = ChainParams(L, gamma, h)
    levels, _ = physical_levels(p, cap=1)
    assert levels[0] == pytest.approx(e0, abs=1e-12)
    assert min(sector_ground_energy(p, s) for s in Sector) <= e0 + 1e-12


@pytest.mark.parametrize(
    "gamma,h,L,value",
    [
        # 50-digit mpmath sums of both sectors.
        (0.3, 0.5, 40, 5.155666952859436e-07),
        (0.5, 1.5, 30, -1.5341179364470372e-09),
        (0.5, 1.0, 100, -0.003926344405909727),
    ],
)
def test_delta_gs_high_precision(gamma, h, L, value):
    assert delta_gs(ChainParams(L, gamma, h), dps=50) == pytest.approx(value, rel=1e-12)


def test_delta_gs_float_path_agrees_when_resolvable():
    p = ChainParams(12, 0.5, 1.0)
    assert delta_gs(p) == pytest.approx(delta_gs(p, dps=40), rel=1e-10)


def test_delta_gs_vanishes_on_ising_axis():
    assert delta_gs(ChainParams(9, 1.0, 0.0), dps=30) == 0.0


@pytest.mark.parametrize("L", [2, 3, 4, 5, 6, 7, 8])
@pytest.mark.parametrize(
    "gamma,h,J",
    [(0.3, 0.2, 1), (0.3, 0.8, 1), (0.7, 1.3, 1), (0.7, -1.3, 1), (1.2, -0.2, 1), (0, 0.3, 1),
     (1.5, 2.5, 1), (0.4, -3, 1), (0.5, 0.0, 0), (0.6, 0.8, 1), (0.3, 0.5, 2.0)],
)
def test_parity_rule_reproduces_spin_blocks(L, gamma, h, J):
    H = loop_spin_hamiltonian(L, gamma, h, J)
    down = np.array([bin(s).count("1") for s in range(2**L)])
    par = np.where(down % 2 == 0, 1, -1)
    p = ChainParams(L, gamma, h, J)
    for sector, block in ((Sector.NS, 1), (Sector.R, -1)):
        spin = np.sort(np.linalg.eigvalsh(H[np.ix_(par == block, par == block)]))
        want = "even" if physical_parity(p, sector) == 1 else "odd"
        ferm = enumerate_many_body(p, sector, want).energies
        assert ferm == pytest.approx(spin, abs=1e-9)


@pytest.mark.parametrize("L", [4, 6, 8])
def test_parity_rule_negative_coupling_even_length(L):
    p = ChainParams(L, 0.4, 0.6, -1.0)
    H = loop_spin_hamiltonian(L, 0.4, 0.6, -1.0)
    assert np.linalg.eigvalsh(H) == pytest.approx(
        np.sort(np.concatenate([enumerate_many_body(p, s, "even" if physical_parity(p, s) == 1 else "odd").energies
                                for s in Sector])),
        abs=1e-9,
    )
    assert np.linalg.eigvalsh(H) == pytest.approx(
        np.linalg.eigvalsh(loop_spin_hamiltonian(L, 0.4, 0.6, 1.0)), abs=1e-9
    )
    assert canonicalize(p).J == 1.0


def test_vacuum_parity_counts_unpaired_modes():
    # R sector at even L has unpaired phi = pi and 2 pi; only phi = 2 pi has h - cos < 0 for |h| < 1.
    assert vacuum_parity(ChainParams(6, 0.5, 0.5), Sector.R) == -1
    assert vacuum_parity(ChainParams(6, 0.5, 1.5), Sector.R) == 1
    assert vacuum_parity(ChainParams(6, 0.5, 0.5), Sector.NS) == 1


def test_many_body_full_and_filters():
    p = ChainParams(6, 0.4, 0.7)
    full = enumerate_many_body(p, Sector.NS)
    assert len(full) == 64 and not full.truncated
    assert full.energies[0] == pytest.approx(full.ground_energy)
    even = enumerate_many_body(p, Sector.NS, "even")
    assert set(even.parities) == {1} and len(even) == 32
    with pytest.raises(ValueError):
        enumerate_many_body(p, Sector.NS, "both")


@settings(max_examples=40, deadline=None)
@given(
    st.integers(3, 10),
    st.floats(-1.5, 1.5),
    st.floats(-2, 2),
    st.sampled_from(["any", "even", "odd"]),
    st.integers(1, 40),
)
def test_truncated_enumeration_is_prefix_of_full(L, gamma, h, parity, cap):
    p = ChainParams(L, gamma, h)
    full = enumerate_many_body(p, Sector.R, parity)
    part = enumerate_many_body(p, Sector.R, parity, cap=cap)
    n = min(cap, len(full))
    assert len(part) == n
    assert part.energies == pytest.approx(full.energies[:n], abs=1e-10)


def test_truncated_enumeration_by_energy():
    p = ChainParams(30, 0.5, 0.6)
    spec = enumerate_many_body(p, Sector.NS, e_max=sector_ground_energy(p, Sector.NS) + 1.0)
    assert spec.truncated
    assert np.all(spec.energies <= spec.ground_energy + 1.0 + 1e-12)
    assert np.all(np.diff(spec.energies) >= 0)


def test_capacity_guard():
    with pytest.raises(CapacityError):
        enumerate_many_body(ChainParams(25, 0.5, 0.5), Sector.NS)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 40), st.floats(-2, 2), st.floats(-2, 2))
def test_energies_invariant_under_sign_flips(L, gamma, h):
    # gamma -> -gamma leaves eps unchanged; h -> -h maps phi to pi - phi, which
    # permutes modes within a sector for even L.
    a = np.sort(mode_energies(ChainParams(L, gamma, h), Sector.NS))
    assert np.sort(mode_energies(ChainParams(L, -gamma, h), Sector.NS)) == pytest.approx(a)
    if L % 2 == 0:
        assert np.sort(mode_energies(ChainParams(L, gamma, -h), Sector.NS)) == pytest.approx(a)
    else:
        assert np.sort(mode_energies(ChainParams(L, gamma, -h), Sector.R)) == pytest.approx(a)


def test_ground_energy_density_approaches_band_integral():
    from scipy.integrate import quad

    gamma, h = 0.5, 0.5
    integral, _ = quad(lambda p: math.hypot(h - math.cos(p), gamma * math.sin(p)), 0, 2 * math.pi,
                       epsabs=1e-13, epsrel=1e-13)
    e = sector_ground_energy(ChainParams(1000, gamma, h), Sector.NS) / 1000
    assert e == pytest.approx(-integral / (4 * math.pi), abs=1e-6)


def test_hand_evaluated_ground_energies():
    assert sector_ground_energy(ChainParams(6, 1.0, 0.0), Sector.R) == pytest.approx(-3.0)
    assert sector_ground_energy(ChainParams(4, 0.0, 0.0), Sector.R) == pytest.approx(-1.0)


def test_first_excited_level():
    from xychain.fermions import sector_first_excited

    p = ChainParams(8, 1.0, 0.0)
    assert sector_first_excited(p, Sector.NS) == pytest.approx(sector_ground_energy(p, Sector.NS) + 1)
    p = ChainParams(8, 0.5, 0.5)
    want = sector_ground_energy(p, Sector.NS) + mode_energies(p, Sector.NS).min()
    assert sector_first_excited(p, Sector.NS) == pytest.approx(want)
