import numpy as np
import pytest

from xychain import ChainParams


def loop_spin_hamiltonian(L, gamma, h, J=1.0):
    """Reference spin Hamiltonian built bond by bond from the Pauli action.

    Bit 1 is a down spin. sy|up> = i|down> and sy|down> = -i|up>.
    """
    n = 2**L
    H = np.zeros((n, n))
    for s in range(n):
        for l in range(L):
            b = (s >> l) & 1
            H[s, s] += -h / 2 * (1 - 2 * b)
            m = (l + 1) % L
            bm = (s >> m) & 1
            t = s ^ (1 << l) ^ (1 << m)
            yy = (1j if b == 0 else -1j) * (1j if bm == 0 else -1j)
            H[t, s] += -J * ((1 + gamma) / 4 + (1 - gamma) / 4 * yy.real)
    return H


@pytest.fixture
def point():
    return ChainParams(8, 0.3, 0.5)
