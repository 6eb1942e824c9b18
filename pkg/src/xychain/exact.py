"""Exact diagonalization of the periodic XY chain and case classification.

Basis states are integers whose bit ``l`` is 1 when spin ``l`` points down
(sz = -1). The parity prod_l sz_l commutes with H, so each parity block is
diagonalized on its own.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chain import ChainParams, Sector
from .errors import CapacityError, NoConvergence, Unclassifiable
from .fermions import ManyBodySpectrum, physical_levels, physical_parity, sector_ground_energy

MAX_SPIN_LENGTH = 13


def _check_length(L):
    if L > MAX_SPIN_LENGTH:
        raise CapacityError(f"dense exact diagonalization limited to L <= {MAX_SPIN_LENGTH}, got {L}")


def build_spin_hamiltonian(params: ChainParams) -> np.ndarray:
    """Dense 2^L x 2^L matrix of the XY Hamiltonian in the sz product basis.

    A bond whose two spins are antiparallel flips them with amplitude -J/2;
    a parallel pair flips with amplitude -J gamma/2.
    """
    L = params.L
    _check_length(L)
    n = 2**L
    states = np.arange(n)
    bits = (states[:, None] >> np.arange(L)) & 1
    H = np.zeros((n, n))
    H[states, states] = -0.5 * params.h * np.sum(1 - 2 * bits, axis=1)
    for l in range(L):
        m = (l + 1) % L
        flipped = states ^ ((1 << l) | (1 << m))
        parallel = bits[:, l] == bits[:, m]
        amp = np.where(parallel, -0.5 * params.J * params.gamma, -0.5 * params.J)
        np.add.at(H, (flipped, states), amp)
    return H


def parity_operator(L: int) -> np.ndarray:
    """Diagonal of prod_l sz_l: (-1)^(number of down spins) per basis state."""
    _check_length(L)
    states = np.arange(2**L)
    down = ((states[:, None] >> np.arange(L)) & 1).sum(axis=1)
    return np.where(down % 2 == 0, 1, -1)


def _round_robin(n):
    """Disjoint index pairs for each round of a parallel cyclic sweep."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    m = len(players)
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        rounds.append([(min(p, q), max(p, q)) for p, q in pairs if p >= 0 and q >= 0])
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def diagonalize(matrix, tol: float | None = None, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.

    Each sweep visits every off-diagonal pair once, grouped into rounds of
    disjoint pairs whose rotations are applied together.

    Parameters
    ----------
    tol : float, optional
        Convergence threshold on the off-diagonal Frobenius norm
        (default 1e-12 times the norm of the matrix).
    max_sweeps : int
        Sweep budget before :class:`NoConvergence` is raised.
    """
    A = np.array(matrix, dtype=float, copy=True)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    n = A.shape[0]
    if n == 0:
        return np.zeros(0)
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-12 * max(np.abs(A).max(), 1.0)):
        raise ValueError("matrix must be symmetric")
    if tol is not None and tol <= 0:
        raise ValueError("tol must be positive")
    A = 0.5 * (A + A.T)
    if tol is None:
        tol = 1e-12 * max(np.linalg.norm(A), np.finfo(float).tiny)
    rounds = [np.array(r, dtype=int).reshape(-1, 2) for r in _round_robin(n)]

    offdiag = ~np.eye(n, dtype=bool)

    def off_norm(M):
        return float(np.linalg.norm(M[offdiag]))

    for _ in range(max_sweeps):
        if off_norm(A) <= tol:
            return np.sort(np.diag(A))
        for pairs in rounds:
            if len(pairs) == 0:
                continue
            p, q = pairs[:, 0], pairs[:, 1]
            apq = A[p, q]
            active = np.abs(apq) > 0
            if not np.any(active):
                continue
            p, q, apq = p[active], q[active], apq[active]
            with np.errstate(over="ignore"):
                # tau may overflow to inf, which correctly gives t = 0.
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            rows_p, rows_q = A[p, :].copy(), A[q, :].copy()
            A[p, :] = c[:, None] * rows_p - s[:, None] * rows_q
            A[q, :] = s[:, None] * rows_p + c[:, None] * rows_q
            cols_p, cols_q = A[:, p].copy(), A[:, q].copy()
            A[:, p] = cols_p * c - cols_q * s
            A[:, q] = cols_p * s + cols_q * c
    if off_norm(A) <= tol:
        return np.sort(np.diag(A))
    raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")


@dataclass(frozen=True)
class SpinSpectrum:
    params: ChainParams
    even_levels: np.ndarray
    odd_levels: np.ndarray

    @property
    def all_levels(self) -> np.ndarray:
        return np.sort(np.concatenate([self.even_levels, self.odd_levels]))

    def block(self, parity: int) -> np.ndarray:
        return self.even_levels if parity == 1 else self.odd_levels


def _eigvals(block, solver):
    if solver == "jacobi":
        return diagonalize(block)
    if solver == "lapack":
        return np.linalg.eigvalsh(block)
    raise ValueError(f"unknown solver {solver!r}")


def parity_resolved_spectrum(params: ChainParams, solver: str = "lapack") -> SpinSpectrum:
    """Full spin spectrum split by the parity of prod_l sz_l.

    ``solver="jacobi"`` uses :func:`diagonalize`; the default LAPACK path is
    much faster for the 2^(L-1) blocks at L >= 10.
    """
    H = build_spin_hamiltonian(params)
    par = parity_operator(params.L)
    blocks = {}
    for p in (1, -1):
        idx = np.flatnonzero(par == p)
        blocks[p] = np.sort(_eigvals(H[np.ix_(idx, idx)], solver))
    return SpinSpectrum(params, blocks[1], blocks[-1])


class CaseTag:
    Case1 = "Case1"
    Case2 = "Case2"
    Case3 = "Case3"
    Case4 = "Case4"
    Case5 = "Case5"
    Unclassifiable = "Unclassifiable"


@dataclass(frozen=True)
class CaseLabel:
    tag: str
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __eq__(self, other):
        if isinstance(other, str):
            return self.tag == other
        if isinstance(other, CaseLabel):
            return self.tag == other.tag
        return NotImplemented

    def __hash__(self):
        return hash(self.tag)


def _contains(levels, energy, tol):
    i = np.searchsorted(levels, energy)
    near = [levels[j] for j in (i - 1, i) if 0 <= j < len(levels)]
    return any(abs(x - energy) < tol for x in near)


def _match_table(levels, e_ns, e_r, tol, complete_below=np.inf):
    """Apply the case tables to sorted spin levels.

    ``complete_below`` marks the energy up to which ``levels`` is known to be
    complete; lookups of R levels beyond it are not needed by the tables.
    """
    e0, e1 = levels[0], levels[1]
    diag = {
        "E_NS": e_ns,
        "E_R": e_r,
        "spin_E0": e0,
        "spin_E1": e1,
        "res_NS_E0": abs(e_ns - e0),
        "res_R_E0": abs(e_r - e0),
        "res_NS_E1": abs(e_ns - e1),
        "res_R_E1": abs(e_r - e1),
    }
    ns0, r0 = diag["res_NS_E0"] < tol, diag["res_R_E0"] < tol
    if ns0 and r0:
        return (CaseTag.Case5 if abs(e1 - e0) < tol else CaseTag.Case4), diag
    if ns0 and diag["res_R_E1"] < tol:
        return CaseTag.Case1, diag
    if r0 and diag["res_NS_E1"] < tol:
        return CaseTag.Case2, diag
    if ns0:
        if e_r + tol > complete_below:
            raise ValueError("spin levels incomplete near the R ground energy")
        r_present = _contains(levels, e_r, tol)
        diag["R_ground_in_spin_spectrum"] = r_present
        if not r_present:
            return CaseTag.Case3, diag
    return CaseTag.Unclassifiable, diag


def classify_case(params: ChainParams, tol: float = 1e-8, source: str = "exact") -> CaseLabel:
    """Decide which of the five ground/first-excited cases a point is in.

    Case3 means the NS vacuum is the spin ground state while the R vacuum
    energy appears nowhere in the spin spectrum.

    Parameters
    ----------
    source : {"exact", "fermionic"}
        ``"exact"`` diagonalizes the spin chain (L <= 13). ``"fermionic"``
        assembles the low-lying spin levels from both sectors with the parity
        rule, which is orders of magnitude faster and agrees with the exact
        path wherever both run.

    Raises
    ------
    Unclassifiable
        When no case table holds within ``tol``.
    """
    e_ns = sector_ground_energy(params, Sector.NS)
    e_r = sector_ground_energy(params, Sector.R)
    if source == "exact":
        levels = parity_resolved_spectrum(params).all_levels
        complete_below = np.inf
    elif source == "fermionic":
        ceiling = max(e_ns, e_r) + 2 * tol
        levels, _ = physical_levels(params, e_max=ceiling)
        if len(levels) < 2:
            levels, _ = physical_levels(params, cap=2)
            ceiling = levels[1]
        complete_below = max(ceiling, levels[1])
    else:
        raise ValueError(f"unknown source {source!r}")
    tag, diag = _match_table(np.asarray(levels), e_ns, e_r, tol, complete_below)
    diag["source"] = source
    if tag == CaseTag.Unclassifiable:
        raise Unclassifiable(f"no case table matches at {params}", diag)
    return CaseLabel(tag, diag)


@dataclass
class MatchReport:
    """Outcome of matching fermionic levels against spin parity blocks.

    ``fractions[(sector, fermion_parity, spin_parity)]`` is the fraction of the
    fermionic group matched inside that spin block.
    """

    fractions: dict
    residual_max: dict
    rule: dict
    union_max_residual: float
    union_complete: bool

    def to_dict(self) -> dict:
        def key(k):
            sec, fp, sp = k
            return f"{sec.value}:{'even' if fp == 1 else 'odd'}->spin{'+' if sp == 1 else '-'}"

        return {
            "fractions": {key(k): v for k, v in self.fractions.items()},
            "residual_max": {key(k): v for k, v in self.residual_max.items()},
            "rule": {
                f"{sec.value}:{'even' if fp == 1 else 'odd'}": ("+" if sp == 1 else "-")
                for (sec, fp), sp in self.rule.items()
            },
            "union_max_residual": self.union_max_residual,
            "union_complete": self.union_complete,
        }


def _greedy_match(a, b, tol):
    """Match sorted ``a`` into sorted ``b`` in one pass; returns residuals of matched pairs."""
    i = j = 0
    res = []
    while i < len(a) and j < len(b):
        d = a[i] - b[j]
        if abs(d) < tol:
            res.append(abs(d))
            i += 1
            j += 1
        elif d < 0:
            i += 1
        else:
            j += 1
    return res


def match_spectra(fermionic, exact: SpinSpectrum, tol: float = 1e-8) -> MatchReport:
    """Compare fermionic many-body spectra with the spin spectrum.

    Parameters
    ----------
    fermionic : ManyBodySpectrum or sequence of them
        Typically the full NS and R spectra (parity "any").
    exact : SpinSpectrum

    The report also records which spin block each (sector, parity) group lands
    in fully, and the multiset residual between the spin spectrum and the union
    of the groups selected by the parity rule of :mod:`xychain.fermions`.
    """
    if isinstance(fermionic, ManyBodySpectrum):
        fermionic = [fermionic]
    fractions, resmax, rule = {}, {}, {}
    for spec in fermionic:
        parities = spec.parities
        for fp in (1, -1):
            group = np.sort(spec.energies[parities == fp])
            if len(group) == 0:
                continue
            for sp in (1, -1):
                res = _greedy_match(group, exact.block(sp), tol)
                key = (spec.sector, fp, sp)
                fractions[key] = len(res) / len(group)
                resmax[key] = max(res) if res else float("inf")
                if len(res) == len(group):
                    rule[(spec.sector, fp)] = sp

    union = []
    complete = True
    for spec in fermionic:
        want = physical_parity(exact.params, spec.sector)
        union.append(spec.energies[spec.parities == want])
        complete &= not spec.truncated
    union = np.sort(np.concatenate(union)) if union else np.zeros(0)
    target = exact.all_levels
    if complete and len(union) == len(target):
        union_res = float(np.max(np.abs(union - target)))
    else:
        union_res = float("inf")
        complete = False
    return MatchReport(fractions, resmax, rule, union_res, complete)

