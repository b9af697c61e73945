"""CHSH tests under passive, photon-number-conserving local operations.

Two parties share one excitation delocalized over modes A and B plus one
local reference mode each (A' and B'). Passive optics cannot see coherences
between different local photon numbers, so the accessible state is the
projection of |phi>|+>|+> onto local number sectors; with the parity-block
observables below it still violates CHSH.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .linalg import as_hermitian

# one party's pair of modes, occupation basis |n, n'> at index 2n + n'
_IDX = {(n, npr): 2 * n + npr for n in (0, 1) for npr in (0, 1)}
PARTY_DIM = 4


def _party_number_projectors() -> list[np.ndarray]:
    sectors = {0: [(0, 0)], 1: [(0, 1), (1, 0)], 2: [(1, 1)]}
    out = []
    for total in (0, 1, 2):
        p = np.zeros((PARTY_DIM, PARTY_DIM), dtype=complex)
        for occ in sectors[total]:
            i = _IDX[occ]
            p[i, i] = 1.0
        out.append(p)
    return out


def _single_photon_ops() -> tuple[np.ndarray, np.ndarray]:
    """sigma_x and sigma_z on the span of |0,1> and |1,0>."""
    sx = np.zeros((PARTY_DIM, PARTY_DIM), dtype=complex)
    sx[_IDX[(0, 1)], _IDX[(1, 0)]] = 1.0
    sx[_IDX[(1, 0)], _IDX[(0, 1)]] = 1.0
    sz = np.zeros((PARTY_DIM, PARTY_DIM), dtype=complex)
    sz[_IDX[(0, 1)], _IDX[(0, 1)]] = 1.0
    sz[_IDX[(1, 0)], _IDX[(1, 0)]] = -1.0
    return sx, sz


def reference_observables() -> tuple[list[np.ndarray], list[np.ndarray]]:
    """The dichotomic settings A_1, A_2 and B_1, B_2 on each party's modes."""
    sx, sz = _single_photon_ops()
    p00 = np.zeros((PARTY_DIM, PARTY_DIM), dtype=complex)
    p00[_IDX[(0, 0)], _IDX[(0, 0)]] = 1.0
    p11 = np.zeros((PARTY_DIM, PARTY_DIM), dtype=complex)
    p11[_IDX[(1, 1)], _IDX[(1, 1)]] = 1.0
    a = [p00 - p11 + sz, p00 - p11 + sx]
    b = [
        -p00 + p11 + (sx - sz) / sqrt(2.0),
        -p00 + p11 - (sx + sz) / sqrt(2.0),
    ]
    return a, b


def outcome_sign_tables() -> dict:
    """Detector-count to +-1 label maps realizing the reference settings.

    Keys are (N1, N2) photon counts at the two local detectors; the tables
    express how the dichotomic outcomes are read off in hardware and are
    exercised in tests only through the operator identities they encode.
    """
    return {
        "A": {(0, 0): +1, (0, 1): +1, (1, 1): -1, (1, 0): -1},
        "B": {(1, 1): +1, (0, 1): +1, (0, 0): -1, (1, 0): -1},
    }


def shared_pure_state() -> np.ndarray:
    """|phi>_AB |+>_A' |+>_B' arranged as (A A') x (B B'), a 16-vector."""
    amp = 1.0 / (2.0 * sqrt(2.0))
    psi = np.zeros(PARTY_DIM * PARTY_DIM, dtype=complex)
    for ap in (0, 1):
        for bp in (0, 1):
            psi[PARTY_DIM * _IDX[(0, ap)] + _IDX[(1, bp)]] += amp
            psi[PARTY_DIM * _IDX[(1, ap)] + _IDX[(0, bp)]] += amp
    return psi


def dephase_local_number(rho: np.ndarray) -> np.ndarray:
    """Project a two-party state onto joint local photon-number sectors."""
    rho = np.asarray(rho, dtype=complex)
    projs = _party_number_projectors()
    out = np.zeros_like(rho)
    for pa in projs:
        for pb in projs:
            p = np.kron(pa, pb)
            out += p @ rho @ p
    return out


def build_dephased_state() -> np.ndarray:
    """The 16-dim state the parties can actually exploit after dephasing."""
    psi = shared_pure_state()
    return dephase_local_number(np.outer(psi, psi.conj()))


def entangled_component() -> np.ndarray:
    """The surviving maximally entangled vector in the (1,1) number sector."""
    v = np.zeros(PARTY_DIM * PARTY_DIM, dtype=complex)
    v[PARTY_DIM * _IDX[(0, 1)] + _IDX[(1, 0)]] = 1.0 / sqrt(2.0)
    v[PARTY_DIM * _IDX[(1, 0)] + _IDX[(0, 1)]] = 1.0 / sqrt(2.0)
    return v


@dataclass
class BellScenario:
    """A two-party state with two dichotomic settings per side."""

    state: np.ndarray
    alice: list[np.ndarray]
    bob: list[np.ndarray]
    dich_tol: float = 1e-10

    def __post_init__(self):
        self.state = as_hermitian(self.state, herm_tol=1e-9)
        if len(self.alice) != 2 or len(self.bob) != 2:
            raise ValueError("need exactly two settings per party")
        da = self.alice[0].shape[0]
        db = self.bob[0].shape[0]
        if self.state.shape[0] != da * db:
            raise ValueError("state dimension must factor as alice x bob")
        w = np.linalg.eigvalsh(self.state)
        if w[0] < -1e-9 or abs(np.trace(self.state).real - 1.0) > 1e-9:
            raise ValueError("state must be PSD with unit trace")
        for o in self.alice + self.bob:
            w = np.linalg.eigvalsh(as_hermitian(o, herm_tol=1e-9))
            if np.max(np.abs(np.abs(w) - 1.0)) > self.dich_tol:
                raise ValueError("observables must be dichotomic (eigenvalues +-1)")


def reference_scenario() -> BellScenario:
    a, b = reference_observables()
    return BellScenario(state=build_dephased_state(), alice=a, bob=b)


def chsh_operator(alice, bob) -> np.ndarray:
    a1, a2 = alice
    b1, b2 = bob
    return np.kron(a1, b1) + np.kron(a1, b2) + np.kron(a2, b1) - np.kron(a2, b2)


def chsh_value(s: BellScenario) -> float:
    """tr{rho (A1 B1 + A1 B2 + A2 B1 - A2 B2)}."""
    return float(np.trace(s.state @ chsh_operator(s.alice, s.bob)).real)


def chsh_mixture_bound() -> float:
    """Weighted bound: separable weight 6/8 at 2 plus entangled 2/8 at 2 sqrt 2."""
    return 6.0 / 8.0 * 2.0 + 2.0 / 8.0 * 2.0 * sqrt(2.0)


def _sign_observable(g: np.ndarray) -> np.ndarray:
    w, u = np.linalg.eigh(as_hermitian(g, herm_tol=1e-8))
    s = np.where(w >= 0.0, 1.0, -1.0)
    return (u * s) @ u.conj().T


def optimize_chsh_seesaw(rho: np.ndarray, dims: tuple[int, int], restarts: int = 20,
                         iters: int = 500, seed: int = 0,
                         seeds_ab: list | None = None):
    """Locally optimal CHSH value by alternating sign-operator updates.

    Fixing Bob, Alice's optimal dichotomic observables are the operator
    signs of the partial expectations tr_B{rho (1 x (B1 +- B2))}; iterating
    both sides is monotonically nondecreasing. Returns (value, (A, B)).
    """
    da, db = dims
    rho = as_hermitian(rho, herm_tol=1e-9)
    if rho.shape[0] != da * db:
        raise ValueError("state dimension does not match the factorization")
    rng = np.random.default_rng(seed)
    r4 = rho.reshape(da, db, da, db)

    def tr_b(c):  # tr_B(rho (1 x C))
        return np.einsum("ibjc,cb->ij", r4, c)

    def tr_a(c):  # tr_A(rho (C x 1))
        return np.einsum("ibjc,ji->bc", r4, c)

    def random_dichotomic(d):
        g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        return _sign_observable(g + g.conj().T)

    best_val, best_obs = -np.inf, None
    starts = list(seeds_ab or [])
    while len(starts) < restarts:
        starts.append(([random_dichotomic(da), random_dichotomic(da)],
                       [random_dichotomic(db), random_dichotomic(db)]))
    for alice, bob in starts:
        alice = [np.asarray(a, dtype=complex) for a in alice]
        bob = [np.asarray(b, dtype=complex) for b in bob]
        val = -np.inf
        for _ in range(iters):
            g1 = tr_b(bob[0] + bob[1])
            g2 = tr_b(bob[0] - bob[1])
            alice = [_sign_observable(g1), _sign_observable(g2)]
            h1 = tr_a(alice[0] + alice[1])
            h2 = tr_a(alice[0] - alice[1])
            bob = [_sign_observable(h1), _sign_observable(h2)]
            new = float(np.trace(rho @ chsh_operator(alice, bob)).real)
            if new - val < 1e-12:
                val = new
                break
            val = new
        if val > best_val:
            best_val, best_obs = val, (alice, bob)
    return best_val, best_obs
