"""Battery spectrum analysis: maximal chains and joint eigenspace structure.

A chain is a maximal run of battery levels spaced exactly by the target gap
``delta``; a level joins a chain only through consecutive delta steps that are
actually present in the spectrum, not merely commensurate gaps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def default_grouping_tol(levels, delta: float) -> float:
    levels = np.asarray(levels, dtype=float)
    spread = float(levels.max() - levels.min()) if levels.size else 0.0
    return 1e-9 * max(delta, spread)


@dataclass(frozen=True)
class Chain:
    """One maximal chain nu + k*delta, k = 0..length-1."""

    nu: float
    level_ids: tuple[int, ...]  # indices into the input level list, energy-ascending

    @property
    def length(self) -> int:
        return len(self.level_ids)


@dataclass(frozen=True)
class ChainDecomposition:
    delta: float
    levels: np.ndarray
    chains: tuple[Chain, ...]  # sorted by nu
    grouping_tol: float
    # almost-chaining level pairs (id_lo, id_hi, |gap - delta|) within 10x tol
    near_misses: tuple[tuple[int, int, float], ...] = field(default=())

    @property
    def dim(self) -> int:
        return len(self.levels)

    def to_json(self) -> dict:
        return {
            "delta": self.delta,
            "levels": [float(x) for x in self.levels],
            "grouping_tol": self.grouping_tol,
            "chains": [
                {"nu": c.nu, "length": c.length, "level_ids": list(c.level_ids)}
                for c in self.chains
            ],
            "near_misses": [
                {"low_id": a, "high_id": b, "gap_mismatch": g}
                for a, b, g in self.near_misses
            ],
        }


def decompose_chains(battery_levels, delta: float, grouping_tol: float | None = None) -> ChainDecomposition:
    """Partition a battery spectrum into maximal chains (nu_j + k*delta).

    Parameters
    ----------
    battery_levels : array_like
        Non-degenerate eigenvalues of the battery Hamiltonian, any order.
    delta : float
        Target level gap, > 0.
    grouping_tol : float, optional
        Two gaps are identified when they differ by at most this amount.
        Defaults to 1e-9 * max(delta, spread of levels).

    Returns
    -------
    ChainDecomposition
        Chains sorted by offset nu; every input index appears exactly once.
    """
    levels = np.asarray(battery_levels, dtype=float)
    if levels.ndim != 1 or levels.size == 0:
        raise ValueError("battery_levels must be a non-empty 1-d array")
    if not np.all(np.isfinite(levels)):
        raise ValueError("battery_levels must be finite")
    if not (delta > 0):
        raise ValueError("delta must be positive")
    tol = default_grouping_tol(levels, delta) if grouping_tol is None else float(grouping_tol)

    order = np.argsort(levels)
    s = levels[order]
    gaps = np.diff(s)
    if np.any(gaps <= tol):
        k = int(np.argmin(gaps))
        raise ValueError(
            f"degenerate battery spectrum: levels {order[k]} and {order[k+1]} "
            f"differ by {gaps[k]:.3e} <= grouping_tol {tol:.3e}"
        )

    n = levels.size
    used = np.zeros(n, dtype=bool)
    chains: list[Chain] = []
    # s is ascending, so scanning left to right always starts chains at their bottom
    for start in range(n):
        if used[start]:
            continue
        ids = [start]
        used[start] = True
        cur = start
        while True:
            target = s[cur] + delta
            j = np.searchsorted(s, target)
            nxt = None
            for cand in (j - 1, j):
                if 0 <= cand < n and not used[cand] and abs(s[cand] - target) <= tol:
                    nxt = cand
                    break
            if nxt is None:
                break
            ids.append(nxt)
            used[nxt] = True
            cur = nxt
        chains.append(Chain(nu=float(s[ids[0]]), level_ids=tuple(int(order[i]) for i in ids)))

    chains.sort(key=lambda c: c.nu)

    near: list[tuple[int, int, float]] = []
    for i in range(n):
        target = s[i] + delta
        j = np.searchsorted(s, target)
        for cand in (j - 1, j, j + 1):
            if 0 <= cand < n and cand != i:
                mismatch = abs(s[cand] - s[i] - delta)
                if tol < mismatch <= 10.0 * tol:
                    near.append((int(order[i]), int(order[cand]), float(mismatch)))
    return ChainDecomposition(
        delta=float(delta),
        levels=levels,
        chains=tuple(chains),
        grouping_tol=tol,
        near_misses=tuple(near),
    )


@dataclass(frozen=True)
class Sector:
    """A joint eigenspace of H_S x 1 + 1 x H_B: equal-sum pairs (m, n)."""

    energy: float
    pairs: tuple[tuple[int, int], ...]

    @property
    def rank(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class JointEigenstructure:
    target_levels: np.ndarray
    battery_levels: np.ndarray
    sectors: tuple[Sector, ...]  # sorted by energy
    grouping_tol: float

    @property
    def total_rank(self) -> int:
        return sum(s.rank for s in self.sectors)

    def to_json(self) -> dict:
        return {
            "target_levels": [float(x) for x in self.target_levels],
            "battery_levels": [float(x) for x in self.battery_levels],
            "sectors": [
                {"energy": s.energy, "rank": s.rank, "pairs": [list(p) for p in s.pairs]}
                for s in self.sectors
            ],
        }


def _check_nondegenerate(levels: np.ndarray, tol: float, name: str) -> None:
    s = np.sort(levels)
    if s.size > 1 and np.min(np.diff(s)) <= tol:
        raise ValueError(f"degenerate {name} spectrum within grouping_tol {tol:.3e}")


def joint_eigenspaces(target_levels, battery_levels, grouping_tol: float | None = None) -> JointEigenstructure:
    """Group all sums E_m + mu_n into equal-energy sectors.

    Within a sector the m indices are pairwise distinct and so are the n
    indices (a consequence of both spectra being non-degenerate), which is
    what makes the per-sector POVM blocks well defined.
    """
    et = np.asarray(target_levels, dtype=float)
    eb = np.asarray(battery_levels, dtype=float)
    if et.ndim != 1 or eb.ndim != 1 or et.size == 0 or eb.size == 0:
        raise ValueError("spectra must be non-empty 1-d arrays")
    if not (np.all(np.isfinite(et)) and np.all(np.isfinite(eb))):
        raise ValueError("spectra must be finite")
    spread = max(et.max() - et.min(), eb.max() - eb.min(), 1.0)
    tol = 1e-9 * spread if grouping_tol is None else float(grouping_tol)
    _check_nondegenerate(et, tol, "target")
    _check_nondegenerate(eb, tol, "battery")

    sums = [(et[m] + eb[n], m, n) for m in range(et.size) for n in range(eb.size)]
    sums.sort(key=lambda t: t[0])
    sectors: list[Sector] = []
    cur: list[tuple[int, int]] = []
    cur_e = None
    for e, m, n in sums:
        if cur_e is None or abs(e - cur_e) <= tol:
            cur.append((int(m), int(n)))
            cur_e = e if cur_e is None else cur_e
        else:
            sectors.append(Sector(energy=float(cur_e), pairs=tuple(cur)))
            cur = [(int(m), int(n))]
            cur_e = e
    sectors.append(Sector(energy=float(cur_e), pairs=tuple(cur)))

    out = JointEigenstructure(
        target_levels=et, battery_levels=eb, sectors=tuple(sectors), grouping_tol=tol
    )
    if out.total_rank != et.size * eb.size:
        raise AssertionError("sector ranks do not sum to the product of dimensions")
    return out
