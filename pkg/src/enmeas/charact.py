"""Characterization of the measurement sets reachable with constrained batteries.

Membership of a target POVM in the reachable set is posed as slack
minimization: minimize t such that the per-sector decomposition reproduces
every element within t in operator norm. A slack optimum below tolerance
yields the explicit decomposition; above tolerance the dual of the slack
program is a Farkas functional that lower-bounds the distance of the POVM
from the set, so non-membership always carries a quantitative margin.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import sdp
from .linalg import operator_norm
from .povm import Povm
from .spectra import joint_eigenspaces
from .tau import BatteryState

MEMBER_TOL = 1e-7  # reconstruction residual below this counts as membership


@dataclass
class MembershipVerdict:
    verdict: str  # member | non_member | undecided
    slack: float  # optimal reconstruction residual (inner program for energy)
    certificate: dict = field(default_factory=dict)
    gap_bound: float | None = None  # only for energy programs

    @property
    def is_member(self) -> bool:
        return self.verdict == "member"


# ---------------------------------------------------------------------------
# Program assembly for a qubit target on the d-level ladder battery
# ---------------------------------------------------------------------------

@dataclass
class _LadderProgram:
    problem: sdp.BlockSdp
    d: int
    n_out: int
    blocks: list[list[int]]  # blocks[k][x]
    p_vars: list[int] | None
    tail_var: int | None
    t_var: int | None
    sector_rows: list[list[int]]  # target index of each sector basis row


def _sector_rows_ladder(d: int, outer: bool) -> list[list[int]]:
    rows = []
    for k in range(d + 1):
        if k == 0:
            rows.append([0])
        elif k == d and not outer:
            rows.append([1])
        else:
            rows.append([0, 1])
    return rows


def _restrict(e: np.ndarray, rows: list[int]) -> np.ndarray:
    return np.array([[e[a, b] for b in rows] for a in rows], dtype=complex)


def _assemble_ladder(
    m: Povm | None,
    d: int,
    n_out: int | None = None,
    *,
    outer: bool = False,
    energy_cap: float | None = None,
    q_fixed: np.ndarray | None = None,
    slack: bool = True,
    objective: list[np.ndarray] | None = None,
) -> _LadderProgram:
    """Shared builder for the finite / inner / outer / fixed-weight programs.

    Sector k of the ladder couples target level 0 with battery level k and
    target level 1 with battery level k-1; the chain ends are rank one. The
    outer relaxation keeps a rank-two top sector fed by the aggregated tail
    weight variable.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if m is not None:
        if m.dim != 2:
            raise ValueError("the ladder programs characterize qubit POVMs")
        n_out = m.n_outcomes
    if n_out is None:
        raise ValueError("need an outcome count")
    if outer and d < 2:
        raise ValueError("the outer relaxation needs d >= 2")

    p = sdp.BlockSdp()
    rows = _sector_rows_ladder(d, outer)
    blocks = [[p.add_block(len(rows[k]), f"B[{k}][{x}]") for x in range(n_out)]
              for k in range(d + 1)]
    if q_fixed is None:
        p_vars = [p.add_scalar(f"p{k}") for k in range(d)]
    else:
        q_fixed = np.asarray(q_fixed, dtype=float)
        if q_fixed.size != d or np.any(q_fixed < 0):
            raise ValueError("fixed energy distribution must be d nonnegative weights")
        if abs(q_fixed.sum() - 1.0) > 1e-9:
            raise ValueError("fixed energy distribution must sum to 1")
        p_vars = None
    tail = p.add_scalar("tail") if outer else None

    basis2 = sdp.hermitian_basis(2)

    # per-sector completeness: sum_x B^k_x = diag(weight_k, weight_{k-1})
    for k in range(d + 1):
        dim_k = len(rows[k])
        for e in sdp.hermitian_basis(dim_k):
            coeffs = {blocks[k][x]: e for x in range(n_out)}
            rhs = 0.0
            diag = np.real(np.diag(e))
            for i, a in enumerate(rows[k]):
                w = k if a == 0 else k - 1  # battery level feeding this row
                if diag[i] == 0.0:
                    continue
                if outer and k == d:
                    # top sector holds diag(P_d, P_d + p_{d-1})
                    if a == 0:
                        _add_weight(coeffs, tail, -diag[i])
                    else:
                        _add_weight(coeffs, tail, -diag[i])
                        rhs += _weight_term(coeffs, p_vars, q_fixed, d - 1, diag[i])
                else:
                    if 0 <= w <= d - 1:
                        rhs += _weight_term(coeffs, p_vars, q_fixed, w, diag[i])
            p.add_equality(coeffs, rhs)

    # normalization of the energy distribution
    if q_fixed is None:
        coeffs = {pv: 1.0 for pv in p_vars}
        if outer:
            coeffs[tail] = 1.0
        p.add_equality(coeffs, 1.0)
    elif outer:
        raise ValueError("fixed distributions are only supported for the inner form")

    # mean-energy cap in units of the gap
    if energy_cap is not None:
        if q_fixed is not None:
            raise ValueError("energy cap with a fixed distribution is redundant")
        coeffs = {p_vars[k]: float(k) for k in range(1, d)}
        if outer:
            coeffs[tail] = float(d)
        p.add_inequality(coeffs, float(energy_cap))

    t_var = None
    if m is not None and slack:
        t_var = p.add_scalar("t")
        us = [p.add_block(2, f"U{x}") for x in range(n_out)]
        vs = [p.add_block(2, f"V{x}") for x in range(n_out)]
        eye2 = np.eye(2, dtype=complex)
        for x in range(n_out):
            mx = m.elements[x]
            for e in basis2:
                te = float(np.trace(e @ eye2).real)
                rhs = float(np.trace(e @ mx).real)
                coeffs = {blocks[k][x]: _restrict(e, rows[k]) for k in range(d + 1)}
                coeffs = {b: c for b, c in coeffs.items() if np.max(np.abs(c)) > 0}
                cu = dict(coeffs)
                cu[us[x]] = e
                if te != 0.0:
                    cu[t_var] = -te
                p.add_equality(cu, rhs)
                cv = dict(coeffs)
                cv[vs[x]] = -e
                if te != 0.0:
                    cv[t_var] = te
                p.add_equality(cv, rhs)
        p.set_objective({t_var: -1.0})
    elif m is not None:
        # raw feasibility form: the decomposition must reproduce M exactly
        for x in range(n_out):
            mx = m.elements[x]
            for e in basis2:
                rhs = float(np.trace(e @ mx).real)
                coeffs = {blocks[k][x]: _restrict(e, rows[k]) for k in range(d + 1)}
                coeffs = {b: c for b, c in coeffs.items() if np.max(np.abs(c)) > 0}
                p.add_equality(coeffs, rhs)
    elif objective is not None:
        if len(objective) != n_out:
            raise ValueError("objective needs one Hermitian matrix per outcome")
        obj = {}
        for x, vx in enumerate(objective):
            vx = np.asarray(vx, dtype=complex)
            for k in range(d + 1):
                sub = _restrict(vx, rows[k])
                if np.max(np.abs(sub)) > 0:
                    obj[blocks[k][x]] = sub
        p.set_objective(obj)

    return _LadderProgram(problem=p, d=d, n_out=n_out, blocks=blocks,
                          p_vars=p_vars, tail_var=tail, t_var=t_var,
                          sector_rows=rows)


def _weight_term(coeffs, p_vars, q_fixed, w, diag_coeff) -> float:
    """Move weight w's contribution to the variable side or return it as rhs."""
    if q_fixed is not None:
        return float(diag_coeff * q_fixed[w])
    _add_weight(coeffs, p_vars[w], -diag_coeff)
    return 0.0


def _add_weight(coeffs, var, value) -> None:
    if var in coeffs:
        coeffs[var] = coeffs[var] + value * np.eye(1)
    else:
        coeffs[var] = value * np.eye(1)


def _reconstruct(prog: _LadderProgram, sol: sdp.SdpSolution) -> list[np.ndarray]:
    out = []
    for x in range(prog.n_out):
        mx = np.zeros((2, 2), dtype=complex)
        for k in range(prog.d + 1):
            rows = prog.sector_rows[k]
            sub = sol.block(prog.blocks[k][x])
            for i, a in enumerate(rows):
                for j, b in enumerate(rows):
                    mx[a, b] += sub[i, j]
        out.append(mx)
    return out


def _solve_slack(prog, feas_tol: float, gap_tol: float):
    """Solve a slack program; the slack estimate is the certified dual bound.

    Weak duality makes -b.y a lower bound on the optimal residual whenever
    the dual residual is tiny, so a stalled-but-dual-converged solve (which
    happens exactly on the membership boundary, where the optimal face is
    degenerate) still yields a trustworthy verdict.
    """
    sol = sdp.solve(prog.problem, feas_tol=feas_tol, gap_tol=gap_tol)
    if sol.status in ("optimal", "feasible"):
        return max(0.0, -sol.dual_objective), sol
    near_optimal = (
        sol.dual_residual <= 1e-7
        and abs(sol.objective - sol.dual_objective) <= 1e-5
    )
    if near_optimal:
        return max(0.0, -sol.dual_objective), sol
    raise RuntimeError(f"membership program did not converge: {sol.status}")


def _member_certificate(prog: _LadderProgram, sol: sdp.SdpSolution) -> dict:
    cert = {
        "blocks": {
            k: [sol.block(prog.blocks[k][x]) for x in range(prog.n_out)]
            for k in range(prog.d + 1)
        },
        "reconstruction": _reconstruct(prog, sol),
    }
    if prog.p_vars is not None:
        cert["p"] = np.array([sol.scalar(v) for v in prog.p_vars])
    if prog.tail_var is not None:
        cert["tail_weight"] = sol.scalar(prog.tail_var)
    return cert


def _farkas_certificate(prog: _LadderProgram, sol: sdp.SdpSolution, slack: float) -> dict:
    comp = prog.problem.compile()
    y = sol.y
    aty = sdp._apply_at(comp.a_list, comp.dims, y)
    # dual feasibility of the slack program: A*(y) - C >= 0 blockwise
    cmats = comp.c
    min_eig = min(
        float(np.linalg.eigvalsh(aty[b] - cmats[b])[0]) for b in range(len(comp.dims))
    )
    return {
        "dual": y.copy(),
        "dual_min_eig": min_eig,
        "dual_objective": float(np.dot(comp.b, y)),
        "margin": slack,
    }


def verify_member_certificate(m: Povm, cert: dict, tol: float = MEMBER_TOL) -> bool:
    """Recheck PSD blocks and elementwise reconstruction from raw data."""
    recon = cert["reconstruction"]
    if len(recon) != m.n_outcomes:
        return False
    for blocks_x in zip(*cert["blocks"].values()):
        for b in blocks_x:
            if float(np.linalg.eigvalsh(b)[0]) < -10 * tol:
                return False
    return all(
        operator_norm(r - mx) <= 10 * tol for r, mx in zip(recon, m.elements)
    )


def verify_nonmember_certificate(m: Povm, cert: dict, builder, tol: float = 1e-7) -> bool:
    """Replay the Farkas functional against a freshly assembled program.

    The dual vector must be feasible for the slack program's dual
    (A*(y) - C PSD on every block) and its objective b.y = -margin must be
    strictly negative; weak duality then bounds every decomposition's
    residual away from zero.
    """
    prog = builder()
    comp = prog.problem.compile()
    y = np.asarray(cert["dual"], dtype=float)
    if y.size != len(comp.a_list):
        return False
    aty = sdp._apply_at(comp.a_list, comp.dims, y)
    min_eig = min(
        float(np.linalg.eigvalsh(aty[b] - comp.c[b])[0]) for b in range(len(comp.dims))
    )
    b_dot_y = float(np.dot(comp.b, y))
    return min_eig >= -tol and b_dot_y < -max(tol, 0.5 * cert["margin"])


# ---------------------------------------------------------------------------
# Public programs
# ---------------------------------------------------------------------------

def finite_membership_program(m: Povm, d: int, slack: bool = True) -> sdp.BlockSdp:
    """The assembled block SDP behind membership_finite (for inspection)."""
    return _assemble_ladder(m, d, slack=slack).problem


def membership_finite(m: Povm, d: int,
                      member_tol: float = MEMBER_TOL,
                      feas_tol: float = 1e-8,
                      gap_tol: float = 1e-8) -> MembershipVerdict:
    """Decide whether a qubit POVM is reachable with a d-level battery."""
    prog = _assemble_ladder(m, d, slack=True)
    slack, sol = _solve_slack(prog, feas_tol, gap_tol)
    if slack <= member_tol:
        return MembershipVerdict(
            verdict="member", slack=slack, certificate=_member_certificate(prog, sol))
    return MembershipVerdict(
        verdict="non_member", slack=slack,
        certificate=_farkas_certificate(prog, sol, slack))


def optimize_finite(v: list[np.ndarray], d: int,
                    feas_tol: float = 1e-8, gap_tol: float = 1e-8):
    """Maximize sum_x tr(M_x V_x) over POVMs reachable with d battery levels.

    Returns (value, optimal Povm, SdpSolution); the dual solution certifies
    the value from above within the solver gap.
    """
    v = [np.asarray(x, dtype=complex) for x in v]
    prog = _assemble_ladder(None, d, n_out=len(v), slack=False, objective=v)
    sol = sdp.solve(prog.problem, feas_tol=feas_tol, gap_tol=gap_tol)
    if sol.status not in ("optimal", "feasible"):
        raise RuntimeError(f"optimization did not converge: {sol.status}")
    elems = _reconstruct(prog, sol)
    return sol.objective, Povm(elements=elems, tol=1e-6), sol


def membership_energy(m: Povm, ebar: float, delta: float, d: int,
                      member_tol: float = MEMBER_TOL,
                      feas_tol: float = 1e-8, gap_tol: float = 1e-8) -> MembershipVerdict:
    """Membership test for mean battery energy <= ebar at gap delta.

    Inner truncation feasible -> member; outer relaxation infeasible ->
    non_member; otherwise undecided with the truncation gap bound
    ebar / (delta (d-1)), carrying both the failed inner margin and the
    feasible outer decomposition.
    """
    if ebar <= 0 or delta <= 0:
        raise ValueError("ebar and delta must be positive")
    if d < 2:
        raise ValueError("d must be >= 2")
    z = ebar / delta
    inner = _assemble_ladder(m, d, energy_cap=z, slack=True)
    s_in, sol_in = _solve_slack(inner, feas_tol, gap_tol)
    if s_in <= member_tol:
        return MembershipVerdict(
            verdict="member", slack=s_in,
            certificate=_member_certificate(inner, sol_in),
            gap_bound=z / (d - 1))
    outer = _assemble_ladder(m, d, outer=True, energy_cap=z, slack=True)
    s_out, sol_out = _solve_slack(outer, feas_tol, gap_tol)
    if s_out > member_tol:
        return MembershipVerdict(
            verdict="non_member", slack=s_out,
            certificate=_farkas_certificate(outer, sol_out, s_out),
            gap_bound=z / (d - 1))
    return MembershipVerdict(
        verdict="undecided", slack=s_in,
        certificate={
            "inner_margin": _farkas_certificate(inner, sol_in, s_in),
            "outer_point": _member_certificate(outer, sol_out),
        },
        gap_bound=z / (d - 1))


def optimize_energy(v: list[np.ndarray], ebar: float, delta: float, d: int,
                    feas_tol: float = 1e-8, gap_tol: float = 1e-8):
    """Bracket max sum_x tr(M_x V_x) over the bounded-energy set.

    Returns (upper, lower, inner-feasible Povm, gap): the outer relaxation
    upper-bounds the unknown optimum, the inner truncation provides an
    attaining POVM, and the gap shrinks as O(ebar / (delta d)).
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    v = [np.asarray(x, dtype=complex) for x in v]
    z = ebar / delta
    outer = _assemble_ladder(None, d, n_out=len(v), outer=True,
                             energy_cap=z, slack=False, objective=v)
    sol_o = sdp.solve(outer.problem, feas_tol=feas_tol, gap_tol=gap_tol)
    inner = _assemble_ladder(None, d, n_out=len(v), energy_cap=z,
                             slack=False, objective=v)
    sol_i = sdp.solve(inner.problem, feas_tol=feas_tol, gap_tol=gap_tol)
    if sol_o.status not in ("optimal", "feasible") or sol_i.status not in ("optimal", "feasible"):
        raise RuntimeError(
            f"energy optimization did not converge: outer {sol_o.status}, inner {sol_i.status}")
    # certified bracket: the outer dual bounds the relaxation from above,
    # the inner primal is (near-)attained, so the gap absorbs solver error
    upper = max(sol_o.objective, sol_o.dual_objective)
    lower = min(sol_i.objective, sol_i.dual_objective)
    povm = Povm(elements=_reconstruct(inner, sol_i), tol=1e-6)
    return upper, lower, povm, upper - lower


def fixed_distribution_feasible(m: Povm, q, member_tol: float = MEMBER_TOL,
                                feas_tol: float = 1e-8, gap_tol: float = 1e-8):
    """Slack test of reachability when the battery populations are frozen."""
    q = np.asarray(q, dtype=float)
    d = q.size
    prog = _assemble_ladder(m, d, q_fixed=q, slack=True)
    slack, sol = _solve_slack(prog, feas_tol, gap_tol)
    if slack <= member_tol:
        return True, slack, _member_certificate(prog, sol)
    return False, slack, _farkas_certificate(prog, sol, slack)


# ---------------------------------------------------------------------------
# Multi-level targets
# ---------------------------------------------------------------------------

def membership_multilevel(m: Povm, target_levels, battery_levels,
                          member_tol: float = MEMBER_TOL,
                          feas_tol: float = 1e-8,
                          gap_tol: float = 1e-8) -> MembershipVerdict:
    """Membership for a d'-level target against an arbitrary battery spectrum.

    Builds the joint eigenspace sectors of the two spectra; each sector
    carries one PSD block per outcome with completeness diag of the battery
    occupations it touches.
    """
    joint = joint_eigenspaces(target_levels, battery_levels)
    dt = len(joint.target_levels)
    db = len(joint.battery_levels)
    if m.dim != dt:
        raise ValueError("POVM dimension must match the target spectrum")
    n_out = m.n_outcomes

    p = sdp.BlockSdp()
    sblocks = [
        [p.add_block(sec.rank, f"S{s}[{x}]") for x in range(n_out)]
        for s, sec in enumerate(joint.sectors)
    ]
    p_vars = [p.add_scalar(f"p{n}") for n in range(db)]

    for s, sec in enumerate(joint.sectors):
        for e in sdp.hermitian_basis(sec.rank):
            coeffs = {sblocks[s][x]: e for x in range(n_out)}
            diag = np.real(np.diag(e))
            for i, (_, n_idx) in enumerate(sec.pairs):
                if diag[i] != 0.0:
                    _add_weight(coeffs, p_vars[n_idx], -float(diag[i]))
            p.add_equality(coeffs, 0.0)
    p.add_equality({pv: 1.0 for pv in p_vars}, 1.0)

    t_var = p.add_scalar("t")
    us = [p.add_block(dt, f"U{x}") for x in range(n_out)]
    vs = [p.add_block(dt, f"V{x}") for x in range(n_out)]
    eye = np.eye(dt, dtype=complex)
    for x in range(n_out):
        mx = m.elements[x]
        for e in sdp.hermitian_basis(dt):
            te = float(np.trace(e @ eye).real)
            rhs = float(np.trace(e @ mx).real)
            coeffs = {}
            for s, sec in enumerate(joint.sectors):
                ms = [pair[0] for pair in sec.pairs]
                sub = np.array([[e[a, b] for b in ms] for a in ms], dtype=complex)
                if np.max(np.abs(sub)) > 0:
                    coeffs[sblocks[s][x]] = sub
            cu = dict(coeffs)
            cu[us[x]] = e
            if te != 0.0:
                cu[t_var] = -te
            p.add_equality(cu, rhs)
            cv = dict(coeffs)
            cv[vs[x]] = -e
            if te != 0.0:
                cv[t_var] = te
            p.add_equality(cv, rhs)
    p.set_objective({t_var: -1.0})

    sol = sdp.solve(p, feas_tol=feas_tol, gap_tol=gap_tol)
    if sol.status not in ("optimal", "feasible"):
        raise RuntimeError(f"multilevel membership did not converge: {sol.status}")
    slack = -sol.objective
    if slack <= member_tol:
        cert = {
            "sector_blocks": {
                s: [sol.block(sblocks[s][x]) for x in range(n_out)]
                for s in range(len(joint.sectors))
            },
            "p": np.array([sol.scalar(v) for v in p_vars]),
            "sectors": joint,
        }
        return MembershipVerdict(verdict="member", slack=slack, certificate=cert)
    comp = p.compile()
    aty = sdp._apply_at(comp.a_list, comp.dims, sol.y)
    min_eig = min(
        float(np.linalg.eigvalsh(aty[b] - comp.c[b])[0]) for b in range(len(comp.dims))
    )
    return MembershipVerdict(
        verdict="non_member", slack=slack,
        certificate={"dual": sol.y.copy(), "dual_min_eig": min_eig,
                     "dual_objective": float(np.dot(comp.b, sol.y)),
                     "margin": slack})


# ---------------------------------------------------------------------------
# Universality of a fixed resource state
# ---------------------------------------------------------------------------

def universal_state_check(sigma: BatteryState, d: int, trials: int = 60,
                          seed: int = 0, member_tol: float = MEMBER_TOL):
    """Search for a reachable POVM that the fixed state sigma cannot produce.

    Candidates are extreme points of the reachable set, obtained by
    maximizing random rank-one linear functionals; each candidate is
    certified as a member (free energy distribution) and then tested with
    the distribution frozen to sigma's populations. Returns a result dict
    when a counterexample is found, else None.
    """
    if sigma.dim != d:
        raise ValueError("state must live on d ladder levels")
    q = sigma.populations()
    rng = np.random.default_rng(seed)
    for trial in range(trials):
        n_out = 3 + (trial % 2)
        v = []
        for _ in range(n_out):
            g = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            g /= np.linalg.norm(g)
            v.append(np.outer(g, g.conj()))
        value, cand, _ = optimize_finite(v, d)
        verdict = membership_finite(cand, d, member_tol=member_tol)
        if not verdict.is_member:
            continue  # solver noise pushed the candidate marginally outside
        ok, slack, cert = fixed_distribution_feasible(cand, q, member_tol=member_tol)
        if not ok and slack > 10 * member_tol:
            return {
                "trial": trial,
                "povm": cand,
                "objective": v,
                "member_certificate": verdict.certificate,
                "member_slack": verdict.slack,
                "fixed_margin": slack,
                "fixed_certificate": cert,
                "q": q,
            }
    return None
