"""First zeros of real-order Bessel J, the quality function phi, power states.

The best tau reachable at mean battery energy z*Delta is

    phi(z) = min_{lambda > 0} (z + mu(lambda)) / (2 lambda),

where mu(lambda) solves the transcendental equation  j_{mu-1,1} = 2 lambda
(j_{nu,1} = first positive zero of J_nu).  Every extreme point of the
minimand is a global minimum, so a bracketed golden-section search is exact.
The optimizing battery states ("power states") follow from the three-term
recurrence of the ground eigenvector of the associated tridiagonal operator
H_lambda = diag(k) - lambda * (hop + hop').
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import jv

from .tau import BatteryState

# leading coefficient of j_{nu,1} = nu + C1 nu^(1/3) + O(nu^(-1/3)) for large nu
AIRY_C1 = 1.8557571


class BesselRangeError(ValueError):
    """Argument outside the supported evaluation range."""


def bessel_j(nu: float, x: float) -> float:
    """Bessel function of the first kind J_nu(x) for real order nu >= 0.

    Delegates to a library kernel accurate to ~1e-13 relative error in the
    region of interest (x <= 2000); arguments far outside raise
    :class:`BesselRangeError` instead of silently degrading.
    """
    if nu < 0:
        raise ValueError("nu must be >= 0")
    if x < 0:
        raise ValueError("x must be >= 0")
    return _jv_checked(nu, x)


def _jv_checked(nu: float, x: float) -> float:
    if x > 1e9 or nu > 1e9:
        raise BesselRangeError(f"J_nu out of supported range: nu={nu}, x={x}")
    val = float(jv(nu, x))
    if not math.isfinite(val):
        raise BesselRangeError(f"J_{nu}({x}) did not evaluate to a finite value")
    return val


def _first_zero_any(nu: float) -> float:
    """First positive zero of J_nu for any order nu > -1.

    Large orders get a direct bracket from the Airy-zone expansion
    j_{nu,1} = nu + 1.8557 nu^(1/3) + O(nu^(-1/3)); small orders expand
    rightward from a certified positive start (j_{nu,1} exceeds
    sqrt((nu+1)(nu+3)) for every nu > -1) until the sign flips, which
    cannot skip a zero because consecutive zeros are separated by more
    than 3 in this regime.
    """
    if nu <= -1:
        raise ValueError("nu must exceed -1")
    f = lambda x: _jv_checked(nu, x)
    if nu > 5.0:
        t = nu ** (1.0 / 3.0)
        lo = nu + 1.2 * t
        hi = nu + 2.4 * t + 2.0 / t
        flo, fhi = f(lo), f(hi)
        if flo > 0.0 > fhi:
            return float(brentq(f, lo, hi, xtol=1e-13, rtol=1e-15, maxiter=200))
        # asymptotic bracket failed (should not happen); fall through
    lo = 0.95 * math.sqrt((nu + 1.0) * (nu + 3.0))
    if nu > 1.0:
        lo = max(lo, nu + 1.0 * nu ** (1.0 / 3.0))
    flo = f(lo)
    if flo <= 0.0:
        raise BesselRangeError(f"could not certify a positive start for nu={nu}")
    hi = lo
    fhi = flo
    for _ in range(10000):
        hi += 1.0
        fhi = f(hi)
        if fhi <= 0.0:
            break
    else:
        raise BesselRangeError(f"failed to bracket the first zero of J_{nu} from {lo}")
    if fhi == 0.0:
        return hi
    return float(brentq(f, hi - 1.0, hi, xtol=1e-13, rtol=1e-15, maxiter=200))


def first_zero(nu: float) -> float:
    """First positive zero j_{nu,1} of J_nu, nu >= 0, to ~1e-12."""
    if nu < 0:
        raise ValueError("nu must be >= 0")
    return _first_zero_any(nu)


def mu_of_lambda(lam: float) -> float:
    """Solve j_{mu-1,1} = 2*lambda for mu > 0.

    j_{nu,1} grows strictly with the order and sweeps (0, inf) as nu runs
    over (-1, inf), so the solution exists and is unique; it is bracketed by
    (0, 2*lambda + 2) since j_{nu,1} > nu + 1.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    target = 2.0 * lam

    def g(mu: float) -> float:
        return _first_zero_any(mu - 1.0) - target

    lo = 1e-9
    while g(lo) > 0:  # extremely small lambda: shrink the lower end
        lo *= 1e-3
        if lo < 1e-300:
            raise BesselRangeError(f"cannot bracket mu for lambda={lam}")
    hi = target + 2.0
    return float(brentq(g, lo, hi, xtol=1e-12, rtol=1e-15, maxiter=200))


def energy_of_lambda(lam: float, rel_step: float = 1e-5) -> float:
    """Mean energy of the bottom eigenvector of H_lambda.

    E(lambda) = lambda * dmu/dlambda - mu(lambda), with the derivative taken
    by a central difference of relative step ``rel_step``.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    h = rel_step * lam
    dmu = (mu_of_lambda(lam + h) - mu_of_lambda(lam - h)) / (2.0 * h)
    return lam * dmu - mu_of_lambda(lam)


@dataclass(frozen=True)
class PhiResult:
    z: float
    phi: float
    lambda_star: float
    mu_star: float
    energy_check: float  # lambda*dmu/dlambda - mu at the minimizer; should equal z


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_min(f, a: float, b: float, rel_tol: float) -> float:
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    while (b - a) > rel_tol * max(abs(a), abs(b)):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
    return 0.5 * (a + b)


def phi(z: float) -> PhiResult:
    """Best tau at mean energy z (in units of the gap), with its minimizer.

    The minimand (z + mu(lambda)) / (2 lambda) has only global minima, so a
    coarse geometric scan followed by golden-section search (bracket shrunk
    to 1e-10 relative) pins the optimum.
    """
    if z <= 0:
        raise ValueError("z must be positive")

    cache: dict[float, float] = {}

    def h(lam: float) -> float:
        if lam not in cache:
            cache[lam] = (z + mu_of_lambda(lam)) / (2.0 * lam)
        return cache[lam]

    # candidate scales: small-z behavior lambda ~ sqrt(z), large-z growth ~ z^3
    lam_asym = 27.0 * (z + 1.0) ** 3 / (16.0 * AIRY_C1 ** 3)
    lam_small = math.sqrt(z)
    lo = min(lam_small, lam_asym) / 16.0
    hi = max(lam_small, lam_asym) * 16.0
    grid = np.geomspace(lo, hi, 33)
    vals = [h(float(g)) for g in grid]
    i = int(np.argmin(vals))
    # expand outward if the scan minimum sits on an edge
    for _ in range(60):
        if i == 0:
            grid = np.concatenate(([grid[0] / 8.0], grid))
            vals.insert(0, h(float(grid[0])))
            i = int(np.argmin(vals))
        elif i == len(grid) - 1:
            grid = np.concatenate((grid, [grid[-1] * 8.0]))
            vals.append(h(float(grid[-1])))
            i = int(np.argmin(vals))
        else:
            break
    lam_star = _golden_min(h, float(grid[i - 1]), float(grid[i + 1]), 1e-10)
    mu_star = mu_of_lambda(lam_star)
    val = (z + mu_star) / (2.0 * lam_star)
    return PhiResult(
        z=float(z),
        phi=float(val),
        lambda_star=float(lam_star),
        mu_star=float(mu_star),
        energy_check=float(energy_of_lambda(lam_star)),
    )


def truncated_hamiltonian(d: int, lam: float) -> np.ndarray:
    """d-dimensional truncation of H_lambda = diag(k) - lambda*(hop + hop')."""
    h = np.diag(np.arange(d, dtype=float))
    off = -lam * np.ones(d - 1)
    h += np.diag(off, 1) + np.diag(off, -1)
    return h


def characteristic_residual(mu: float, lam: float, d: int) -> float:
    """Continued-fraction residual whose largest root is the bottom eigenvalue.

    Evaluates mu/lam - 1/((1+mu)/lam - 1/(... - 1/((d-1+mu)/lam))) bottom-up;
    it vanishes exactly when -mu is an eigenvalue of the d-level truncation.
    """
    t = (d - 1 + mu) / lam
    for k in range(d - 2, 0, -1):
        t = (k + mu) / lam - 1.0 / t
    return mu / lam - 1.0 / t


def power_state(
    ebar: float,
    delta: float,
    tail_tol: float = 1e-14,
    max_retries: int = 3,
) -> BatteryState:
    """Bounded-mean-energy battery state achieving tau = phi(ebar/delta).

    Coefficients follow c_{k+1} = ((k + mu*)/lambda*) c_k - c_{k-1} with
    c_{-1} = 0, truncated once the running tail population drops below
    ``tail_tol`` past the classical turning point.  The forward recurrence
    is mildly unstable beyond the turning point; the truncation window is
    re-expanded (up to ``max_retries`` times) if the tail has not converged
    before contamination sets in.
    """
    if ebar <= 0 or delta <= 0:
        raise ValueError("ebar and delta must be positive")
    z = ebar / delta
    res = phi(z)
    lam, mu = res.lambda_star, res.mu_star

    turn = max(2.0 * lam - mu, 0.0)  # local hopping dominance ends here
    window = int(turn + 40 + 6.0 * math.sqrt(lam ** (1.0 / 3.0) + turn + z))
    for attempt in range(max_retries + 1):
        coeffs = _run_recurrence(lam, mu, window, tail_tol, turn)
        if coeffs is not None:
            amps = coeffs / np.linalg.norm(coeffs)
            k = np.arange(amps.size, dtype=float)
            return BatteryState.pure(amps.astype(complex), levels=k * delta)
        window = int(window * 1.8) + 20
    raise RuntimeError(
        f"power-state recurrence failed to reach tail tolerance {tail_tol} "
        f"after {max_retries + 1} attempts (z = {z})"
    )


def _run_recurrence(lam, mu, window, tail_tol, turn):
    if window < 8:
        return None
    c = np.zeros(window)
    c[0] = 1.0
    c[1] = mu / lam
    cum = c[0] ** 2 + c[1] ** 2
    min_tail = None
    for k in range(1, window - 1):
        c[k + 1] = ((k + mu) / lam) * c[k] - c[k - 1]
        cum += c[k + 1] ** 2
        if k + 1 > turn:
            a = abs(c[k + 1])
            if a * a < tail_tol * cum:
                return c[: k + 2]
            if min_tail is not None and a > 10.0 * min_tail:
                return None  # growing-solution contamination before tolerance
            min_tail = a if min_tail is None else min(min_tail, a)
    return None  # window exhausted before the tail converged
