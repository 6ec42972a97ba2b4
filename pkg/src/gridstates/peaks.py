"""Infinite-squeezing peak model: coefficients, closed-form FOMs, optimizers.

In the ideal limit the protocol output is a comb of 2^N position peaks spaced
sqrt(pi) apart with a mirror-symmetric real coefficient vector c (sum c^2 = 2,
so that each half carries unit weight). Everything about the output envelope
is then analytic: the stabilizer expectation behind Delta_P reduces to
nearest-neighbour products of the c_k, and the shift error to a short cosine
series. This module carries those closed forms and the derivative-free
optimizers over the preparation strengths u_k that generate the c_k.

Pure numpy/scipy.optimize; no Fock-space machinery enters here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import minimize

SQPI = math.sqrt(math.pi)

__all__ = [
    "PeakDistribution",
    "ModelViolationError",
    "REFERENCE_U",
    "coefficients",
    "delta_p_from_coeffs",
    "perror_from_coeffs",
    "optimize_u",
    "optimal_distribution",
    "delta_to_db",
    "db_to_delta",
    "input_r_for_db",
]


class ModelViolationError(ValueError):
    """The analytic model produced an out-of-range expectation value."""


# Bundled reference interaction strengths for the two objectives, per number
# of rounds. These are documentation constants used as optimizer seeds and by
# protocol.preparation_strengths; optimize_u recomputes the optima from
# scratch. Note: the (delta_p, 2) entry u2 = 0.093 is NOT a maximizer of
# Delta_P and is inconsistent with the 11.7 dB it is quoted alongside (the
# actual optimum is u2 = 0.0654, which this module's optimizer returns).
# It is kept verbatim as a reference constant only.
REFERENCE_U = {
    ("shift_error", 1): (0.0,),
    ("shift_error", 2): (0.0, 0.045),
    ("shift_error", 3): (0.0, 0.053, 0.033),
    ("shift_error", 4): (0.0, 0.038, 0.027, 0.015),
    ("delta_p", 1): (0.0,),
    ("delta_p", 2): (0.0, 0.093),
    ("delta_p", 3): (0.0, 0.040, 0.026),
    ("delta_p", 4): (0.0, 0.029, 0.020, 0.011),
}


def delta_to_db(delta: float) -> float:
    """Effective squeezing in dB: -10 log10(delta^2)."""
    return -10.0 * math.log10(delta * delta)


def db_to_delta(db: float) -> float:
    return 10.0 ** (-db / 20.0)


def input_r_for_db(db: float) -> float:
    """Squeezing parameter r with e^{-r} equivalent to the given dB value."""
    return db * math.log(10.0) / 20.0


@dataclass(frozen=True)
class PeakDistribution:
    """Coefficient vector of the 2^N-peak comb.

    coeffs is the full mirror-symmetric vector (length 2^N, sum of squares 2);
    u are the generating preparation strengths when known. extended marks
    vectors produced by the recursive evaluator beyond the closed-form range
    N <= 4.
    """

    n_rounds: int
    coeffs: np.ndarray
    u: Optional[np.ndarray] = None
    extended: bool = False

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (2**self.n_rounds,):
            raise ValueError("coefficient vector must have length 2^N")
        if abs(float(np.sum(c * c)) - 2.0) > 1e-9:
            raise ValueError("coefficients must satisfy sum c^2 = 2")
        if np.max(np.abs(c - c[::-1])) > 1e-9:
            raise ValueError("coefficients must be mirror symmetric")
        object.__setattr__(self, "coeffs", c)

    @property
    def half(self) -> np.ndarray:
        """Left half of the vector, outermost peak first."""
        return self.coeffs[: 2 ** (self.n_rounds - 1)]


def _half_recursive(n_rounds: int, u: np.ndarray) -> np.ndarray:
    """Half-vector by walking the round-by-round peak splitting.

    Round k splits every branch in two with a cos/sin pair; the angle of
    branch j (ordered outermost first) is pi/4 + 2(2^{N-1} - 2^{N-k}(2j-1))
    sqrt(pi) u_k. For N <= 4 this reproduces the explicit product formulas
    exactly; for larger N it is their natural continuation.
    """
    half = np.ones(1)
    for k in range(2, n_rounds + 1):
        j = np.arange(half.size) + 1
        phase = 2.0 * (2 ** (n_rounds - 1) - 2 ** (n_rounds - k) * (2 * j - 1))
        th = np.pi / 4.0 + phase * SQPI * u[k - 1]
        out = np.empty(2 * half.size)
        out[0::2] = half * np.cos(th)
        out[1::2] = half * np.sin(th)
        half = out
    return half


def _half_explicit(n_rounds: int, u: np.ndarray) -> np.ndarray:
    # literal closed-form products for N <= 4, kept separate from the
    # recursion on purpose: the two must agree to 1e-12 (tested)
    q = np.pi / 4.0
    if n_rounds == 1:
        return np.ones(1)
    if n_rounds == 2:
        t2 = q + 2 * SQPI * u[1]
        return np.array([math.cos(t2), math.sin(t2)])
    if n_rounds == 3:
        t2 = q + 4 * SQPI * u[1]
        a, b = q + 6 * SQPI * u[2], q + 2 * SQPI * u[2]
        return np.array(
            [
                math.cos(t2) * math.cos(a),
                math.cos(t2) * math.sin(a),
                math.sin(t2) * math.cos(b),
                math.sin(t2) * math.sin(b),
            ]
        )
    t2 = q + 8 * SQPI * u[1]
    a, b = q + 12 * SQPI * u[2], q + 4 * SQPI * u[2]
    p1, p2 = q + 14 * SQPI * u[3], q + 10 * SQPI * u[3]
    p3, p4 = q + 6 * SQPI * u[3], q + 2 * SQPI * u[3]
    return np.array(
        [
            math.cos(t2) * math.cos(a) * math.cos(p1),
            math.cos(t2) * math.cos(a) * math.sin(p1),
            math.cos(t2) * math.sin(a) * math.cos(p2),
            math.cos(t2) * math.sin(a) * math.sin(p2),
            math.sin(t2) * math.cos(b) * math.cos(p3),
            math.sin(t2) * math.cos(b) * math.sin(p3),
            math.sin(t2) * math.sin(b) * math.cos(p4),
            math.sin(t2) * math.sin(b) * math.sin(p4),
        ]
    )


def coefficients(n_rounds: int, u) -> PeakDistribution:
    """Peak coefficients generated by preparation strengths u (u[0] must be 0).

    Normalization: the full 2^N vector satisfies sum c^2 = 2 (each
    mirror-half carries unit weight), which is the convention under which
    <D(sqrt(2pi))> = (1/2) sum c_s c_{s+1} reproduces the known square-lattice
    values. In particular N=1 gives c = [1, 1].
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (n_rounds,):
        raise ValueError(f"u must have length N={n_rounds}")
    if u[0] != 0.0:
        raise ValueError("u[0] (first-round preparation strength) must be 0")
    if n_rounds < 1:
        raise ValueError("n_rounds must be >= 1")
    extended = n_rounds > 4
    half = _half_recursive(n_rounds, u) if extended else _half_explicit(n_rounds, u)
    full = np.concatenate([half, half[::-1]])
    return PeakDistribution(n_rounds, full, u=u, extended=extended)


def stabilizer_overlap(dist: PeakDistribution) -> float:
    """<D(sqrt(2pi))> of the ideal comb: (1/2) sum_s c_s c_{s+1}."""
    c = dist.coeffs
    return 0.5 * float(np.sum(c[:-1] * c[1:]))


def delta_p_from_coeffs(dist: PeakDistribution) -> float:
    """Delta_P (linear units) of the ideal comb."""
    d = stabilizer_overlap(dist)
    if not 0.0 < d <= 1.0:
        raise ModelViolationError(f"stabilizer expectation {d} outside (0, 1]")
    return math.sqrt(math.log(1.0 / d**2) / (2.0 * math.pi))


_GL64 = leggauss(64)


def perror_from_coeffs(dist: PeakDistribution) -> float:
    """Shift error of the ideal comb over the +-sqrt(pi)/6 acceptance square.

    The position comb pins the u marginal to a delta inside the window, so
    only the v integral survives: the diagonal weight is
    2/sqrt(pi) |sum_s c_{s + 2^{N-1}} cos((2s-1) sqrt(pi) v)|^2, integrated by
    64-node Gauss-Legendre over [-sqrt(pi)/6, sqrt(pi)/6].
    """
    if np.max(np.abs(dist.coeffs - dist.coeffs[::-1])) > 1e-9:
        raise ModelViolationError("mirror symmetry required")
    n_half = 2 ** (dist.n_rounds - 1)
    c_right = dist.coeffs[n_half:]
    nodes, weights = _GL64
    a = SQPI / 6.0
    v = a * nodes
    s = np.arange(1, n_half + 1)
    series = c_right @ np.cos((2 * s - 1)[:, None] * SQPI * v[None, :])
    integral = a * float(np.sum(weights * 2.0 / SQPI * series**2))
    if not -1e-9 <= integral <= 1.0 + 1e-9:
        raise ModelViolationError(f"acceptance integral {integral} outside [0, 1]")
    return 1.0 - integral


def _objective(n_rounds, objective_name):
    if objective_name == "delta_p":

        def f(u_free):
            u = np.concatenate([[0.0], u_free])
            try:
                return -delta_to_db(delta_p_from_coeffs(coefficients(n_rounds, u)))
            except ModelViolationError:
                return 1e6

    elif objective_name == "shift_error":

        def f(u_free):
            u = np.concatenate([[0.0], u_free])
            return perror_from_coeffs(coefficients(n_rounds, u))

    else:
        raise ValueError(f"unknown objective {objective_name!r}")
    return f


# small parameter counts and a smooth trigonometric landscape: Nelder-Mead
# with fixed multistarts is deterministic and plenty
_NM_OPTS = {"xatol": 1e-5, "fatol": 1e-10, "maxfev": 2000}


def optimize_u(n_rounds: int, objective: str):
    """Optimize the preparation strengths u_2..u_N for the given objective.

    objective is 'shift_error' (minimized) or 'delta_p' (maximized). Returns
    (u, fom_value) where fom_value is the shift error probability or Delta_P
    in dB respectively. Deterministic: fixed multistart list (all zeros plus
    the bundled reference points), fixed tolerances.
    """
    if n_rounds < 1:
        raise ValueError("n_rounds must be >= 1")
    f = _objective(n_rounds, objective)
    if n_rounds == 1:
        # no preparation gates to tune
        return np.zeros(1), abs(f(np.zeros(0)))
    starts = [np.zeros(n_rounds - 1)]
    ref = REFERENCE_U.get((objective, n_rounds))
    if ref is not None:
        starts.append(np.asarray(ref[1:], dtype=float))
    best = None
    for x0 in starts:
        res = minimize(f, x0, method="Nelder-Mead", options=_NM_OPTS)
        if not (res.success or res.status == 2):
            raise RuntimeError(f"optimizer failed: {res.message}; best {res.x}")
        if best is None or res.fun < best.fun:
            best = res
    u = np.concatenate([[0.0], best.x])
    return u, abs(float(best.fun))


def _angles_to_half(angles: np.ndarray, m: int) -> np.ndarray:
    # hyperspherical map onto the unit sphere in R^m (the mirror half)
    x = np.ones(m)
    for i, th in enumerate(angles):
        x[i] *= math.cos(th)
        x[i + 1 :] *= math.sin(th)
    return x


def _half_to_angles(half: np.ndarray) -> np.ndarray:
    half = half / np.linalg.norm(half)
    angles = []
    rest = 1.0
    for i in range(half.size - 1):
        val = half[i] / rest if rest > 1e-300 else 0.0
        val = min(1.0, max(-1.0, val))
        th = math.acos(val)
        angles.append(th)
        rest *= math.sin(th)
    return np.asarray(angles)


def optimal_distribution(n_rounds: int, objective: str):
    """Optimize the FOM over all mirror-symmetric normalized coefficients.

    2^{N-1} - 1 free parameters (hyperspherical angles of the half-vector).
    Returns (coeffs, fom_value) with the same value conventions as
    optimize_u. The u-constrained optimum is one of the multistarts, so the
    result can only improve on it.
    """
    m = 2 ** (n_rounds - 1)

    def f(angles):
        half = _angles_to_half(angles, m)
        full = np.concatenate([half, half[::-1]])
        dist = PeakDistribution(n_rounds, full)
        try:
            if objective == "delta_p":
                return -delta_to_db(delta_p_from_coeffs(dist))
            return perror_from_coeffs(dist)
        except ModelViolationError:
            return 1e6

    if objective not in ("delta_p", "shift_error"):
        raise ValueError(f"unknown objective {objective!r}")
    if m == 1:
        coeffs = np.array([1.0, 1.0])
        return coeffs, abs(f(np.zeros(0)))

    starts = [_half_to_angles(np.ones(m))]
    u_best, _ = optimize_u(n_rounds, objective)
    starts.append(_half_to_angles(coefficients(n_rounds, u_best).half))
    # the nearest-neighbour-overlap maximizer is the path-graph eigenvector;
    # cheap to include as a start for either objective
    k = np.arange(1, m + 1)
    starts.append(_half_to_angles(np.sin(k * np.pi / (2 * m + 1))))

    best = None
    for x0 in starts:
        res = minimize(f, x0, method="Nelder-Mead", options=_NM_OPTS)
        if not (res.success or res.status == 2):
            raise RuntimeError(f"optimizer failed: {res.message}; best {res.x}")
        if best is None or res.fun < best.fun:
            best = res
    half = _angles_to_half(best.x, m)
    if half.sum() < 0:
        half = -half
    full = np.concatenate([half, half[::-1]])
    return full, abs(float(best.fun))
