"""Figures of merit and reference states for grid codes.

Effective squeezing from stabilizer expectations, matched comb targets with
Gaussian envelopes, fidelity, Wigner functions via displaced parity, the
shift-error probability over the +-sqrt(pi)/6 acceptance patch, and the
maximum rotated logical-Pauli expectation.

Accepted state arguments throughout: a boson state vector, a boson density
matrix, or a HybridState (pure hybrid states use O(dim^2) fast paths without
ever forming a density matrix, which is what makes dim ~ 3000 runs cheap to
score).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import minimize

from . import peaks as peaks_mod
from .hilbert import (
    FockSpace,
    HybridState,
    apply_displacement_to_vector,
    apply_phase_of_x,
    partial_trace_qubit,
    squeezed_vacuum,
)

SQPI = math.sqrt(math.pi)
SQ2PI = math.sqrt(2.0 * math.pi)

StateLike = Union[np.ndarray, HybridState]

__all__ = [
    "EffectiveSqueezing",
    "ApproxGkpParams",
    "ZakGrid",
    "displacement_expectation",
    "effective_squeezing",
    "approx_params",
    "approx_gkp_state",
    "logical_superposition_target",
    "fidelity",
    "wigner",
    "hermite_functions",
    "position_density",
    "zak_grid",
    "default_zak_grid",
    "shift_error",
    "displace_state",
    "logical_pauli_max",
]


@dataclass(frozen=True)
class EffectiveSqueezing:
    """Delta_X / Delta_P in linear units and dB (dB = -10 log10 delta^2).

    A vanishing stabilizer expectation would mean infinite delta; that case
    is reported as delta = 0 with the corresponding flag set (serialization
    never carries floating-point infinities).
    """

    delta_x: float
    delta_p: float
    delta_x_db: float
    delta_p_db: float
    x_infinite: bool = False
    p_infinite: bool = False


def _eigensystem(dim: int):
    return FockSpace(dim).x_eigensystem


def _displacement_matrix(dim: int, amp: complex) -> np.ndarray:
    # D(amp) through the X eigenbasis: cheaper and better conditioned than
    # expm at large cutoffs; agrees with the expm constructor to ~1e-13
    amp = complex(amp)
    lam, q = _eigensystem(dim)
    a = math.sqrt(2.0) * amp.imag
    b = math.sqrt(2.0) * amp.real
    ex = q @ (np.exp(1j * a * lam)[:, None] * q.T)
    rot = np.exp(1j * (math.pi / 2.0) * np.arange(dim))
    ep = rot[:, None] * (q @ (np.exp(-1j * b * lam)[:, None] * q.T)) * rot.conj()[None, :]
    return np.exp(-1j * amp.real * amp.imag) * (ex @ ep)


def displacement_expectation(state: StateLike, amp: complex) -> complex:
    """<D(amp)> of a boson vector / density matrix / HybridState."""
    if isinstance(state, HybridState):
        if state.kind == "pure":
            psi2 = state.data.reshape(state.space.dim, 2)
            out = apply_displacement_to_vector(state.space, amp, psi2)
            return complex(np.sum(psi2.conj() * out))
        state = partial_trace_qubit(state)
    arr = np.asarray(state)
    if arr.ndim == 1:
        sp = FockSpace(arr.size)
        out = apply_displacement_to_vector(sp, amp, arr)
        return complex(np.vdot(arr, out))
    d = _displacement_matrix(arr.shape[0], amp)
    return complex(np.sum(arr * d.T))


def _delta_from_amp(state: StateLike, amp: complex) -> Tuple[float, float, bool]:
    e = abs(displacement_expectation(state, amp))
    if e >= 1.0 + 1e-9:
        raise ValueError(f"stabilizer expectation modulus {e} exceeds 1")
    if e == 0.0:
        return 0.0, math.inf, True
    e = min(e, 1.0)
    delta = math.sqrt(math.log(1.0 / (e * e)) / abs(amp) ** 2)
    if delta == 0.0:
        return 0.0, math.inf, False  # exactly on the stabilizer: infinite dB
    return delta, peaks_mod.delta_to_db(delta), False


def effective_squeezing(state: StateLike, lattice=None) -> EffectiveSqueezing:
    """Effective squeezing along both stabilizer directions of the lattice.

    delta_dir^2 = ln(1/|<D(dir)>|^2) / |dir|^2 with dir the alpha (X-comb)
    and beta (P-comb) stabilizer amplitudes. For the square lattice this is
    the usual definition; the same per-direction normalization is the
    extension to non-square lattices (it keeps the squeezed-vacuum identity
    delta = e^{-+r} exact for every lattice).
    """
    if lattice is None:
        alpha, beta = 1j * SQ2PI, SQ2PI + 0j
    else:
        alpha, beta = lattice.alpha, lattice.beta
    dx, dxdb, xinf = _delta_from_amp(state, alpha)
    dp, dpdb, pinf = _delta_from_amp(state, beta)
    return EffectiveSqueezing(dx, dp, dxdb, dpdb, x_infinite=xinf, p_infinite=pinf)


# ---------------------------------------------------------------------------
# matched comb targets


@dataclass(frozen=True)
class ApproxGkpParams:
    """Parameters of the Gaussian-envelope comb of displaced squeezed vacua.

    r: peak squeezing (peak width e^{-r}); kappa: inverse envelope width in
    the same linear units; logical: 'zero' (comb on even stabilizer
    multiples) or 'one' (offset by half a stabilizer); envelope_cut: largest
    |index| kept in the sum.
    """

    r: float
    kappa: float
    logical: str
    lattice: object = None
    envelope_cut: int = 1


def approx_params(r: float, kappa: float, logical: str, lattice=None) -> ApproxGkpParams:
    """Build ApproxGkpParams with the envelope cut chosen for weight < 1e-8."""
    if kappa <= 0 or r < 0:
        raise ValueError("need kappa > 0 and r >= 0")
    if logical not in ("zero", "one"):
        raise ValueError("logical must be 'zero' or 'one'")
    beta_sq = abs(lattice.beta) ** 2 if lattice is not None else 2.0 * math.pi
    cut = math.ceil(math.sqrt(math.log(1e8) / (kappa * kappa * beta_sq))) + 1
    return ApproxGkpParams(r=r, kappa=kappa, logical=logical, lattice=lattice, envelope_cut=cut)


def approx_gkp_state(params: ApproxGkpParams, space: FockSpace) -> np.ndarray:
    """Normalized comb of displaced squeezed vacua under a Gaussian envelope.

    Logical zero peaks sit at even multiples of the half-stabilizer spacing
    (displacements m * beta, integer m), logical one at half-integer m.
    """
    if params.envelope_cut < 1:
        raise ValueError("degenerate envelope_cut")
    beta = params.lattice.beta if params.lattice is not None else SQ2PI + 0j
    cut = params.envelope_cut
    if params.logical == "zero":
        ms = np.arange(-cut, cut + 1, dtype=float)
    elif params.logical == "one":
        ms = np.arange(-cut, cut, dtype=float) + 0.5
    else:
        raise ValueError("logical must be 'zero' or 'one'")
    base = squeezed_vacuum(space, params.r)
    vec = np.zeros(space.dim, dtype=complex)
    b2 = abs(beta) ** 2
    for m in ms:
        w = math.exp(-params.kappa**2 * m * m * b2)
        if w < 1e-12:
            continue
        vec += w * apply_displacement_to_vector(space, m * beta, base)
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise ValueError("envelope annihilated every term; check kappa")
    return vec / norm


def logical_superposition_target(
    c0: complex,
    c1: complex,
    n_rounds: int,
    input_r: float,
    lattice=None,
    space: Optional[FockSpace] = None,
) -> np.ndarray:
    """c0|zero~> + c1|one~> with the envelope matched to an N-round run.

    kappa is taken from the ideal-comb Delta_P at the bundled shift-error
    reference strengths (the finite-squeezing value differs negligibly),
    r from the input squeezing.
    """
    if space is None:
        raise ValueError("space is required")
    norm = math.sqrt(abs(c0) ** 2 + abs(c1) ** 2)
    c0, c1 = complex(c0) / norm, complex(c1) / norm
    ref = peaks_mod.REFERENCE_U.get(("shift_error", n_rounds))
    u = np.asarray(ref) if ref is not None else np.zeros(n_rounds)
    kappa = peaks_mod.delta_p_from_coeffs(peaks_mod.coefficients(n_rounds, u))
    vec = np.zeros(space.dim, dtype=complex)
    if abs(c0) > 0:
        vec += c0 * approx_gkp_state(
            approx_params(input_r, kappa, "zero", lattice), space
        )
    if abs(c1) > 0:
        vec += c1 * approx_gkp_state(
            approx_params(input_r, kappa, "one", lattice), space
        )
    return vec / np.linalg.norm(vec)


def fidelity(state: StateLike, target: np.ndarray) -> float:
    """<target| rho |target> (the target is a pure boson vector)."""
    target = np.asarray(target)
    if isinstance(state, HybridState):
        state = partial_trace_qubit(state)
    arr = np.asarray(state)
    if arr.ndim == 1:
        if arr.shape != target.shape:
            raise ValueError("state and target dimensions differ")
        return float(abs(np.vdot(target, arr)) ** 2)
    if arr.shape[0] != target.size:
        raise ValueError("state and target dimensions differ")
    return float(np.real(np.vdot(target, arr @ target)))


# ---------------------------------------------------------------------------
# Wigner function


def wigner(
    state: StateLike,
    xs: np.ndarray,
    ps: np.ndarray,
    trunc_tol: float = 1e-10,
) -> np.ndarray:
    """W(x, p) = (1/pi) tr(rho D(alpha) Pi D(alpha)'), alpha = (x+ip)/sqrt(2).

    Returns W[i, j] = W(xs[i], ps[j]); the convention integrates to 1 over
    the plane and gives the vacuum W(0,0) = 1/pi. The state is truncated to
    the populated Fock block (tail < trunc_tol) and mixed states are expanded
    in their eigenbasis, so cost scales with the physical support, not the
    simulation cutoff.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    ps = np.atleast_1d(np.asarray(ps, dtype=float))
    if isinstance(state, HybridState):
        state = partial_trace_qubit(state)
    arr = np.asarray(state)
    pops = np.abs(arr) ** 2 if arr.ndim == 1 else np.real(np.diag(arr)).copy()
    tail = np.cumsum(pops[::-1])[::-1]
    keep = int(np.searchsorted(-tail, -trunc_tol)) + 1
    # displacing to the far grid corner must stay inside the kept block: the
    # corner adds amplitude gmax (alpha units) on top of the state's own
    # support radius sqrt(keep)
    gmax = max(np.max(np.abs(xs)), np.max(np.abs(ps)))
    m = (math.sqrt(keep) + gmax) ** 2
    grid_need = int(math.ceil(m + 4.0 * math.sqrt(m))) + 8
    keep = min(len(pops), max(keep, grid_need, 8))
    if arr.ndim == 1:
        comps = [(1.0, arr[:keep])]
    else:
        sub = arr[:keep, :keep]
        w, v = np.linalg.eigh(sub)
        comps = [(float(w[k]), v[:, k]) for k in range(len(w)) if w[k] > 1e-12]
    dim = keep
    lam, q = _eigensystem(dim)
    signs = np.where(np.arange(dim) % 2 == 0, 1.0, -1.0)
    parity_x = q.T @ (signs[:, None] * q)  # parity in the X eigenbasis
    rot = np.exp(1j * (math.pi / 2.0) * np.arange(dim))
    out = np.zeros((xs.size, ps.size))
    # chi = D(-alpha) phi = e^{i a X} e^{-i b P} phi (up to a global phase)
    # with alpha = (x + i p)/sqrt2, so a = -p and b = -x
    phase_p = np.exp(-1j * np.outer(lam, ps))
    for weight, phi in comps:
        phi_rot = rot.conj() * phi
        for i, x in enumerate(xs):
            t = q.T @ phi_rot
            t = np.exp(1j * x * lam) * t
            w0 = q.T @ (rot * (q @ t))
            pw = w0[:, None] * phase_p
            vals = np.einsum("aj,ab,bj->j", pw.conj(), parity_x, pw).real
            out[i] += weight * vals
    return out / math.pi


# ---------------------------------------------------------------------------
# position representation and shift error


def hermite_functions(xs: np.ndarray, n_max: int) -> np.ndarray:
    """Harmonic-oscillator eigenfunctions psi_0..psi_n_max on the grid xs.

    Stable three-term recurrence; [n, i] = psi_n(xs[i]). Positions with
    x^2/2 > 700 would underflow the seed and raise.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if np.any(xs * xs > 1400.0):
        raise ValueError("position grid too far out for double precision")
    out = np.empty((n_max + 1, xs.size))
    out[0] = math.pi ** (-0.25) * np.exp(-0.5 * xs * xs)
    if n_max >= 1:
        out[1] = math.sqrt(2.0) * xs * out[0]
    for n in range(1, n_max):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * xs * out[n] - math.sqrt(
            n / (n + 1.0)
        ) * out[n - 1]
    return out


def position_density(state: StateLike, xs: np.ndarray) -> np.ndarray:
    """<x| rho |x> on the grid xs."""
    if isinstance(state, HybridState):
        state = partial_trace_qubit(state)
    arr = np.asarray(state)
    n = arr.shape[0]
    h = hermite_functions(xs, n - 1)
    if arr.ndim == 1:
        return np.abs(arr @ h) ** 2
    return np.einsum("ax,ab,bx->x", h, arr, h).real


@dataclass(frozen=True)
class ZakGrid:
    """Quadrature layout for the shift-error integral.

    u_points / v_points are (nodes, weights) over the acceptance intervals;
    s_max truncates the position comb at |2 s sqrt(pi) + u| <= x_extent.
    """

    u_points: Tuple[np.ndarray, np.ndarray]
    v_points: Tuple[np.ndarray, np.ndarray]
    s_max: int
    x_extent: float


def zak_grid(
    x_extent: float,
    nodes: int = 24,
    u_half_width: float = SQPI / 6.0,
    v_half_width: float = SQPI / 6.0,
) -> ZakGrid:
    """Gauss-Legendre grid on [-u_hw, u_hw] x [-v_hw, v_hw].

    The default half-widths give the sqrt(pi)/6 acceptance square; the full
    Zak cell (u_hw = sqrt(pi), v_hw = sqrt(pi)/2) integrates to exactly 1 and
    serves as a completeness check.
    """
    x, w = leggauss(nodes)
    u = (u_half_width * x, u_half_width * w)
    v = (v_half_width * x, v_half_width * w)
    s_max = int(math.floor((x_extent + u_half_width) / (2.0 * SQPI)))
    return ZakGrid(u_points=u, v_points=v, s_max=s_max, x_extent=x_extent)


def default_zak_grid(n_rounds: int, input_r: float) -> ZakGrid:
    # comb reaches 2^N sqrt(pi); six peak widths of margin
    return zak_grid(2**n_rounds * SQPI + 6.0 * math.exp(-input_r))


def shift_error(state: StateLike, grid: ZakGrid) -> float:
    """P_error over the acceptance square: 1 - integral of the Zak diagonal.

    The state must be in the logical-zero frame of the square code (combs on
    even multiples of sqrt(pi); shift a protocol output by +sqrt(pi) first,
    e.g. with displace_state). Works for vectors and density matrices.
    """
    if isinstance(state, HybridState):
        state = partial_trace_qubit(state)
    arr = np.asarray(state)
    n = arr.shape[0]
    un, uw = grid.u_points
    vn, vw = grid.v_points
    s = np.arange(-grid.s_max, grid.s_max + 1)
    xs = (2.0 * SQPI * s)[:, None] + un[None, :]  # (S, U)
    h = hermite_functions(xs.ravel(), n - 1).reshape(n, s.size, un.size)
    phases = np.exp(1j * 2.0 * SQPI * np.outer(s, vn))  # (S, V)
    if arr.ndim == 1:
        amp = np.einsum("n,nsu->su", arr, h)
        g = np.einsum("su,sv->uv", amp, phases)
        dens = np.abs(g) ** 2 / SQPI
    else:
        dens = np.empty((un.size, vn.size))
        for iu in range(un.size):
            hu = h[:, :, iu]  # (n, S)
            block = hu.T @ arr @ hu  # position-comb block at this u offset
            dens[iu] = np.einsum("sv,st,tv->v", phases.conj(), block, phases).real / SQPI
    integral = float(np.einsum("u,v,uv->", uw, vw, dens))
    if integral > 1.0 + 1e-6:
        raise ArithmeticError(f"acceptance integral {integral} exceeds 1")
    return 1.0 - integral


def displace_state(state: StateLike, amp: complex) -> np.ndarray:
    """D(amp) . state (vector) or D rho D' (density matrix)."""
    if isinstance(state, HybridState):
        state = partial_trace_qubit(state)
    arr = np.asarray(state)
    if arr.ndim == 1:
        return apply_displacement_to_vector(FockSpace(arr.size), amp, arr)
    d = _displacement_matrix(arr.shape[0], amp)
    return d @ arr @ d.conj().T


# ---------------------------------------------------------------------------
# rotated logical Paulis


def logical_pauli_max(state: StateLike, lattice=None):
    """Maximum |<U_L>| over the logical Bloch sphere and its argmax (c0, c1).

    U_L = (|c0|^2 - |c1|^2) Z_L + 2 Re(c0* c1) X_L + 2 Im(c0* c1) Y_L with
    Z_L = D(alpha/2), X_L = D(beta/2), Y_L = D((alpha+beta)/2). Coarse Bloch
    grid plus a simplex refinement; deterministic.
    """
    if lattice is None:
        alpha, beta = 1j * SQ2PI, SQ2PI + 0j
    else:
        alpha, beta = lattice.alpha, lattice.beta
    ez = displacement_expectation(state, alpha / 2.0)
    ex = displacement_expectation(state, beta / 2.0)
    ey = displacement_expectation(state, (alpha + beta) / 2.0)

    def value(theta, phi):
        return abs(
            math.cos(theta) * ez
            + math.sin(theta) * (math.cos(phi) * ex + math.sin(phi) * ey)
        )

    thetas = np.linspace(0.0, math.pi, 49)
    phis = np.linspace(0.0, 2.0 * math.pi, 97)
    best = (0.0, 0.0, 0.0)
    for th in thetas:
        for ph in phis:
            v = value(th, ph)
            if v > best[0]:
                best = (v, th, ph)
    res = minimize(
        lambda a: -value(a[0], a[1]),
        np.array(best[1:]),
        method="Nelder-Mead",
        options={"xatol": 1e-8, "fatol": 1e-12, "maxfev": 500},
    )
    theta, phi = float(res.x[0]), float(res.x[1])
    val = value(theta, phi)
    c0 = math.cos(theta / 2.0)
    c1 = math.sin(theta / 2.0) * np.exp(1j * phi)
    return float(val), complex(c0), complex(c1)
