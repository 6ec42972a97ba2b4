import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial.legendre import leggauss

from gridstates import fom, peaks, protocol as pr
from gridstates.hilbert import (
    FockSpace,
    coherent_state,
    partial_trace_qubit,
    squeezed_vacuum,
)

SQPI = math.sqrt(math.pi)


def gaussian_direction_db(xi: complex, vx: float, vp: float) -> float:
    # |<D(xi)>|^2 = exp(-2 [(Im xi)^2 vx + (Re xi)^2 vp]) for a centered
    # Gaussian state, so the per-direction value has a closed form
    d2 = 2.0 * ((xi.imag ** 2) * vx + (xi.real ** 2) * vp) / abs(xi) ** 2
    return -10.0 * math.log10(d2)


@pytest.mark.parametrize("lattice", [
    pr.LatticeSpec.square(),
    pr.LatticeSpec.rectangular(1.3),
    pr.LatticeSpec.hexagonal(),
])
def test_effective_squeezing_gaussian_closed_form(lattice, small_space):
    # 2 dB keeps the anti-squeezed direction expectation far above the
    # double-precision floor
    r = peaks.input_r_for_db(2.0)
    sv = squeezed_vacuum(FockSpace(300), r)
    vx, vp = math.exp(-2 * r) / 2, math.exp(2 * r) / 2
    sq = fom.effective_squeezing(sv, lattice)
    assert sq.delta_x_db == pytest.approx(gaussian_direction_db(lattice.alpha, vx, vp), abs=1e-9)
    assert sq.delta_p_db == pytest.approx(gaussian_direction_db(lattice.beta, vx, vp), abs=1e-9)


def test_effective_squeezing_input_identity():
    # squeezed vacuum reports its own squeezing along the imaginary direction
    r = peaks.input_r_for_db(11.5)
    sq = fom.effective_squeezing(squeezed_vacuum(FockSpace(300), r))
    assert sq.delta_x_db == pytest.approx(11.5, abs=1e-9)


@given(st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False))
def test_displacement_expectation_vacuum(xi):
    space = FockSpace(120)
    vac = np.zeros(120, complex)
    vac[0] = 1.0
    expected = math.exp(-abs(xi) ** 2 / 2)
    got_vec = fom.displacement_expectation(vac, xi)
    got_dm = fom.displacement_expectation(np.outer(vac, vac.conj()), xi)
    assert abs(got_vec - expected) < 1e-9
    assert abs(got_dm - expected) < 1e-9


def test_displace_state_vector_matches_matrix(rng):
    vec = rng.normal(size=40) + 1j * rng.normal(size=40)
    vec = vec / np.linalg.norm(vec)
    amp = 0.3 - 0.7j
    dvec = fom.displace_state(vec, amp)
    ddm = fom.displace_state(np.outer(vec, vec.conj()), amp)
    assert np.max(np.abs(np.outer(dvec, dvec.conj()) - ddm)) < 1e-12


def test_approx_state_normalized_with_logical_sign():
    space = FockSpace(300)
    r = peaks.input_r_for_db(11.5)
    alpha = pr.LatticeSpec.square().alpha
    for logical, sign in (("zero", +1), ("one", -1)):
        psi = fom.approx_gkp_state(fom.approx_params(r, 0.25, logical), space)
        assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-10)
        z = fom.displacement_expectation(psi, alpha / 2).real
        assert sign * z > 0.9
    with pytest.raises(ValueError):
        fom.approx_params(r, 0.25, "plus")


def test_fidelity_identities(rng):
    vec = rng.normal(size=30) + 1j * rng.normal(size=30)
    vec = vec / np.linalg.norm(vec)
    assert fom.fidelity(vec, vec) == pytest.approx(1.0, abs=1e-12)
    assert fom.fidelity(np.outer(vec, vec.conj()), vec) == pytest.approx(1.0, abs=1e-12)
    orth = np.zeros(30, complex)
    orth[0] = 1.0
    orth = orth - np.vdot(vec, orth) * vec
    orth = orth / np.linalg.norm(orth)
    assert fom.fidelity(vec, orth) == pytest.approx(0.0, abs=1e-12)


def test_wigner_reference_values():
    xs = np.array([0.0])
    vac = np.zeros(60, complex)
    vac[0] = 1.0
    one = np.zeros(60, complex)
    one[1] = 1.0
    assert fom.wigner(vac, xs, xs)[0, 0] == pytest.approx(1 / math.pi, abs=1e-12)
    assert fom.wigner(one, xs, xs)[0, 0] == pytest.approx(-1 / math.pi, abs=1e-12)


def test_wigner_coherent_state_normalized_peak():
    alpha = 0.8 + 0.5j
    coh = coherent_state(FockSpace(120), alpha)
    gx = np.linspace(-6, 6, 161)
    w = fom.wigner(coh, gx, gx)
    integral = np.trapezoid(np.trapezoid(w, gx, axis=1), gx)
    assert integral == pytest.approx(1.0, abs=1e-6)
    ix, ip = np.unravel_index(np.argmax(w), w.shape)
    assert gx[ix] == pytest.approx(math.sqrt(2) * alpha.real, abs=0.08)
    assert gx[ip] == pytest.approx(math.sqrt(2) * alpha.imag, abs=0.08)


def test_position_density_moments():
    r = 0.8
    sv = squeezed_vacuum(FockSpace(200), r)
    gx = np.linspace(-8, 8, 2001)
    dens = fom.position_density(sv, gx)
    assert np.trapezoid(dens, gx) == pytest.approx(1.0, abs=1e-9)
    var = np.trapezoid(gx ** 2 * dens, gx)
    assert var == pytest.approx(math.exp(-2 * r) / 2, abs=1e-9)


def test_hermite_functions_orthonormal():
    x, w = leggauss(400)
    xs = 12.0 * x
    h = fom.hermite_functions(xs, 15)
    gram = (h * (12.0 * w)) @ h.T
    assert np.max(np.abs(gram - np.eye(16))) < 1e-10


def test_hermite_functions_overflow_guard():
    with pytest.raises(ValueError):
        fom.hermite_functions(np.array([40.0]), 5)


def test_zak_full_cell_completeness(marked_runs):
    # integrating the Zak diagonal over the full cell must give exactly 1,
    # so the reported error vanishes for any frame
    state = marked_runs[(2, 11.5)]
    rho = partial_trace_qubit(state)
    grid = fom.default_zak_grid(2, peaks.input_r_for_db(11.5))
    full = fom.zak_grid(grid.x_extent, nodes=40, u_half_width=SQPI, v_half_width=SQPI / 2)
    assert fom.shift_error(rho, full) == pytest.approx(0.0, abs=1e-9)
    zero_frame = fom.displace_state(rho, pr.LatticeSpec.square().beta / 2)
    assert fom.shift_error(zero_frame, full) == pytest.approx(0.0, abs=1e-9)


def test_shift_error_frame_and_periodicity(marked_runs):
    state = marked_runs[(2, 11.5)]
    rho = partial_trace_qubit(state)
    beta = pr.LatticeSpec.square().beta
    grid = fom.default_zak_grid(2, peaks.input_r_for_db(11.5))
    # protocol output sits on the odd comb: almost nothing in the acceptance
    # square until shifted to the zero frame
    assert fom.shift_error(rho, grid) > 0.97
    zero_frame = fom.displace_state(rho, beta / 2)
    perr = fom.shift_error(zero_frame, grid)
    assert 0.0 < perr < 0.25
    # a full stabilizer period leaves the error invariant once the position
    # window is widened to keep the translated comb inside
    wide = fom.zak_grid(grid.x_extent + 2 * SQPI)
    assert fom.shift_error(fom.displace_state(zero_frame, beta), wide) == pytest.approx(perr, abs=1e-8)


def test_shift_error_peak_width_contribution(marked_runs):
    # at 11.5 dB the acceptance error splits into peak-weight misplacement
    # plus Gaussian tails of each tooth outside +-sqrt(pi)/6
    state = marked_runs[(2, 11.5)]
    r = peaks.input_r_for_db(11.5)
    zero_frame = fom.displace_state(partial_trace_qubit(state), pr.LatticeSpec.square().beta / 2)
    perr = fom.shift_error(zero_frame, fom.default_zak_grid(2, r))
    weights = peaks.perror_from_coeffs(peaks.coefficients(2, peaks.REFERENCE_U[("shift_error", 2)]))
    sigma = math.exp(-r) / math.sqrt(2)
    tail = math.erfc((SQPI / 6) / (math.sqrt(2) * sigma))
    combined = weights + tail - weights * tail
    assert perr == pytest.approx(combined, abs=0.02)


def test_logical_pauli_max_directions(marked_runs):
    state = marked_runs[(2, 11.5)]
    rho = partial_trace_qubit(state)
    val, c0, c1 = fom.logical_pauli_max(rho)
    z = fom.displacement_expectation(rho, pr.LatticeSpec.square().alpha / 2)
    assert val == pytest.approx(abs(z), abs=1e-6)
    assert abs(c0) ** 2 - abs(c1) ** 2 == pytest.approx(1.0, abs=1e-4)

    plus = pr.prepare_logical(1.0, 1.0, 2, input_r=peaks.input_r_for_db(11.5))
    val_p, p0, p1 = fom.logical_pauli_max(plus)
    assert val_p > 0.6
    assert abs(p0) == pytest.approx(abs(p1), abs=0.05)
    assert (p0.conjugate() * p1).real > 0.45


def test_default_zak_grid_scales_with_rounds():
    g2 = fom.default_zak_grid(2, 1.0)
    g3 = fom.default_zak_grid(3, 1.0)
    assert g3.x_extent > g2.x_extent
    assert g3.s_max > g2.s_max
    un, uw = g2.u_points
    assert np.max(np.abs(un)) < SQPI / 6
    assert np.sum(uw) == pytest.approx(SQPI / 3, rel=1e-12)
