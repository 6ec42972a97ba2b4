import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gridstates import fom, peaks, protocol as pr
from gridstates.hilbert import (
    FockSpace,
    LeakageWarning,
    hybrid_pure,
    partial_trace_qubit,
    squeeze,
    squeezed_vacuum,
)

SQPI = math.sqrt(math.pi)


def test_strengths_square():
    v, w = pr.strengths(3)
    assert np.allclose(v, [-4 * SQPI, 2 * SQPI, SQPI])
    assert np.allclose(w, [-SQPI / 16, -SQPI / 8, SQPI / 4])
    with pytest.raises(ValueError):
        pr.strengths(0)


def test_schedule_structure():
    sched = pr.build_schedule(3)
    labels = [g.label for g in sched.gates]
    # u_1 = 0 drops the first preparation gate
    assert labels == [
        "displace", "disentangle",
        "prepare", "displace", "disentangle",
        "prepare", "displace", "disentangle",
    ]
    assert set(sched.expected_qubit) == {i for i, l in enumerate(labels) if l == "disentangle"}
    for q in sched.expected_qubit.values():
        assert abs(np.linalg.norm(q) - 1.0) < 1e-12
    assert sched.qubit_init.shape == (2,)


def test_build_schedule_rejects_wrong_u_length():
    with pytest.raises(ValueError):
        pr.build_schedule(2, u=[0.0])


@given(
    kind=st.sampled_from(["XsigmaPhi", "PsigmaX"]),
    c=st.floats(-3.0, 3.0),
    phi=st.floats(0.0, 2 * math.pi),
)
def test_gate_unitary_is_unitary(kind, c, phi):
    space = FockSpace(40)
    u = pr.gate_unitary(space, pr.GateSpec(kind, c, phi, "aux"))
    assert np.max(np.abs(u.conj().T @ u - np.eye(80))) < 1e-10


def test_apply_gate_matches_dense_unitary(rng):
    space = FockSpace(40)
    vec = rng.normal(size=80) + 1j * rng.normal(size=80)
    vec = vec / np.linalg.norm(vec)
    for gate in (
        pr.GateSpec("XsigmaPhi", 0.7, 1.1, "aux"),
        pr.GateSpec("PsigmaX", -1.3, 0.0, "aux"),
        pr.GateSpec("UnconditionalDisplacement", 0.5, 0.3, "aux"),
    ):
        from gridstates.hilbert import HybridState

        state = HybridState("pure", vec.copy(), space)
        fast = pr.apply_gate(state, gate).data
        dense = pr.gate_unitary(space, gate) @ vec
        assert np.linalg.norm(fast - dense) < 1e-10


def test_apply_gate_dm_is_conjugation(rng):
    space = FockSpace(30)
    vec = rng.normal(size=60) + 1j * rng.normal(size=60)
    vec = vec / np.linalg.norm(vec)
    rho = np.outer(vec, vec.conj())
    gate = pr.GateSpec("XsigmaPhi", 0.4, math.pi / 2, "aux")
    out = pr.apply_gate_dm(rho, gate, space)
    u = pr.gate_unitary(space, gate)
    assert np.max(np.abs(out - u @ rho @ u.conj().T)) < 1e-10


def test_run_output_qubit_disentangled(run25):
    # at 25 dB input the disentanglers are near-exact: residual population in
    # the wrong qubit branch stays below 1e-3
    states, _ = run25
    for n, state in states.items():
        psi2 = state.data.reshape(state.space.dim, 2)
        wrong = float(np.sum(np.abs(psi2[:, 1]) ** 2))
        assert wrong < 1e-3, f"N={n}: wrong-branch population {wrong}"


def test_peak_tracker_predicts_qubit(marked_runs):
    # replay the N=2 marked run and compare the tracker's expected qubit with
    # the exact reduced state after the final disentangler
    state = marked_runs[(2, 11.5)]
    sched = pr.build_schedule(2)
    expected = sched.expected_qubit[max(sched.expected_qubit)]
    psi2 = state.data.reshape(state.space.dim, 2)
    qubit_dm = psi2.T @ psi2.conj()
    fid = float(np.real(expected.conj() @ qubit_dm @ expected))
    assert fid > 0.99


def test_rectangular_covariance():
    # rect-lattice run equals a squeeze of the square run at shifted input:
    # every gate conjugates exactly, so X -> CX is S(ln C) on the hybrid state
    c = 1.2
    xi = math.log(c)
    r = 1.2
    space = FockSpace(420)
    rect = pr.run(pr.build_schedule(2, lattice=pr.LatticeSpec.rectangular(c)), r, space=space)
    square = pr.run(pr.build_schedule(2), r - xi, space=space)
    s = squeeze(space, xi).matrix
    mapped = np.kron(s, np.eye(2)) @ square.data
    overlap = abs(np.vdot(rect.data, mapped)) ** 2
    assert overlap > 1.0 - 1e-10


def test_hexagonal_lattice_geometry():
    hexl = pr.LatticeSpec.hexagonal()
    assert (hexl.alpha * hexl.beta.conjugate()).imag == pytest.approx(2 * math.pi)
    assert abs(hexl.alpha) == pytest.approx(abs(hexl.beta))
    angle = np.angle(hexl.beta / hexl.alpha)
    assert math.degrees(abs(angle)) == pytest.approx(60.0, abs=1e-9)


def test_hexagonal_run_golden():
    r = peaks.input_r_for_db(25.0)
    state = pr.run(pr.build_schedule(2, lattice=pr.LatticeSpec.hexagonal()), r)
    sq = fom.effective_squeezing(state, pr.LatticeSpec.hexagonal())
    assert sq.delta_x_db == pytest.approx(25.0, abs=1e-4)
    assert sq.delta_p_db == pytest.approx(12.1299, abs=1e-3)


def test_lattice_from_string():
    assert pr.LatticeSpec.from_string("square").name == "square"
    assert pr.LatticeSpec.from_string("hex").name == "hex"
    assert pr.LatticeSpec.from_string("rect:1.3").scale_C == pytest.approx(1.3)
    with pytest.raises(ValueError):
        pr.LatticeSpec.from_string("triangular")
    with pytest.raises(ValueError):
        pr.LatticeSpec.from_string("rect:-1")


def test_leakage_warning_on_small_dim():
    space = FockSpace(70)
    with pytest.warns(LeakageWarning):
        pr.run(pr.build_schedule(2), peaks.input_r_for_db(11.5), space=space)


def test_run_rejects_negative_squeezing():
    with pytest.raises(ValueError):
        pr.run(pr.build_schedule(1), -0.1)


@pytest.mark.parametrize(
    "c0, c1, axis, sign",
    [
        (1.0, 0.0, "z", +1),
        (0.0, 1.0, "z", -1),
        (1.0, 1.0, "x", +1),
        (1.0, -1.0, "x", -1),
        (1.0, 1.0j, "y", +1),
    ],
)
def test_prepare_logical_cardinal_directions(c0, c1, axis, sign):
    lattice = pr.LatticeSpec.square()
    r = peaks.input_r_for_db(12.0)
    rho = pr.prepare_logical(c0, c1, 1, input_r=r)
    paulis = {
        "z": fom.displacement_expectation(rho, lattice.alpha / 2),
        "x": fom.displacement_expectation(rho, lattice.beta / 2),
        "y": fom.displacement_expectation(rho, (lattice.alpha + lattice.beta) / 2),
    }
    val = sign * paulis[axis].real
    assert val > 0.6, f"<{axis}> = {paulis[axis]:.3f}, expected sign {sign}"
    for other, e in paulis.items():
        if other != axis:
            assert abs(e) < 0.35


def _same_state(rho1, rho2, tol=1e-10):
    # Cauchy-Schwarz equality: tr(r1 r2) = sqrt(tr(r1^2) tr(r2^2)) iff r1 = r2;
    # both states may be (equally) mixed, so compare against the purity bound
    cross = float(np.real(np.trace(rho1 @ rho2)))
    bound = math.sqrt(float(np.real(np.trace(rho1 @ rho1))) * float(np.real(np.trace(rho2 @ rho2))))
    return cross > bound - tol


def test_prepare_logical_pure_state_equals_plain_run(marked_runs):
    # the bypass route: logical one is the base protocol itself
    state = marked_runs[(3, 16.6)]
    rho_plain = partial_trace_qubit(state)
    rho_prep = pr.prepare_logical(0.0, 1.0, 3, input_r=peaks.input_r_for_db(16.6), space=state.space)
    assert _same_state(rho_plain, rho_prep)


def test_prepare_logical_zero_is_half_shifted_one():
    r = peaks.input_r_for_db(12.0)
    space = FockSpace(240)
    rho_one = pr.prepare_logical(0.0, 1.0, 1, input_r=r, space=space)
    rho_zero = pr.prepare_logical(1.0, 0.0, 1, input_r=r, space=space)
    shifted = fom.displace_state(rho_one, pr.LatticeSpec.square().beta / 2)
    assert _same_state(rho_zero, shifted)


def test_prepare_logical_rejects_null_coefficients():
    with pytest.raises(ValueError):
        pr.build_logical_circuit(0.0, 0.0, 1)


def test_inverted_disentangler_offsets_comb():
    # w_N sign flip moves the comb half a stabilizer spacing in P: the
    # expectation of the real-axis stabilizer flips sign
    r = peaks.input_r_for_db(11.5)
    plain = pr.run(pr.build_schedule(2), r)
    flipped = pr.run(pr.build_schedule(2, invert_final_disentangler=True), r)
    beta = pr.LatticeSpec.square().beta
    e_plain = fom.displacement_expectation(plain, beta)
    e_flip = fom.displacement_expectation(flipped, beta)
    assert e_plain.real > 0.5
    assert e_flip.real < -0.5
