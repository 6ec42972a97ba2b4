import math

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.linalg import expm

from gridstates import fom, peaks, protocol as pr
from gridstates import noise as nz
from gridstates.experiments import noise_dim
from gridstates.hilbert import (
    FockSpace,
    HybridState,
    coherent_state,
    hybrid_pure,
    partial_trace_qubit,
    squeezed_vacuum,
)


def mixed_hybrid(space, boson_vec, qubit_vec):
    psi = hybrid_pure(space, boson_vec, np.asarray(qubit_vec, dtype=complex))
    return HybridState("mixed", psi.density_matrix(), space)


def test_channel_and_model_validation():
    with pytest.raises(ValueError):
        nz.LindbladChannel("thermal", 0.1)
    with pytest.raises(ValueError):
        nz.LindbladChannel("boson_loss", -1.0)
    with pytest.raises(ValueError):
        nz.NoiseModel(gate_time_T=0.0)
    model = nz.NoiseModel(
        gate_time_T=2.0,
        channels=(
            nz.LindbladChannel("boson_loss", 0.25),
            nz.LindbladChannel("boson_loss", 0.5),
            nz.LindbladChannel("qubit_decay", 0.1),
        ),
    )
    assert model.rates() == {"boson_loss": 0.75, "qubit_decay": 0.1}
    assert model.total_rate() == pytest.approx(0.85)


def test_preset_per_gate_products():
    trapped = nz.preset("trapped_ion")
    assert trapped.model.gate_time_T == 11.0
    rates = trapped.model.rates()
    assert rates["boson_dephasing"] * 11.0 == pytest.approx(7.7e-5, rel=1e-12)

    micro = nz.preset("microwave_cavity")
    assert micro.model.gate_time_T == pytest.approx(0.34)
    products = {k: g * 0.34 for k, g in micro.model.rates().items()}
    assert products["qubit_decay"] == pytest.approx(6.8e-3, rel=1e-12)
    assert products["qubit_dephasing"] == pytest.approx(5.7e-3, rel=1e-12)
    assert products["boson_loss"] == pytest.approx(1.4e-3, rel=1e-12)
    # quoted boson lifetime, consistent with the per-gate product to ~1%
    assert 1.0 / micro.model.rates()["boson_loss"] == pytest.approx(245.0, rel=0.02)

    with pytest.raises(ValueError):
        nz.preset("nmr")


def test_single_channel_model_rate_scaling():
    model = nz.single_channel_model("boson_loss", 1.4e-3, gate_time_T=0.34)
    assert model.rates()["boson_loss"] * 0.34 == pytest.approx(1.4e-3, rel=1e-12)


def test_boson_loss_coherent_amplitude_decay():
    # free decay of |alpha>: amplitude shrinks by exp(-gamma t / 2) and the
    # state stays exactly coherent
    space = FockSpace(60)
    alpha = 1.2
    gamma, t = 0.6, 0.5
    model = nz.NoiseModel(gate_time_T=1.0, channels=(nz.LindbladChannel("boson_loss", gamma),))
    state = mixed_hybrid(space, coherent_state(space, alpha), [1.0, 0.0])
    h = sp.csr_matrix((120, 120), dtype=complex)
    out = nz.evolve(state, h, t, model)
    rho_b = partial_trace_qubit(out)
    target = coherent_state(space, alpha * math.exp(-gamma * t / 2))
    assert fom.fidelity(rho_b, target) == pytest.approx(1.0, abs=1e-6)
    a = np.diag(np.sqrt(np.arange(1, 60)), 1)
    mean_a = complex(np.trace(a @ rho_b))
    assert abs(mean_a - alpha * math.exp(-gamma * t / 2)) < 1e-6


def test_qubit_decay_population_and_coherence():
    space = FockSpace(8)
    gamma, t = 0.8, 0.4
    model = nz.NoiseModel(gate_time_T=1.0, channels=(nz.LindbladChannel("qubit_decay", gamma),))
    vac = np.zeros(8, complex)
    vac[0] = 1.0
    h = sp.csr_matrix((16, 16), dtype=complex)

    excited = nz.evolve(mixed_hybrid(space, vac, [0.0, 1.0]), h, t, model)
    pop = float(np.real(excited.data[1, 1]))
    assert pop == pytest.approx(math.exp(-gamma * t), abs=1e-7)

    plus = nz.evolve(mixed_hybrid(space, vac, [1.0, 1.0] / np.sqrt(2)), h, t, model)
    coher = abs(plus.data[0, 1])
    assert coher == pytest.approx(0.5 * math.exp(-gamma * t / 2), abs=1e-7)


def test_qubit_dephasing_coherence_decay():
    space = FockSpace(8)
    gamma, t = 0.5, 0.7
    model = nz.NoiseModel(gate_time_T=1.0, channels=(nz.LindbladChannel("qubit_dephasing", gamma),))
    vac = np.zeros(8, complex)
    vac[0] = 1.0
    h = sp.csr_matrix((16, 16), dtype=complex)
    plus = nz.evolve(mixed_hybrid(space, vac, [1.0, 1.0] / np.sqrt(2)), h, t, model)
    # D[sigma_z] damps off-diagonals at rate 2 gamma and fixes populations
    assert abs(plus.data[0, 1]) == pytest.approx(0.5 * math.exp(-2 * gamma * t), abs=1e-7)
    assert float(np.real(plus.data[0, 0])) == pytest.approx(0.5, abs=1e-8)


def test_zero_rate_integration_matches_unitary():
    # a zero-rate channel keeps the integrator honest (full ODE, no jump
    # terms); result must match the dense matrix exponential
    space = FockSpace(30)
    model = nz.NoiseModel(gate_time_T=1.0, channels=(nz.LindbladChannel("boson_loss", 0.0),))
    gate = pr.GateSpec("XsigmaPhi", 0.6, math.pi / 2, "t")
    gen, c = nz._gate_generator(gate, space)
    h = -math.copysign(1.0, c) * gen
    sv = squeezed_vacuum(space, 0.5)
    state = mixed_hybrid(space, sv, [1.0, 0.0])
    out = nz.evolve(state, h, abs(c), model)
    u = expm(1j * c * gen.toarray())
    target = u @ state.data @ u.conj().T
    fid = float(np.real(np.trace(out.data @ target)))
    assert fid > 1.0 - 1e-7
    assert np.max(np.abs(out.data - target)) < 1e-6


def test_evolve_input_validation():
    space = FockSpace(8)
    model = nz.NoiseModel(gate_time_T=1.0)
    vac = np.zeros(8, complex)
    vac[0] = 1.0
    state = mixed_hybrid(space, vac, [1.0, 0.0])
    h = sp.csr_matrix((16, 16), dtype=complex)
    with pytest.raises(ValueError):
        nz.evolve(state, h, -1.0, model)
    pure = hybrid_pure(space, vac, np.array([1.0, 0.0], dtype=complex))
    with pytest.raises(ValueError):
        nz.evolve(pure, h, 1.0, model)


def test_noisy_gate_zero_strength_is_identity():
    space = FockSpace(12)
    model = nz.preset("microwave_cavity").model
    vac = np.zeros(12, complex)
    vac[0] = 1.0
    state = mixed_hybrid(space, vac, [1.0, 0.0])
    out = nz.noisy_gate(state, pr.GateSpec("XsigmaPhi", 0.0, 0.0, "t"), model)
    assert np.array_equal(out.data, state.data)


def test_noisy_gate_trace_purity_positivity():
    space = FockSpace(40)
    model = nz.preset("microwave_cavity").model
    state = mixed_hybrid(space, squeezed_vacuum(space, 0.8), [1.0, 1.0] / np.sqrt(2))
    out = nz.noisy_gate(state, pr.GateSpec("XsigmaPhi", 0.44, math.pi / 2, "t"), model)
    tr = float(np.real(np.trace(out.data)))
    assert tr == pytest.approx(1.0, abs=1e-8)
    purity = float(np.real(np.trace(out.data @ out.data)))
    assert purity < 1.0
    eigs = np.linalg.eigvalsh(out.data)
    assert eigs.min() > -1e-8


def test_noisy_run_zero_rate_matches_pure_run():
    r = peaks.input_r_for_db(11.5)
    model = nz.NoiseModel(gate_time_T=1.0, channels=(nz.LindbladChannel("qubit_decay", 0.0),))
    rho, success = nz.noisy_run(2, r, model, postselect=False)
    assert success == 1.0
    space = FockSpace(rho.shape[0])
    pure = pr.run(pr.build_schedule(2), r, space=space)
    sq_n = fom.effective_squeezing(rho)
    sq_p = fom.effective_squeezing(pure)
    assert sq_n.delta_x_db == pytest.approx(sq_p.delta_x_db, abs=0.01)
    assert sq_n.delta_p_db == pytest.approx(sq_p.delta_p_db, abs=0.01)


def test_postselection_success_equals_projection_product():
    # with every rate at zero the state stays pure, so the accumulated
    # success must equal the product of qubit projection probabilities
    r = peaks.input_r_for_db(11.5)
    model = nz.NoiseModel(gate_time_T=1.0, channels=(nz.LindbladChannel("boson_loss", 0.0),))
    rho, success = nz.noisy_run(2, r, model, postselect=True)
    space = FockSpace(rho.shape[0])

    sched = pr.build_schedule(2)
    state = hybrid_pure(space, squeezed_vacuum(space, r), sched.qubit_init)
    product = 1.0
    for i, gate in enumerate(sched.gates):
        state = pr.apply_gate(state, gate)
        if i in sched.expected_qubit:
            q = sched.expected_qubit[i]
            psi2 = state.data.reshape(space.dim, 2)
            amp = psi2 @ q.conj()
            p = float(np.sum(np.abs(amp) ** 2))
            state = HybridState("pure", np.kron(amp / math.sqrt(p), q), space)
            product *= p
    assert success == pytest.approx(product, abs=1e-12)
    assert success == pytest.approx(0.9913990059392035, abs=1e-9)


def test_qubit_dephasing_postselection_gain():
    # strong qubit dephasing: keeping only the expected qubit branch filters
    # the corrupted trajectories and recovers several dB in both quadratures
    r = peaks.input_r_for_db(11.5)
    model = nz.single_channel_model("qubit_dephasing", 1e-1)
    space = FockSpace(noise_dim(r, 2))
    rho_ps, s_ps = nz.noisy_run(2, r, model, postselect=True, space=space)
    rho_no, s_no = nz.noisy_run(2, r, model, postselect=False, space=space)
    sq_ps = fom.effective_squeezing(rho_ps)
    sq_no = fom.effective_squeezing(rho_no)
    assert s_no == 1.0
    assert sq_ps.delta_p_db == pytest.approx(9.233397, abs=1e-4)
    assert sq_ps.delta_x_db == pytest.approx(8.618764, abs=1e-4)
    assert sq_no.delta_p_db == pytest.approx(5.884170, abs=1e-4)
    assert sq_no.delta_x_db == pytest.approx(6.196231, abs=1e-4)
    assert s_ps == pytest.approx(0.713357, abs=1e-4)
    assert sq_ps.delta_p_db - sq_no.delta_p_db > 2.0
    assert sq_ps.delta_x_db - sq_no.delta_x_db > 2.0


def test_extra_round_trades_success_for_comb():
    # under strong qubit dephasing a third round still sharpens the comb but
    # costs envelope quality and acceptance probability
    r = peaks.input_r_for_db(11.5)
    model = nz.single_channel_model("qubit_dephasing", 1e-1)
    rho2, s2 = nz.noisy_run(2, r, model, postselect=True, space=FockSpace(noise_dim(r, 2)))
    rho3, s3 = nz.noisy_run(3, r, model, postselect=True, space=FockSpace(noise_dim(r, 3)))
    sq2 = fom.effective_squeezing(rho2)
    sq3 = fom.effective_squeezing(rho3)
    assert sq3.delta_p_db > sq2.delta_p_db
    assert sq3.delta_x_db < sq2.delta_x_db
    assert s3 < s2
    assert sq3.delta_p_db == pytest.approx(10.295720, abs=1e-4)
    assert s3 == pytest.approx(0.418840, abs=1e-4)
