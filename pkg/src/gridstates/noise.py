"""Open-system protocol runs: gates as timed Hamiltonians under Lindblad noise.

A gate exp(i c G) is realized as evolution under H = -sign(c) G / T for a
duration |c| T, so noise accumulates for a time proportional to the gate
strength. Channel rates are physical (1/time in the same units as the gate
time T); presets quote the dimensionless per-gate products gamma*T.

The master equation is integrated on the vectorized density matrix with
DOP853 (rtol 1e-8, atol 1e-10), sparse operators, and the evolution split
into chunks with Hermitian symmetrization between them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .hilbert import (
    FockSpace,
    HybridState,
    default_dim,
    hybrid_pure,
    partial_trace_qubit,
    squeezed_vacuum,
)
from .protocol import (
    GateSpec,
    LogicalCircuit,
    apply_gate_dm,
    build_schedule,
)

CHANNEL_KINDS = ("boson_loss", "boson_dephasing", "qubit_dephasing", "qubit_decay")

__all__ = [
    "CHANNEL_KINDS",
    "LindbladChannel",
    "NoiseModel",
    "Preset",
    "preset",
    "single_channel_model",
    "evolve",
    "noisy_gate",
    "noisy_run",
    "noisy_run_circuit",
]


@dataclass(frozen=True)
class LindbladChannel:
    """One decay channel: kind selects the jump operator, rate_gamma scales it.

    Jump operators (the sqrt(gamma) prefactor is applied by the integrator):
    boson_loss a; boson_dephasing (a a' + a' a) = 2 n + 1; qubit_dephasing
    sigma_z; qubit_decay (sigma_x + i sigma_y)/2 = |0><1|.
    """

    kind: str
    rate_gamma: float

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if not self.rate_gamma >= 0:
            raise ValueError("rate_gamma must be >= 0")


@dataclass(frozen=True)
class NoiseModel:
    """Channels plus the time T a unit-strength gate takes."""

    gate_time_T: float
    channels: Tuple[LindbladChannel, ...] = ()

    def __post_init__(self):
        if not (self.gate_time_T > 0 and math.isfinite(self.gate_time_T)):
            raise ValueError("gate_time_T must be positive and finite")
        object.__setattr__(self, "channels", tuple(self.channels))

    def rates(self) -> Dict[str, float]:
        """Per-kind rates with duplicate kinds summed."""
        out: Dict[str, float] = {}
        for ch in self.channels:
            out[ch.kind] = out.get(ch.kind, 0.0) + ch.rate_gamma
        return out

    def total_rate(self) -> float:
        return sum(ch.rate_gamma for ch in self.channels)


@dataclass(frozen=True)
class Preset:
    name: str
    model: NoiseModel


# interaction time T in us; rates in 1/us chosen so the per-gate products
# gamma*T come out at the quoted values
_PRESETS = {
    "trapped_ion": (11.0, (("boson_dephasing", 7.7e-5),)),
    "microwave_cavity": (
        0.34,
        (
            ("qubit_decay", 6.8e-3),
            ("qubit_dephasing", 5.7e-3),
            ("boson_loss", 1.4e-3),
        ),
    ),
}


def preset(name: str) -> Preset:
    """Experimental noise presets ('trapped_ion' or 'microwave_cavity')."""
    if name not in _PRESETS:
        raise ValueError(f"unknown preset {name!r}; options: {sorted(_PRESETS)}")
    t, pairs = _PRESETS[name]
    channels = tuple(LindbladChannel(kind, gt / t) for kind, gt in pairs)
    return Preset(name=name, model=NoiseModel(gate_time_T=t, channels=channels))


def single_channel_model(kind: str, gamma_t: float, gate_time_T: float = 1.0) -> NoiseModel:
    """One channel with the dimensionless product gamma*T = gamma_t."""
    return NoiseModel(
        gate_time_T=gate_time_T,
        channels=(LindbladChannel(kind, gamma_t / gate_time_T),),
    )


# ---------------------------------------------------------------------------
# operators


def _boson_sparse(space: FockSpace, which: str) -> sp.csr_matrix:
    n = np.arange(space.dim)
    root = np.sqrt(n[1:])
    if which == "a":
        mat = sp.diags(root, 1)
    elif which == "x":
        mat = sp.diags([root / math.sqrt(2.0)] * 2, [1, -1])
    elif which == "p":
        mat = sp.diags([-1j * root / math.sqrt(2.0), 1j * root / math.sqrt(2.0)], [1, -1])
    elif which == "two_n_plus_1":
        mat = sp.diags(2.0 * n + 1.0)
    else:
        raise ValueError(which)
    return sp.csr_matrix(mat, dtype=complex)


_SIGMA = {
    "z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
    "x": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "minus": np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex),  # |0><1|
}


def _sigma_phi(phi: float) -> np.ndarray:
    e = np.exp(1j * phi)
    return np.array([[0.0, np.conj(e)], [e, 0.0]], dtype=complex)


def _embed_boson(space: FockSpace, mat) -> sp.csr_matrix:
    return sp.csr_matrix(sp.kron(mat, sp.identity(2, dtype=complex, format="csr")))


def _embed_qubit(space: FockSpace, mat: np.ndarray) -> sp.csr_matrix:
    return sp.csr_matrix(
        sp.kron(sp.identity(space.dim, dtype=complex, format="csr"), sp.csr_matrix(mat))
    )


def _jump_operator(kind: str, space: FockSpace) -> sp.csr_matrix:
    if kind == "boson_loss":
        return _embed_boson(space, _boson_sparse(space, "a"))
    if kind == "boson_dephasing":
        return _embed_boson(space, _boson_sparse(space, "two_n_plus_1"))
    if kind == "qubit_dephasing":
        return _embed_qubit(space, _SIGMA["z"])
    if kind == "qubit_decay":
        return _embed_qubit(space, _SIGMA["minus"])
    raise ValueError(f"unknown channel kind {kind!r}")


def _gate_generator(gate: GateSpec, space: FockSpace) -> Tuple[sp.csr_matrix, float]:
    """Hermitian G and strength c with gate = exp(i c G)."""
    if gate.kind == "XsigmaPhi":
        g = sp.csr_matrix(sp.kron(_boson_sparse(space, "x"), sp.csr_matrix(_sigma_phi(gate.phi))))
        return g, gate.strength
    if gate.kind == "PsigmaX":
        g = sp.csr_matrix(sp.kron(_boson_sparse(space, "p"), sp.csr_matrix(_SIGMA["x"])))
        return g, gate.strength
    if gate.kind == "UnconditionalDisplacement":
        amp = gate.strength * np.exp(1j * gate.phi)
        mod = abs(amp)
        if mod == 0:
            return _embed_boson(space, _boson_sparse(space, "x")), 0.0
        # D(amp) = exp(i sqrt2 (Im(amp) X - Re(amp) P)); unit-normalized G
        gb = (amp.imag * _boson_sparse(space, "x") - amp.real * _boson_sparse(space, "p")) / mod
        return _embed_boson(space, gb), math.sqrt(2.0) * mod
    raise ValueError(f"unknown gate kind {gate.kind!r}")


# ---------------------------------------------------------------------------
# integrator


def evolve(
    state: HybridState,
    hamiltonian,
    duration: float,
    model: NoiseModel,
    chunks: int = 4,
    rtol: float = 1e-8,
    atol: float = 1e-10,
) -> HybridState:
    """Integrate d rho/dt = -i[H, rho] + sum_j D[sqrt(gamma_j) L_j] rho.

    state must be a mixed HybridState; hamiltonian a (2 dim x 2 dim) matrix
    in the same units as the channel rates. The evolution runs in chunks with
    rho <- (rho + rho')/2 and trace renormalization between them; a trace
    drift above 1e-8 raises.
    """
    if duration < 0:
        raise ValueError("duration must be >= 0")
    if state.kind != "mixed":
        raise ValueError("evolve needs a mixed HybridState")
    rho = np.array(state.data, dtype=complex)
    if duration == 0:
        return HybridState("mixed", rho, state.space)
    d = rho.shape[0]
    h = sp.csr_matrix(hamiltonian, dtype=complex)
    ops = []
    for kind, rate in model.rates().items():
        if rate <= 0:
            continue
        l_op = _jump_operator(kind, state.space)
        lh = sp.csr_matrix(l_op.conj().T)
        m_op = sp.csr_matrix(lh @ l_op)
        ops.append((rate, l_op, lh, m_op))

    def rhs(_t, y):
        r = y.reshape(d, d)
        out = -1j * (h @ r - r @ h)
        for rate, l_op, lh, m_op in ops:
            out += rate * ((l_op @ r) @ lh - 0.5 * (m_op @ r + r @ m_op))
        return out.ravel()

    dt = duration / chunks
    for _ in range(chunks):
        sol = solve_ivp(
            rhs,
            (0.0, dt),
            rho.ravel(),
            method="DOP853",
            rtol=rtol,
            atol=atol,
            t_eval=(dt,),
        )
        if not sol.success:
            raise ArithmeticError(f"master-equation integration failed: {sol.message}")
        rho = sol.y[:, -1].reshape(d, d)
        rho = 0.5 * (rho + rho.conj().T)
        tr = float(np.real(np.trace(rho)))
        if abs(tr - 1.0) > 1e-8:
            raise ArithmeticError(f"trace drifted to {tr} during integration")
        rho /= tr
    return HybridState("mixed", rho, state.space)


def noisy_gate(state: HybridState, gate: GateSpec, model: Optional[NoiseModel]) -> HybridState:
    """One protocol gate as a timed Hamiltonian under the model's channels.

    gamma -> 0 (or model None) reproduces the exact unitary gate; a
    zero-strength gate is the identity (zero duration, so no decoherence).
    """
    space = state.space
    if model is None or model.total_rate() == 0.0:
        if state.kind != "mixed":
            raise ValueError("noisy_gate needs a mixed HybridState")
        return HybridState("mixed", apply_gate_dm(state.data, gate, space), space)
    gen, c = _gate_generator(gate, space)
    if c == 0.0:
        return HybridState("mixed", np.array(state.data, dtype=complex), space)
    h = -math.copysign(1.0, c) / model.gate_time_T * gen
    return evolve(state, h, abs(c) * model.gate_time_T, model)


# ---------------------------------------------------------------------------
# full runs


def _project_qubit(rho: np.ndarray, qubit: np.ndarray) -> Tuple[np.ndarray, float]:
    """Project the qubit factor onto |qubit>; returns (state, probability)."""
    d = rho.shape[0] // 2
    r4 = rho.reshape(d, 2, d, 2)
    q = np.asarray(qubit, dtype=complex)
    rho_b = np.einsum("a,manb,b->mn", q.conj(), r4, q)
    p = float(np.real(np.trace(rho_b)))
    if p < 1e-12:
        raise ArithmeticError("postselection probability vanished")
    out = np.kron(rho_b / p, np.outer(q, q.conj()))
    return out, p


def noisy_run(
    n_rounds: int,
    input_r: float,
    model: Optional[NoiseModel],
    u=None,
    lattice=None,
    postselect: bool = False,
    space: Optional[FockSpace] = None,
) -> Tuple[np.ndarray, float]:
    """Noisy protocol run; returns (boson density matrix, success probability).

    The input squeezed state is taken as given (source noise is out of
    scope). With postselect the qubit is projected onto the noiseless
    expected state after every disentangling gate and the success
    probability accumulates; without it the qubit is simply traced out at
    the end. Success below 1e-6 is flagged as degenerate.
    """
    schedule = build_schedule(n_rounds, u=u, lattice=lattice)
    if space is None:
        space = FockSpace(default_dim(input_r, n_rounds))
    psi = hybrid_pure(space, squeezed_vacuum(space, input_r), schedule.qubit_init)
    state = HybridState("mixed", psi.density_matrix(), space)
    success = 1.0
    for i, gate in enumerate(schedule.gates):
        state = noisy_gate(state, gate, model)
        if postselect and i in schedule.expected_qubit:
            data, p = _project_qubit(state.data, schedule.expected_qubit[i])
            state = HybridState("mixed", data, space)
            success *= p
            if success < 1e-6:
                raise ArithmeticError(f"degenerate postselection: success {success:.2e}")
    return partial_trace_qubit(state), success


def _apply_qubit_unitary_dm(rho: np.ndarray, u2: np.ndarray) -> np.ndarray:
    d = rho.shape[0] // 2
    r4 = rho.reshape(d, 2, d, 2)
    out = np.einsum("ab,mbnd,cd->manc", u2, r4, u2.conj())
    return out.reshape(2 * d, 2 * d)


def noisy_run_circuit(
    circuit: LogicalCircuit,
    input_r: float,
    model: Optional[NoiseModel],
    postselect: bool = False,
    space: Optional[FockSpace] = None,
) -> Tuple[np.ndarray, float]:
    """noisy_run for a logical-preparation circuit.

    Qubit-frame steps are instantaneous rotations (no noise accumulates);
    gate steps evolve exactly like noisy_run.
    """
    if space is None:
        space = FockSpace(default_dim(input_r, circuit.n_rounds))
    psi = hybrid_pure(space, squeezed_vacuum(space, input_r), circuit.qubit_init)
    state = HybridState("mixed", psi.density_matrix(), space)
    success = 1.0
    for i, (kind, payload) in enumerate(circuit.steps):
        if kind == "qubit":
            state = HybridState("mixed", _apply_qubit_unitary_dm(state.data, payload), space)
            continue
        state = noisy_gate(state, payload, model)
        if postselect and i in circuit.expected_qubit:
            data, p = _project_qubit(state.data, circuit.expected_qubit[i])
            state = HybridState("mixed", data, space)
            success *= p
            if success < 1e-6:
                raise ArithmeticError(f"degenerate postselection: success {success:.2e}")
    return partial_trace_qubit(state), success
