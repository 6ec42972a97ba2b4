"""Truncated Fock-space linear algebra for one bosonic mode and one qubit.

Conventions used throughout the package:

* quadratures X = (a + a')/sqrt(2), P = (a - a')/(sqrt(2) i), so [X, P] = i
  and the vacuum has Var X = Var P = 1/2,
* D(amp) = exp(amp a' - amp* a) displaces (X, P) by
  (sqrt(2) Re amp, sqrt(2) Im amp),
* S(r) = exp((r/2)(a^2 - a'^2)) squeezes X: Var X -> exp(-2r)/2,
* hybrid kets are ordered |n> (x) |q> with the qubit index varying fastest,
  i.e. the amplitude of |n>|q> lives at flat index 2*n + q.

Example::

    sp = FockSpace(140)
    psi = hybrid_pure(sp, squeezed_vacuum(sp, 0.8), QUBIT_ZERO)
    rho = partial_trace_qubit(psi)
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg as sla

__all__ = [
    "FockSpace",
    "BosonOperator",
    "QubitOperator",
    "HybridState",
    "LeakageWarning",
    "DimensionMismatchError",
    "QUBIT_ZERO",
    "QUBIT_ONE",
    "annihilation",
    "creation",
    "number",
    "position",
    "momentum",
    "identity",
    "displacement",
    "squeeze",
    "rotation",
    "squeezed_vacuum",
    "coherent_state",
    "sigma_x",
    "sigma_y",
    "sigma_z",
    "sigma_phi",
    "qubit_identity",
    "embed",
    "hybrid_pure",
    "partial_trace_qubit",
    "expectation",
    "apply_phase_of_x",
    "apply_displacement_to_vector",
    "default_dim",
    "leakage_above",
]


class LeakageWarning(UserWarning):
    """Probability has piled up near the Fock cutoff; results may be off."""


class DimensionMismatchError(ValueError):
    pass


QUBIT_ZERO = np.array([1.0, 0.0], dtype=complex)
QUBIT_ONE = np.array([0.0, 1.0], dtype=complex)


class FockSpace:
    """Single bosonic mode truncated to Fock states |0> .. |dim-1>.

    Instances are immutable; the X-quadrature eigendecomposition is computed
    once on first use and cached (it is the workhorse behind all fast gate
    applications: X is tridiagonal in the Fock basis).
    """

    def __init__(self, dim: int):
        if dim < 2:
            raise ValueError(f"Fock cutoff must be >= 2, got {dim}")
        self._dim = int(dim)
        self._xeig = None

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def x_eigensystem(self):
        """Eigenvalues and eigenvectors (lam, Q) of X, X = Q diag(lam) Q^T.

        Q is real orthogonal. P shares the spectrum: P = R X R' with
        R = diag(i^n), so one decomposition serves both quadratures.
        """
        if self._xeig is None:
            off = np.sqrt(np.arange(1, self._dim)) / math.sqrt(2.0)
            lam, q = sla.eigh_tridiagonal(np.zeros(self._dim), off)
            self._xeig = (lam, q)
        return self._xeig

    def rotation_phases(self, theta: float) -> np.ndarray:
        """Diagonal of exp(i theta n) in the Fock basis."""
        return np.exp(1j * theta * np.arange(self._dim))

    def __eq__(self, other):
        return isinstance(other, FockSpace) and other._dim == self._dim

    def __hash__(self):
        return hash(("FockSpace", self._dim))

    def __repr__(self):
        return f"FockSpace(dim={self._dim})"


@dataclass(frozen=True)
class BosonOperator:
    """A dense dim x dim operator on a FockSpace."""

    matrix: np.ndarray
    space: FockSpace

    def __post_init__(self):
        d = self.space.dim
        if self.matrix.shape != (d, d):
            raise DimensionMismatchError(
                f"operator shape {self.matrix.shape} does not match dim {d}"
            )

    def dagger(self) -> "BosonOperator":
        return BosonOperator(self.matrix.conj().T, self.space)

    def __matmul__(self, other: "BosonOperator") -> "BosonOperator":
        if self.space != other.space:
            raise DimensionMismatchError("operators live on different spaces")
        return BosonOperator(self.matrix @ other.matrix, self.space)


@dataclass(frozen=True)
class QubitOperator:
    """A 2 x 2 qubit operator."""

    matrix: np.ndarray

    def __post_init__(self):
        if self.matrix.shape != (2, 2):
            raise DimensionMismatchError("qubit operators are 2x2")

    def dagger(self) -> "QubitOperator":
        return QubitOperator(self.matrix.conj().T)

    def __matmul__(self, other: "QubitOperator") -> "QubitOperator":
        return QubitOperator(self.matrix @ other.matrix)


@dataclass
class HybridState:
    """Boson (x) qubit state, pure (vector, length 2 dim) or mixed (matrix).

    kind is 'pure' or 'mixed'. Flat index convention: 2*n + q.
    """

    kind: str
    data: np.ndarray
    space: FockSpace

    def __post_init__(self):
        d2 = 2 * self.space.dim
        if self.kind == "pure":
            if self.data.shape != (d2,):
                raise DimensionMismatchError("pure hybrid state must have length 2*dim")
        elif self.kind == "mixed":
            if self.data.shape != (d2, d2):
                raise DimensionMismatchError("mixed hybrid state must be 2dim x 2dim")
        else:
            raise ValueError(f"kind must be 'pure' or 'mixed', got {self.kind!r}")

    def validate(self, check_positivity: bool = False) -> None:
        """Check the physical-state invariants; raises ValueError on defects."""
        if self.kind == "pure":
            norm = np.linalg.norm(self.data)
            if abs(norm - 1.0) > 1e-9:
                raise ValueError(f"pure state norm {norm}")
        else:
            herm = np.max(np.abs(self.data - self.data.conj().T))
            if herm > 1e-10:
                raise ValueError(f"hermiticity defect {herm}")
            tr = np.trace(self.data).real
            if abs(tr - 1.0) > 1e-9:
                raise ValueError(f"trace {tr}")
            if check_positivity:
                w = np.linalg.eigvalsh(self.data)
                if w.min() < -1e-9:
                    raise ValueError(f"negative eigenvalue {w.min()}")

    def density_matrix(self) -> np.ndarray:
        if self.kind == "pure":
            return np.outer(self.data, self.data.conj())
        return self.data


def annihilation(space: FockSpace) -> BosonOperator:
    """Lowering operator: <n-1| a |n> = sqrt(n)."""
    m = np.diag(np.sqrt(np.arange(1, space.dim, dtype=float)), 1).astype(complex)
    return BosonOperator(m, space)


def creation(space: FockSpace) -> BosonOperator:
    return annihilation(space).dagger()


def number(space: FockSpace) -> BosonOperator:
    return BosonOperator(np.diag(np.arange(space.dim, dtype=float)).astype(complex), space)


def position(space: FockSpace) -> BosonOperator:
    a = annihilation(space).matrix
    return BosonOperator((a + a.conj().T) / math.sqrt(2.0), space)


def momentum(space: FockSpace) -> BosonOperator:
    a = annihilation(space).matrix
    return BosonOperator((a - a.conj().T) / (math.sqrt(2.0) * 1j), space)


def identity(space: FockSpace) -> BosonOperator:
    return BosonOperator(np.eye(space.dim, dtype=complex), space)


def _warn_if_leaky(column: np.ndarray, space: FockSpace, what: str) -> None:
    # contract: flag > 1e-6 probability above 0.9*dim when acting on vacuum
    leak = leakage_above(column, 0.9)
    if leak > 1e-6:
        warnings.warn(
            f"{what} leaks {leak:.2e} probability above 0.9*dim (dim={space.dim}); "
            "increase the Fock cutoff",
            LeakageWarning,
            stacklevel=3,
        )


def displacement(space: FockSpace, amp: complex) -> BosonOperator:
    """Displacement operator D(amp) = expm(amp a' - amp* a)."""
    a = annihilation(space).matrix
    gen = amp * a.conj().T - np.conj(amp) * a
    mat = sla.expm(gen)
    _warn_if_leaky(mat[:, 0], space, f"displacement({amp})")
    return BosonOperator(mat, space)


def squeeze(space: FockSpace, r: float) -> BosonOperator:
    """Squeezing operator S(r) with Var_X(S(r)|vac>) = exp(-2r)/2.

    Generator fixed by the variance convention above: S(r) =
    expm((r/2)(a^2 - a'^2)). Positive r narrows X and widens P.
    """
    a = annihilation(space).matrix
    gen = 0.5 * r * (a @ a - a.conj().T @ a.conj().T)
    mat = sla.expm(gen)
    _warn_if_leaky(mat[:, 0], space, f"squeeze({r})")
    return BosonOperator(mat, space)


def rotation(space: FockSpace, theta: float) -> BosonOperator:
    """Phase-space rotation exp(i theta n). theta = pi/2 maps X -> P."""
    return BosonOperator(np.diag(space.rotation_phases(theta)), space)


def squeezed_vacuum(space: FockSpace, r: float) -> np.ndarray:
    """S(r)|vac> as a Fock vector, without building the dense exponential.

    The state is annihilated by (a cosh r + a' sinh r), which gives the
    two-step recurrence c[n+1] = -tanh(r) sqrt(n/(n+1)) c[n-1]. The recurrence
    is contractive for every r, so it is numerically stable at any cutoff.
    """
    c = np.zeros(space.dim, dtype=complex)
    c[0] = 1.0
    t = math.tanh(r)
    for n in range(1, space.dim - 1, 2):
        c[n + 1] = -t * math.sqrt(n / (n + 1.0)) * c[n - 1]
    c /= np.linalg.norm(c)
    _warn_if_leaky(c, space, f"squeezed_vacuum({r})")
    return c


def coherent_state(space: FockSpace, alpha: complex) -> np.ndarray:
    """|alpha> = D(alpha)|vac> via the normalized Fock series."""
    n = np.arange(space.dim)
    logs = n * np.log(complex(alpha)) if alpha != 0 else np.where(n == 0, 0.0, -np.inf)
    log_fact = np.cumsum(np.concatenate(([0.0], np.log(np.arange(1, space.dim)))))
    c = np.exp(-0.5 * abs(alpha) ** 2 + logs - 0.5 * log_fact)
    c = np.asarray(c, dtype=complex)
    _warn_if_leaky(c, space, f"coherent_state({alpha})")
    return c


def sigma_x() -> QubitOperator:
    return QubitOperator(np.array([[0, 1], [1, 0]], dtype=complex))


def sigma_y() -> QubitOperator:
    return QubitOperator(np.array([[0, -1j], [1j, 0]], dtype=complex))


def sigma_z() -> QubitOperator:
    return QubitOperator(np.array([[1, 0], [0, -1]], dtype=complex))


def sigma_phi(phi: float) -> QubitOperator:
    """cos(phi) sigma_x + sin(phi) sigma_y; eigenvectors (1, +-e^{i phi})/sqrt(2)."""
    return QubitOperator(
        np.array([[0, np.exp(-1j * phi)], [np.exp(1j * phi), 0]], dtype=complex)
    )


def qubit_identity() -> QubitOperator:
    return QubitOperator(np.eye(2, dtype=complex))


def embed(op_boson: BosonOperator, op_qubit: QubitOperator) -> np.ndarray:
    """Kronecker product in the 2*n + q index convention (qubit fastest)."""
    return np.kron(op_boson.matrix, op_qubit.matrix)


def hybrid_pure(space: FockSpace, boson_vec: np.ndarray, qubit_vec: np.ndarray) -> HybridState:
    """Product state |boson> (x) |qubit> as a pure HybridState."""
    if boson_vec.shape != (space.dim,):
        raise DimensionMismatchError("boson vector length must equal dim")
    data = np.kron(np.asarray(boson_vec, dtype=complex), np.asarray(qubit_vec, dtype=complex))
    return HybridState("pure", data, space)


def partial_trace_qubit(state: HybridState) -> np.ndarray:
    """Trace out the qubit; returns the dim x dim boson density matrix."""
    d = state.space.dim
    if state.kind == "pure":
        psi = state.data.reshape(d, 2)
        return psi @ psi.conj().T
    rho = state.data.reshape(d, 2, d, 2)
    return np.einsum("nqmq->nm", rho)


def _as_matrix(op, dim: int) -> np.ndarray:
    if isinstance(op, BosonOperator):
        return op.matrix
    if isinstance(op, QubitOperator):
        return op.matrix
    return np.asarray(op)


def expectation(state: Union[HybridState, np.ndarray], op) -> complex:
    """<op> for a HybridState, a bare boson vector or a density matrix.

    A boson-only operator is lifted with the qubit identity automatically
    when paired with a hybrid state.
    """
    if isinstance(state, HybridState):
        d2 = 2 * state.space.dim
        mat = _as_matrix(op, d2)
        if mat.shape == (state.space.dim, state.space.dim):
            mat = np.kron(mat, np.eye(2))
        if mat.shape != (d2, d2):
            raise DimensionMismatchError(
                f"operator shape {mat.shape} does not fit hybrid dim {d2}"
            )
        if state.kind == "pure":
            return complex(np.vdot(state.data, mat @ state.data))
        return complex(np.sum(state.data * mat.T))
    arr = np.asarray(state)
    mat = _as_matrix(op, arr.shape[0])
    if arr.ndim == 1:
        if mat.shape != (arr.size, arr.size):
            raise DimensionMismatchError(
                f"operator shape {mat.shape} does not match vector length {arr.size}"
            )
        return complex(np.vdot(arr, mat @ arr))
    if mat.shape != arr.shape:
        raise DimensionMismatchError(
            f"operator shape {mat.shape} does not match state shape {arr.shape}"
        )
    # tr(rho op) without forming the product
    return complex(np.sum(arr * mat.T))


def apply_phase_of_x(space: FockSpace, k: float, arr: np.ndarray) -> np.ndarray:
    """exp(i k X) applied to a boson vector or to each column of a matrix."""
    lam, q = space.x_eigensystem
    if arr.ndim == 1:
        return q @ (np.exp(1j * k * lam) * (q.T @ arr))
    return q @ (np.exp(1j * k * lam)[:, None] * (q.T @ arr))


def apply_displacement_to_vector(space: FockSpace, amp: complex, vec: np.ndarray) -> np.ndarray:
    """D(amp) applied to boson vector(s) without building the dense operator.

    Uses D(xi) = e^{-i Re xi Im xi} e^{i a X} e^{-i b P} with a = sqrt(2) Im xi,
    b = sqrt(2) Re xi, and P = R X R' in the cached X eigenbasis. O(dim^2).
    """
    amp = complex(amp)
    a = math.sqrt(2.0) * amp.imag
    b = math.sqrt(2.0) * amp.real
    rot = space.rotation_phases(math.pi / 2.0)
    if vec.ndim == 1:
        out = rot.conj() * vec
        out = apply_phase_of_x(space, -b, out)
        out = rot * out
    else:
        out = rot.conj()[:, None] * vec
        out = apply_phase_of_x(space, -b, out)
        out = rot[:, None] * out
    out = apply_phase_of_x(space, a, out)
    return np.exp(-1j * amp.real * amp.imag) * out


def default_dim(input_r: float, n_rounds: int) -> int:
    """Fock cutoff for a protocol run: max(140, 8 e^{2r} + 40 * 2^N).

    Peaks extend to |X| ~ 2^N sqrt(pi) and the anti-squeezed input needs
    e^{2r} scaling; the margin keeps cutoff leakage below 1e-6.
    """
    return max(140, math.ceil(8.0 * math.exp(2.0 * input_r) + 40.0 * 2**n_rounds))


def leakage_above(state: Union[np.ndarray, HybridState], frac: float = 0.9) -> float:
    """Probability residing at Fock indices >= frac*dim."""
    if isinstance(state, HybridState):
        rho_b = partial_trace_qubit(state)
        pops = np.real(np.diag(rho_b))
        cut = int(frac * state.space.dim)
        return float(np.sum(pops[cut:]))
    arr = np.asarray(state)
    if arr.ndim == 1:
        pops = np.abs(arr) ** 2
    else:
        pops = np.real(np.diag(arr))
    cut = int(frac * len(pops))
    return float(np.sum(pops[cut:]))
