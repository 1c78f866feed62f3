"""Dense statevector simulation for small qubit registers.

Conventions used throughout the package:
  * basis index i encodes qubit 0 as the most significant bit, so the
    bit of qubit q in an n-qubit register is ``(i >> (n - 1 - q)) & 1``;
  * rotations follow R_P(theta) = exp(-i * theta * P / 2).

All array functions accept arbitrary leading batch dimensions on the
amplitude axis, which is what the gradient engine and the analysis
pools rely on for speed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

ROTATION_KINDS = ("Rx", "Ry", "Rz")
GATE_KINDS = ROTATION_KINDS + ("CNOT", "CRy")

_NORM_TOL = 1e-10

# index permutations for CNOT, keyed by (n, control, target)
_cnot_perm_cache: dict[tuple[int, int, int], np.ndarray] = {}


class SimulationError(ValueError):
    """Raised on malformed gates, states or index ranges."""


@dataclass
class Gate:
    """One circuit gate.

    Exactly one of ``param_slot`` / ``fixed_angle`` / ``embed`` is set for
    angle-carrying kinds; CNOT carries no angle at all.  ``embed`` is a
    ``(feature_index, transform_name)`` pair resolved against the input
    vector at execution time (see :func:`embedding_transform`).
    """

    kind: str
    target: int
    control: Optional[int] = None
    param_slot: Optional[int] = None
    fixed_angle: Optional[float] = None
    embed: Optional[tuple[int, str]] = None
    gate_id: int = 0
    layer: int = 0
    sublayer: int = 0
    role: str = "rotation"  # embedding | rotation | entangling

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise SimulationError(f"unknown gate kind {self.kind!r}")
        if self.kind in ("CNOT", "CRy"):
            if self.control is None:
                raise SimulationError(f"{self.kind} requires a control qubit")
            if self.control == self.target:
                raise SimulationError("control and target must differ")
        elif self.control is not None:
            raise SimulationError(f"{self.kind} takes no control qubit")
        sources = [self.param_slot is not None, self.fixed_angle is not None,
                   self.embed is not None]
        if self.kind == "CNOT":
            if any(sources):
                raise SimulationError("CNOT carries no angle")
        elif sum(sources) != 1:
            raise SimulationError(f"{self.kind} needs exactly one angle source")

    @property
    def parametrized(self) -> bool:
        return self.param_slot is not None


EMBEDDING_TRANSFORMS = {
    "arcsin": lambda x: np.arcsin(x),
    "arccos_sq": lambda x: np.arccos(x * x),
    "arcsin_half_x2": lambda x: 2.0 * np.arcsin(x / 2.0),
    "arccos_half_sq_x2": lambda x: 2.0 * np.arccos((x / 2.0) ** 2),
}

_TRANSFORM_DOMAIN = {
    "arcsin": 1.0,
    "arccos_sq": 1.0,
    "arcsin_half_x2": 2.0,
    "arccos_half_sq_x2": 2.0,
}


def embedding_transform(name: str, x):
    """Map a feature value to an embedding rotation angle."""
    if name not in EMBEDDING_TRANSFORMS:
        raise SimulationError(f"unknown embedding transform {name!r}")
    bound = _TRANSFORM_DOMAIN[name]
    xa = np.asarray(x, dtype=float)
    if np.any(np.abs(xa) > bound + 1e-12):
        raise SimulationError(
            f"feature {xa!r} outside the domain [-{bound}, {bound}] of {name}")
    return EMBEDDING_TRANSFORMS[name](np.clip(xa, -bound, bound))


@dataclass
class StateVector:
    """Normalized pure state of ``n_qubits`` qubits."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.n_qubits < 1:
            raise SimulationError("need at least one qubit")
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise SimulationError(
                f"expected {1 << self.n_qubits} amplitudes, "
                f"got shape {self.amplitudes.shape}")
        norm = float(np.sum(np.abs(self.amplitudes) ** 2))
        if abs(norm - 1.0) > 1e-8:
            raise SimulationError(f"state not normalized (norm^2 = {norm})")

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def from_bits(cls, bits: str) -> "StateVector":
        n = len(bits)
        amps = np.zeros(1 << n, dtype=complex)
        amps[int(bits, 2)] = 1.0
        return cls(n, amps)


def _check_qubit(n: int, q: int):
    if not 0 <= q < n:
        raise SimulationError(f"qubit index {q} out of range for {n} qubits")


def rotation_2x2(kind: str, theta: float) -> np.ndarray:
    """2x2 matrix of R_P(theta) = exp(-i theta P / 2)."""
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    if kind == "Rx":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if kind == "Ry":
        return np.array([[c, -s], [s, c]])
    if kind == "Rz":
        return np.array([[c - 1j * s, 0], [0, c + 1j * s]])
    raise SimulationError(f"{kind} is not a rotation")


def apply_1q(amps: np.ndarray, n: int, q: int,
             u00, u01, u10, u11) -> np.ndarray:
    """Apply a single-qubit gate on qubit q of a (..., 2**n) array.

    The four matrix entries may be scalars or arrays broadcastable
    against the batch dimensions (shape (..., 1, 1) for per-batch angles).
    """
    lead = amps.shape[:-1]
    hi, lo = 1 << q, 1 << (n - q - 1)
    a = amps.reshape(lead + (hi, 2, lo))
    a0 = a[..., 0, :]
    a1 = a[..., 1, :]
    out = np.empty_like(a)
    out[..., 0, :] = u00 * a0 + u01 * a1
    out[..., 1, :] = u10 * a0 + u11 * a1
    return out.reshape(amps.shape)


def _cnot_perm(n: int, control: int, target: int) -> np.ndarray:
    key = (n, control, target)
    perm = _cnot_perm_cache.get(key)
    if perm is None:
        idx = np.arange(1 << n)
        cbit = (idx >> (n - 1 - control)) & 1
        perm = np.where(cbit == 1, idx ^ (1 << (n - 1 - target)), idx)
        _cnot_perm_cache[key] = perm
    return perm


def apply_cnot(amps: np.ndarray, n: int, control: int, target: int) -> np.ndarray:
    return amps[..., _cnot_perm(n, control, target)]


def apply_cry(amps, n, control, target, cos_half, sin_half):
    """Controlled-Ry: Ry(theta) on target where the control bit is 1."""
    lead = amps.shape[:-1]
    nb = len(lead)
    a, b = (control, target) if control < target else (target, control)
    shape = lead + (1 << a, 2, 1 << (b - a - 1), 2, 1 << (n - b - 1))
    arr = amps.reshape(shape).copy()
    full = [slice(None)] * arr.ndim
    caxis = nb + (1 if control < target else 3)
    taxis = nb + (3 if control < target else 1)
    idx1 = list(full)
    idx1[caxis] = 1
    idx0t = list(idx1)
    idx0t[taxis] = 0
    idx1t = list(idx1)
    idx1t[taxis] = 1
    a0 = arr[tuple(idx0t)].copy()
    a1 = arr[tuple(idx1t)].copy()
    arr[tuple(idx0t)] = cos_half * a0 - sin_half * a1
    arr[tuple(idx1t)] = sin_half * a0 + cos_half * a1
    return arr.reshape(amps.shape)


def apply_gate_array(amps: np.ndarray, n: int, gate: Gate,
                     angle=None) -> np.ndarray:
    """Apply ``gate`` to a (..., 2**n) amplitude array."""
    _check_qubit(n, gate.target)
    if gate.control is not None:
        _check_qubit(n, gate.control)
    if gate.kind == "CNOT":
        if angle is not None:
            raise SimulationError("CNOT takes no angle")
        return apply_cnot(amps, n, gate.control, gate.target)
    if angle is None:
        raise SimulationError(f"{gate.kind} requires an angle")
    if gate.kind == "CRy":
        half = np.asarray(angle) / 2.0
        ch, sh = np.cos(half), np.sin(half)
        if ch.ndim > 0:
            # a0/a1 inside apply_cry carry three trailing structure axes
            ch = ch[..., None, None, None]
            sh = sh[..., None, None, None]
        return apply_cry(amps, n, gate.control, gate.target, ch, sh)
    u = rotation_2x2(gate.kind, float(angle)) if np.isscalar(angle) or np.asarray(angle).ndim == 0 else None
    if u is not None:
        return apply_1q(amps, n, gate.target, u[0, 0], u[0, 1], u[1, 0], u[1, 1])
    # batched angles: build broadcastable entries
    th = np.asarray(angle, dtype=float)
    c = np.cos(th / 2.0)[..., None, None]
    s = np.sin(th / 2.0)[..., None, None]
    if gate.kind == "Rx":
        return apply_1q(amps, n, gate.target, c, -1j * s, -1j * s, c)
    if gate.kind == "Ry":
        return apply_1q(amps, n, gate.target, c, -s, s, c)
    if gate.kind == "Rz":
        return apply_1q(amps, n, gate.target, c - 1j * s, 0.0, 0.0, c + 1j * s)
    raise SimulationError(f"unsupported gate kind {gate.kind}")


def apply_generator(amps: np.ndarray, n: int, gate: Gate) -> np.ndarray:
    """Apply -i/2 * G where G generates the gate (dU/dtheta = G_eff U).

    For rotations G is the Pauli; for CRy it is |1><1| (x) Y on
    (control, target).
    """
    if gate.kind == "Rx":
        return apply_1q(amps, n, gate.target, 0.0, -0.5j, -0.5j, 0.0)
    if gate.kind == "Ry":
        return apply_1q(amps, n, gate.target, 0.0, -0.5, 0.5, 0.0)
    if gate.kind == "Rz":
        return apply_1q(amps, n, gate.target, -0.5j, 0.0, 0.0, 0.5j)
    if gate.kind == "CRy":
        # -1/2 Y on target, restricted to control = 1
        return _apply_cry_generator(amps, n, gate.control, gate.target)
    raise SimulationError(f"{gate.kind} has no generator")


def _apply_cry_generator(amps, n, control, target):
    lead = amps.shape[:-1]
    nb = len(lead)
    a, b = (control, target) if control < target else (target, control)
    shape = lead + (1 << a, 2, 1 << (b - a - 1), 2, 1 << (n - b - 1))
    arr = amps.reshape(shape)
    out = np.zeros_like(arr)
    caxis = nb + (1 if control < target else 3)
    taxis = nb + (3 if control < target else 1)
    full = [slice(None)] * arr.ndim
    idx0t = list(full)
    idx0t[caxis] = 1
    idx1t = list(idx0t)
    idx0t[taxis] = 0
    idx1t[taxis] = 1
    out[tuple(idx0t)] = -0.5 * arr[tuple(idx1t)]
    out[tuple(idx1t)] = 0.5 * arr[tuple(idx0t)]
    return out.reshape(amps.shape)


def apply_gate(state: StateVector, gate: Gate, angle=None) -> StateVector:
    """Apply one gate to a state, returning a new state."""
    amps = apply_gate_array(state.amplitudes, state.n_qubits, gate, angle)
    return StateVector(state.n_qubits, amps)


def z_signs(n: int, qubit: int) -> np.ndarray:
    """Pauli-Z eigenvalue (+1/-1) of ``qubit`` for every basis index."""
    idx = np.arange(1 << n)
    return 1.0 - 2.0 * ((idx >> (n - 1 - qubit)) & 1)


def expectation_z(state: StateVector, qubit: int) -> float:
    _check_qubit(state.n_qubits, qubit)
    probs = np.abs(state.amplitudes) ** 2
    return float(np.dot(z_signs(state.n_qubits, qubit), probs))


def fidelity(a: StateVector, b: StateVector) -> float:
    if a.n_qubits != b.n_qubits:
        raise SimulationError("fidelity needs equal register sizes")
    return float(np.abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def subset_purity(state: StateVector, subset: Iterable[int]) -> float:
    """Tr[rho_subset^2] of the reduced state over the given qubits."""
    subset = sorted(set(subset))
    n = state.n_qubits
    for q in subset:
        _check_qubit(n, q)
    return float(subset_purity_batch(state.amplitudes[None, :], n, subset)[0])


def subset_purity_batch(amps: np.ndarray, n: int, subset) -> np.ndarray:
    """Vectorized Tr[rho_a^2] for a (B, 2**n) batch of pure states.

    Reshapes to a (kept, traced-out) matrix M per state; the purity of the
    reduced state is ||M M^dag||_F^2.
    """
    subset = sorted(set(subset))
    if len(subset) == 0 or len(subset) == n:
        return np.ones(amps.shape[0])
    comp = [q for q in range(n) if q not in subset]
    t = amps.reshape((amps.shape[0],) + (2,) * n)
    order = [0] + [1 + q for q in subset] + [1 + q for q in comp]
    m = np.transpose(t, order).reshape(amps.shape[0], 1 << len(subset),
                                       1 << len(comp))
    g = m @ m.conj().transpose(0, 2, 1)
    return np.real(np.einsum("bij,bij->b", g, g.conj()))


def run_circuit(template, params, mask, x) -> StateVector:
    """Execute a CircuitTemplate gate by gate from |0...0>.

    Gates whose ids appear in ``mask`` are skipped (dropped gates act as
    identities).  This is the reference path; the batched engine in
    :mod:`qdrop.gradients` is checked against it.
    """
    params = np.asarray(params, dtype=float)
    if params.shape != (template.parameter_count,):
        raise SimulationError(
            f"expected {template.parameter_count} parameters, got {params.shape}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape[0] != template.embedding_arity:
        raise SimulationError(
            f"expected {template.embedding_arity} features, got {x.shape[0]}")
    dropped = mask.dropped_gate_ids if mask is not None else frozenset()
    amps = np.zeros(1 << template.n_qubits, dtype=complex)
    amps[0] = 1.0
    n = template.n_qubits
    for gate in template.gates:
        if gate.gate_id in dropped:
            continue
        if gate.kind == "CNOT":
            amps = apply_gate_array(amps, n, gate)
        elif gate.embed is not None:
            fi, tname = gate.embed
            amps = apply_gate_array(amps, n, gate,
                                    float(embedding_transform(tname, x[fi])))
        elif gate.param_slot is not None:
            amps = apply_gate_array(amps, n, gate, params[gate.param_slot])
        else:
            amps = apply_gate_array(amps, n, gate, gate.fixed_angle)
    return StateVector(n, amps)
