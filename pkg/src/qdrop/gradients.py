"""Exact differentiation of masked circuits and the quantum Fisher matrix.

The production gradient path is an adjoint-style reverse pass over the
statevector, which costs O(gates) per batch instead of O(params * gates).
A parameter-shift evaluation is kept as an independent oracle; tests also
compare both against central finite differences of the loss.

Circuits are compiled once per (template, input batch): the embedding
block of a layer is identical for every layer, so it is folded into a
single per-sample matrix applied with one matmul.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuits import CircuitTemplate
from .dropout import DropoutMask, EMPTY_MASK
from .statesim import (Gate, SimulationError, apply_gate_array,
                       apply_generator, embedding_transform, z_signs)

# four-term shift rule for gates generated by eigenvalues {0, +-1/2}
_CTRL_SHIFTS = (np.pi / 2.0, 3.0 * np.pi / 2.0)
_CTRL_COEFFS = ((math.sqrt(2.0) + 1.0) / (4.0 * math.sqrt(2.0)),
                (math.sqrt(2.0) - 1.0) / (4.0 * math.sqrt(2.0)))


@dataclass
class CompiledCircuit:
    """Template bound to a fixed batch of inputs."""

    template: CircuitTemplate
    x_batch: np.ndarray            # (B, arity)
    embed_matrix: np.ndarray       # (B, dim, dim), acts per layer
    layer_gates: list[list[Gate]]  # variational gates per layer, in order

    @property
    def n_qubits(self) -> int:
        return self.template.n_qubits

    @property
    def batch_size(self) -> int:
        return self.x_batch.shape[0]

    @property
    def parameter_count(self) -> int:
        return self.template.parameter_count


def compile_circuit(template: CircuitTemplate, x_batch) -> CompiledCircuit:
    x_batch = np.atleast_2d(np.asarray(x_batch, dtype=float))
    if x_batch.shape[1] != template.embedding_arity:
        raise SimulationError(
            f"expected {template.embedding_arity} features, "
            f"got {x_batch.shape[1]}")
    n = template.n_qubits
    dim = 1 << n
    b = x_batch.shape[0]

    layer0 = template.gates_in_layer(0)
    embed0 = [g for g in layer0 if g.role == "embedding"]
    for layer in range(1, template.n_layers):
        others = [g for g in template.gates_in_layer(layer)
                  if g.role == "embedding"]
        same = len(others) == len(embed0) and all(
            (a.kind, a.target, a.embed) == (c.kind, c.target, c.embed)
            for a, c in zip(embed0, others))
        if not same:
            raise SimulationError("layers must share one embedding block")

    # fold the embedding block into one matrix per sample: row j holds
    # the evolved basis state |j>
    smat = np.broadcast_to(np.eye(dim, dtype=complex), (b, dim, dim)).copy()
    for g in embed0:
        fi, tname = g.embed
        angles = embedding_transform(tname, x_batch[:, fi])
        smat = apply_gate_array(smat, n, g, np.asarray(angles)[:, None])

    layer_gates = [
        [g for g in template.gates_in_layer(layer) if g.role != "embedding"]
        for layer in range(template.n_layers)
    ]
    return CompiledCircuit(template, x_batch, smat, layer_gates)


def _embed(cc: CompiledCircuit, amps: np.ndarray) -> np.ndarray:
    if amps.ndim == 2:
        return np.einsum("bj,bji->bi", amps, cc.embed_matrix)
    return np.einsum("kbj,bji->kbi", amps, cc.embed_matrix)


def _embed_adjoint(cc: CompiledCircuit, amps: np.ndarray) -> np.ndarray:
    return np.einsum("bi,bji->bj", amps, cc.embed_matrix.conj())


def _gate_angle(gate: Gate, params: np.ndarray):
    if gate.param_slot is not None:
        return params[gate.param_slot]
    return gate.fixed_angle


def forward(cc: CompiledCircuit, params, mask: DropoutMask = EMPTY_MASK
            ) -> np.ndarray:
    """Batched statevector after the full (masked) circuit, shape (B, dim)."""
    params = np.asarray(params, dtype=float)
    if params.shape != (cc.parameter_count,):
        raise SimulationError(
            f"expected {cc.parameter_count} parameters, got {params.shape}")
    n = cc.n_qubits
    psi = np.zeros((cc.batch_size, 1 << n), dtype=complex)
    psi[:, 0] = 1.0
    dropped = mask.dropped_gate_ids
    for gates in cc.layer_gates:
        psi = _embed(cc, psi)
        for g in gates:
            if g.gate_id in dropped:
                continue
            if g.kind == "CNOT":
                psi = apply_gate_array(psi, n, g)
            else:
                psi = apply_gate_array(psi, n, g, _gate_angle(g, params))
    return psi


def model_outputs(cc: CompiledCircuit, params, mask: DropoutMask = EMPTY_MASK,
                  readout_qubit: int = 0) -> np.ndarray:
    """<Z_readout> per batch element."""
    psi = forward(cc, params, mask)
    signs = z_signs(cc.n_qubits, readout_qubit)
    return (np.abs(psi) ** 2) @ signs


def adjoint_gradient(cc: CompiledCircuit, params, mask: DropoutMask,
                     weights, readout_qubit: int = 0
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of sum_b weights[b] * f_b(params) via one reverse pass.

    Returns (gradient over parameter slots, model outputs f).  Slots whose
    gate is dropped keep gradient 0.
    """
    params = np.asarray(params, dtype=float)
    weights = np.asarray(weights, dtype=float)
    n = cc.n_qubits
    psi = forward(cc, params, mask)
    signs = z_signs(n, readout_qubit)
    outputs = (np.abs(psi) ** 2) @ signs
    lam = (weights[:, None] * signs) * psi
    grad = np.zeros(cc.parameter_count)
    dropped = mask.dropped_gate_ids
    for gates in reversed(cc.layer_gates):
        for g in reversed(gates):
            if g.gate_id in dropped:
                continue
            if g.kind == "CNOT":
                psi = apply_gate_array(psi, n, g)
                lam = apply_gate_array(lam, n, g)
                continue
            if g.param_slot is not None:
                dpsi = apply_generator(psi, n, g)
                grad[g.param_slot] += 2.0 * float(
                    np.real(np.sum(lam.conj() * dpsi)))
            theta = _gate_angle(g, params)
            psi = apply_gate_array(psi, n, g, -theta)
            lam = apply_gate_array(lam, n, g, -theta)
        psi = _embed_adjoint(cc, psi)
        lam = _embed_adjoint(cc, lam)
    return grad, outputs


def parameter_shift_gradient(cc: CompiledCircuit, params, mask: DropoutMask,
                             weights, readout_qubit: int = 0) -> np.ndarray:
    """Shift-rule gradient of sum_b weights[b] * f_b; the adjoint oracle.

    Plain rotations use the two-term +-pi/2 rule; CRy gates, whose
    generator has eigenvalues {0, +-1/2}, use the four-term rule.
    """
    params = np.asarray(params, dtype=float)
    weights = np.asarray(weights, dtype=float)
    grad = np.zeros(cc.parameter_count)
    dropped = mask.dropped_gate_ids
    slot_gate = {g.param_slot: g for gates in cc.layer_gates for g in gates
                 if g.param_slot is not None}
    for slot in range(cc.parameter_count):
        gate = slot_gate[slot]
        if gate.gate_id in dropped:
            continue

        def f_at(shift):
            shifted = params.copy()
            shifted[slot] += shift
            return model_outputs(cc, shifted, mask, readout_qubit)

        if gate.kind == "CRy":
            df = (_CTRL_COEFFS[0] * (f_at(+_CTRL_SHIFTS[0]) - f_at(-_CTRL_SHIFTS[0]))
                  - _CTRL_COEFFS[1] * (f_at(+_CTRL_SHIFTS[1]) - f_at(-_CTRL_SHIFTS[1])))
        else:
            df = 0.5 * (f_at(+np.pi / 2.0) - f_at(-np.pi / 2.0))
        grad[slot] = float(np.dot(weights, df))
    return grad


@dataclass
class QfimReport:
    matrix: np.ndarray
    rank: int
    rank_tolerance: float
    x: np.ndarray


DEFAULT_RANK_TOL = 1e-7


def qfim_batch(cc: CompiledCircuit, params) -> np.ndarray:
    """Quantum Fisher information matrices for every input, (B, M, M).

    Derivative states are propagated alongside the state: whenever a
    parametrized gate fires, the generator image of the current state is
    appended, and every later gate acts on the whole stack.
    """
    params = np.asarray(params, dtype=float)
    if params.shape != (cc.parameter_count,):
        raise SimulationError(
            f"expected {cc.parameter_count} parameters, got {params.shape}")
    n = cc.n_qubits
    dim = 1 << n
    b = cc.batch_size
    m = cc.parameter_count
    psi = np.zeros((b, dim), dtype=complex)
    psi[:, 0] = 1.0
    deriv = np.zeros((m, b, dim), dtype=complex)
    k = 0
    for gates in cc.layer_gates:
        psi = _embed(cc, psi)
        if k:
            deriv[:k] = _embed(cc, deriv[:k])
        for g in gates:
            if g.kind == "CNOT":
                psi = apply_gate_array(psi, n, g)
                if k:
                    deriv[:k] = apply_gate_array(deriv[:k], n, g)
                continue
            theta = _gate_angle(g, params)
            psi = apply_gate_array(psi, n, g, theta)
            if k:
                deriv[:k] = apply_gate_array(deriv[:k], n, g, theta)
            if g.param_slot is not None:
                deriv[g.param_slot] = apply_generator(psi, n, g)
                k = max(k, g.param_slot + 1)
    gram = np.einsum("ibd,jbd->bij", deriv.conj(), deriv)
    overlap = np.einsum("ibd,bd->bi", deriv.conj(), psi)
    fmat = 4.0 * np.real(gram - overlap[:, :, None] * overlap[:, None, :].conj())
    return fmat


def qfim(template: CircuitTemplate, params, x,
         rank_tolerance: float = DEFAULT_RANK_TOL) -> QfimReport:
    """QFIM of the unmasked circuit at one input, with its rank."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    cc = compile_circuit(template, x[None, :])
    matrix = qfim_batch(cc, params)[0]
    return QfimReport(matrix=matrix, rank=qfim_rank(matrix, rank_tolerance),
                      rank_tolerance=rank_tolerance, x=x)


def qfim_rank(matrix: np.ndarray, tolerance: float = DEFAULT_RANK_TOL) -> int:
    """Number of singular values above tolerance * largest."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise SimulationError("rank needs a square matrix")
    sv = np.abs(np.linalg.eigvalsh(matrix))
    top = sv.max(initial=0.0)
    if top == 0.0:
        return 0
    return int(np.count_nonzero(sv > tolerance * top))


def gradient(template: CircuitTemplate, params, mask: DropoutMask,
             batch, loss: str, readout_qubit: int = 0) -> np.ndarray:
    """d(mean batch loss)/d(theta) for a list of (x, y) pairs.

    Convenience wrapper over the batched engine; the training loop
    compiles once and reuses the compiled circuit instead.
    """
    from .training import loss_weights  # local import to avoid a cycle

    xs = np.atleast_2d(np.asarray([x for x, _ in batch], dtype=float))
    ys = np.asarray([y for _, y in batch], dtype=float)
    if xs.ndim == 1:
        xs = xs[:, None]
    cc = compile_circuit(template, xs)
    outputs = model_outputs(cc, params, mask, readout_qubit)
    weights = loss_weights(outputs, ys, loss)
    grad, _ = adjoint_gradient(cc, params, mask, weights, readout_qubit)
    return grad
