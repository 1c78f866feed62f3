"""Construction of the two data re-uploading QNN ansaetze.

Both templates stack identical layers.  A layer always starts with two
embedding sublayers (Ry then Rz, angles from inverse-trigonometric maps
of the input), followed by the variational block:

  * regression family: three rotation sublayers (Rx, Rz, Rx over every
    qubit), each followed by a linear CNOT ladder;
  * classification family: a single Rx sublayer followed by a CRy
    ladder, so the entangling gates are themselves trainable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .statesim import (Gate, SimulationError, embedding_transform,
                       expectation_z, run_circuit)


@dataclass
class CircuitTemplate:
    n_qubits: int
    n_layers: int
    family: str  # "regression" | "classification"
    embedding_arity: int
    gates: list[Gate] = field(default_factory=list)

    @property
    def parameter_count(self) -> int:
        return sum(1 for g in self.gates if g.param_slot is not None)

    def gates_in_layer(self, layer: int) -> list[Gate]:
        return [g for g in self.gates if g.layer == layer]

    def rotation_gates(self) -> list[Gate]:
        return [g for g in self.gates if g.role == "rotation"]

    def entangling_gates(self) -> list[Gate]:
        return [g for g in self.gates if g.role == "entangling"]

    def to_json(self) -> str:
        doc = {
            "n_qubits": self.n_qubits,
            "n_layers": self.n_layers,
            "family": self.family,
            "embedding_arity": self.embedding_arity,
            "gates": [
                {
                    "gate_id": g.gate_id,
                    "kind": g.kind,
                    "target": g.target,
                    "control": g.control,
                    "param_slot": g.param_slot,
                    "fixed_angle": g.fixed_angle,
                    "embed": list(g.embed) if g.embed else None,
                    "layer": g.layer,
                    "sublayer": g.sublayer,
                    "role": g.role,
                }
                for g in self.gates
            ],
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "CircuitTemplate":
        doc = json.loads(text)
        gates = [
            Gate(kind=g["kind"], target=g["target"], control=g["control"],
                 param_slot=g["param_slot"], fixed_angle=g["fixed_angle"],
                 embed=tuple(g["embed"]) if g["embed"] else None,
                 gate_id=g["gate_id"], layer=g["layer"],
                 sublayer=g["sublayer"], role=g["role"])
            for g in doc["gates"]
        ]
        return cls(n_qubits=doc["n_qubits"], n_layers=doc["n_layers"],
                   family=doc["family"],
                   embedding_arity=doc["embedding_arity"], gates=gates)


def _feature_for_qubit(q: int, arity: int) -> int:
    # multi-feature embeddings alternate features down the register
    return q % arity


def build_regression_qnn(n_qubits: int = 5, n_layers: int = 1,
                         embedding_arity: int = 1) -> CircuitTemplate:
    """Rx/Rz/Rx sublayers with CNOT ladders; 3 * n_qubits params per layer."""
    if n_layers < 1:
        raise SimulationError("need at least one layer")
    gates: list[Gate] = []
    gid = 0
    slot = 0
    for layer in range(n_layers):
        for q in range(n_qubits):
            gates.append(Gate("Ry", q, embed=(_feature_for_qubit(q, embedding_arity), "arcsin"),
                              gate_id=gid, layer=layer, sublayer=0, role="embedding"))
            gid += 1
        for q in range(n_qubits):
            gates.append(Gate("Rz", q, embed=(_feature_for_qubit(q, embedding_arity), "arccos_sq"),
                              gate_id=gid, layer=layer, sublayer=1, role="embedding"))
            gid += 1
        for sub, kind in enumerate(("Rx", "Rz", "Rx")):
            for q in range(n_qubits):
                gates.append(Gate(kind, q, param_slot=slot, gate_id=gid,
                                  layer=layer, sublayer=2 + 2 * sub,
                                  role="rotation"))
                gid += 1
                slot += 1
            for q in range(n_qubits - 1):
                gates.append(Gate("CNOT", q + 1, control=q, gate_id=gid,
                                  layer=layer, sublayer=3 + 2 * sub,
                                  role="entangling"))
                gid += 1
    return CircuitTemplate(n_qubits, n_layers, "regression",
                           embedding_arity, gates)


def build_classification_qnn(n_qubits: int = 5, n_layers: int = 1,
                             embedding_arity: int = 2) -> CircuitTemplate:
    """Single Rx sublayer plus a trainable CRy ladder per layer."""
    if n_layers < 1:
        raise SimulationError("need at least one layer")
    gates: list[Gate] = []
    gid = 0
    slot = 0
    for layer in range(n_layers):
        for q in range(n_qubits):
            gates.append(Gate("Ry", q, embed=(_feature_for_qubit(q, embedding_arity), "arcsin_half_x2"),
                              gate_id=gid, layer=layer, sublayer=0, role="embedding"))
            gid += 1
        for q in range(n_qubits):
            gates.append(Gate("Rz", q, embed=(_feature_for_qubit(q, embedding_arity), "arccos_half_sq_x2"),
                              gate_id=gid, layer=layer, sublayer=1, role="embedding"))
            gid += 1
        for q in range(n_qubits):
            gates.append(Gate("Rx", q, param_slot=slot, gate_id=gid,
                              layer=layer, sublayer=2, role="rotation"))
            gid += 1
            slot += 1
        for q in range(n_qubits - 1):
            gates.append(Gate("CRy", q + 1, control=q, param_slot=slot,
                              gate_id=gid, layer=layer, sublayer=3,
                              role="entangling"))
            gid += 1
            slot += 1
    return CircuitTemplate(n_qubits, n_layers, "classification",
                           embedding_arity, gates)


def build_template(family: str, n_qubits: int = 5,
                   n_layers: int = 1) -> CircuitTemplate:
    if family == "regression":
        return build_regression_qnn(n_qubits, n_layers)
    if family == "classification":
        return build_classification_qnn(n_qubits, n_layers)
    raise SimulationError(f"unknown circuit family {family!r}")


def embedding_angles(x, family: str, n_qubits: int = 5):
    """Angle assignment of the embedding sublayers for one input.

    Returns a list of (qubit, gate kind, angle) in application order.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if family == "regression":
        transforms = [("Ry", "arcsin"), ("Rz", "arccos_sq")]
    elif family == "classification":
        transforms = [("Ry", "arcsin_half_x2"), ("Rz", "arccos_half_sq_x2")]
    else:
        raise SimulationError(f"unknown circuit family {family!r}")
    out = []
    for kind, tname in transforms:
        for q in range(n_qubits):
            xi = x[_feature_for_qubit(q, len(x))]
            out.append((q, kind, float(embedding_transform(tname, xi))))
    return out


def model_output(template: CircuitTemplate, params, mask, x,
                 readout_qubit: int = 0) -> float:
    """<Z> on the readout qubit after running the (masked) circuit."""
    state = run_circuit(template, params, mask, x)
    return expectation_z(state, readout_qubit)
