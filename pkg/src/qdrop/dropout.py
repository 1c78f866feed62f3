"""Dropout mask sampling, drop budgets, and parameter rescaling.

The five strategies differ in which gates of a selected layer are
candidates and in whether entangling gates are dragged along with a
selected rotation (canonical variants).  Sampling consumes the run's
random stream in a fixed order: one draw per layer, then one draw per
candidate gate in gate-id order inside selected layers, so a single
seed pins the whole mask sequence of a run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuits import CircuitTemplate

STRATEGIES = ("none", "canonical", "canonical_forward", "rotation",
              "entangling", "independent")


class DropoutError(ValueError):
    pass


@dataclass(frozen=True)
class DropoutConfig:
    strategy: str = "none"
    p_L: float = 0.0
    p_R: float = 0.0
    p_E: float = 0.0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise DropoutError(f"unknown strategy {self.strategy!r}")
        for name in ("p_L", "p_R", "p_E"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DropoutError(f"{name}={v} outside [0, 1]")
        if self.strategy == "entangling" and self.p_R != 0.0:
            raise DropoutError("entangling dropout uses p_E only")
        if self.strategy in ("canonical", "canonical_forward", "rotation") \
                and self.p_E != 0.0:
            raise DropoutError(f"{self.strategy} dropout uses p_R only")

    @property
    def gate_rate(self) -> float:
        """The p_G that combines with p_L into the drop probability."""
        return self.p_E if self.strategy == "entangling" else self.p_R


@dataclass(frozen=True)
class DropoutMask:
    dropped_gate_ids: frozenset[int] = frozenset()
    epoch: int = 0

    def __contains__(self, gate_id: int) -> bool:
        return gate_id in self.dropped_gate_ids

    def __len__(self) -> int:
        return len(self.dropped_gate_ids)


EMPTY_MASK = DropoutMask()


def drop_probability(p_G: float, p_L: float) -> float:
    """Combined per-gate drop probability p = p_G * p_L."""
    if not (0.0 <= p_G <= 1.0 and 0.0 <= p_L <= 1.0):
        raise DropoutError("probabilities must lie in [0, 1]")
    return p_G * p_L

def max_drop_params(M: int, n_qubits: int) -> tuple[int, float]:
    """Largest number (and fraction) of parameters safe to drop.

    A model stays overparametrized while at least D_max = 2^(N+1) - 2
    parameters survive.
    """
    if M < 1:
        raise DropoutError("M must be positive")
    d_max = (1 << (n_qubits + 1)) - 2
    m_drop = max(0, M - d_max)
    return m_drop, m_drop / M


def rescale_params(params, drop_p: float, k) -> np.ndarray:
    """Multiply every parameter by s = (1 - p)^(1/k); k = inf is a no-op."""
    params = np.asarray(params, dtype=float)
    if not 0.0 <= drop_p <= 1.0:
        raise DropoutError("drop probability outside [0, 1]")
    if k is None or math.isinf(k):
        return params
    if k <= 0:
        raise DropoutError("k must be positive")
    if drop_p >= 1.0:
        raise DropoutError("cannot rescale with drop probability 1")
    if drop_p == 0.0:
        return params
    return params * (1.0 - drop_p) ** (1.0 / k)


def _layer_entangling(layer_gates):
    return [g for g in layer_gates if g.role == "entangling"]


def sample_mask(template: CircuitTemplate, config: DropoutConfig,
                rng: np.random.Generator, epoch: int = 0) -> DropoutMask:
    """Draw one dropout mask for the template under the given strategy."""
    if config.strategy == "none":
        return DropoutMask(frozenset(), epoch)
    layer_draws = rng.random(template.n_layers)
    dropped: set[int] = set()
    for layer in range(template.n_layers):
        if layer_draws[layer] >= config.p_L:
            continue
        layer_gates = template.gates_in_layer(layer)
        rotations = [g for g in layer_gates if g.role == "rotation"]
        entanglers = _layer_entangling(layer_gates)
        if config.strategy == "rotation":
            sel = rng.random(len(rotations)) < config.p_R
            dropped.update(g.gate_id for g, s in zip(rotations, sel) if s)
        elif config.strategy == "entangling":
            sel = rng.random(len(entanglers)) < config.p_E
            dropped.update(g.gate_id for g, s in zip(entanglers, sel) if s)
        elif config.strategy == "independent":
            sel_r = rng.random(len(rotations)) < config.p_R
            dropped.update(g.gate_id for g, s in zip(rotations, sel_r) if s)
            sel_e = rng.random(len(entanglers)) < config.p_E
            dropped.update(g.gate_id for g, s in zip(entanglers, sel_e) if s)
        else:  # canonical / canonical_forward
            sel = rng.random(len(rotations)) < config.p_R
            backward = config.strategy == "canonical"
            for g, s in zip(rotations, sel):
                if not s:
                    continue
                dropped.add(g.gate_id)
                for e in entanglers:
                    if e.gate_id > g.gate_id and e.control == g.target:
                        dropped.add(e.gate_id)
                    elif backward and e.gate_id < g.gate_id \
                            and e.target == g.target:
                        dropped.add(e.gate_id)
    return DropoutMask(frozenset(dropped), epoch)
