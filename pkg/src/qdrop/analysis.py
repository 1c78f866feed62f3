"""Overparametrization curves, expressibility, concentrable entanglement.

State pools follow one recipe: the first ``n_data`` training inputs are
embedded, ``n_param_vectors`` parameter vectors are drawn uniformly from
[0, 2*pi), and every (input, parameters) pair contributes one state.
When dropout is active a fresh mask is sampled per parameter vector and
shared across that vector's inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np

from .circuits import CircuitTemplate, build_template
from .dropout import DropoutConfig, EMPTY_MASK, sample_mask
from .gradients import compile_circuit, forward, qfim_batch, qfim_rank, \
    DEFAULT_RANK_TOL
from .statesim import StateVector, subset_purity_batch

DEFAULT_BINS = 75
DEFAULT_PARAM_VECTORS = 1000
DEFAULT_POOL_INPUTS = 15


class AnalysisError(ValueError):
    pass


@dataclass
class ParameterDimensionCurve:
    layers: list[int]
    mean_dimension: list[float]
    mean_redundancy: list[float]
    parameter_counts: list[int]
    d_max: int
    critical_layers: Optional[int]

    def csv_rows(self) -> list[str]:
        rows = ["layers,mean_D,mean_R"]
        for layer, d, r in zip(self.layers, self.mean_dimension,
                               self.mean_redundancy):
            rows.append(f"{layer},{d:.10g},{r:.10g}")
        return rows


def parameter_dimension_curve(family: str, layer_range, inputs,
                              n_theta_samples: int = 10,
                              rng: Optional[np.random.Generator] = None,
                              n_qubits: int = 5,
                              rank_tolerance: float = DEFAULT_RANK_TOL
                              ) -> ParameterDimensionCurve:
    """Average QFIM rank over inputs and random parameter draws per depth."""
    layers = list(layer_range)
    if not layers:
        raise AnalysisError("empty layer range")
    rng = rng or np.random.default_rng(0)
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    d_max = (1 << (n_qubits + 1)) - 2
    mean_d, mean_r, m_counts = [], [], []
    for n_layers in layers:
        template = build_template(family, n_qubits, n_layers)
        cc = compile_circuit(template, inputs)
        m = template.parameter_count
        ranks = []
        for _ in range(n_theta_samples):
            theta = rng.uniform(0.0, 2.0 * np.pi, size=m)
            fmats = qfim_batch(cc, theta)
            ranks.extend(qfim_rank(f, rank_tolerance) for f in fmats)
        d = float(np.mean(ranks))
        mean_d.append(d)
        mean_r.append((m - d) / m)
        m_counts.append(m)
    critical = None
    for layer, d in zip(layers, mean_d):
        if d >= d_max - 1e-9:
            critical = layer
            break
    return ParameterDimensionCurve(layers, mean_d, mean_r, m_counts,
                                   d_max, critical)


def haar_fidelity_pdf(fid, dim: int):
    """Density (dim-1) * (1-F)^(dim-2) of Haar state-pair fidelities."""
    if dim < 2:
        raise AnalysisError("dimension must be at least 2")
    f = np.asarray(fid, dtype=float)
    if np.any((f < 0) | (f > 1)):
        raise AnalysisError("fidelity outside [0, 1]")
    return (dim - 1) * (1.0 - f) ** (dim - 2)


def haar_bin_masses(n_bins: int, dim: int) -> np.ndarray:
    """Exact Haar probability mass of each uniform fidelity bin."""
    if n_bins < 2:
        raise AnalysisError("need at least two bins")
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    # survival function (1-F)^(d-1) keeps the tiny high-fidelity masses
    # representable where 1 - (1-F)^(d-1) would round to exactly 1
    sf = (1.0 - edges) ** (dim - 1)
    return sf[:-1] - sf[1:]


def haar_random_states(n_states: int, dim: int,
                       rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(n_states, dim)) + 1j * rng.normal(size=(n_states, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def state_pool(template: CircuitTemplate, dropout: Optional[DropoutConfig],
               inputs, n_param_vectors: int,
               rng: np.random.Generator) -> np.ndarray:
    """(n_param_vectors * n_inputs, dim) pool of circuit output states."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    cc = compile_circuit(template, inputs)
    m = template.parameter_count
    pools = []
    use_dropout = dropout is not None and dropout.strategy != "none"
    for _ in range(n_param_vectors):
        theta = rng.uniform(0.0, 2.0 * np.pi, size=m)
        mask = sample_mask(template, dropout, rng) if use_dropout else EMPTY_MASK
        pools.append(forward(cc, theta, mask))
    return np.concatenate(pools, axis=0)


def pairwise_fidelities(states: np.ndarray, n_pairs: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Fidelities of uniformly random distinct ordered state pairs."""
    n = states.shape[0]
    if n < 2:
        raise AnalysisError("need at least two states")
    i = rng.integers(0, n, size=n_pairs)
    j = rng.integers(0, n - 1, size=n_pairs)
    j = np.where(j >= i, j + 1, j)
    overlaps = np.einsum("pd,pd->p", states[i].conj(), states[j])
    return np.abs(overlaps) ** 2


def kl_vs_haar(fidelities: np.ndarray, n_bins: int, dim: int
               ) -> tuple[float, np.ndarray]:
    """KL(empirical binned fidelities || exact Haar bin masses)."""
    counts, _ = np.histogram(np.clip(fidelities, 0.0, 1.0),
                             bins=n_bins, range=(0.0, 1.0))
    p = counts / counts.sum()
    q = haar_bin_masses(n_bins, dim)
    nz = p > 0
    return float(np.sum(p[nz] * np.log(p[nz] / q[nz]))), counts


@dataclass
class ExpressibilityReport:
    kl_value: float
    bins: int
    n_fidelities: int
    histogram: list[int]
    dropout: Optional[dict]


def expressibility(template: CircuitTemplate,
                   dropout: Optional[DropoutConfig],
                   inputs,
                   n_param_vectors: int = DEFAULT_PARAM_VECTORS,
                   n_bins: int = DEFAULT_BINS,
                   rng: Optional[np.random.Generator] = None,
                   n_fidelities: Optional[int] = None) -> ExpressibilityReport:
    """KL divergence between circuit fidelities and the Haar ensemble."""
    rng = rng or np.random.default_rng(0)
    pool = state_pool(template, dropout, inputs, n_param_vectors, rng)
    if n_fidelities is None:
        n_fidelities = pool.shape[0]
    fids = pairwise_fidelities(pool, n_fidelities, rng)
    kl, counts = kl_vs_haar(fids, n_bins, 1 << template.n_qubits)
    return ExpressibilityReport(
        kl_value=kl, bins=n_bins, n_fidelities=n_fidelities,
        histogram=counts.tolist(),
        dropout=None if dropout is None else {
            "strategy": dropout.strategy, "p_L": dropout.p_L,
            "p_R": dropout.p_R, "p_E": dropout.p_E})


# Concentrable entanglement bands for N = 5, by coarsest party structure;
# intervals are semi-open (min, max].
CE_BANDS_5 = (
    ("1x1x1x1x1", 0.0, 0.0),
    ("2x1x1x1", 0.0, 0.25),
    ("3x1x1", 0.25, 0.375),
    ("2x2x1", 0.375, 0.4375),
    ("4x1", 0.4375, 0.5),
    ("3x2", 0.5, 0.53125),
    ("5", 0.53125, 0.625),
)


def ce_band(value: float, n_qubits: int = 5) -> str:
    if n_qubits != 5:
        raise AnalysisError("party-structure bands are tabulated for 5 qubits")
    if value < -1e-12:
        raise AnalysisError("negative concentrable entanglement")
    if value <= 1e-12:
        return "1x1x1x1x1"
    for label, lo, hi in CE_BANDS_5[1:]:
        if lo < value <= hi + 1e-12:
            return label
    raise AnalysisError(f"value {value} outside the tabulated CE range")


def haar_ce_mean(n_qubits: int) -> float:
    return 1.0 - 2.0 * 3.0 ** n_qubits / (4.0 ** n_qubits + 2.0 ** n_qubits)


def haar_ce_var_order(n_qubits: int) -> float:
    return (3.0 / 16.0) ** n_qubits


def ce_batch(amps: np.ndarray, n_qubits: int) -> np.ndarray:
    """Concentrable entanglement of each row of a (B, 2**n) state batch.

    Uses the purity complement symmetry of pure states: every subset is
    paired with its complement, so only subsets containing qubit 0 are
    contracted explicitly (the empty/full pair contributes 2 exactly).
    """
    if n_qubits > 10:
        raise AnalysisError("power-set sum limited to 10 qubits")
    b = amps.shape[0]
    total = np.full(b, 2.0)  # empty set and full set
    qubits = list(range(1, n_qubits))
    for r in range(n_qubits):
        for rest in combinations(qubits, r):
            subset = (0,) + rest
            if len(subset) == n_qubits:
                continue  # already counted as the full/empty pair
            total += 2.0 * subset_purity_batch(amps, n_qubits, subset)
    return 1.0 - total / (1 << n_qubits)


def concentrable_entanglement(state: StateVector) -> float:
    return float(ce_batch(state.amplitudes[None, :], state.n_qubits)[0])


@dataclass
class EntanglementReport:
    mean_ce: float
    var_ce: float
    n_states: int
    haar_mean: float
    haar_var_order: float
    party_band: Optional[str]
    dropout: Optional[dict] = None


def ce_statistics(template: CircuitTemplate,
                  dropout: Optional[DropoutConfig],
                  inputs,
                  n_param_vectors: int = DEFAULT_PARAM_VECTORS,
                  rng: Optional[np.random.Generator] = None
                  ) -> EntanglementReport:
    """Mean/variance of concentrable entanglement over the state pool."""
    rng = rng or np.random.default_rng(0)
    pool = state_pool(template, dropout, inputs, n_param_vectors, rng)
    values = ce_batch(pool, template.n_qubits)
    mean = float(values.mean())
    return EntanglementReport(
        mean_ce=mean, var_ce=float(values.var()), n_states=pool.shape[0],
        haar_mean=haar_ce_mean(template.n_qubits),
        haar_var_order=haar_ce_var_order(template.n_qubits),
        party_band=(ce_band(mean, 5) if template.n_qubits == 5 else None),
        dropout=None if dropout is None else {
            "strategy": dropout.strategy, "p_L": dropout.p_L,
            "p_R": dropout.p_R, "p_E": dropout.p_E})
