"""Losses, Adam, the dropout training loop, multi-seed runs, grid search.

Training is full batch: the datasets are tiny (15 or 20 train samples).
One mask is sampled per epoch and used for the whole gradient step;
per-epoch losses are always evaluated on the unmasked circuit, i.e. on
the model that would actually be deployed.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .circuits import CircuitTemplate, build_template
from .datagen import PreparedDataset
from .dropout import (DropoutConfig, DropoutMask, EMPTY_MASK, drop_probability,
                      max_drop_params, rescale_params, sample_mask)
from .gradients import adjoint_gradient, compile_circuit, model_outputs

PROB_CLAMP = 1e-12

TASK_FAMILY = {"sin": "regression", "module": "regression",
               "moons": "classification"}
TASK_DEFAULTS = {
    "sin": {"n_layers": 10, "epochs": 1000},
    "module": {"n_layers": 10, "epochs": 1000},
    "moons": {"n_layers": 20, "epochs": 5000},
}

GRID_CSV_HEADER = ("strategy,p_L,p_R,p_E,k,mean_train,std_train,"
                   "mean_test,std_test,mean_acc,std_acc,seed_count")


class TrainingError(ValueError):
    pass


def mse_loss(predictions, targets) -> float:
    predictions = np.asarray(predictions, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if predictions.size == 0:
        raise TrainingError("empty input")
    return float(np.mean((predictions - targets) ** 2))


def _clamp_probs(p):
    return np.clip(np.asarray(p, dtype=float), PROB_CLAMP, 1.0 - PROB_CLAMP)


def cce_loss(class1_probabilities, labels) -> float:
    """Binary cross entropy; equals categorical CE with two classes."""
    p = _clamp_probs(class1_probabilities)
    y = np.asarray(labels, dtype=float)
    if p.size == 0:
        raise TrainingError("empty input")
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))


def accuracy(class1_probabilities, labels) -> float:
    p = np.asarray(class1_probabilities, dtype=float)
    y = np.asarray(labels)
    if p.size == 0:
        raise TrainingError("empty input")
    return float(np.mean((p >= 0.5) == (y == 1)))


def outputs_to_probs(outputs) -> np.ndarray:
    """Class-1 probability from the readout expectation, p1 = (1 + <Z>)/2."""
    return (1.0 + np.asarray(outputs, dtype=float)) / 2.0


def loss_value(outputs, targets, loss: str) -> float:
    if loss == "mse":
        return mse_loss(outputs, targets)
    if loss == "cce":
        return cce_loss(outputs_to_probs(outputs), targets)
    raise TrainingError(f"unknown loss {loss!r}")


def loss_weights(outputs, targets, loss: str) -> np.ndarray:
    """dL/df per sample, for L the mean loss and f the model output."""
    f = np.asarray(outputs, dtype=float)
    y = np.asarray(targets, dtype=float)
    n = f.size
    if loss == "mse":
        return 2.0 * (f - y) / n
    if loss == "cce":
        p = _clamp_probs(outputs_to_probs(f))
        dl_dp = (-(y / p) + (1.0 - y) / (1.0 - p)) / n
        return dl_dp * 0.5
    raise TrainingError(f"unknown loss {loss!r}")


class AdamState:
    """Standard Adam with optional per-slot skipping of inactive slots.

    When ``update_mask`` marks a slot inactive (its gate was dropped this
    epoch) neither the moments nor the parameter move; the slot's step
    counter does not advance, so bias correction reflects the number of
    updates the slot actually received.
    """

    def __init__(self, size: int, lr: float = 0.01, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8,
                 always_update_moments: bool = False):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.always_update_moments = always_update_moments
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = np.zeros(size, dtype=int)

    def step(self, params, grads, update_mask=None) -> np.ndarray:
        params = np.asarray(params, dtype=float)
        grads = np.asarray(grads, dtype=float)
        if params.shape != grads.shape or params.shape != self.m.shape:
            raise TrainingError("parameter/gradient size mismatch")
        if update_mask is None or self.always_update_moments:
            active = np.ones(params.shape, dtype=bool)
        else:
            active = np.asarray(update_mask, dtype=bool)
        self.t[active] += 1
        self.m[active] = self.beta1 * self.m[active] + (1 - self.beta1) * grads[active]
        self.v[active] = self.beta2 * self.v[active] + (1 - self.beta2) * grads[active] ** 2
        out = params.copy()
        ta = self.t[active]
        mhat = self.m[active] / (1 - self.beta1 ** ta)
        vhat = self.v[active] / (1 - self.beta2 ** ta)
        out[active] = params[active] - self.lr * mhat / (np.sqrt(vhat) + self.eps)
        return out


def adam_step(params, grads, m, v, t: int, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One stateless Adam update; returns (params, m, v).

    ``t`` is the 1-based step index used for bias correction.
    """
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    m = np.asarray(m, dtype=float)
    v = np.asarray(v, dtype=float)
    if not params.shape == grads.shape == m.shape == v.shape:
        raise TrainingError("parameter/gradient size mismatch")
    m = beta1 * m + (1 - beta1) * grads
    v = beta2 * v + (1 - beta2) * grads ** 2
    mhat = m / (1 - beta1 ** t)
    vhat = v / (1 - beta2 ** t)
    return params - lr * mhat / (np.sqrt(vhat) + eps), m, v


@dataclass
class TrainConfig:
    task: str = "sin"
    n_layers: Optional[int] = None
    learning_rate: float = 0.01
    epochs: Optional[int] = None
    dropout: DropoutConfig = field(default_factory=DropoutConfig)
    rescale_k: Optional[float] = None   # None = no rescale; math.inf likewise
    base_seed: int = 0
    n_runs: int = 10
    n_qubits: int = 5
    adam_always_update_moments: bool = False

    def __post_init__(self):
        if self.task not in TASK_FAMILY:
            raise TrainingError(f"unknown task {self.task!r}")
        defaults = TASK_DEFAULTS[self.task]
        if self.n_layers is None:
            self.n_layers = defaults["n_layers"]
        if self.epochs is None:
            self.epochs = defaults["epochs"]
        if self.epochs < 0 or self.n_layers < 1 or self.n_runs < 1:
            raise TrainingError("invalid epochs/layers/runs")

    @property
    def family(self) -> str:
        return TASK_FAMILY[self.task]

    @property
    def loss(self) -> str:
        return "cce" if self.family == "classification" else "mse"

    def combined_drop_probability(self) -> float:
        return drop_probability(self.dropout.gate_rate, self.dropout.p_L)


@dataclass
class TrainRun:
    config: dict
    seed: int
    train_loss: list[float]
    test_loss: list[float]
    train_accuracy: list[float]
    test_accuracy: list[float]
    final_params: list[float]
    final_params_unscaled: list[float]
    final_train_loss: float
    final_test_loss: float
    final_train_accuracy: Optional[float]
    final_test_accuracy: Optional[float]
    wall_seconds: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TrainRun":
        return cls(**json.loads(text))


def _config_snapshot(config: TrainConfig) -> dict:
    snap = asdict(config)
    snap["rescale_k"] = ("inf" if config.rescale_k is not None
                         and math.isinf(config.rescale_k) else config.rescale_k)
    return snap


def build_task_template(config: TrainConfig) -> CircuitTemplate:
    return build_template(config.family, config.n_qubits, config.n_layers)


def train(config: TrainConfig, dataset: PreparedDataset, seed: int,
          mask_log: Optional[list] = None) -> TrainRun:
    """One seeded training run following the fixed-epoch protocol."""
    if TASK_FAMILY[config.task] != TASK_FAMILY.get(dataset.task):
        raise TrainingError(
            f"dataset task {dataset.task!r} does not fit config task "
            f"{config.task!r}")
    t0 = time.perf_counter()
    template = build_task_template(config)
    m = template.parameter_count
    rng = np.random.default_rng(seed)
    params = rng.uniform(0.0, 2.0 * np.pi, size=m)

    x_train, y_train = dataset.train_arrays()
    x_test, y_test = dataset.test_arrays()
    cc_train = compile_circuit(template, x_train)
    cc_test = compile_circuit(template, x_test)
    loss = config.loss
    classify = config.family == "classification"

    slot_by_gate = {g.gate_id: g.param_slot for g in template.gates
                    if g.param_slot is not None}

    def evaluate(p):
        out_tr = model_outputs(cc_train, p)
        out_te = model_outputs(cc_test, p)
        row = {"train_loss": loss_value(out_tr, y_train, loss),
               "test_loss": loss_value(out_te, y_test, loss)}
        if classify:
            row["train_acc"] = accuracy(outputs_to_probs(out_tr), y_train)
            row["test_acc"] = accuracy(outputs_to_probs(out_te), y_test)
        return row

    adam = AdamState(m, lr=config.learning_rate,
                     always_update_moments=config.adam_always_update_moments)
    history = [evaluate(params)]
    for epoch in range(config.epochs):
        mask = sample_mask(template, config.dropout, rng, epoch=epoch) \
            if config.dropout.strategy != "none" else EMPTY_MASK
        if mask_log is not None:
            mask_log.append({"epoch": epoch,
                             "dropped_gate_ids": sorted(mask.dropped_gate_ids)})
        outputs = model_outputs(cc_train, params, mask)
        weights = loss_weights(outputs, y_train, loss)
        grads, _ = adjoint_gradient(cc_train, params, mask, weights)
        active = np.ones(m, dtype=bool)
        for gid in mask.dropped_gate_ids:
            slot = slot_by_gate.get(gid)
            if slot is not None:
                active[slot] = False
        params = adam.step(params, grads, update_mask=active)
        history.append(evaluate(params))

    raw_params = params.copy()
    if config.rescale_k is not None and not math.isinf(config.rescale_k) \
            and config.dropout.strategy != "none":
        params = rescale_params(params, config.combined_drop_probability(),
                                config.rescale_k)
    final = evaluate(params)
    return TrainRun(
        config=_config_snapshot(config),
        seed=seed,
        train_loss=[h["train_loss"] for h in history],
        test_loss=[h["test_loss"] for h in history],
        train_accuracy=[h.get("train_acc") for h in history] if classify else [],
        test_accuracy=[h.get("test_acc") for h in history] if classify else [],
        final_params=params.tolist(),
        final_params_unscaled=raw_params.tolist(),
        final_train_loss=final["train_loss"],
        final_test_loss=final["test_loss"],
        final_train_accuracy=final.get("train_acc"),
        final_test_accuracy=final.get("test_acc"),
        wall_seconds=time.perf_counter() - t0,
    )


@dataclass
class RunAggregate:
    seeds: list[int]
    mean_train: float
    std_train: float
    mean_test: float
    std_test: float
    mean_acc: Optional[float]
    std_acc: Optional[float]
    runs: list[TrainRun]


def _train_worker(args):
    config, dataset, seed = args
    return train(config, dataset, seed)


def worker_count() -> int:
    env = os.environ.get("QDROP_THREADS")
    if env:
        return max(1, int(env))
    return 1


def multi_run(config: TrainConfig, dataset: PreparedDataset) -> RunAggregate:
    """n_runs independent trainings with seeds base_seed .. base_seed+n-1."""
    seeds = [config.base_seed + i for i in range(config.n_runs)]
    workers = worker_count()
    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_train_worker,
                                 [(config, dataset, s) for s in seeds]))
    else:
        runs = [train(config, dataset, s) for s in seeds]
    train_final = np.array([r.final_train_loss for r in runs])
    test_final = np.array([r.final_test_loss for r in runs])
    agg = RunAggregate(
        seeds=seeds,
        mean_train=float(train_final.mean()),
        std_train=float(train_final.std()),
        mean_test=float(test_final.mean()),
        std_test=float(test_final.std()),
        mean_acc=None, std_acc=None,
        runs=runs,
    )
    if runs[0].final_test_accuracy is not None:
        acc = np.array([r.final_test_accuracy for r in runs])
        agg.mean_acc = float(acc.mean())
        agg.std_acc = float(acc.std())
    return agg


@dataclass
class GridCell:
    strategy: str
    p_L: float
    p_R: float
    p_E: float
    aggregate: RunAggregate


def grid_cells(strategy: str, p_L_grid, p_R_grid=None, p_E_grid=None):
    """Enumerate (p_L, p_R, p_E) combinations for a strategy."""
    cells = []
    if strategy == "independent":
        if not p_R_grid or not p_E_grid:
            raise TrainingError("independent dropout needs p_R and p_E grids")
        for pl in p_L_grid:
            for pr in p_R_grid:
                for pe in p_E_grid:
                    cells.append((pl, pr, pe))
    elif strategy == "entangling":
        grid = p_E_grid if p_E_grid else p_R_grid
        if not grid:
            raise TrainingError("entangling dropout needs a p_E grid")
        for pl in p_L_grid:
            for pe in grid:
                cells.append((pl, 0.0, pe))
    else:
        if not p_R_grid:
            raise TrainingError(f"{strategy} dropout needs a p_R grid")
        for pl in p_L_grid:
            for pr in p_R_grid:
                cells.append((pl, pr, 0.0))
    return cells


def grid_search(config: TrainConfig, dataset: PreparedDataset,
                p_L_grid, p_R_grid=None, p_E_grid=None) -> list[GridCell]:
    """Evaluate multi_run over a rate grid; rows sorted by mean test loss.

    Cells whose combined drop probability exceeds the overparametrization
    budget p_drop_max (for any applicable gate rate) are skipped.
    """
    template = build_task_template(config)
    _, p_max = max_drop_params(template.parameter_count, config.n_qubits)
    cells = grid_cells(config.dropout.strategy, p_L_grid, p_R_grid, p_E_grid)
    kept = [(pl, pr, pe) for pl, pr, pe in cells
            if pl * max(pr, pe) <= p_max + 1e-12]
    if not kept:
        raise TrainingError(
            f"no grid cell satisfies the drop budget p_drop_max={p_max:.3f}")
    results = []
    for pl, pr, pe in kept:
        cell_cfg = TrainConfig(
            task=config.task, n_layers=config.n_layers,
            learning_rate=config.learning_rate, epochs=config.epochs,
            dropout=DropoutConfig(config.dropout.strategy, p_L=pl,
                                  p_R=pr, p_E=pe),
            rescale_k=config.rescale_k, base_seed=config.base_seed,
            n_runs=config.n_runs, n_qubits=config.n_qubits,
            adam_always_update_moments=config.adam_always_update_moments)
        results.append(GridCell(config.dropout.strategy, pl, pr, pe,
                                multi_run(cell_cfg, dataset)))
    results.sort(key=lambda c: c.aggregate.mean_test)
    return results


def grid_csv_rows(cells: list[GridCell], k=None) -> list[str]:
    rows = [GRID_CSV_HEADER]
    for c in cells:
        a = c.aggregate
        rows.append(",".join([
            c.strategy, f"{c.p_L:g}", f"{c.p_R:g}", f"{c.p_E:g}",
            "" if k is None else f"{k:g}",
            f"{a.mean_train:.10g}", f"{a.std_train:.10g}",
            f"{a.mean_test:.10g}", f"{a.std_test:.10g}",
            "" if a.mean_acc is None else f"{a.mean_acc:.10g}",
            "" if a.std_acc is None else f"{a.std_acc:.10g}",
            str(len(a.seeds)),
        ]))
    return rows


def evaluate_params(config: TrainConfig, dataset: PreparedDataset,
                    params) -> dict:
    """Unmasked train/test metrics of a fixed parameter vector."""
    template = build_task_template(config)
    x_train, y_train = dataset.train_arrays()
    x_test, y_test = dataset.test_arrays()
    out_tr = model_outputs(compile_circuit(template, x_train), params)
    out_te = model_outputs(compile_circuit(template, x_test), params)
    res = {"train_loss": loss_value(out_tr, y_train, config.loss),
           "test_loss": loss_value(out_te, y_test, config.loss)}
    if config.family == "classification":
        res["train_acc"] = accuracy(outputs_to_probs(out_tr), y_train)
        res["test_acc"] = accuracy(outputs_to_probs(out_te), y_test)
    return res
