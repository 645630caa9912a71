"""Training loop, data splits, metrics and the multi-seed experiment driver."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .batching import iter_batches, per_rank_prune, sample_subcomplex
from .complex import SimplicialComplex
from .datasets import DatasetBundle
from .errors import ConfigError, NumericError
from .lifting import DEFAULT_CLIQUE_CEILING, clique_lift
from .model import ModelConfig, TopoMambaModel, save_checkpoint

__all__ = [
    "TrainConfig",
    "SplitMasks",
    "AdamState",
    "RunResult",
    "ExperimentReport",
    "split_dataset",
    "adam_step",
    "evaluate",
    "train_model",
    "run_experiment",
    "parse_config",
    "load_config",
]

log = logging.getLogger(__name__)

METRICS = ("accuracy", "roc_auc", "mae")
BATCH_METHODS = ("node_incidence", "per_rank")
_MODEL_KEYS = {
    "d_h": int,
    "n_blocks": int,
    "state_size": int,
    "backbone": str,
    "use_backward_scan": "bool",
    "use_skip": "bool",
    "head_activation": "bool",
    "dropout": float,
    "aggregator": str,
}


@dataclass
class TrainConfig:
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.0
    max_epochs: int = 300
    patience: int = 50
    batch_size: int | None = None  # None trains full-batch
    batch_method: str = "node_incidence"
    hops: int | None = None  # defaults to the number of blocks
    seed: int = 0
    metric: str | None = None  # defaults to accuracy / mae by task
    max_rank: int = 3
    clique_ceiling: int = DEFAULT_CLIQUE_CEILING
    dtype: str = "float32"
    model_options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.max_epochs < 1 or not 0 <= self.patience <= self.max_epochs:
            raise ConfigError("need max_epochs >= 1 and 0 <= patience <= max_epochs")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigError("batch_size must be positive")
        if self.batch_method not in BATCH_METHODS:
            raise ConfigError(f"batch_method must be one of {BATCH_METHODS}")
        if self.metric is not None and self.metric not in METRICS:
            raise ConfigError(f"metric must be one of {METRICS}")
        unknown = set(self.model_options) - set(_MODEL_KEYS)
        if unknown:
            raise ConfigError(f"unknown model options: {sorted(unknown)}")

    def metric_for(self, task: str) -> str:
        if self.metric is not None:
            return self.metric
        return "accuracy" if task == "classification" else "mae"

    def model_config(self, bundle: DatasetBundle) -> ModelConfig:
        return ModelConfig(
            d_in=bundle.features.shape[1],
            d_out=bundle.d_out,
            task=bundle.task,
            **self.model_options,
        )


# ---------------------------------------------------------------------------
# config files: flat key=value lines


def _to_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_config(text: str) -> TrainConfig:
    """Parse ``key=value`` lines (``#`` comments allowed); unknown keys are rejected."""
    train_types = {
        "lr": float,
        "beta1": float,
        "beta2": float,
        "eps": float,
        "weight_decay": float,
        "max_epochs": int,
        "patience": int,
        "batch_size": str,
        "batch_method": str,
        "hops": int,
        "seed": int,
        "metric": str,
        "max_rank": int,
        "clique_ceiling": int,
        "dtype": str,
    }
    train: dict = {}
    model: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep:
            raise ConfigError(f"line {lineno}: expected key=value")
        if key in _MODEL_KEYS:
            kind = _MODEL_KEYS[key]
            target = model
        elif key in train_types:
            kind = train_types[key]
            target = train
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            target[key] = _to_bool(value) if kind == "bool" else kind(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    betas = (train.pop("beta1", 0.9), train.pop("beta2", 0.999))
    if "batch_size" in train:
        raw = train.pop("batch_size")
        try:
            train["batch_size"] = None if raw == "full" else int(raw)
        except ValueError:
            raise ConfigError(f"batch_size must be an integer or 'full', got {raw!r}") from None
    return TrainConfig(betas=betas, model_options=model, **train)


def load_config(path) -> TrainConfig:
    return parse_config(Path(path).read_text())


# ---------------------------------------------------------------------------
# splits, optimizer, metrics


@dataclass(eq=False)
class SplitMasks:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def sizes(self) -> tuple[int, int, int]:
        return int(self.train.sum()), int(self.val.sum()), int(self.test.sum())


def split_dataset(n_nodes: int, seed: int) -> SplitMasks:
    """Random 50/25/25 split; validation and test get ``n // 4`` each, train the rest."""
    if n_nodes < 4:
        raise ConfigError(f"need at least 4 nodes to split, got {n_nodes}")
    perm = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,))).permutation(n_nodes)
    q = n_nodes // 4
    masks = [np.zeros(n_nodes, dtype=bool) for _ in range(3)]
    masks[1][perm[:q]] = True
    masks[2][perm[q : 2 * q]] = True
    masks[0][perm[2 * q :]] = True
    return SplitMasks(*masks)


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState, config: TrainConfig) -> AdamState:
    """One Adam update, applied to ``params`` in place."""
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient for {name} at step {state.step + 1}")
    state.step += 1
    b1, b2 = config.betas
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for name, p in params.items():
        g = grads[name]
        if config.weight_decay:
            g = g + config.weight_decay * p
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= (config.lr * (m / c1) / (np.sqrt(v / c2) + config.eps)).astype(p.dtype)
    return state


def evaluate(scores, labels, metric: str) -> float:
    """Accuracy (argmax, ties to the lowest class), ROC-AUC (tied pairs count 1/2) or MAE."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape[0] != labels.shape[0]:
        raise ConfigError(f"{scores.shape[0]} scores for {labels.shape[0]} labels")
    if metric == "accuracy":
        return float(np.mean(np.argmax(scores, axis=1) == labels))
    if metric == "mae":
        return float(np.mean(np.abs(scores.reshape(labels.shape[0], -1)[:, 0] - labels)))
    if metric == "roc_auc":
        if scores.ndim == 2:
            if scores.shape[1] != 2:
                raise ConfigError("roc_auc needs binary scores")
            scores = scores[:, 1] - scores[:, 0]
        pos = labels == 1
        n_pos, n_neg = int(pos.sum()), int((~pos).sum())
        if n_pos == 0 or n_neg == 0:
            raise ConfigError("roc_auc is undefined when only one class is present")
        ranks = rankdata(scores)
        return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))
    raise ConfigError(f"unknown metric {metric!r}")


def _better(metric: str, new: float, best: float | None) -> bool:
    if best is None:
        return True
    return new < best if metric == "mae" else new > best


# ---------------------------------------------------------------------------
# training


@dataclass(eq=False)
class RunResult:
    seed: int
    best_epoch: int
    val_metric: float
    test_metric: float
    epochs_run: int
    model: TopoMambaModel
    history: list = field(default_factory=list)  # (epoch, train_loss, val_metric)


@dataclass(eq=False)
class ExperimentReport:
    metric: str
    runs: list

    @property
    def test_scores(self) -> np.ndarray:
        return np.array([r.test_metric for r in self.runs])

    @property
    def mean(self) -> float:
        return float(self.test_scores.mean())

    @property
    def std(self) -> float:
        return float(self.test_scores.std())

    def summary(self) -> str:
        return f"{self.metric}: {self.mean:.4f} +- {self.std:.4f} over {len(self.runs)} runs"

    def write(self, path) -> None:
        """One tab-separated line per run, then mean and std footer lines."""
        with open(path, "w") as fh:
            fh.write(f"# metric={self.metric}\n")
            fh.write("seed\tbest_epoch\tval\ttest\n")
            for r in self.runs:
                fh.write(f"{r.seed}\t{r.best_epoch}\t{r.val_metric:.6f}\t{r.test_metric:.6f}\n")
            vals = np.array([r.val_metric for r in self.runs])
            fh.write(f"mean\t-\t{vals.mean():.6f}\t{self.mean:.6f}\n")
            fh.write(f"std\t-\t{vals.std():.6f}\t{self.std:.6f}\n")


def model_scores(model: TopoMambaModel, X: SimplicialComplex, features) -> np.ndarray:
    return model.forward(X, features, train=False)


def train_epoch(model, X, features, labels, train_idx, config: TrainConfig, state: AdamState, rng) -> float:
    """One pass over the training nodes; returns the mean batch loss."""
    params = model.parameters()
    if config.batch_size is None:
        loss, grads, _ = model.loss_and_grad(X, features, labels, train_idx, train=True, rng=rng)
        adam_step(params, grads, state, config)
        return loss
    hops = config.hops if config.hops is not None else model.config.n_blocks
    sampler = per_rank_prune if config.batch_method == "per_rank" else sample_subcomplex
    losses = []
    for seeds in iter_batches(train_idx, config.batch_size, rng):
        batch = sampler(X, seeds, hops, features, labels)
        loss, grads, _ = model.loss_and_grad(
            batch.sub, batch.features, batch.labels, batch.seed_local, train=True, rng=rng
        )
        adam_step(params, grads, state, config)
        losses.append(loss)
    return float(np.mean(losses))


def train_model(
    bundle: DatasetBundle,
    config: TrainConfig,
    seed: int | None = None,
    X: SimplicialComplex | None = None,
    masks: SplitMasks | None = None,
) -> RunResult:
    """Train with early stopping on the validation metric and restore the best epoch.

    ``patience`` counts epochs without improvement; training stops as soon as
    that count reaches ``patience``, so ``patience=0`` trains exactly one epoch.
    """
    seed = config.seed if seed is None else seed
    if X is None:
        X = clique_lift(bundle.graph, config.max_rank, config.clique_ceiling)
    if masks is None:
        masks = bundle.splits if bundle.splits is not None else split_dataset(bundle.n_nodes, seed)
    metric = config.metric_for(bundle.task)
    dtype = np.dtype(config.dtype)
    model = TopoMambaModel.init(config.model_config(bundle), seed, dtype)
    features = bundle.features.astype(dtype)
    labels = bundle.labels
    train_idx = np.flatnonzero(masks.train)
    val_idx = np.flatnonzero(masks.val)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2,)))
    state = AdamState()
    best_val, best_epoch, best_params = None, 0, None
    wait = 0
    history = []
    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        loss = train_epoch(model, X, features, labels, train_idx, config, state, rng)
        out = model_scores(model, X, features)
        val = evaluate(out[val_idx], labels[val_idx], metric)
        history.append((epoch, loss, val))
        if _better(metric, val, best_val):
            best_val, best_epoch, wait = val, epoch, 0
            best_params = {k: v.copy() for k, v in model.parameters().items()}
        else:
            wait += 1
        log.debug("seed %d epoch %d loss %.4f val %.4f", seed, epoch, loss, val)
        if wait >= config.patience:
            break
    model.load_parameters(best_params)
    out = model_scores(model, X, features)
    test_idx = np.flatnonzero(masks.test)
    test = evaluate(out[test_idx], labels[test_idx], metric)
    return RunResult(seed, best_epoch, best_val, test, epoch, model, history)


def run_experiment(
    bundle: DatasetBundle,
    config: TrainConfig,
    n_seeds: int = 1,
    out_dir=None,
    X: SimplicialComplex | None = None,
) -> ExperimentReport:
    """Train ``n_seeds`` independent runs (seeds ``config.seed + k``) and summarize test scores.

    With ``out_dir`` set, writes ``results.tsv`` and one checkpoint per run.
    """
    if X is None:
        X = clique_lift(bundle.graph, config.max_rank, config.clique_ceiling)
    runs = []
    for k in range(n_seeds):
        seed = config.seed + k
        result = train_model(bundle, config, seed, X)
        log.info("seed %d: best epoch %d, val %.4f, test %.4f", seed, result.best_epoch, result.val_metric, result.test_metric)
        runs.append(result)
    report = ExperimentReport(config.metric_for(bundle.task), runs)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        report.write(out / "results.tsv")
        for r in runs:
            meta = {
                "seed": r.seed,
                "max_rank": config.max_rank,
                "clique_ceiling": config.clique_ceiling,
                "metric": report.metric,
            }
            save_checkpoint(r.model, out / f"model_seed{r.seed}.ckpt", meta)
    return report
