"""Full network: feature encoder, stacked sequence blocks, task head, losses and checkpoints."""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .complex import SimplicialComplex
from .errors import (
    CheckpointVersionError,
    ConfigError,
    CorruptCheckpointError,
    ShapeError,
)
from .lifting import feature_lift, feature_lift_backward
from .sequencer import (
    AGGREGATORS,
    assemble_sequences,
    assemble_sequences_backward,
    layer_norm,
    layer_norm_backward,
)
from .ssm import MambaBlockParams, mamba_block_backward, mamba_block_forward

__all__ = [
    "ModelConfig",
    "TopoMambaModel",
    "encode_features",
    "forward",
    "save_checkpoint",
    "load_checkpoint",
    "CHECKPOINT_MAGIC",
    "CHECKPOINT_VERSION",
]

CHECKPOINT_MAGIC = b"TOPOMB"
CHECKPOINT_VERSION = 1
TASKS = ("classification", "regression")
BACKBONES = ("ssm", "gru")


@dataclass
class ModelConfig:
    d_in: int
    d_out: int
    d_h: int = 64
    n_blocks: int = 2
    state_size: int = 16
    backbone: str = "ssm"
    use_backward_scan: bool = True
    use_skip: bool = True
    head_activation: bool | None = None  # None: on for classification, off for regression
    dropout: float = 0.25
    aggregator: str = "sum"
    task: str = "classification"

    def __post_init__(self):
        if self.head_activation is None:
            self.head_activation = self.task == "classification"
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.backbone not in BACKBONES:
            raise ConfigError(f"backbone must be one of {BACKBONES}, got {self.backbone!r}")
        if self.aggregator not in AGGREGATORS:
            raise ConfigError(f"aggregator must be one of {AGGREGATORS}, got {self.aggregator!r}")
        if self.n_blocks < 1:
            raise ConfigError("n_blocks must be >= 1")
        if min(self.d_in, self.d_out, self.d_h, self.state_size) < 1:
            raise ConfigError("widths must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.task == "regression" and self.d_out != 1:
            raise ConfigError("regression uses d_out = 1")


def _dropout(x, rate, train, rng):
    if not train or rate == 0.0:
        return x, None
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / x.dtype.type(1.0 - rate)
    return x * keep, keep


class TopoMambaModel:
    """Parameters plus forward/backward for the whole network.

    Parameter names are stable and ordered: ``W_in``, ``b_in``, then each
    block's ``blocks.{i}.*`` arrays, then ``W_out``, ``b_out``.
    """

    def __init__(self, config: ModelConfig, W_in, b_in, blocks, W_out, b_out):
        self.config = config
        self.W_in = W_in
        self.b_in = b_in
        self.blocks = list(blocks)
        self.W_out = W_out
        self.b_out = b_out

    @classmethod
    def init(cls, config: ModelConfig, seed: int = 0, dtype=np.float32) -> "TopoMambaModel":
        rng = np.random.default_rng(seed)
        c = config

        def u(fan_in, *shape):
            bound = np.sqrt(1.0 / fan_in)
            return rng.uniform(-bound, bound, size=shape).astype(dtype)

        W_in, b_in = u(c.d_in, c.d_h, c.d_in), u(c.d_in, c.d_h)
        blocks = [
            MambaBlockParams.init(c.d_h, c.backbone, c.state_size, c.use_backward_scan, rng, dtype)
            for _ in range(c.n_blocks)
        ]
        W_out, b_out = u(c.d_h, c.d_out, c.d_h), u(c.d_h, c.d_out)
        return cls(config, W_in, b_in, blocks, W_out, b_out)

    # -- parameter access --------------------------------------------------
    def parameters(self) -> dict[str, np.ndarray]:
        params = {"W_in": self.W_in, "b_in": self.b_in}
        for i, block in enumerate(self.blocks):
            params.update({f"blocks.{i}.{k}": v for k, v in block.arrays().items()})
        params["W_out"] = self.W_out
        params["b_out"] = self.b_out
        return params

    def load_parameters(self, values: dict[str, np.ndarray]) -> None:
        """Copy ``values`` into the existing arrays in place."""
        params = self.parameters()
        if set(values) != set(params):
            raise ShapeError("parameter names do not match the model")
        for k, v in values.items():
            if params[k].shape != np.shape(v):
                raise ShapeError(f"{k}: expected {params[k].shape}, got {np.shape(v)}")
            params[k][...] = v

    def copy(self) -> "TopoMambaModel":
        clone = TopoMambaModel.init(self.config, 0, self.dtype)
        clone.load_parameters(self.parameters())
        return clone

    def astype(self, dtype) -> "TopoMambaModel":
        clone = TopoMambaModel.init(self.config, 0, dtype)
        clone.load_parameters(self.parameters())
        return clone

    @property
    def dtype(self):
        return self.W_in.dtype

    # -- forward / backward --------------------------------------------------
    def encode_features(self, H_in, train: bool = False, rng=None):
        return self._encode(H_in, train, rng)[0]

    def _encode(self, H_in, train, rng):
        H_in = np.asarray(H_in, dtype=self.dtype)
        if H_in.ndim != 2 or H_in.shape[1] != self.config.d_in:
            raise ShapeError(f"expected (n, {self.config.d_in}) input features, got {H_in.shape}")
        Z = H_in @ self.W_in.T + self.b_in
        E = np.maximum(Z, 0)
        H, keep = _dropout(E, self.config.dropout, train, rng)
        return H, (H_in, Z, keep)

    def forward(self, X: SimplicialComplex, H_in, train: bool = False, rng=None) -> np.ndarray:
        return self._forward(X, H_in, train, rng)[0]

    def _forward(self, X, H_in, train=False, rng=None):
        c = self.config
        if np.shape(H_in)[0] != X.n_nodes:
            raise ShapeError(f"{np.shape(H_in)[0]} feature rows for {X.n_nodes} nodes")
        if train and c.dropout > 0 and rng is None:
            raise ConfigError("training-mode forward with dropout needs an rng")
        H, enc_cache = self._encode(H_in, train, rng)
        block_caches = []
        for block in self.blocks:
            F = feature_lift(X, H)
            raw = assemble_sequences(X, F, c.aggregator)
            S, ln_cache = layer_norm(raw, block.ln_gamma, block.ln_beta)
            H_next, bc = mamba_block_forward(block, S, H, c.use_skip)
            block_caches.append((ln_cache, bc))
            H = H_next
        pre = H @ self.W_out.T + self.b_out
        out = np.maximum(pre, 0) if c.head_activation else pre
        out, keep_out = _dropout(out, c.dropout, train, rng)
        return out, (X, enc_cache, block_caches, H, pre, keep_out)

    def _backward(self, cache, dout) -> dict[str, np.ndarray]:
        c = self.config
        X, (H_in, Z, keep_in), block_caches, H_last, pre, keep_out = cache
        grads: dict[str, np.ndarray] = {}
        if keep_out is not None:
            dout = dout * keep_out
        if c.head_activation:
            dout = dout * (pre > 0)
        grads["W_out"] = dout.T @ H_last
        grads["b_out"] = dout.sum(axis=0)
        dH = dout @ self.W_out
        for i in range(len(self.blocks) - 1, -1, -1):
            block = self.blocks[i]
            ln_cache, bc = block_caches[i]
            g1, g2, dS, dH_skip = mamba_block_backward(block, bc, dH)
            draw, dgamma, dbeta = layer_norm_backward(dS, ln_cache)
            dF = assemble_sequences_backward(X, draw, c.aggregator)
            dH = dH_skip + feature_lift_backward(X, dF)
            prefix = f"blocks.{i}."
            grads[prefix + "ln_gamma"] = dgamma
            grads[prefix + "ln_beta"] = dbeta
            grads.update({f"{prefix}fwd.{k}": v for k, v in g1.arrays().items()})
            if g2 is not None:
                grads.update({f"{prefix}bwd.{k}": v for k, v in g2.arrays().items()})
        if keep_in is not None:
            dH = dH * keep_in
        dZ = dH * (Z > 0)
        grads["W_in"] = dZ.T @ H_in
        grads["b_in"] = dZ.sum(axis=0)
        return {k: grads[k].astype(self.dtype, copy=False) for k in self.parameters()}

    def loss_and_grad(self, X, H_in, targets, index=None, train=False, rng=None):
        """Loss averaged over the rows in ``index`` (all rows if ``None``) and its gradients.

        Returns ``(loss, grads, output)``.
        """
        out, cache = self._forward(X, H_in, train, rng)
        index = np.arange(out.shape[0]) if index is None else np.asarray(index)
        loss, dsel = task_loss(out[index], np.asarray(targets)[index], self.config.task)
        dout = np.zeros_like(out)
        np.add.at(dout, index, dsel.astype(out.dtype))
        return loss, self._backward(cache, dout), out

    def __repr__(self) -> str:
        return f"TopoMambaModel({self.config})"


def task_loss(out: np.ndarray, targets: np.ndarray, task: str):
    """Mean loss over rows and its gradient: softmax cross-entropy or mean absolute error."""
    m = max(out.shape[0], 1)
    if task == "classification":
        logits = out.astype(np.float64)
        logits = logits - logits.max(axis=1, keepdims=True)
        logp = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
        t = targets.astype(np.int64)
        loss = -logp[np.arange(len(t)), t].sum() / m
        grad = np.exp(logp)
        grad[np.arange(len(t)), t] -= 1.0
        return float(loss), grad / m
    diff = out[:, 0].astype(np.float64) - targets.astype(np.float64)
    loss = np.abs(diff).sum() / m
    return float(loss), (np.sign(diff) / m)[:, None]


def encode_features(m: TopoMambaModel, H_in, train=False, rng=None) -> np.ndarray:
    return m.encode_features(H_in, train, rng)


def forward(m: TopoMambaModel, X: SimplicialComplex, H_in, train=False, rng=None) -> np.ndarray:
    return m.forward(X, H_in, train, rng)


# ---------------------------------------------------------------------------
# checkpoints
#
# layout: magic (6 bytes) | version (u8) | config length (u32 LE) | config JSON
#         | every parameter as little-endian float32, in parameter order


def save_checkpoint(m: TopoMambaModel, path, meta: dict | None = None) -> None:
    header = {"model": asdict(m.config), "meta": meta or {}}
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<BI", CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        for arr in m.parameters().values():
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_checkpoint(path) -> tuple[TopoMambaModel, dict]:
    """Load a checkpoint; returns ``(model, meta)``."""
    data = Path(path).read_bytes()
    head = len(CHECKPOINT_MAGIC)
    if len(data) < head + 5 or data[:head] != CHECKPOINT_MAGIC:
        raise CorruptCheckpointError(f"{path}: not a checkpoint (bad magic or too short)")
    version, n = struct.unpack_from("<BI", data, head)
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"{path}: format version {version}, expected {CHECKPOINT_VERSION}")
    start = head + 5
    try:
        header = json.loads(data[start : start + n].decode())
        known = {f.name for f in fields(ModelConfig)}
        config = ModelConfig(**{k: v for k, v in header["model"].items() if k in known})
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptCheckpointError(f"{path}: unreadable config block ({exc})") from None
    model = TopoMambaModel.init(config, 0, np.float32)
    offset = start + n
    for arr in model.parameters().values():
        nbytes = arr.size * 4
        if offset + nbytes > len(data):
            raise CorruptCheckpointError(f"{path}: truncated parameter data")
        arr[...] = np.frombuffer(data, dtype="<f4", count=arr.size, offset=offset).reshape(arr.shape)
        offset += nbytes
    if offset != len(data):
        raise CorruptCheckpointError(f"{path}: {len(data) - offset} trailing bytes")
    return model, header.get("meta", {})


def load_checkpoint(path) -> TopoMambaModel:
    return read_checkpoint(path)[0]
