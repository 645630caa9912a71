"""Selective state-space scan, GRU scan and the bidirectional block, with exact gradients.

All scans act on batches shaped ``(batch, L, d)``; a single ``(L, d)`` sequence
is accepted too. Every forward has a matching ``*_backward`` that consumes the
cache it returned.

Selective scan, per token ``x_t`` (channels ``c``, state index ``n``)::

    dt_t = softplus(w_dt . x_t + b_dt)            scalar step size
    B_t = W_B x_t,  C_t = W_C x_t                  input-dependent, length N
    h_t[c, n] = exp(dt_t A[c, n]) h_{t-1}[c, n] + dt_t B_t[n] x_t[c]
    y_t[c] = <C_t, h_t[c]> + D[c] x_t[c]
    out_t = y_t * silu(W_g x_t + b_g)

with ``A = -exp(A_log)`` so that every decay factor lies in ``(0, 1)``.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Union

import numpy as np

from .errors import NumericError, ShapeError

__all__ = [
    "SsmLayerParams",
    "GruParams",
    "MambaBlockParams",
    "DEFAULT_STATE_SIZE",
    "selective_scan",
    "selective_scan_forward",
    "selective_scan_backward",
    "selective_scan_grad",
    "gru_scan",
    "gru_scan_forward",
    "gru_scan_backward",
    "gru_scan_grad",
    "scan_forward",
    "scan_backward",
    "mamba_block",
    "mamba_block_forward",
    "mamba_block_backward",
]

DEFAULT_STATE_SIZE = 16


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class _ParamSet:
    """Mixin for dataclasses whose fields are all parameter arrays."""

    def arrays(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def zeros_like(self):
        return type(self)(**{k: np.zeros_like(v) for k, v in self.arrays().items()})

    def astype(self, dtype):
        return type(self)(**{k: v.astype(dtype) for k, v in self.arrays().items()})

    @property
    def dtype(self):
        return next(iter(self.arrays().values())).dtype


@dataclass(eq=False)
class SsmLayerParams(_ParamSet):
    A_log: np.ndarray  # (d, N)
    W_B: np.ndarray  # (N, d)
    W_C: np.ndarray  # (N, d)
    w_dt: np.ndarray  # (d,)
    b_dt: np.ndarray  # (1,)
    D: np.ndarray  # (d,)
    W_g: np.ndarray  # (d, d)
    b_g: np.ndarray  # (d,)

    @property
    def width(self) -> int:
        return self.D.shape[0]

    @property
    def state_size(self) -> int:
        return self.A_log.shape[1]

    @property
    def A(self) -> np.ndarray:
        return -np.exp(self.A_log)

    @classmethod
    def init(cls, d: int, state_size: int = DEFAULT_STATE_SIZE, rng=None, dtype=np.float32):
        rng = np.random.default_rng(rng)
        bound = np.sqrt(1.0 / d)

        def u(*shape):
            return rng.uniform(-bound, bound, size=shape).astype(dtype)

        A_log = np.tile(np.log(np.arange(1, state_size + 1, dtype=np.float64)), (d, 1))
        return cls(
            A_log=A_log.astype(dtype),
            W_B=u(state_size, d),
            W_C=u(state_size, d),
            w_dt=u(d),
            b_dt=u(1),
            D=np.ones(d, dtype=dtype),
            W_g=u(d, d),
            b_g=u(d),
        )


@dataclass(eq=False)
class GruParams(_ParamSet):
    """Gated recurrent unit with hidden size equal to the input width; gate order r, z, n."""

    W_ih: np.ndarray  # (3d, d)
    W_hh: np.ndarray  # (3d, d)
    b_ih: np.ndarray  # (3d,)
    b_hh: np.ndarray  # (3d,)

    @property
    def width(self) -> int:
        return self.W_ih.shape[1]

    @classmethod
    def init(cls, d: int, rng=None, dtype=np.float32):
        rng = np.random.default_rng(rng)
        bound = np.sqrt(1.0 / d)

        def u(*shape):
            return rng.uniform(-bound, bound, size=shape).astype(dtype)

        return cls(W_ih=u(3 * d, d), W_hh=u(3 * d, d), b_ih=u(3 * d), b_hh=u(3 * d))


ScanParams = Union[SsmLayerParams, GruParams]


def _as_batch(seq: np.ndarray, width: int):
    # reversed views arrive from the backward scan; strided inputs slow every product
    seq = np.ascontiguousarray(seq)
    single = seq.ndim == 2
    if single:
        seq = seq[None]
    if seq.ndim != 3 or seq.shape[-1] != width:
        raise ShapeError(f"expected (batch, L, {width}) or (L, {width}), got {np.shape(seq)}")
    if seq.shape[1] < 1:
        raise ShapeError("sequence length must be at least 1")
    return seq, single


# ---------------------------------------------------------------------------
# selective scan


def selective_scan_forward(p: SsmLayerParams, x: np.ndarray):
    """Forward pass on ``(batch, L, d)``; returns ``(out, cache)``.

    States are stored as ``(batch, L, N, d)`` so the innermost loops run over
    channels; large temporaries are updated in place.
    """
    x, _ = _as_batch(x, p.width)
    n, L, d = x.shape
    z = x @ p.w_dt + p.b_dt[0]
    dt = np.logaddexp(0.0, z).astype(x.dtype)
    Bm = x @ p.W_B.T
    Cm = x @ p.W_C.T
    with np.errstate(over="ignore", invalid="ignore"):
        decay = dt[..., None, None] * p.A.T
        np.exp(decay, out=decay)
        hs = Bm[..., None] * (dt[..., None] * x)[:, :, None, :]
        for t in range(1, L):
            hs[:, t] += decay[:, t] * hs[:, t - 1]
    if not np.isfinite(hs).all():
        bad = np.flatnonzero(~np.isfinite(hs).reshape(n, L, -1).all(axis=(0, 2)))[0]
        raise NumericError(f"non-finite scan state at step {bad}")
    y = (Cm[:, :, None, :] @ hs)[:, :, 0, :]
    y += p.D * x
    g = x @ p.W_g.T + p.b_g
    sg = _sigmoid(g)
    out = y * g * sg
    if not np.isfinite(out).all():
        raise NumericError("non-finite scan output")
    cache = (x, z, dt, Bm, Cm, decay, hs, y, g, sg)
    return out, cache


def selective_scan_backward(p: SsmLayerParams, cache, dout: np.ndarray):
    """Reverse-mode pass; returns ``(param_grads, dx)`` with ``dx`` shaped like the batch input."""
    x, z, dt, Bm, Cm, decay, hs, y, g, sg = cache
    dout = np.ascontiguousarray(dout).reshape(y.shape)
    n, L, d = x.shape
    N = p.state_size
    At = p.A.T
    flat = lambda a: a.reshape(n * L, -1)  # noqa: E731

    dy = dout * g * sg
    dg = dout * y * (sg * (1.0 + g * (1.0 - sg)))
    dW_g = flat(dg).T @ flat(x)
    db_g = dg.sum(axis=(0, 1))
    dx = dg @ p.W_g
    dD = (dy * x).sum(axis=(0, 1))
    dx += dy * p.D
    dCm = (hs @ dy[..., None])[..., 0]

    # gradient w.r.t. every state h_t, accumulated from the last step backwards
    dhs = Cm[..., None] * dy[:, :, None, :]
    for t in range(L - 1, 0, -1):
        dhs[:, t - 1] += dhs[:, t] * decay[:, t]
    dec_grad = dhs[:, 1:] * hs[:, :-1]
    dec_grad *= decay[:, 1:]
    ddt = np.zeros_like(dt)
    ddt[:, 1:] = dec_grad.reshape(n, L - 1, -1) @ At.ravel()
    dAt = (dt[:, 1:].reshape(1, -1) @ dec_grad.reshape(-1, N * d)).reshape(N, d)
    dhB = (Bm[:, :, None, :] @ dhs)[:, :, 0, :]
    ddt += (dhB * x).sum(axis=2)
    dBm = (dhs @ x[..., None])[..., 0] * dt[..., None]
    dx += dt[..., None] * dhB

    dz = ddt * _sigmoid(z)
    dw_dt = flat(x).T @ dz.reshape(-1)
    db_dt = np.array([dz.sum()], dtype=x.dtype)
    dx += dz[..., None] * p.w_dt
    dW_B = flat(dBm).T @ flat(x)
    dW_C = flat(dCm).T @ flat(x)
    dx += dBm @ p.W_B + dCm @ p.W_C
    grads = SsmLayerParams(
        A_log=dAt.T * p.A,
        W_B=dW_B,
        W_C=dW_C,
        w_dt=dw_dt,
        b_dt=db_dt,
        D=dD,
        W_g=dW_g,
        b_g=db_g,
    )
    return grads, dx


def selective_scan(p: SsmLayerParams, seq: np.ndarray) -> np.ndarray:
    out, _ = selective_scan_forward(p, seq)
    return out[0] if np.ndim(seq) == 2 else out


def selective_scan_grad(p: SsmLayerParams, seq: np.ndarray, upstream: np.ndarray):
    """Gradients of ``sum(upstream * selective_scan(p, seq))``."""
    if np.shape(upstream) != np.shape(seq):
        raise ShapeError(f"upstream {np.shape(upstream)} does not match sequence {np.shape(seq)}")
    _, cache = selective_scan_forward(p, seq)
    grads, dx = selective_scan_backward(p, cache, upstream)
    return grads, (dx[0] if np.ndim(seq) == 2 else dx)


# ---------------------------------------------------------------------------
# GRU scan


def gru_scan_forward(p: GruParams, x: np.ndarray, h0: np.ndarray | None = None):
    x, _ = _as_batch(x, p.width)
    n, L, d = x.shape
    gi_all = x @ p.W_ih.T + p.b_ih
    h = np.zeros((n, d), dtype=x.dtype) if h0 is None else np.broadcast_to(h0, (n, d)).astype(x.dtype)
    hs = np.empty((n, L, d), dtype=x.dtype)
    steps = []
    for t in range(L):
        gi = gi_all[:, t]
        gh = h @ p.W_hh.T + p.b_hh
        r = _sigmoid(gi[:, :d] + gh[:, :d])
        zg = _sigmoid(gi[:, d : 2 * d] + gh[:, d : 2 * d])
        nn = np.tanh(gi[:, 2 * d :] + r * gh[:, 2 * d :])
        h_prev = h
        h = (1.0 - zg) * nn + zg * h_prev
        if not np.isfinite(h).all():
            raise NumericError(f"non-finite GRU state at step {t}")
        hs[:, t] = h
        steps.append((h_prev, r, zg, nn, gh[:, 2 * d :]))
    return hs, (x, steps)


def gru_scan_backward(p: GruParams, cache, dout: np.ndarray):
    x, steps = cache
    n, L, d = x.shape
    dout = np.asarray(dout).reshape(x.shape)
    grads = p.zeros_like()
    dx = np.empty_like(x)
    carry = np.zeros((n, d), dtype=x.dtype)
    for t in range(L - 1, -1, -1):
        h_prev, r, zg, nn, ghn = steps[t]
        dh = dout[:, t] + carry
        dn_pre = dh * (1.0 - zg) * (1.0 - nn * nn)
        dz_pre = dh * (h_prev - nn) * zg * (1.0 - zg)
        dr_pre = dn_pre * ghn * r * (1.0 - r)
        dgi = np.concatenate([dr_pre, dz_pre, dn_pre], axis=1)
        dgh = np.concatenate([dr_pre, dz_pre, dn_pre * r], axis=1)
        grads.W_ih += dgi.T @ x[:, t]
        grads.b_ih += dgi.sum(axis=0)
        grads.W_hh += dgh.T @ h_prev
        grads.b_hh += dgh.sum(axis=0)
        dx[:, t] = dgi @ p.W_ih
        carry = dh * zg + dgh @ p.W_hh
    return grads, dx


def gru_scan(p: GruParams, seq: np.ndarray) -> np.ndarray:
    out, _ = gru_scan_forward(p, seq)
    return out[0] if np.ndim(seq) == 2 else out


def gru_scan_grad(p: GruParams, seq: np.ndarray, upstream: np.ndarray):
    if np.shape(upstream) != np.shape(seq):
        raise ShapeError(f"upstream {np.shape(upstream)} does not match sequence {np.shape(seq)}")
    _, cache = gru_scan_forward(p, seq)
    grads, dx = gru_scan_backward(p, cache, upstream)
    return grads, (dx[0] if np.ndim(seq) == 2 else dx)


def scan_forward(p: ScanParams, x: np.ndarray):
    if isinstance(p, SsmLayerParams):
        return selective_scan_forward(p, x)
    return gru_scan_forward(p, x)


def scan_backward(p: ScanParams, cache, dout: np.ndarray):
    if isinstance(p, SsmLayerParams):
        return selective_scan_backward(p, cache, dout)
    return gru_scan_backward(p, cache, dout)


# ---------------------------------------------------------------------------
# bidirectional block


@dataclass(eq=False)
class MambaBlockParams:
    """Forward scan, optional separate reverse-direction scan, and the sequence layer norm."""

    forward_ssm: ScanParams
    backward_ssm: ScanParams | None
    ln_gamma: np.ndarray
    ln_beta: np.ndarray

    def arrays(self) -> dict[str, np.ndarray]:
        out = {"ln_gamma": self.ln_gamma, "ln_beta": self.ln_beta}
        out.update({f"fwd.{k}": v for k, v in self.forward_ssm.arrays().items()})
        if self.backward_ssm is not None:
            out.update({f"bwd.{k}": v for k, v in self.backward_ssm.arrays().items()})
        return out

    @property
    def width(self) -> int:
        return self.ln_gamma.shape[0]

    @classmethod
    def init(
        cls,
        d: int,
        backbone: str = "ssm",
        state_size: int = DEFAULT_STATE_SIZE,
        use_backward_scan: bool = True,
        rng=None,
        dtype=np.float32,
    ):
        rng = np.random.default_rng(rng)

        def make():
            if backbone == "ssm":
                return SsmLayerParams.init(d, state_size, rng, dtype)
            if backbone == "gru":
                return GruParams.init(d, rng, dtype)
            raise ShapeError(f"unknown backbone {backbone!r}")

        fwd = make()
        bwd = make() if use_backward_scan else None
        return cls(fwd, bwd, np.ones(d, dtype=dtype), np.zeros(d, dtype=dtype))


def mamba_block_forward(p: MambaBlockParams, S: np.ndarray, H0: np.ndarray, use_skip: bool = True):
    """Fuse forward and reversed scans over normalized sequences ``S`` and update ``H0``."""
    if S.ndim != 3 or S.shape[-1] != p.width or H0.shape != (S.shape[0], S.shape[2]):
        raise ShapeError(f"block width {p.width}: sequences {S.shape}, node features {H0.shape}")
    s1, c1 = scan_forward(p.forward_ssm, S)
    fused = s1
    c2 = None
    if p.backward_ssm is not None:
        s2, c2 = scan_forward(p.backward_ssm, S[:, ::-1])
        fused = s1 + s2[:, ::-1]
    update = fused.sum(axis=1)
    out = H0 + update if use_skip else update
    return out, (c1, c2, S.shape[1], use_skip)


def mamba_block_backward(p: MambaBlockParams, cache, dout: np.ndarray):
    """Returns ``(fwd_grads, bwd_grads, dS, dH0)``; ``dH0`` covers the skip path only."""
    c1, c2, L, use_skip = cache
    dfused = np.repeat(dout[:, None, :], L, axis=1)
    g1, dS = scan_backward(p.forward_ssm, c1, dfused)
    g2 = None
    if p.backward_ssm is not None:
        g2, dS_rev = scan_backward(p.backward_ssm, c2, dfused[:, ::-1])
        dS = dS + dS_rev[:, ::-1]
    dH0 = dout if use_skip else np.zeros_like(dout)
    return g1, g2, dS, dH0


def mamba_block(p: MambaBlockParams, S: np.ndarray, H0: np.ndarray, use_skip: bool = True) -> np.ndarray:
    return mamba_block_forward(p, S, H0, use_skip)[0]
