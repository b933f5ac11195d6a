"""Selector and reconstructor networks, the mask vector, and summary builders.

The selector scores each frame with an inclusion probability via a linear
projection, a 2-layer bidirectional LSTM, and a temperature-softmax head.
The reconstructor is a sequence autoencoder: a 2-layer bidirectional LSTM
encoder and an attention-equipped decoder that rebuilds the full frame
sequence from a (blended or hard) summary.

Checkpoints are a small binary format: a JSON header (variant, iteration,
stage, epoch, tensor directory) followed by float32 little-endian payloads.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .errors import ConfigError, ContractError, InputError, LoadError, NumericError

CHECKPOINT_MAGIC = b"SUMSRC1\x00"


def _as_tensor(array, dtype: torch.dtype) -> torch.Tensor:
    if isinstance(array, torch.Tensor):
        return array
    return torch.as_tensor(np.asarray(array), dtype=dtype)


def _check_finite(x: torch.Tensor, what: str) -> torch.Tensor:
    if not torch.isfinite(x).all():
        raise NumericError(f"{what} contains non-finite values")
    return x


def init_uniform_(module: nn.Module, generator: torch.Generator | None) -> None:
    """Reinitialize every parameter as uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)).

    fan_in is the weight's input width; LSTM biases use the hidden size, linear
    biases the layer's input width.
    """
    with torch.no_grad():
        for sub in module.modules():
            if isinstance(sub, nn.Linear):
                bound = 1.0 / np.sqrt(sub.in_features)
                for p in (sub.weight, sub.bias):
                    if p is not None:
                        p.uniform_(-bound, bound, generator=generator)
            elif isinstance(sub, nn.LSTM):
                for name, p in sub.named_parameters():
                    fan_in = p.shape[1] if p.dim() == 2 else sub.hidden_size
                    bound = 1.0 / np.sqrt(fan_in)
                    p.uniform_(-bound, bound, generator=generator)


class MaskVector(nn.Module):
    """Learned d-dimensional placeholder substituted for unselected frames."""

    def __init__(self, d: int, trainable: bool = True, dtype: torch.dtype = torch.float32):
        super().__init__()
        self.m = nn.Parameter(torch.zeros(d, dtype=dtype), requires_grad=trainable)

    @property
    def trainable(self) -> bool:
        return self.m.requires_grad

    def set_trainable(self, flag: bool) -> None:
        self.m.requires_grad_(flag)


class Selector(nn.Module):
    """Frame scorer: projection, 2-layer bidirectional LSTM, 2-way softmax head."""

    def __init__(
        self,
        d: int,
        d_h: int,
        tau: float = 0.5,
        generator: torch.Generator | None = None,
        dtype: torch.dtype = torch.float32,
    ):
        super().__init__()
        if d_h < 2 or d_h % 2 != 0:
            raise ConfigError(f"d_h must be even and >= 2, got {d_h}")
        if tau <= 0:
            raise ConfigError(f"tau must be positive, got {tau}")
        self.d, self.d_h, self.tau = d, d_h, float(tau)
        self.proj = nn.Linear(d, d_h)
        self.rnn = nn.LSTM(d_h, d_h // 2, num_layers=2, bidirectional=True)
        self.head = nn.Linear(d_h, 2)
        self.to(dtype)
        init_uniform_(self, generator)

    @property
    def dtype(self) -> torch.dtype:
        return self.head.weight.dtype

    def forward(self, features) -> torch.Tensor:
        """Importance scores p in (0, 1), one per frame; shape (n,)."""
        x = _check_finite(_as_tensor(features, self.dtype), "selector input")
        if x.ndim != 2 or x.shape[1] != self.d:
            raise InputError(f"selector expects (n, {self.d}) features, got {tuple(x.shape)}")
        hidden, _ = self.rnn(self.proj(x))
        logits = self.head(hidden)
        return torch.softmax(logits / self.tau, dim=-1)[:, 0]


class Reconstructor(nn.Module):
    """Attention autoencoder mapping a summary sequence back to full frames.

    Attention energies at step i are Y^T W_b z_{i-1} against all encoder
    outputs; at step 1 the encoder's final hidden state stands in for z_0.
    The context vector and the previous decoder output are concatenated as
    the decoder input, so the decoder advances strictly step by step (its two
    per-layer direction cells both move in step order, which is what a
    bidirectional recurrent stack degenerates to when driven one step at a
    time).
    """

    def __init__(
        self,
        d: int,
        d_h: int,
        generator: torch.Generator | None = None,
        dtype: torch.dtype = torch.float32,
    ):
        super().__init__()
        if d_h < 2 or d_h % 2 != 0:
            raise ConfigError(f"d_h must be even and >= 2, got {d_h}")
        self.d, self.d_h = d, d_h
        self.encoder = nn.LSTM(d, d_h // 2, num_layers=2, bidirectional=True)
        self.w_b = nn.Parameter(torch.empty(d_h, d_h))
        self.decoder = nn.LSTM(2 * d_h, d_h // 2, num_layers=2, bidirectional=True)
        self.out_proj = nn.Linear(d_h, d)
        self.to(dtype)
        with torch.no_grad():
            bound = 1.0 / np.sqrt(d_h)
            self.w_b.uniform_(-bound, bound, generator=generator)
        init_uniform_(self, generator)

    @property
    def dtype(self) -> torch.dtype:
        return self.out_proj.weight.dtype

    def forward(self, summary, return_attention: bool = False):
        """Reconstruct an (n, d) sequence; optionally also return the (n, n)
        attention weight matrix (rows sum to 1)."""
        x = _check_finite(_as_tensor(summary, self.dtype), "reconstructor input")
        if x.ndim != 2 or x.shape[1] != self.d:
            raise InputError(f"reconstructor expects (n, {self.d}) input, got {tuple(x.shape)}")
        n = x.shape[0]
        enc_out, (h_n, _) = self.encoder(x)  # enc_out: (n, d_h)
        h_e = torch.cat([h_n[-2], h_n[-1]])  # top layer, both directions: (d_h,)
        query = h_e
        prev_out = torch.zeros(self.d_h, dtype=x.dtype, device=x.device)
        state = None
        outputs = []
        weights = []
        for _ in range(n):
            energy = enc_out @ (self.w_b @ query)  # (n,)
            attn = torch.softmax(energy, dim=0)
            context = enc_out.T @ attn  # (d_h,)
            step_in = torch.cat([context, prev_out]).unsqueeze(0)
            step_out, state = self.decoder(step_in, state)
            z = step_out[0]
            outputs.append(z)
            weights.append(attn)
            query = z
            prev_out = z
        decoded = torch.stack(outputs)
        recon = self.out_proj(decoded)
        if return_attention:
            return recon, torch.stack(weights)
        return recon


def blend_summary(features, scores, mask: MaskVector | torch.Tensor) -> torch.Tensor:
    """Differentiable summary: row i is p_i * x_i + (1 - p_i) * m."""
    m = mask.m if isinstance(mask, MaskVector) else mask
    x = _as_tensor(features, m.dtype)
    p = scores if isinstance(scores, torch.Tensor) else torch.as_tensor(scores, dtype=m.dtype)
    if p.ndim != 1 or p.shape[0] != x.shape[0]:
        raise InputError(f"scores shape {tuple(p.shape)} does not match {x.shape[0]} frames")
    if x.shape[1] != m.shape[0]:
        raise InputError(f"mask width {m.shape[0]} != feature width {x.shape[1]}")
    with torch.no_grad():
        if bool((p < 0).any() or (p > 1).any()):
            raise ContractError("importance scores must lie in [0, 1]")
    p_col = p.unsqueeze(1)
    return p_col * x + (1.0 - p_col) * m


def hard_summary(features, frame_mask, mask: MaskVector | torch.Tensor) -> torch.Tensor:
    """Non-differentiable summary: row i is x_i where selected else m."""
    m = mask.m if isinstance(mask, MaskVector) else mask
    x = _as_tensor(features, m.dtype)
    a = np.asarray(frame_mask.detach().cpu() if isinstance(frame_mask, torch.Tensor) else frame_mask)
    if a.shape != (x.shape[0],):
        raise InputError(f"frame mask shape {a.shape} does not match {x.shape[0]} frames")
    if not np.isin(a, (0, 1)).all():
        raise InputError("frame mask must be binary")
    keep = torch.as_tensor(a.astype(bool)).unsqueeze(1)
    return torch.where(keep, x, m.unsqueeze(0).expand_as(x))


@dataclass
class MaskedSequence:
    """Result of random masking: the masked sequence plus the index split."""

    features: torch.Tensor
    kept_indices: np.ndarray
    masked_indices: np.ndarray


def random_mask(
    features,
    mask: MaskVector | torch.Tensor,
    alpha: float,
    rng: np.random.Generator,
) -> MaskedSequence:
    """Keep each frame independently with probability alpha, else replace by m.

    ``masked_indices`` is the replaced set; deterministic for a given rng state.
    """
    if not (0 < alpha < 1):
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    m = mask.m if isinstance(mask, MaskVector) else mask
    x = _as_tensor(features, m.dtype)
    keep = rng.random(x.shape[0]) < alpha
    keep_t = torch.as_tensor(keep).unsqueeze(1)
    masked = torch.where(keep_t, x, m.unsqueeze(0).expand_as(x))
    return MaskedSequence(
        features=masked,
        kept_indices=np.flatnonzero(keep),
        masked_indices=np.flatnonzero(~keep),
    )


# --- parameter snapshots and the checkpoint file format ---------------------


def state_to_numpy(module: nn.Module, prefix: str) -> dict[str, np.ndarray]:
    return {
        f"{prefix}.{name}": p.detach().cpu().numpy().astype(np.float32)
        for name, p in module.named_parameters()
    }


def load_from_numpy(module: nn.Module, prefix: str, state: dict[str, np.ndarray]) -> None:
    with torch.no_grad():
        for name, p in module.named_parameters():
            key = f"{prefix}.{name}"
            if key not in state:
                raise LoadError(f"checkpoint missing tensor {key!r}")
            value = np.asarray(state[key], dtype=np.float32)
            if tuple(value.shape) != tuple(p.shape):
                raise LoadError(f"tensor {key!r} shape {value.shape} != expected {tuple(p.shape)}")
            p.copy_(torch.as_tensor(value, dtype=p.dtype))


def save_checkpoint(path: Path, tensors: dict[str, np.ndarray], meta: dict) -> None:
    """Write named float32 tensors with a JSON header to ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(tensors)
    header = dict(meta)
    header["tensors"] = [{"name": k, "shape": list(np.asarray(tensors[k]).shape)} for k in names]
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for k in names:
            fh.write(np.asarray(tensors[k], dtype="<f4").tobytes(order="C"))


def load_checkpoint(path: Path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    if not path.exists():
        raise LoadError(f"checkpoint not found: {path}")
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != CHECKPOINT_MAGIC:
            raise LoadError(f"{path}: not a checkpoint file")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        tensors = {}
        for entry in header.pop("tensors"):
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            payload = fh.read(count * 4)
            if len(payload) != count * 4:
                raise LoadError(f"{path}: truncated tensor {entry['name']!r}")
            tensors[entry["name"]] = np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
    return header, tensors
