"""
Bottleneck autoencoder: encoder E, decoder D and residual postnet P.

Tensors are laid out channels-first, ``(batch, freq_bins, frames)``, as in
``torch.nn.Conv1d``. The functional helpers (:func:`encode`, :func:`decode`,
:func:`postnet_apply`) also accept a single unbatched ``(freq_bins, T)``
spectrogram with a ``(emb_dim,)`` embedding and return unbatched results.

Example
-------
>>> import torch
>>> from singit.model import ModelConfig, init_params, encode, decode, postnet_apply
>>> model = init_params(ModelConfig(), seed=0)
>>> X, e = torch.rand(256, 100), torch.rand(256)
>>> codes = encode(model, X, e)
>>> codes.codes.shape
torch.Size([4, 64])
>>> postnet_apply(model, decode(model, codes, e)).shape
torch.Size([256, 100])
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from .errors import ShapeError, ValidationError

BN_MOMENTUM = 0.1
BN_EPS = 1e-5


@dataclass(frozen=True)
class ModelConfig:
    freq_bins: int = 256
    emb_dim: int = 256
    conv_channels: int = 512
    conv_kernel: int = 5
    enc_lstm_hidden: int = 32
    dec_lstm_hidden: int = 256
    downsample: int = 32
    postnet_layers: int = 5

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValidationError(f"{name} must be a positive integer, got {value!r}")
        if self.conv_kernel % 2 == 0:
            raise ValidationError("conv_kernel must be odd")
        if self.postnet_layers < 2:
            raise ValidationError("postnet needs at least 2 layers")

    @property
    def code_dim(self) -> int:
        return 2 * self.enc_lstm_hidden

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ContentCodes:
    """Bottleneck sequence, ``(n_codes, code_dim)`` or ``(B, n_codes, code_dim)``."""

    codes: torch.Tensor
    original_T: int

    def __len__(self):
        return self.codes.shape[-2]


def conv_block(in_ch, out_ch, kernel, activation):
    layers = [
        nn.Conv1d(in_ch, out_ch, kernel, padding=kernel // 2),
        nn.BatchNorm1d(out_ch, eps=BN_EPS, momentum=BN_MOMENTUM),
    ]
    if activation is not None:
        layers.append(activation)
    return nn.Sequential(*layers)


def _broadcast_embedding(e, T):
    return e.unsqueeze(-1).expand(-1, -1, T)


class Encoder(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        in_ch = cfg.freq_bins + cfg.emb_dim
        self.convs = nn.ModuleList(
            conv_block(in_ch if i == 0 else cfg.conv_channels, cfg.conv_channels, cfg.conv_kernel, nn.ReLU())
            for i in range(3)
        )
        self.lstm = nn.LSTM(cfg.conv_channels, cfg.enc_lstm_hidden, batch_first=True, bidirectional=True)

    def concat_input(self, x, e):
        return torch.cat([x, _broadcast_embedding(e, x.shape[-1])], dim=1)

    def forward(self, x, e):
        ds = self.cfg.downsample
        T = x.shape[-1]
        n_codes = -(-T // ds)
        pad = n_codes * ds - T
        if pad:
            x = torch.cat([x, x[..., -1:].expand(-1, -1, pad)], dim=-1)
        h = self.concat_input(x, e)
        for conv in self.convs:
            h = conv(h)
        out, _ = self.lstm(h.transpose(1, 2))
        H = self.cfg.enc_lstm_hidden
        forward_states = out[:, ds - 1 :: ds, :H]
        backward_states = out[:, ::ds, H:]
        return torch.cat([forward_states, backward_states], dim=-1)


class Decoder(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        hidden = cfg.dec_lstm_hidden
        self.lstm1 = nn.LSTM(cfg.code_dim + cfg.emb_dim, hidden, batch_first=True, bidirectional=True)
        self.convs = nn.ModuleList(
            conv_block(2 * hidden if i == 0 else cfg.conv_channels, cfg.conv_channels, cfg.conv_kernel, nn.ReLU())
            for i in range(3)
        )
        self.lstm2 = nn.LSTM(cfg.conv_channels, hidden, batch_first=True, bidirectional=True)
        self.proj = nn.Linear(2 * hidden, cfg.freq_bins)

    def forward(self, frame_codes, e):
        # frame_codes: (B, code_dim, T)
        h = torch.cat([frame_codes, _broadcast_embedding(e, frame_codes.shape[-1])], dim=1)
        h, _ = self.lstm1(h.transpose(1, 2))
        h = h.transpose(1, 2)
        for conv in self.convs:
            h = conv(h)
        h, _ = self.lstm2(h.transpose(1, 2))
        return self.proj(h).transpose(1, 2)


class Postnet(nn.Module):
    """Residual refinement ``x + R(x)``.

    R is a conv stack; every layer but the last is conv, batch norm, tanh.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        n, ch, k = cfg.postnet_layers, cfg.conv_channels, cfg.conv_kernel
        self.convs = nn.ModuleList()
        for i in range(n):
            in_ch = cfg.freq_bins if i == 0 else ch
            out_ch = cfg.freq_bins if i == n - 1 else ch
            if i < n - 1:
                self.convs.append(conv_block(in_ch, out_ch, k, nn.Tanh()))
            else:
                # no normalization on the output: batch norm would pin the
                # residual's per-bin spread to its scale parameter
                self.convs.append(nn.Conv1d(in_ch, out_ch, k, padding=k // 2))

    def residual(self, x):
        for conv in self.convs:
            x = conv(x)
        return x

    def forward(self, x):
        return x + self.residual(x)


class SingingVC(nn.Module):
    """All learnable parameters of E, D and P plus the config they were built from."""

    def __init__(self, cfg: ModelConfig = ModelConfig()):
        super().__init__()
        self.cfg = cfg
        self.encoder = Encoder(cfg)
        self.decoder = Decoder(cfg)
        self.postnet = Postnet(cfg)
        # optimizer steps taken; restored from checkpoints
        self.step = 0

    def forward(self, x, e_enc, e_dec=None):
        """Batched pass returning ``(codes, x_hat, x_tilde)``."""
        if e_dec is None:
            e_dec = e_enc
        codes = self.encoder(x, e_enc)
        x_hat = self.decoder(upsample_frames(codes, self.cfg.downsample, x.shape[-1]), e_dec)
        return codes, x_hat, self.postnet(x_hat)

    @property
    def dtype(self):
        return next(self.parameters()).dtype


def _uniform_(t: torch.Tensor, fan_in: int, gen: torch.Generator):
    bound = 1.0 / math.sqrt(fan_in)
    with torch.no_grad():
        t.copy_(torch.rand(t.shape, generator=gen, dtype=torch.float64).mul_(2 * bound).sub_(bound))


def init_params(cfg: ModelConfig = ModelConfig(), seed: int = 0, dtype=torch.float32) -> SingingVC:
    """Build a model with seeded fan-in-scaled uniform weights.

    Every weight and bias is drawn from ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``
    where ``fan_in`` is the number of inputs feeding one output unit
    (``in_channels * kernel`` for convolutions, the input or hidden size for
    the LSTM input and recurrent matrices). Batch-norm scales start at 1 and
    shifts at 0. Parameters are visited in registration order so the result
    depends only on ``cfg`` and ``seed``.
    """
    model = SingingVC(cfg)
    gen = torch.Generator().manual_seed(int(seed))
    for module in model.modules():
        if isinstance(module, nn.Conv1d):
            fan_in = module.in_channels * module.kernel_size[0]
            _uniform_(module.weight, fan_in, gen)
            _uniform_(module.bias, fan_in, gen)
        elif isinstance(module, nn.Linear):
            _uniform_(module.weight, module.in_features, gen)
            _uniform_(module.bias, module.in_features, gen)
        elif isinstance(module, nn.LSTM):
            for name, p in module.named_parameters():
                fan_in = module.input_size if name.startswith("weight_ih") else module.hidden_size
                _uniform_(p, fan_in, gen)
        elif isinstance(module, nn.BatchNorm1d):
            nn.init.ones_(module.weight)
            nn.init.zeros_(module.bias)
            module.reset_running_stats()
    return model.to(dtype)


def _as_tensor(a, dtype):
    if isinstance(a, torch.Tensor):
        return a.to(dtype)
    return torch.as_tensor(np.asarray(a), dtype=dtype)


def _prepare(model: SingingVC, X, e):
    X = _as_tensor(X, model.dtype)
    e = _as_tensor(e, model.dtype)
    batched = X.dim() == 3
    if not batched:
        X, e = X.unsqueeze(0), e.unsqueeze(0)
    cfg = model.cfg
    if X.dim() != 3 or X.shape[1] != cfg.freq_bins or X.shape[2] < 1:
        raise ShapeError(f"expected ({cfg.freq_bins}, T>=1) spectrogram, got {tuple(X.shape)}")
    if e.shape != (X.shape[0], cfg.emb_dim):
        raise ShapeError(f"expected embedding of size {cfg.emb_dim}, got {tuple(e.shape)}")
    return X, e, batched


def encoder_input(model: SingingVC, X, e) -> torch.Tensor:
    """The ``(freq_bins + emb_dim) x T`` matrix fed to the first encoder convolution."""
    X, e, batched = _prepare(model, X, e)
    h = model.encoder.concat_input(X, e)
    return h if batched else h[0]


def encode(model: SingingVC, X, e) -> ContentCodes:
    X, e, batched = _prepare(model, X, e)
    codes = model.encoder(X, e)
    return ContentCodes(codes if batched else codes[0], X.shape[-1])


def upsample_frames(codes: torch.Tensor, downsample: int, original_T: int) -> torch.Tensor:
    """Repeat each code ``downsample`` times: ``(B, N, C)`` to ``(B, C, original_T)``."""
    return codes.repeat_interleave(downsample, dim=-2)[..., :original_T, :].transpose(-1, -2)


def upsample_codes(c: ContentCodes, downsample: int) -> torch.Tensor:
    """Per-frame code matrix of shape ``(code_dim, original_T)`` (batched if ``c`` is)."""
    return upsample_frames(c.codes, downsample, c.original_T)


def decode(model: SingingVC, c: ContentCodes, e) -> torch.Tensor:
    cfg = model.cfg
    codes = _as_tensor(c.codes, model.dtype)
    e = _as_tensor(e, model.dtype)
    batched = codes.dim() == 3
    if not batched:
        codes, e = codes.unsqueeze(0), e.unsqueeze(0)
    if codes.shape[-1] != cfg.code_dim:
        raise ShapeError(f"expected codes of dimension {cfg.code_dim}, got {codes.shape[-1]}")
    if e.shape != (codes.shape[0], cfg.emb_dim):
        raise ShapeError(f"expected embedding of size {cfg.emb_dim}, got {tuple(e.shape)}")
    if len(c) != -(-c.original_T // cfg.downsample):
        raise ShapeError(f"{len(c)} codes cannot cover {c.original_T} frames")
    x_hat = model.decoder(upsample_frames(codes, cfg.downsample, c.original_T), e)
    return x_hat if batched else x_hat[0]


def postnet_apply(model: SingingVC, X_hat) -> torch.Tensor:
    X_hat = _as_tensor(X_hat, model.dtype)
    if X_hat.dim() == 2:
        return model.postnet(X_hat.unsqueeze(0))[0]
    return model.postnet(X_hat)
