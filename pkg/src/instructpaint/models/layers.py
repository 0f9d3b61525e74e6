"""Shared neural building blocks: spectral normalization, conditional batch
normalization, pre-activation residual blocks, and layer-normalized GRU cells."""

import math

import torch
import torch.nn as nn
import torch.nn.functional as F

SN_EPS = 1e-12


def spectral_normalize(weight_2d: torch.Tensor, u: torch.Tensor, v: torch.Tensor,
                       update: bool = True):
    """Divide a 2-D weight by its estimated top singular value.

    One power-iteration step refreshes (u, v) in place when `update` is set;
    sigma keeps the autograd path through the weight. A zero matrix leaves the
    state untouched and returns a zero matrix (sigma clamped at SN_EPS).
    """
    if update:
        with torch.no_grad():
            wu = torch.mv(weight_2d.t(), u)
            norm = wu.norm()
            if norm > SN_EPS:
                v.copy_(wu / norm)
            wv = torch.mv(weight_2d, v)
            norm = wv.norm()
            if norm > SN_EPS:
                u.copy_(wv / norm)
    # clones keep the autograd graph off the mutable state buffers
    sigma = torch.dot(u.clone(), torch.mv(weight_2d, v.clone()))
    return weight_2d / sigma.clamp(min=SN_EPS), sigma


class _SpectralNormMixin:
    """Holds (u, v) power-iteration state over the 2-D view of the weight."""

    def _init_sn_state(self, warmup: int = 5):
        mat = self._weight_matrix()
        self.register_buffer("sn_u", F.normalize(torch.randn(mat.shape[0]), dim=0))
        self.register_buffer("sn_v", F.normalize(torch.randn(mat.shape[1]), dim=0))
        with torch.no_grad():
            for _ in range(warmup):
                spectral_normalize(mat.detach(), self.sn_u, self.sn_v, update=True)

    def _weight_matrix(self) -> torch.Tensor:
        return self.weight.reshape(self.weight.shape[0], -1)

    def normalized_weight(self) -> torch.Tensor:
        mat = self._weight_matrix()
        normed, _ = spectral_normalize(mat, self.sn_u, self.sn_v, update=self.training)
        return normed.reshape(self.weight.shape)

    def estimated_sigma(self) -> float:
        mat = self._weight_matrix()
        with torch.no_grad():
            return float(torch.dot(self.sn_u, torch.mv(mat, self.sn_v)))


class SNLinear(nn.Linear, _SpectralNormMixin):
    def __init__(self, in_features, out_features, bias=True):
        super().__init__(in_features, out_features, bias)
        self._init_sn_state()

    def forward(self, x):
        return F.linear(x, self.normalized_weight(), self.bias)


class SNConv2d(nn.Conv2d, _SpectralNormMixin):
    def __init__(self, in_channels, out_channels, kernel_size, stride=1, padding=0, bias=True):
        super().__init__(in_channels, out_channels, kernel_size, stride, padding, bias=bias)
        self._init_sn_state()

    def forward(self, x):
        return self._conv_forward(x, self.normalized_weight(), self.bias)


class SNConvTranspose2d(nn.ConvTranspose2d, _SpectralNormMixin):
    def __init__(self, in_channels, out_channels, kernel_size, stride=1, padding=0, bias=True):
        super().__init__(in_channels, out_channels, kernel_size, stride, padding, bias=bias)
        self._init_sn_state()

    def _weight_matrix(self):
        # weight is (in, out, kh, kw); output channels live on dim 1
        w = self.weight
        return w.permute(1, 0, 2, 3).reshape(w.shape[1], -1)

    def normalized_weight(self):
        mat = self._weight_matrix()
        normed, _ = spectral_normalize(mat, self.sn_u, self.sn_v, update=self.training)
        w = self.weight
        return normed.reshape(w.shape[1], w.shape[0], w.shape[2], w.shape[3]).permute(1, 0, 2, 3)

    def forward(self, x):
        return F.conv_transpose2d(
            x, self.normalized_weight(), self.bias, self.stride, self.padding)


def spectral_layers(module: nn.Module):
    """All submodules carrying power-iteration state."""
    return [m for m in module.modules() if isinstance(m, _SpectralNormMixin)]


class ConditionalBatchNorm2d(nn.Module):
    """Batch norm whose affine transform is predicted from a condition vector."""

    def __init__(self, num_features, cond_dim):
        super().__init__()
        self.bn = nn.BatchNorm2d(num_features, affine=False)
        self.gain = nn.Linear(cond_dim, num_features)
        self.bias = nn.Linear(cond_dim, num_features)
        nn.init.normal_(self.gain.weight, std=0.02)
        nn.init.ones_(self.gain.bias)
        nn.init.normal_(self.bias.weight, std=0.02)
        nn.init.zeros_(self.bias.bias)
        self.gain.skip_global_init = True
        self.bias.skip_global_init = True

    def forward(self, x, c):
        out = self.bn(x)
        g = self.gain(c).unsqueeze(-1).unsqueeze(-1)
        b = self.bias(c).unsqueeze(-1).unsqueeze(-1)
        return g * out + b


class ResBlock(nn.Module):
    """Pre-activation residual block with 3x3 convs and optional 2x2 average
    pooling; the shortcut is a learned 1x1 conv when channel counts change."""

    def __init__(self, in_ch, out_ch, downsample, norm=None, spectral=False, leaky=0.0):
        super().__init__()
        conv = SNConv2d if spectral else nn.Conv2d
        self.norm1 = nn.BatchNorm2d(in_ch) if norm == "batch" else None
        self.conv1 = conv(in_ch, out_ch, 3, padding=1)
        self.norm2 = nn.BatchNorm2d(out_ch) if norm == "batch" else None
        self.conv2 = conv(out_ch, out_ch, 3, padding=1)
        self.shortcut = conv(in_ch, out_ch, 1) if in_ch != out_ch else None
        self.downsample = downsample
        self.leaky = leaky

    def _act(self, x):
        return F.leaky_relu(x, self.leaky) if self.leaky else F.relu(x)

    def forward(self, x):
        h = self.norm1(x) if self.norm1 is not None else x
        h = self.conv1(self._act(h))
        h = self.norm2(h) if self.norm2 is not None else h
        h = self.conv2(self._act(h))
        s = self.shortcut(x) if self.shortcut is not None else x
        out = h + s
        if self.downsample:
            out = F.avg_pool2d(out, 2)
        return out


class LayerNormGRUCell(nn.Module):
    """GRU cell with layer normalization on every gate pre-activation.

    h' = (1 - z) * n + z * h, with r/z/n gates each normalized separately for
    the input and recurrent contributions. Linear biases are omitted; the
    layer-norm offsets play that role.
    """

    def __init__(self, input_size, hidden_size):
        super().__init__()
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.weight_ih = nn.Parameter(torch.empty(3 * hidden_size, input_size))
        self.weight_hh = nn.Parameter(torch.empty(3 * hidden_size, hidden_size))
        self.ln_ir = nn.LayerNorm(hidden_size)
        self.ln_iz = nn.LayerNorm(hidden_size)
        self.ln_in = nn.LayerNorm(hidden_size)
        self.ln_hr = nn.LayerNorm(hidden_size)
        self.ln_hz = nn.LayerNorm(hidden_size)
        self.ln_hn = nn.LayerNorm(hidden_size)
        self.reset_parameters()

    def reset_parameters(self):
        nn.init.normal_(self.weight_ih, std=1.0 / math.sqrt(self.input_size))
        with torch.no_grad():
            for block in self.weight_hh.chunk(3, dim=0):
                nn.init.orthogonal_(block)

    def forward(self, x, h):
        gi = F.linear(x, self.weight_ih)
        gh = F.linear(h, self.weight_hh)
        i_r, i_z, i_n = gi.chunk(3, dim=-1)
        h_r, h_z, h_n = gh.chunk(3, dim=-1)
        r = torch.sigmoid(self.ln_ir(i_r) + self.ln_hr(h_r))
        z = torch.sigmoid(self.ln_iz(i_z) + self.ln_hz(h_z))
        n = torch.tanh(self.ln_in(i_n) + r * self.ln_hn(h_n))
        return (1.0 - z) * n + z * h


def fan_in_normal_(weight: torch.Tensor, fan_in: int):
    nn.init.normal_(weight, std=1.0 / math.sqrt(max(fan_in, 1)))


def initialize_parameters(model: nn.Module):
    """Fan-in-scaled Gaussian init for conv/linear weights, zero biases.

    Skips modules that set `skip_global_init` (conditional norm heads) and the
    GRU cells, which perform their own orthogonal init.
    """
    for m in model.modules():
        if getattr(m, "skip_global_init", False) or isinstance(m, LayerNormGRUCell):
            continue
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
            fan_in = m.in_channels * m.kernel_size[0] * m.kernel_size[1]
            fan_in_normal_(m.weight, fan_in)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.Linear):
            fan_in_normal_(m.weight, m.in_features)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.Embedding):
            nn.init.normal_(m.weight, std=0.1)
            if m.padding_idx is not None:
                with torch.no_grad():
                    m.weight[m.padding_idx].zero_()
    # re-align power-iteration state with the fresh weights
    for m in spectral_layers(model):
        with torch.no_grad():
            for _ in range(5):
                spectral_normalize(m._weight_matrix().detach(), m.sn_u, m.sn_v, update=True)
