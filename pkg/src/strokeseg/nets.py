#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# Copyright (c) 2024-2025 Emasoft
# Licensed under the MIT License.
# See the LICENSE file in the project root for full license text.
#

# HERE IS THE CHANGELOG FOR THIS VERSION OF THE FILE:
# - Created shared TransUNet building blocks: ConvBlock, Encoder, BottleneckTransformer, Decoder
# - Added single-encoder variant (early channel-wise fusion of DWI and ADC)
# - Added dual-encoder variant (separate encoders, bottleneck concat + 1x1 projection)
# - Dual-encoder skips concatenate the stage outputs of both encoders
# - Added named parameter groups and encoder freezing for the two-stage schedule
# - Model construction is seeded without touching the global torch RNG
# - Uses GroupNorm so frozen encoders carry no running statistics that could drift
#

"""TransUNet variants for two-modality slice-stack segmentation.

Both variants share the same encoder stage design (two conv-norm-ReLU blocks
followed by 2x max-pooling, four stages) giving an 8x8 bottleneck at 128x128
input. The bottleneck grid is flattened into 64 tokens with learned positional
embeddings, run through a pre-norm transformer encoder, folded back and decoded
with transposed convolutions and skip connections.
"""

from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import torch
import torch.nn as nn

from .config import ModelConfig, Variant
from .errors import ModelConfigError

GROUP_ORDER = ("encoder_dwi", "encoder_adc", "encoder_shared", "transformer", "decoder", "head")
ENCODER_GROUPS = ("encoder_dwi", "encoder_adc", "encoder_shared")
STAGES = 4


def _groups_for(channels: int) -> int:
    for groups in (8, 4, 2):
        if channels % groups == 0:
            return groups
    return 1


class ConvBlock(nn.Module):
    """3x3 convolution, GroupNorm, ReLU."""

    def __init__(self, in_channels: int, out_channels: int) -> None:
        super().__init__()
        self.conv = nn.Sequential(
            nn.Conv2d(in_channels, out_channels, kernel_size=3, padding=1, bias=False),
            nn.GroupNorm(_groups_for(out_channels), out_channels),
            nn.ReLU(inplace=True),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(x)


class Encoder(nn.Module):
    """Four downsampling stages; returns the bottleneck and the pre-pool stage outputs."""

    def __init__(self, in_channels: int, widths: List[int]) -> None:
        super().__init__()
        self.in_channels = in_channels
        channels = [in_channels] + list(widths)
        self.stages = nn.ModuleList(nn.Sequential(ConvBlock(channels[i], channels[i + 1]), ConvBlock(channels[i + 1], channels[i + 1])) for i in range(len(widths)))
        self.pool = nn.MaxPool2d(kernel_size=2)

    def forward(self, x: torch.Tensor) -> Tuple[torch.Tensor, List[torch.Tensor]]:
        features = []
        for stage in self.stages:
            x = stage(x)
            features.append(x)
            x = self.pool(x)
        return x, features


class BottleneckTransformer(nn.Module):
    """Tokenize a (B, C, h, w) map, apply self-attention layers, fold back to (B, out_channels, h, w)."""

    def __init__(self, in_channels: int, out_channels: int, grid: int, dim: int, heads: int, layers: int, dropout: float) -> None:
        super().__init__()
        self.grid = grid
        self.embed = nn.Conv2d(in_channels, dim, kernel_size=1)
        self.position = nn.Parameter(torch.zeros(1, grid * grid, dim))
        nn.init.trunc_normal_(self.position, std=0.02)
        layer = nn.TransformerEncoderLayer(d_model=dim, nhead=heads, dim_feedforward=4 * dim, dropout=dropout, activation="gelu", batch_first=True, norm_first=True)
        self.encoder = nn.TransformerEncoder(layer, num_layers=layers, enable_nested_tensor=False)
        self.norm = nn.LayerNorm(dim)
        self.unembed = nn.Conv2d(dim, out_channels, kernel_size=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, _, h, w = x.shape
        tokens = self.embed(x).flatten(2).transpose(1, 2) + self.position
        tokens = self.norm(self.encoder(tokens))
        return self.unembed(tokens.transpose(1, 2).reshape(b, -1, h, w))


class Decoder(nn.Module):
    """Transposed-conv upsampling with one skip connection per encoder stage."""

    def __init__(self, in_channels: int, widths: List[int], skip_channels: List[int]) -> None:
        super().__init__()
        self.ups = nn.ModuleList()
        self.blocks = nn.ModuleList()
        channels = in_channels
        for width, skip in zip(reversed(widths), reversed(skip_channels)):
            self.ups.append(nn.ConvTranspose2d(channels, width, kernel_size=2, stride=2))
            self.blocks.append(nn.Sequential(ConvBlock(width + skip, width), ConvBlock(width, width)))
            channels = width

    def forward(self, x: torch.Tensor, skips: List[torch.Tensor]) -> torch.Tensor:
        for up, block, skip in zip(self.ups, self.blocks, reversed(skips)):
            x = up(x)
            x = block(torch.cat([x, skip], dim=1))
        return x


@dataclass
class ParameterGroup:
    """A named slice of the model's parameters."""

    name: str
    parameters: List[nn.Parameter]

    @property
    def trainable(self) -> bool:
        return all(p.requires_grad for p in self.parameters)

    @property
    def count(self) -> int:
        return sum(p.numel() for p in self.parameters)


class SegModel(nn.Module):
    """Single- or dual-encoder TransUNet producing (B, 1, 128, 128) logits."""

    def __init__(self, config: ModelConfig) -> None:
        super().__init__()
        self.config = config
        widths = list(config.encoder_widths)
        s = config.slices_per_modality
        grid = config.input_hw // (2**STAGES)

        if config.is_dual:
            self.encoder_dwi = Encoder(s, widths)
            self.encoder_adc = Encoder(s, widths)
            # 1x1 projection of the concatenated bottlenecks.
            self.fusion = nn.Conv2d(2 * widths[-1], config.fusion_proj_width, kernel_size=1)
            transformer_in = config.fusion_proj_width
            skip_channels = [2 * w for w in widths]
        else:
            self.encoder_shared = Encoder(2 * s, widths)
            transformer_in = widths[-1]
            skip_channels = list(widths)

        self.transformer = BottleneckTransformer(
            in_channels=transformer_in,
            out_channels=widths[-1],
            grid=grid,
            dim=config.transformer_dim,
            heads=config.transformer_heads,
            layers=config.transformer_layers,
            dropout=config.dropout,
        )
        self.decoder = Decoder(widths[-1], widths, skip_channels)
        self.head = nn.Conv2d(widths[0], 1, kernel_size=1)

    @property
    def input_channels(self) -> int:
        """Channels consumed by the first convolution of each encoder."""
        encoder = self.encoder_dwi if self.config.is_dual else self.encoder_shared
        return int(encoder.in_channels)

    def _check_inputs(self, dwi: torch.Tensor, adc: torch.Tensor) -> None:
        s = self.config.slices_per_modality
        hw = self.config.input_hw
        for name, tensor in (("dwi", dwi), ("adc", adc)):
            if tensor.dim() != 4 or tuple(tensor.shape[1:]) != (s, hw, hw):
                raise ValueError(f"{name} input: expected shape (B, {s}, {hw}, {hw}), got {tuple(tensor.shape)}")
        if dwi.shape[0] != adc.shape[0]:
            raise ValueError(f"batch size mismatch: dwi has {dwi.shape[0]}, adc has {adc.shape[0]}")

    def encode(self, dwi: torch.Tensor, adc: torch.Tensor) -> Tuple[Dict[str, torch.Tensor], List[torch.Tensor]]:
        """Run the encoder(s).

        Returns:
            Pre-fusion bottleneck features keyed by ``dwi``/``adc`` (dual) or
            ``shared`` (single), and the per-stage skip tensors
        """
        self._check_inputs(dwi, adc)
        if self.config.is_dual:
            dwi_bottleneck, dwi_skips = self.encoder_dwi(dwi)
            adc_bottleneck, adc_skips = self.encoder_adc(adc)
            skips = [torch.cat([d, a], dim=1) for d, a in zip(dwi_skips, adc_skips)]
            return {"dwi": dwi_bottleneck, "adc": adc_bottleneck}, skips
        bottleneck, skips = self.encoder_shared(torch.cat([dwi, adc], dim=1))
        return {"shared": bottleneck}, skips

    def forward(self, dwi: torch.Tensor, adc: torch.Tensor) -> torch.Tensor:
        bottlenecks, skips = self.encode(dwi, adc)
        if self.config.is_dual:
            x = self.fusion(torch.cat([bottlenecks["dwi"], bottlenecks["adc"]], dim=1))
        else:
            x = bottlenecks["shared"]
        x = self.transformer(x)
        x = self.decoder(x, skips)
        return self.head(x)

    def parameter_groups(self) -> "OrderedDict[str, ParameterGroup]":
        """Partition every parameter into exactly one named group."""
        groups: "OrderedDict[str, ParameterGroup]" = OrderedDict()
        for name in GROUP_ORDER:
            module: Optional[nn.Module] = getattr(self, name, None)
            if module is None:
                continue
            params = list(module.parameters())
            if name == "transformer" and self.config.is_dual:
                params = list(self.fusion.parameters()) + params
            groups[name] = ParameterGroup(name, params)
        return groups

    def set_encoder_trainable(self, trainable: bool) -> None:
        """Freeze or unfreeze every encoder group."""
        for name, group in self.parameter_groups().items():
            if name in ENCODER_GROUPS:
                for param in group.parameters:
                    param.requires_grad_(trainable)

    def encoder_parameters(self) -> List[nn.Parameter]:
        return [p for name, group in self.parameter_groups().items() if name in ENCODER_GROUPS for p in group.parameters]


def build_model(config: ModelConfig) -> SegModel:
    """Validate the config and build a freshly initialised model.

    Initialisation is seeded by ``config.init_seed`` inside a forked RNG so the
    caller's global torch RNG state is left untouched.

    Raises:
        ModelConfigError: If the config violates an invariant
    """
    if not isinstance(config, ModelConfig):
        raise ModelConfigError(f"expected ModelConfig, got {type(config).__name__}")
    config.validate()
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.init_seed)
        return SegModel(config)


def parameter_groups(model: SegModel) -> "OrderedDict[str, ParameterGroup]":
    """Named parameter groups with their trainable flags."""
    return model.parameter_groups()


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


__all__ = [
    "ConvBlock",
    "Encoder",
    "BottleneckTransformer",
    "Decoder",
    "SegModel",
    "ParameterGroup",
    "build_model",
    "parameter_groups",
    "count_parameters",
    "ENCODER_GROUPS",
    "Variant",
]
