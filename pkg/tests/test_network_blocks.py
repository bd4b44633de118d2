"""Block-level contracts: Inception convs, CBAM, window attention, HAB, OCAB, RHAG."""

import numpy as np
import pytest
import torch
import torch.nn as nn

from mrisr.errors import ConfigError
from mrisr.network.blocks import (
    CBAM,
    HAB,
    OCAB,
    RHAG,
    InceptionConv,
    OverlapAttention,
    WindowAttention,
    window_partition,
    window_reverse,
)

torch.manual_seed(0)


def tokens(x_spatial):
    """(B, C, H, W) -> (B, H*W, C)."""
    return x_spatial.flatten(2).transpose(1, 2)


class TestInceptionConv:
    def test_shape_contract(self):
        conv = InceptionConv(144, 144)
        out = conv(torch.randn(1, 144, 16, 16))
        assert out.shape == (1, 144, 16, 16)

    def test_zero_weights_zero_output(self):
        conv = InceptionConv(8, 8)
        conv.reset_zero()
        out = conv(torch.randn(2, 8, 12, 12))
        assert torch.equal(out, torch.zeros_like(out))

    def test_identity_configuration(self):
        c = 6
        conv = InceptionConv(c, c)
        with torch.no_grad():
            for p in conv.parameters():
                p.zero_()
            for i in range(c):
                conv.branch1.weight[i, i, 0, 0] = 1.0  # 1x1 branch passes input through
                conv.fuse.weight[i, i, 0, 0] = 1.0     # fusion selects the 1x1 block
        x = torch.randn(1, c, 10, 14)
        assert torch.allclose(conv(x), x, atol=0, rtol=0)

    def test_channel_mismatch_rejected(self):
        conv = InceptionConv(8, 8)
        with pytest.raises(ConfigError):
            conv(torch.randn(1, 4, 8, 8))


class TestCBAM:
    def test_gate_bound(self):
        cbam = CBAM(16, reduction=16, spatial_kernel=7)
        x = torch.randn(2, 16, 8, 8)
        out = cbam(x)
        assert out.shape == x.shape
        assert (out.abs() <= x.abs() + 1e-7).all()

    def test_saturated_gates_pass_input_through(self):
        cbam = CBAM(16, reduction=4, spatial_kernel=7).double()
        with torch.no_grad():
            for p in cbam.parameters():
                p.zero_()
            cbam.channel_gate.mlp[2].bias.fill_(30.0)
            cbam.spatial_gate.conv.bias.fill_(30.0)
        x = torch.randn(1, 16, 8, 8, dtype=torch.float64)
        assert (cbam(x) - x).abs().max() < 1e-3

    def test_channels_below_reduction_rejected(self):
        with pytest.raises(ConfigError):
            CBAM(8, reduction=16)


class TestWindowAttention:
    def test_rows_sum_to_one(self):
        attn = WindowAttention(dim=16, window_size=4, num_heads=2)
        x = torch.randn(6, 16, 16)
        _, probs = attn(x, return_attn=True)
        sums = probs.sum(dim=-1)
        assert (sums - 1.0).abs().max() < 1e-6

    def test_constant_input_constant_output(self):
        attn = WindowAttention(dim=8, window_size=4, num_heads=2)
        with torch.no_grad():
            attn.relative_position_bias_table.zero_()
        x = torch.ones(3, 16, 8) * 0.7
        out = attn(x)
        assert out.std(dim=1).max() < 1e-6  # identical across positions

    def test_shifted_and_unshifted_agree_on_constant_input(self):
        h = w = 8
        hab_plain = HAB(dim=8, window_size=4, num_heads=2, shifted=False, mlp_ratio=2.0,
                        cbam_weight=0.01, cbam_reduction=4, cbam_spatial_kernel=7)
        hab_shift = HAB(dim=8, window_size=4, num_heads=2, shifted=True, mlp_ratio=2.0,
                        cbam_weight=0.01, cbam_reduction=4, cbam_spatial_kernel=7)
        hab_shift.load_state_dict(hab_plain.state_dict())
        with torch.no_grad():
            hab_plain.attn.relative_position_bias_table.zero_()
            hab_shift.attn.relative_position_bias_table.zero_()
        x = torch.full((1, h * w, 8), 0.4)
        a = hab_plain(x, h, w)
        b = hab_shift(x, h, w)
        assert torch.allclose(a, b, atol=1e-6)

    def test_partition_reverse_roundtrip(self):
        x = torch.randn(2, 8, 12, 5)
        back = window_reverse(window_partition(x, 4), 4, 8, 12)
        assert torch.equal(back, x)


class TestOverlapAttention:
    def test_zero_overlap_equals_window_attention(self):
        dim, ws, heads, h, w = 8, 4, 2, 8, 8
        wmsa = WindowAttention(dim, ws, heads)
        ocab_attn = OverlapAttention(dim, ws, 0.0, heads)
        with torch.no_grad():
            gen = torch.Generator().manual_seed(1)
            for p in wmsa.parameters():
                p.copy_(torch.randn(p.shape, generator=gen) * 0.1)
            ocab_attn.qkv.weight.copy_(wmsa.qkv.weight)
            ocab_attn.qkv.bias.copy_(wmsa.qkv.bias)
            ocab_attn.proj.weight.copy_(wmsa.proj.weight)
            ocab_attn.proj.bias.copy_(wmsa.proj.bias)
            ocab_attn.relative_position_bias_table.copy_(wmsa.relative_position_bias_table)

        x_spatial = torch.randn(1, dim, h, w)
        x_tok = tokens(x_spatial)
        via_ocab = ocab_attn(x_tok, h, w)

        windows = window_partition(x_spatial.permute(0, 2, 3, 1), ws).view(-1, ws * ws, dim)
        attn_out = wmsa(windows)
        via_wmsa = window_reverse(attn_out.view(-1, ws, ws, dim), ws, h, w).reshape(1, h * w, dim)
        assert torch.allclose(via_ocab, via_wmsa, atol=1e-6)

    def test_rows_sum_to_one(self):
        attn = OverlapAttention(dim=16, window_size=16, overlap=0.5, num_heads=2)
        x = torch.randn(1, 32 * 32, 16)
        _, probs = attn(x, 32, 32, return_attn=True)
        assert probs.shape[-1] == 24 * 24  # enlarged key/value windows
        assert (probs.sum(dim=-1) - 1.0).abs().max() < 1e-6

    def test_shape_contract(self):
        block = OCAB(dim=16, window_size=16, overlap=0.5, num_heads=2, mlp_ratio=2.0)
        x = torch.randn(1, 32 * 32, 16)
        out = block(x, 32, 32)
        assert out.shape == (1, 32 * 32, 16)

    def test_odd_margin_rejected(self):
        with pytest.raises(ConfigError):
            OverlapAttention(dim=8, window_size=5, overlap=0.2, num_heads=2)


def zero_all(module: nn.Module):
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()


class TestResidualIdentity:
    def test_hab_zero_weights_passthrough(self):
        hab = HAB(dim=8, window_size=4, num_heads=2, shifted=False, mlp_ratio=2.0,
                  cbam_weight=0.01, cbam_reduction=4, cbam_spatial_kernel=7)
        zero_all(hab)
        x = torch.randn(2, 64, 8)
        assert torch.equal(hab(x, 8, 8), x)

    def test_hab_shifted_zero_weights_passthrough(self):
        hab = HAB(dim=8, window_size=4, num_heads=2, shifted=True, mlp_ratio=2.0,
                  cbam_weight=0.01, cbam_reduction=4, cbam_spatial_kernel=7)
        zero_all(hab)
        x = torch.randn(1, 64, 8)
        assert torch.equal(hab(x, 8, 8), x)

    def test_ocab_zero_weights_passthrough(self):
        block = OCAB(dim=8, window_size=4, overlap=0.5, num_heads=2, mlp_ratio=2.0)
        zero_all(block)
        x = torch.randn(1, 64, 8)
        assert torch.equal(block(x, 8, 8), x)

    def test_rhag_zero_weights_passthrough(self):
        group = RHAG(dim=8, depth=2, window_size=4, num_heads=2, mlp_ratio=2.0,
                     cbam_weight=0.01, cbam_reduction=4, cbam_spatial_kernel=7,
                     ocab_overlap=0.5)
        zero_all(group)
        x = torch.randn(1, 8, 8, 8)
        assert torch.equal(group(x), x)


class TestRHAG:
    def test_block_structure_default_depth(self):
        group = RHAG(dim=144, depth=6, window_size=16, num_heads=6, mlp_ratio=2.0,
                     cbam_weight=0.01, cbam_reduction=16, cbam_spatial_kernel=7,
                     ocab_overlap=0.5)
        assert len(group.blocks) == 6
        assert isinstance(group.ocab, OCAB)
        assert isinstance(group.conv, InceptionConv)
        shifts = [blk.shift for blk in group.blocks]
        assert shifts == [0, 8, 0, 8, 0, 8]  # alternating unshifted/shifted

    def test_no_dead_blocks(self):
        torch.manual_seed(3)
        group = RHAG(dim=8, depth=2, window_size=4, num_heads=2, mlp_ratio=2.0,
                     cbam_weight=0.01, cbam_reduction=4, cbam_spatial_kernel=7,
                     ocab_overlap=0.5)
        x = torch.randn(1, 8, 8, 8)
        base = group(x).detach().clone()
        with torch.no_grad():
            group.blocks[1].attn.qkv.weight[0, 0] += 1e-3
        perturbed = group(x).detach()
        assert (perturbed - base).abs().max() > 0
