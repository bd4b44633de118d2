"""Analytic vs central-difference gradients at the block level, plus
sampled coverage of the full toy model (exhaustive coverage runs in the
acceptance suite)."""

import torch
import torch.nn.functional as F

from mrisr.network.blocks import HAB
from mrisr.network.config import toy_config
from mrisr.network.model import build_model
from mrisr.training import gradient_check


def central_diff_max_rel_err(module, loss_fn, step=1e-5, floor=1e-7):
    """Worst relative disagreement between autograd and central differences
    over every parameter entry of `module`."""
    module.zero_grad()
    loss_fn().backward()
    worst = 0.0
    with torch.no_grad():
        for p in module.parameters():
            grad = p.grad.view(-1)
            flat = p.data.view(-1)
            for i in range(flat.numel()):
                orig = float(flat[i])
                flat[i] = orig + step
                up = float(loss_fn())
                flat[i] = orig - step
                down = float(loss_fn())
                flat[i] = orig
                numeric = (up - down) / (2 * step)
                analytic = float(grad[i])
                scale = max(abs(analytic), abs(numeric))
                if scale >= floor:
                    worst = max(worst, abs(analytic - numeric) / scale)
    return worst


def test_hab_two_channel_gradients():
    torch.manual_seed(0)
    hab = HAB(dim=2, window_size=4, num_heads=1, shifted=False, mlp_ratio=2.0,
              cbam_weight=0.01, cbam_reduction=2, cbam_spatial_kernel=7).double()
    x = torch.rand(1, 64, 2, dtype=torch.float64)
    target = torch.rand(1, 64, 2, dtype=torch.float64)

    err = central_diff_max_rel_err(hab, lambda: F.mse_loss(hab(x, 8, 8), target))
    assert err <= 1e-4


def test_shifted_hab_gradients():
    torch.manual_seed(1)
    hab = HAB(dim=2, window_size=4, num_heads=1, shifted=True, mlp_ratio=2.0,
              cbam_weight=0.01, cbam_reduction=2, cbam_spatial_kernel=7).double()
    x = torch.rand(1, 64, 2, dtype=torch.float64)
    target = torch.rand(1, 64, 2, dtype=torch.float64)
    err = central_diff_max_rel_err(hab, lambda: F.mse_loss(hab(x, 8, 8), target))
    assert err <= 1e-4


def test_zero_model_zero_input_is_stationary():
    model = build_model(toy_config(), seed=0, dtype=torch.float64)
    with torch.no_grad():
        for p in model.parameters():
            p.zero_()
    x = torch.zeros(1, 1, 16, 16, dtype=torch.float64)
    target = torch.zeros(1, 1, 32, 32, dtype=torch.float64)
    loss = F.mse_loss(model.forward_tensor(x), target)
    loss.backward()
    assert float(loss.detach()) == 0.0
    for name, p in model.named_parameters():
        assert p.grad is not None, name
        assert torch.equal(p.grad, torch.zeros_like(p.grad)), name


def test_sampled_full_model_gradient_check():
    report = gradient_check(toy_config(), input_size=(16, 16), seed=0,
                            max_entries_per_param=12)
    assert report.passed, report.to_text()


def test_report_covers_manifest():
    report = gradient_check(toy_config(), input_size=(8, 8), seed=1,
                            max_entries_per_param=2)
    model = build_model(toy_config(), seed=0)
    from mrisr.network.model import parameter_manifest

    assert [e.name for e in report.entries] == [n for n, _ in parameter_manifest(model)]
    assert all(e.checked >= 1 for e in report.entries)
