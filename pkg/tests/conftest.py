import numpy as np
import pytest
import torch
from hypothesis import HealthCheck, settings

# Single-core CI box: keep example counts modest and drop deadlines, some
# properties run real DSP per example.
settings.register_profile(
    "desk",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("desk")

torch.set_num_threads(1)


def fd_gradient_errors(module, build_loss, steps=(1e-6, 1e-4), max_elements=64, seed=0):
    """Per-parameter relative error between backprop and central differences.

    The module must already be in float64. ``build_loss`` is a zero-argument
    closure returning a scalar loss; it is re-evaluated under parameter
    perturbations, so it must be deterministic. Up to ``max_elements``
    coordinates are sampled per parameter tensor.

    Central differences are taken at several step sizes and each coordinate
    keeps its best match: the small step bounds truncation error, the large
    one bounds round-off when the loss dwarfs the gradient. The error per
    tensor is max_i min_h |analytic_i - fd_i(h)| / max(max |fd|, 1e-8).
    """
    for param in module.parameters():
        if param.dtype != torch.float64:
            raise AssertionError("finite differences need float64 parameters")
    module.zero_grad()
    build_loss().backward()
    sampler = np.random.default_rng(seed)

    errors = {}
    for name, param in module.named_parameters():
        if not param.requires_grad:
            continue
        flat = param.data.view(-1)
        count = min(flat.numel(), max_elements)
        picks = sampler.choice(flat.numel(), size=count, replace=False)
        fd = np.zeros((len(steps), count))
        for j, i in enumerate(picks):
            original = flat[i].item()
            for si, h in enumerate(steps):
                flat[i] = original + h
                plus = build_loss().item()
                flat[i] = original - h
                minus = build_loss().item()
                fd[si, j] = (plus - minus) / (2.0 * h)
            flat[i] = original
        analytic = (
            np.zeros(count)
            if param.grad is None
            else param.grad.view(-1)[picks].numpy()
        )
        per_element = np.min(np.abs(analytic[None, :] - fd), axis=0)
        scale = max(float(np.max(np.abs(fd))), 1e-8)
        errors[name] = float(np.max(per_element)) / scale
    return errors


def assert_gradients_match(module, build_loss, rel_tol=1e-3, **kwargs):
    errors = fd_gradient_errors(module, build_loss, **kwargs)
    worst = max(errors, key=errors.get)
    assert errors[worst] < rel_tol, f"{worst}: relative error {errors[worst]:.3e}"
    return errors


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _seed_torch():
    torch.manual_seed(1234)
