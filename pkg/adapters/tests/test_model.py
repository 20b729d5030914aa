import pytest
import torch

from pseval_adapters.model import (
    PARAMETER_BUDGETS,
    SIZE_PRESETS,
    build_model,
    check_budget,
    parameter_count,
)


@pytest.mark.parametrize("size", sorted(SIZE_PRESETS))
def test_parameter_budget(size):
    model = build_model(size)
    check_budget(size, model)
    count = parameter_count(model)
    budget = PARAMETER_BUDGETS[size]
    assert abs(count - budget) <= 0.05 * budget


def test_unknown_size_rejected():
    with pytest.raises(ValueError):
        build_model("huge")


@pytest.mark.parametrize("size", sorted(SIZE_PRESETS))
def test_forward_preserves_shape(size):
    model = build_model(size)
    model.eval()
    for n in (16000, 16001, 4321):
        x = torch.randn(2, n) * 0.1
        with torch.no_grad():
            y = model(x)
        assert y.shape == (2, n)
        assert torch.isfinite(y).all()


def test_forward_deterministic():
    torch.manual_seed(0)
    model = build_model("tiny")
    model.eval()
    x = torch.randn(1, 8000) * 0.1
    with torch.no_grad():
        a = model(x)
        b = model(x)
    assert torch.equal(a, b)


def test_mask_keeps_output_bounded():
    # sigmoid mask over encoder channels: silence stays near silence
    model = build_model("tiny")
    model.eval()
    with torch.no_grad():
        y = model(torch.zeros(1, 8000))
    assert float(y.abs().max()) < 1e-4
