import numpy as np
import pytest
import torch

from ai.grad_engine import backward, finite_diff_grad, grad_check, random_instance, relative_errors
from ai.sae_core import loss
from ai.sae_params import SaeParams
from ai.sae_variant import SaeVariant
from config.app_config import AppConfig
from config.config import Config
from errors import NumericsError
from helpers import identity_params


def torch_total_loss(params, X, lam):
    """Same loss written with torch autograd; the Gated aux decoder is detached."""
    t = {name: torch.tensor(value, dtype=torch.float64, requires_grad=True) for name, value in params.tensors()}
    x = torch.tensor(X, dtype=torch.float64)
    variant = params.variant
    xc = x - t["b_dec"] if variant.centers_input else x
    pi_gate = xc @ t["W_gate"].T + t["b_gate"]
    ra = torch.relu(pi_gate)
    norms = torch.linalg.norm(t["W_dec"], dim=0)
    weights = norms if variant.norm_weighted else torch.ones_like(norms)
    if variant.is_gated:
        W_mag = t["W_mag"] if params.untied else torch.exp(t["r_mag"])[:, None] * t["W_gate"]
        h = (pi_gate > 0).to(torch.float64) * torch.relu(xc @ W_mag.T + t["b_mag"])
    else:
        h = ra
    x_hat = h @ t["W_dec"].T + t["b_dec"]
    total = ((x_hat - x) ** 2).sum() + lam * (ra * weights).sum()
    if variant.is_gated:
        if variant == SaeVariant.GATED:
            aux_hat = ra @ t["W_dec"].detach().T + t["b_dec"].detach()
        else:
            aux_hat = ra @ t["W_dec"].T + t["b_dec"]
        total = total + ((aux_hat - x) ** 2).sum()
    total = total / X.shape[0]
    total.backward()
    return float(total), {name: tensor.grad.numpy() for name, tensor in t.items()}


def test_matches_finite_differences(variant, rng):
    params, X = random_instance(variant, 6, 12, 3, rng)
    _, analytic = backward(params, X, 0.1)
    numeric = finite_diff_grad(params, X, 0.1)
    worst = relative_errors(analytic, numeric)
    assert set(worst) == set(params.names())
    assert max(worst.values()) <= Config.GRAD_CHECK_TOLERANCE


@pytest.mark.parametrize("variant", [SaeVariant.GATED, SaeVariant.SAE_RAD], ids=lambda v: v.value)
def test_untied_magnitude_matches_finite_differences(variant, rng):
    params, X = random_instance(variant, 5, 10, 3, rng, untied_magnitude=True)
    _, analytic = backward(params, X, 0.2)
    assert "W_mag" in analytic.names() and "r_mag" not in analytic.names()
    worst = relative_errors(analytic, finite_diff_grad(params, X, 0.2))
    assert max(worst.values()) <= Config.GRAD_CHECK_TOLERANCE


def test_matches_torch_autograd(variant, rng):
    params, X = random_instance(variant, 5, 9, 7, rng)
    breakdown, analytic = backward(params, X, 0.05)
    total, expected = torch_total_loss(params, X, 0.05)
    assert breakdown.total == pytest.approx(total, rel=1e-12)
    for name in params.names():
        assert np.allclose(analytic[name], expected[name], rtol=1e-9, atol=1e-12), name


def test_backward_loss_equals_forward_loss(variant, rng):
    params, X = random_instance(variant, 4, 8, 10, rng)
    breakdown, _ = backward(params, X, 0.3)
    forward = loss(params, X, 0.3)
    assert breakdown.total == pytest.approx(forward.total, rel=1e-12)


def test_gated_aux_does_not_train_decoder(rng):
    params, X = random_instance(SaeVariant.GATED, 4, 8, 5, rng)
    _, grads = backward(params, X, 0.1, terms=("aux",))
    assert not np.any(grads["W_dec"])
    assert np.any(grads["W_gate"])


def test_sae_rad_aux_trains_decoder(rng):
    params, X = random_instance(SaeVariant.SAE_RAD, 4, 8, 5, rng)
    _, grads = backward(params, X, 0.1, terms=("aux",))
    assert np.any(grads["W_dec"]) and np.any(grads["b_dec"])


def test_zero_data_gives_zero_reconstruction_gradient(variant):
    from ai.sae_params import zero_params
    params = zero_params(variant, 3, 6)
    breakdown, grads = backward(params, np.zeros((4, 3)), 0.0)
    assert breakdown.total == 0.0
    assert all(not np.any(grads[name]) for name in grads.names())


def test_gradients_independent_of_thread_count(variant, rng):
    params, X = random_instance(variant, 8, 16, 1000, rng)
    _, single = backward(params, X, 0.1)
    AppConfig.threads = 4
    _, threaded = backward(params, X, 0.1)
    for name in params.names():
        assert np.array_equal(single[name], threaded[name])


def test_non_finite_gradient_names_parameter(rng):
    params, X = random_instance(SaeVariant.SAE_RAD, 3, 6, 2, rng)
    params = params.with_tensors(r_mag=np.full(6, 800.0))
    with pytest.raises(NumericsError) as error:
        backward(params, X, 0.1)
    assert error.value.parameter is not None


def test_grad_check_report(variant):
    report = grad_check(variant, 6, 12, 3, seed=3, instances=2)
    assert report.passed
    assert report.to_dict()["variant"] == variant.value


def test_relative_error_floor():
    from ai.grad_engine import GradSet
    analytic = GradSet({"b": np.array([1e-9, 1.0])}, 1)
    numeric = GradSet({"b": np.array([0.0, 1.0 + 1e-7])}, 1)
    worst = relative_errors(analytic, numeric)
    assert worst["b"] == pytest.approx(1e-6, rel=1e-3)


def test_gradients_are_linear_in_batch(variant, rng):
    params, X = random_instance(variant, 5, 10, 300, rng)
    first, second = X[:120], X[120:]
    _, whole = backward(params, X, 0.2)
    _, left = backward(params, first, 0.2)
    _, right = backward(params, second, 0.2)
    for name in params.names():
        weighted = (120 * left[name] + 180 * right[name]) / 300
        assert np.allclose(whole[name], weighted, rtol=0, atol=1e-12), name


def test_sae_rad_gradients_by_hand():
    # x = (1, 0) with identity weights: exact reconstruction, only the sparsity term pulls on W_dec
    _, grads = backward(identity_params(SaeVariant.SAE_RAD), np.array([[1.0, 0.0]]), 1.0)
    assert np.array_equal(grads["W_dec"], [[1.0, 0.0], [0.0, 0.0]])
    assert np.array_equal(grads["b_dec"], [0.0, 0.0])


def test_finite_differences_closed_form_in_inactive_region(rng):
    params = SaeParams(variant=SaeVariant.BASELINE, W_gate=np.eye(3), b_gate=np.full(3, -50.0), W_dec=np.eye(3),
                       b_dec=np.array([0.5, -0.25, 1.0]))
    X = rng.standard_normal((4, 3))
    expected = np.mean(2.0 * (params.b_dec - X), axis=0)
    assert np.allclose(finite_diff_grad(params, X, 0.1)["b_dec"], expected, rtol=0, atol=1e-8)
    assert np.allclose(backward(params, X, 0.1)[1]["b_dec"], expected, rtol=0, atol=1e-12)


def test_finite_difference_step_sweep_has_interior_minimum():
    # per coordinate the loss moves with r_mag as (exp(r) - 2)^2, a smooth curve with non-zero third derivative
    k = 6
    params = SaeParams(variant=SaeVariant.SAE_RAD, W_gate=np.eye(k), b_gate=np.zeros(k), W_dec=0.5 * np.eye(k),
                       b_dec=np.zeros(k), r_mag=np.linspace(-0.2, 0.2, k), b_mag=np.zeros(k))
    X = np.full((1, k), 2.0)
    _, analytic = backward(params, X, 0.1)
    assert np.allclose(analytic["r_mag"], 2.0 * (np.exp(params.r_mag) - 2.0) * np.exp(params.r_mag))
    errors = [relative_errors(analytic, finite_diff_grad(params, X, 0.1, step))["r_mag"]
              for step in (1e-4, 1e-5, 1e-6, 1e-7)]
    best = min(errors[1:3])
    assert errors[0] > best and errors[3] > best
