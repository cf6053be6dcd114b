import numpy as np
import pytest

from tabppo import numcore as nc


def numeric_grad(loss_fn, param: nc.Tensor, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar loss wrt one parameter."""
    grad = np.zeros_like(param.data)
    flat = param.data.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = loss_fn()
        flat[i] = orig - step
        down = loss_fn()
        flat[i] = orig
        gflat[i] = (up - down) / (2 * step)
    return grad


def assert_grad_close(analytic: np.ndarray, numeric: np.ndarray,
                      rtol: float = 1e-4, atol: float = 1e-7) -> None:
    np.testing.assert_allclose(analytic, numeric, rtol=rtol, atol=atol)


def check_param_grads(build_loss, params: dict[str, nc.Tensor],
                      step: float = 1e-5, sample: int | None = None,
                      rng: np.random.Generator | None = None) -> None:
    """Compare reverse-mode gradients of `build_loss()` against central
    finite differences for every parameter (optionally a coordinate sample)."""
    for p in params.values():
        p.zero_grad()
    loss = build_loss()
    loss.backward()

    def loss_value():
        with nc.no_grad():
            return float(build_loss().data)

    for name, p in params.items():
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        if sample is None or p.data.size <= sample:
            numeric = numeric_grad(loss_value, p, step)
            assert_grad_close(analytic, numeric)
            continue
        coords = rng.choice(p.data.size, size=sample, replace=False)
        flat = p.data.ravel()
        for i in coords:
            orig = flat[i]
            flat[i] = orig + step
            up = loss_value()
            flat[i] = orig - step
            down = loss_value()
            flat[i] = orig
            fd = (up - down) / (2 * step)
            np.testing.assert_allclose(
                analytic.ravel()[i], fd, rtol=1e-4, atol=1e-7,
                err_msg=f"parameter {name}, coordinate {i}",
            )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
