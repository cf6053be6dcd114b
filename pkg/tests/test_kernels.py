"""Agreement between the compiled kernel extension and the numpy fallback."""

import numpy as np
import pytest

from tabppo.numcore import kernels


def _both_backends():
    backends = [kernels.get_backend("python")]
    try:
        backends.append(kernels.get_backend("compiled"))
    except ImportError:
        pass
    return backends


needs_compiled = pytest.mark.skipif(
    len(_both_backends()) < 2, reason="compiled extension not built"
)


@needs_compiled
@pytest.mark.parametrize("seed", range(20))
def test_backends_agree(seed):
    py, cy = _both_backends()
    rng = np.random.default_rng(seed)
    x = np.ascontiguousarray(rng.normal(scale=3.0, size=(7, 11)))
    grad = np.ascontiguousarray(rng.normal(size=(7, 11)))

    y_py = py.softmax_fwd(x)
    y_cy = cy.softmax_fwd(x)
    np.testing.assert_allclose(y_py, y_cy, atol=1e-14)
    np.testing.assert_allclose(
        py.softmax_bwd(y_py, grad), cy.softmax_bwd(y_cy, grad), atol=1e-14
    )

    ln_py, rstd_py = py.layernorm_fwd(x, 1e-5)
    ln_cy, rstd_cy = cy.layernorm_fwd(x, 1e-5)
    np.testing.assert_allclose(ln_py, ln_cy, atol=1e-13)
    np.testing.assert_allclose(rstd_py, rstd_cy, atol=1e-13)
    np.testing.assert_allclose(
        py.layernorm_bwd(ln_py, rstd_py, grad),
        cy.layernorm_bwd(ln_cy, rstd_cy, grad),
        atol=1e-13,
    )

    idx = rng.integers(0, 5, size=7)
    table_py = np.zeros((5, 11))
    table_cy = np.zeros((5, 11))
    py.scatter_add_rows(table_py, idx, grad)
    cy.scatter_add_rows(table_cy, idx, grad)
    np.testing.assert_allclose(table_py, table_cy, atol=1e-14)


def test_scatter_add_repeated_indices():
    backend = kernels.get_backend("python")
    table = np.zeros((2, 3))
    rows = np.ones((4, 3))
    backend.scatter_add_rows(table, np.array([1, 1, 1, 0]), rows)
    np.testing.assert_array_equal(table, [[1.0] * 3, [3.0] * 3])


def test_env_var_forces_python_backend(tmp_path):
    import subprocess
    import sys

    out = subprocess.run(
        [sys.executable, "-c",
         "from tabppo.numcore import kernels; print(kernels.BACKEND)"],
        env={"TABPPO_PURE_PYTHON": "1", "PATH": "/usr/bin:/bin"},
        capture_output=True, text=True,
    )
    assert out.stdout.strip() == "python"
