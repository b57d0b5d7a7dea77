import os
import subprocess
import sys

import numpy as np
import pytest

from prunekit._kernels import available_backends, pykernels
from prunekit.nn import ModelSpec, init_params

cykernels = pytest.importorskip(
    "prunekit._kernels.cykernels", reason="compiled kernel extension not built"
)


def random_cases(n_cases=30):
    rng = np.random.default_rng(0)
    specs = [
        ModelSpec((7, 3)),
        ModelSpec((9, 6, 4)),
        ModelSpec((8, 6, 5, 3), activation="identity"),
        ModelSpec((6, 4), bias=False),
    ]
    for i in range(n_cases):
        spec = specs[i % len(specs)]
        p = init_params(spec, i)
        x = rng.standard_normal(spec.input_dim) * 2
        y = int(rng.integers(spec.num_classes))
        yield p, x, y


class TestBackendParity:
    def test_forward_probs_agree(self):
        for p, x, y in random_cases():
            relu = p.activation == "relu"
            _, _, probs_py = pykernels.forward_one(p.weights, p.biases, relu, x)
            _, _, probs_cy = cykernels.forward_one(p.weights, p.biases, relu, x)
            assert np.allclose(probs_py, probs_cy, rtol=1e-12, atol=1e-15)

    def test_backward_gradients_agree(self):
        for p, x, y in random_cases():
            relu = p.activation == "relu"
            gws_py, gbs_py = pykernels.backward_one(p.weights, p.biases, relu, x, y)
            gws_cy, gbs_cy = cykernels.backward_one(p.weights, p.biases, relu, x, y)
            for a, b in zip(gws_py, gws_cy):
                assert np.allclose(a, b, rtol=1e-12, atol=1e-15)
            for a, b in zip(gbs_py, gbs_cy):
                assert (a is None) == (b is None)
                if a is not None:
                    assert np.allclose(a, b, rtol=1e-12, atol=1e-15)

    def test_grand_norms_agree(self):
        for p, x, y in random_cases():
            relu = p.activation == "relu"
            a = pykernels.grand_norm_one(p.weights, p.biases, relu, x, y)
            b = cykernels.grand_norm_one(p.weights, p.biases, relu, x, y)
            assert b == pytest.approx(a, rel=1e-12)

    def test_fused_norm_equals_composed_norm(self):
        # The compiled fast path fuses backward+norm; it must agree with
        # flat_l2_norm(backward_one(...)) computed from its own gradients.
        for p, x, y in random_cases():
            relu = p.activation == "relu"
            gws, gbs = cykernels.backward_one(p.weights, p.biases, relu, x, y)
            total = sum(float(np.sum(g * g)) for g in gws)
            total += sum(float(np.dot(g, g)) for g in gbs if g is not None)
            composed = float(np.sqrt(total))
            fused = cykernels.grand_norm_one(p.weights, p.biases, relu, x, y)
            assert fused == pytest.approx(composed, rel=1e-12)


class TestBackendSelection:
    def _backend_in_subprocess(self, env_value):
        env = dict(os.environ)
        if env_value is None:
            env.pop("PRUNEKIT_BACKEND", None)
        else:
            env["PRUNEKIT_BACKEND"] = env_value
        out = subprocess.run(
            [sys.executable, "-c", "import prunekit; print(prunekit.kernel_backend)"],
            capture_output=True,
            text=True,
            env=env,
        )
        return out

    def test_auto_prefers_cython(self):
        out = self._backend_in_subprocess(None)
        assert out.returncode == 0
        assert out.stdout.strip() == "cython"

    def test_forced_python(self):
        out = self._backend_in_subprocess("python")
        assert out.returncode == 0
        assert out.stdout.strip() == "python"

    def test_invalid_value_rejected(self):
        out = self._backend_in_subprocess("fortran")
        assert out.returncode != 0
        assert "PRUNEKIT_BACKEND" in out.stderr

    def test_available_backends(self):
        assert available_backends() == ["cython", "python"]
