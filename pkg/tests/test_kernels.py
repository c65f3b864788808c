import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from ccafuse import _kernels_py, kernels

try:
    from ccafuse import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

needs_ext = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


def _boxes(rng, n):
    xy = rng.uniform(0, 50, size=(n, 2))
    wh = rng.uniform(1, 20, size=(n, 2))
    return np.hstack([xy, xy + wh])


class TestFallback:
    def test_box_mean_matches_loops(self, rng):
        img = rng.normal(size=(6, 7))
        got = _kernels_py.box_mean(img, 3)
        want = np.array([[img[i : i + 3, j : j + 3].mean() for j in range(5)] for i in range(4)])
        np.testing.assert_allclose(got, want, atol=1e-13)

    def test_iou_matrix_matches_scalar(self, rng):
        from oracles import box_iou

        a, b = _boxes(rng, 5), _boxes(rng, 4)
        m = _kernels_py.iou_matrix(a, b)
        for i in range(5):
            for j in range(4):
                assert m[i, j] == pytest.approx(box_iou(a[i], b[j]), abs=1e-14)

    def test_greedy_respects_order_and_threshold(self):
        iou = np.array([[0.9, 0.6], [0.95, 0.2], [0.4, 0.45]])
        out = _kernels_py.greedy_match(iou, np.array([1, 0, 2]), 0.5)
        np.testing.assert_array_equal(out, [1, 0, -1])

    def test_forbidden_pairs(self):
        out = _kernels_py.greedy_match(np.array([[-1.0, 0.7]]), np.array([0]), 0.5)
        np.testing.assert_array_equal(out, [1])


@needs_ext
class TestParity:
    def test_box_mean(self, rng):
        img = rng.normal(size=(33, 29))
        for win in (3, 7, 29):
            np.testing.assert_allclose(compiled.box_mean(img, win), _kernels_py.box_mean(img, win), atol=1e-12)

    def test_iou_matrix(self, rng):
        a, b = _boxes(rng, 40), _boxes(rng, 30)
        np.testing.assert_allclose(compiled.iou_matrix(a, b), _kernels_py.iou_matrix(a, b), atol=1e-15)

    def test_greedy_match(self, rng):
        for _ in range(20):
            iou = rng.uniform(size=(12, 9))
            iou[rng.uniform(size=iou.shape) < 0.2] = -1.0
            order = rng.permutation(12).astype(np.int64)
            np.testing.assert_array_equal(
                compiled.greedy_match(iou, order, 0.5), _kernels_py.greedy_match(iou, order, 0.5)
            )

    def test_compiled_is_default(self):
        assert kernels.BACKEND == "cython"


def test_environment_forces_fallback():
    code = "import json; from ccafuse import kernels; print(json.dumps(kernels.BACKEND))"
    env = {"CCAFUSE_PURE_PYTHON": "1", "PATH": "/usr/bin:/bin"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert json.loads(out.stdout) == "python"


def test_fallback_gives_same_public_results():
    code = """
import json, numpy as np
from pathlib import Path
from ccafuse import kernels
from ccafuse.depth import ssim
from ccafuse.metrics import DetBox, compute_metrics
fx = Path(%r)
pred = [DetBox.from_dict(d) for d in json.loads((fx / "golden_pred.json").read_text())]
gt = [DetBox.from_dict(d) for d in json.loads((fx / "golden_gt.json").read_text())]
r = np.random.default_rng(3)
print(json.dumps([kernels.BACKEND, compute_metrics(pred, gt).as_dict(), ssim(r.uniform(size=(20, 20)), r.uniform(size=(20, 20)))]))
""" % str(Path(__file__).parent / "fixtures")
    results = {}
    for flag in ("0", "1"):
        env = {"CCAFUSE_PURE_PYTHON": flag, "PATH": "/usr/bin:/bin"}
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        backend, metrics, s = json.loads(out.stdout)
        results[backend] = (metrics, s)
    assert "python" in results
    if compiled is not None:
        assert results["cython"][0] == results["python"][0]
        assert results["cython"][1] == pytest.approx(results["python"][1], abs=1e-12)
