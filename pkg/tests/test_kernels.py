import numpy as np
import pytest

from bicx import _kernels as K


def _data(seed, m=37, n=53, k=3):
    rng = np.random.default_rng(seed)
    return (rng.standard_normal((m, k)), rng.standard_normal((n, k)), rng.standard_normal(n),
            rng.uniform(0.5, 4.0, k))


@pytest.mark.skipif(not K._HAVE_NUMBA, reason="numba not installed")
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_numba_matches_numpy(seed):
    y, x, logw, iv = _data(seed)
    z1, l1 = K.kernel_mean_nb(y, x, logw, iv)
    z2, l2 = K.kernel_mean_np(y, x, logw, iv)
    np.testing.assert_allclose(z1, z2, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(l1, l2, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(K.log_kernel_sum_nb(x, y, iv, logw[:37]), K.log_kernel_sum_np(x, y, iv, logw[:37]),
                               rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(K.nearest_index_nb(y, x), K.nearest_index_np(y, x))


def test_kernel_mean_against_direct_formula():
    y, x, logw, iv = _data(3, m=5, n=7)
    z, lse = K.kernel_mean(y, x, logw, iv)
    for j in range(5):
        lk = logw - 0.5 * (((y[j] - x) ** 2) * iv).sum(axis=1)
        w = np.exp(lk)
        np.testing.assert_allclose(z[j], w @ x / w.sum(), rtol=1e-12)
        np.testing.assert_allclose(lse[j], np.log(w.sum()), rtol=1e-12)


def test_log_kernel_sum_handles_minus_inf_coefficients():
    x = np.zeros((2, 1))
    y = np.array([[0.0], [1.0]])
    out = K.log_kernel_sum(x, y, np.ones(1), np.array([-np.inf, 0.0]))
    np.testing.assert_allclose(out, -0.5)


def test_nearest_index_exact_hit():
    pts = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]])
    assert K.nearest_index(pts, pts).tolist() == [0, 1, 2]
    assert K.nearest_index(np.array([[1.1, 0.8]]), pts).tolist() == [1]


def test_numpy_chunking_matches_single_block(monkeypatch):
    y, x, logw, iv = _data(4, m=50, n=40)
    ref = K.kernel_mean_np(y, x, logw, iv)
    monkeypatch.setattr(K, "_CHUNK_ELEMS", 100)
    got = K.kernel_mean_np(y, x, logw, iv)
    np.testing.assert_allclose(got[0], ref[0], rtol=1e-13)
    np.testing.assert_allclose(got[1], ref[1], rtol=1e-13)


def test_rejects_wrong_rank():
    with pytest.raises(ValueError):
        K.nearest_index(np.zeros(3), np.zeros((2, 3)))
