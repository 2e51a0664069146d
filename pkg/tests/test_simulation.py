import numpy as np
import pytest

from singcov.models import BifBm, FBm, Kappa, KernelModel, StatInc
from singcov.simulation import (
    JITTER_LADDER,
    NotPSDError,
    PathEnsemble,
    SimGrid,
    _normals,
    cholesky_psd,
    cov_matrix,
    sample_kernel_path,
    sample_paths,
)


def test_grid():
    g = SimGrid(1.0, 4)
    assert g.times.tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert g.index(0.5) == 2
    with pytest.raises(ValueError):
        g.index(0.3)
    with pytest.raises(ValueError):
        SimGrid(1.0, 1)


def test_cov_matrix_brownian():
    C = cov_matrix(FBm(0.5), SimGrid(1.0, 2))
    assert np.allclose(C, [[0.5, 0.5], [0.5, 1.0]])
    C = cov_matrix(FBm(0.3), SimGrid(1.0, 16))
    assert np.array_equal(C, C.T)
    assert np.allclose(np.diag(C), FBm(0.3).gamma(SimGrid(1.0, 16).times[1:]))


def test_cholesky_examples():
    L, d = cholesky_psd(np.eye(3))
    assert np.array_equal(L, np.eye(3)) and d == 0.0
    L, d = cholesky_psd([[0.5, 0.5], [0.5, 1.0]])
    assert np.allclose(L, [[np.sqrt(0.5), 0], [np.sqrt(0.5), np.sqrt(0.5)]]) and d == 0.0
    L, d = cholesky_psd(np.zeros((3, 3)))
    assert not L.any() and d == 0.0


def test_cholesky_jitter_and_failure():
    C = np.ones((3, 3))  # rank one, needs jitter
    L, d = cholesky_psd(C)
    assert d > 0 and d / np.mean(np.diag(C)) in JITTER_LADDER
    with pytest.raises(NotPSDError):
        cholesky_psd(np.diag([1.0, -1.0]))


@pytest.mark.parametrize("model", [FBm(0.1), FBm(0.3), FBm(0.9), BifBm(0.6, 5 / 6), BifBm(0.3, 0.8),
                                   StatInc.log()], ids=repr)
def test_jitter_small(model):
    for n in (256, 512):
        C = cov_matrix(model, SimGrid(1.0, n))
        _, d = cholesky_psd(C)
        assert d <= 1e-8 * np.mean(np.diag(C))


def test_paths_start_at_zero_and_reproducible():
    g = SimGrid(1.0, 32)
    a = sample_paths(FBm(0.3), g, 50, 11)
    b = sample_paths(FBm(0.3), g, 50, 11)
    assert np.all(a.paths[:, 0] == 0)
    assert np.array_equal(a.paths, b.paths)
    assert not np.array_equal(a.paths, sample_paths(FBm(0.3), g, 50, 12).paths)


def test_threads_and_prefix_invariance():
    g = SimGrid(1.0, 32)
    a = sample_paths(FBm(0.3), g, 40, 5)
    b = sample_paths(FBm(0.3), g, 40, 5, threads=4)
    assert np.array_equal(a.paths, b.paths)
    # path k depends only on (seed, k); the normals agree bit for bit and the
    # paths up to the rounding of the matrix product, whose blocking depends on m
    za = _normals(5, 40, 32, False, None)
    assert np.array_equal(za[:10], _normals(5, 10, 32, False, None))
    assert np.array_equal(za[10:20], _normals(5, 10, 32, False, None, offset=10))
    c = sample_paths(FBm(0.3), g, 10, 5)
    assert np.allclose(a.paths[:10], c.paths, rtol=0, atol=1e-13)
    d = sample_paths(FBm(0.3), g, 10, 5, offset=10)
    assert np.allclose(a.paths[10:20], d.paths, rtol=0, atol=1e-13)


def test_antithetic_pairs():
    e = sample_paths(FBm(0.3), SimGrid(1.0, 16), 6, 3, antithetic=True)
    assert np.array_equal(e.paths[0::2], -e.paths[1::2])


def test_moments():
    model = FBm(0.3)
    g = SimGrid(1.0, 64)
    m = 50000
    X = sample_paths(model, g, m, 1).paths
    gam = model.gamma(g.times)
    assert np.all(np.abs(X.mean(axis=0)) <= 3 * np.sqrt(gam / m) + 1e-15)
    v = X[:, -1].var(ddof=1)
    se = np.std((X[:, -1] - X[:, -1].mean()) ** 2, ddof=1) / np.sqrt(m)
    assert abs(v - gam[-1]) <= 3 * se


def test_empirical_covariance_pairs():
    model = BifBm(0.6, 5 / 6)
    g = SimGrid(1.0, 32)
    X = sample_paths(model, g, 20000, 2).paths
    rng = np.random.default_rng(0)
    for i, j in rng.integers(1, 33, (5, 2)):
        prod = X[:, i] * X[:, j]
        se = prod.std(ddof=1) / np.sqrt(prod.size)
        assert abs(prod.mean() - model.cov(g.times[i], g.times[j])) <= 4 * se


def test_stationary_increment_variance():
    model = StatInc.log()
    g = SimGrid(1.0, 64)
    X = sample_paths(model, g, 20000, 4).paths
    for i, k in ((10, 1), (20, 4), (30, 8)):
        d2 = (X[:, i + k] - X[:, i]) ** 2
        se = d2.std(ddof=1) / np.sqrt(d2.size)
        assert abs(d2.mean() - model.Q(k * g.h)) <= 4 * se


def test_kernel_paths():
    g = SimGrid(1.0, 128)
    e = sample_kernel_path(Kappa("indicator"), g, 20000, 3)
    XT = e.paths[:, -1]
    se = np.std(XT ** 2, ddof=1) / np.sqrt(XT.size)
    assert abs(np.mean(XT ** 2) - 1.0) <= 3 * se
    assert e.noise.shape == (20000, 128)
    assert np.allclose(e.paths[:, -1], e.noise.sum(axis=1))
    p = sample_kernel_path(Kappa("power", -0.2), g, 20000, 3)
    assert np.var(p.paths[:, -1]) == pytest.approx(1 / 0.6, rel=0.05)
    one = sample_kernel_path(Kappa("tent"), g, 1, 9)
    assert np.array_equal(one.paths, sample_kernel_path(Kappa("tent"), g, 1, 9).paths)


def test_kernel_model_dispatch():
    e = sample_paths(KernelModel(Kappa("indicator")), SimGrid(1.0, 8), 4, 1)
    assert e.noise is not None


def test_csv_round_trip(tmp_path):
    e = sample_paths(FBm(0.3), SimGrid(1.0, 8), 3, 7)
    p = tmp_path / "paths.csv"
    e.to_csv(str(p))
    assert p.read_text().splitlines()[0] == ",".join(f"t_{i}" for i in range(9))
    back = PathEnsemble.from_csv(str(p))
    assert np.array_equal(back.paths, e.paths)
    assert back.seed == 7 and back.model == e.model
    meta = (tmp_path / "paths.json").read_text()
    assert '"jitter"' in meta and '"seed": 7' in meta
