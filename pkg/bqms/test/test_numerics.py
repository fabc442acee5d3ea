import numpy as np
import pytest
import bqms as bq

nu = bq.numerics


def test_exp_log_inverse():
    """log(exp(H)) recovers a Hermitian H"""
    gen = bq.sampling.rng(3)
    h = bq.sampling.hermitian(gen, 5)
    e = nu.mat_fun(h, "exp")
    assert np.allclose(nu.mat_fun(e, "log"), h, atol=1e-10)


def test_power_and_sqrt_agree():
    """("power", 1/2) and "sqrt" give the same root, which squares back"""
    gen = bq.sampling.rng(4)
    a = bq.sampling.psd(gen, 4) + 0.1 * np.eye(4)
    r = nu.mat_fun(a, "sqrt")
    assert np.allclose(r, nu.mat_fun(a, ("power", 0.5)), atol=1e-12)
    assert np.allclose(r @ r, a, atol=1e-10)


def test_log_of_singular_raises():
    """log needs a strictly positive argument"""
    with pytest.raises(bq.util.SingularForLog):
        nu.mat_fun(np.diag([1.0, 0.0]), "log")


def test_non_hermitian_raises():
    """Spectral functions refuse non-Hermitian input"""
    with pytest.raises(bq.util.NotHermitian):
        nu.mat_fun(np.array([[0.0, 1.0], [0.0, 0.0]]), "exp")


def test_psd_sqrt_of_singular():
    """A singular positive matrix has a root; a negative one does not"""
    p = np.diag([4.0, 0.0])
    assert np.allclose(nu.psd_sqrt(p), np.diag([2.0, 0.0]))
    with pytest.raises(bq.util.NotPositive):
        nu.psd_sqrt(np.diag([1.0, -1.0]))


def test_psd_power_on_support():
    """Negative powers act on the support only"""
    p = np.diag([4.0, 0.0])
    assert np.allclose(nu.psd_power(p, -0.5), np.diag([0.5, 0.0]))


def test_range_projection():
    """The range projection of a rank one matrix is the projection on its
    column"""
    v = np.array([1.0, 1.0j, 0.0]) / np.sqrt(2)
    p = nu.range_projection_matrix(np.outer(v, v.conj()) * 3.0)
    assert np.allclose(p, np.outer(v, v.conj()))


def test_expm_against_taylor():
    """scipy's exponential and the scaled Taylor series agree"""
    gen = bq.sampling.rng(5)
    a = bq.sampling.ginibre(gen, 6)
    assert np.allclose(nu.expm_general(a), nu.expm_taylor(a, 30), atol=1e-9)


def test_gauss_legendre_exact_on_polynomials():
    """An n-point rule integrates degree 2n−1 polynomials exactly"""
    value = nu.gauss_legendre(lambda s: s ** 5 - 2 * s, (0.0, 2.0), nodes=3)
    assert value == pytest.approx(64 / 6 - 4.0)


def test_log_mean():
    """Logarithmic mean, with the diagonal limit"""
    assert nu.log_mean(np.e, 1.0) == pytest.approx(np.e - 1.0)
    assert nu.log_mean(2.0, 2.0) == pytest.approx(2.0)
    assert nu.log_mean(2.0, 2.0 + 1e-10) == pytest.approx(2.0)


def test_cluster():
    """Nearly equal eigenvalues are grouped"""
    groups = nu.cluster([0.0, 1e-12, 1.0, 2.0, 2.0])
    assert groups == [[0, 1], [2], [3, 4]]


def test_null_space():
    """The kernel of a projection onto the first axis is the rest"""
    q = nu.null_space(np.diag([1.0, 0.0, 0.0]))
    assert q.shape == (3, 2)
    assert np.allclose(np.diag([1.0, 0.0, 0.0]) @ q, 0.0)
