import numpy as np
import pytest
import bqms as bq

inc = bq.inclusion

MODELS = [inc.spin(2), inc.spin(3), inc.spin(5), inc.full_matrix(2), inc.full_matrix(3)]


def _b1(gen, model):
    return inc.b1(model, bq.sampling.ginibre(gen, *model.shape_of(inc.B1)))


@pytest.mark.parametrize("model", MODELS, ids=repr)
def test_fourier_four_times_is_identity(model):
    """F2∘F1 is the contragredient, an involution, so four rotations give
    back the element"""
    gen = bq.sampling.rng(11)
    for _ in range(20):
        x = _b1(gen, model)
        y = inc.fourier(model, x)
        assert np.allclose(inc.transfer(model, y).data, inc.contragredient(model, x).data)
        twice = model.f2(model.f1(x.data))
        assert np.allclose(model.f2(model.f1(twice)), x.data)
        assert np.allclose(inc.inverse_fourier(model, y).data, x.data)


@pytest.mark.parametrize("model", MODELS, ids=repr)
def test_plancherel(model):
    """The Fourier transform is unitary for the normalized traces"""
    gen = bq.sampling.rng(12)
    for _ in range(20):
        x = _b1(gen, model)
        y = inc.fourier(model, x)
        lhs = inc.trace(model, y.adjoint() @ y)
        rhs = inc.trace(model, x.adjoint() @ x)
        assert lhs == pytest.approx(rhs, rel=1e-10)


@pytest.mark.parametrize("model", MODELS, ids=repr)
def test_fourier_adjoint(model):
    """F1(x)* = F2⁻¹(x*)"""
    gen = bq.sampling.rng(13)
    x = _b1(gen, model)
    lhs = inc.fourier(model, x).adjoint().data
    rhs = model.f2_inv(x.adjoint().data)
    assert np.allclose(lhs, rhs)


@pytest.mark.parametrize("model", MODELS, ids=repr)
def test_contragredient_is_involution(model):
    """conj(conj(x)) = x on both box spaces"""
    gen = bq.sampling.rng(14)
    x = _b1(gen, model)
    z = inc.fourier(model, x)
    assert inc.contragredient(model, inc.contragredient(model, x)) == x
    assert np.allclose(inc.contragredient(model, inc.contragredient(model, z)).data, z.data)


@pytest.mark.parametrize("model", MODELS, ids=repr)
def test_identity_multiplier(model):
    """The identity map has multiplier λ^{-1/2}e₂"""
    t = np.eye(model.gns_dim)
    z = inc.multiplier(model, t).data
    assert np.allclose(z, model.e2() / np.sqrt(model.lam), atol=1e-12)


@pytest.mark.parametrize("model", MODELS, ids=repr)
def test_jones_projection_trace(model):
    """τ₂(e₂) = λ"""
    assert inc.trace(model, inc.jones_e2(model)) == pytest.approx(model.lam)


@pytest.mark.parametrize("model", MODELS, ids=repr)
def test_convolution_composes_transfers(model):
    """transfer(x * y) = transfer(y)·transfer(x)"""
    gen = bq.sampling.rng(15)
    x = bq.sampling.positive_b2(gen, model)
    y = bq.sampling.positive_b2(gen, model)
    lhs = inc.transfer(model, inc.convolve(model, x, y)).data
    rhs = inc.transfer(model, y).data @ inc.transfer(model, x).data
    assert np.allclose(lhs, rhs)


@pytest.mark.parametrize("model", MODELS, ids=repr)
def test_conditional_expectation_of_embedding(model):
    """E_M(x) = x for x ∈ M, and E_N is the trace"""
    gen = bq.sampling.rng(16)
    x = bq.sampling.m_element(gen, model)
    assert np.allclose(inc.cond_expect_M(model, inc.embed(model, x)), x)
    assert np.allclose(inc.cond_expect_N(model, x), model.tau_m(x) * np.eye(model.n))


def test_space_checks():
    """Operations refuse elements of the wrong space or model"""
    model = inc.full_matrix(2)
    z = inc.jones_e2(model)
    with pytest.raises(bq.util.WrongSpace):
        inc.fourier(model, z)
    with pytest.raises(bq.util.ModelMismatch):
        inc.inverse_fourier(inc.full_matrix(3), z)
    with pytest.raises(bq.util.ShapeError):
        inc.b2(model, np.eye(3))


def test_spin_elements_are_diagonal():
    """A spin model accepts diagonals and diagonal matrices only"""
    model = inc.spin(3)
    assert np.allclose(model.as_m([1, 2, 3]), np.diag([1, 2, 3]))
    with pytest.raises(bq.util.ShapeError):
        model.as_m(np.ones((3, 3)))


def test_model_from():
    """Models are built by kind"""
    assert inc.model_from("spin", 3) == inc.spin(3)
    assert inc.model_from("full", 2).lam == pytest.approx(0.25)
    with pytest.raises(bq.util.ShapeError):
        inc.model_from("torus", 2)
