import numpy as np
import pytest
import bqms as bq

inc = bq.inclusion
ch_ = bq.channel


def _transpose_mix(model, a):
    """a·transpose + (1 − a)·complete depolarization"""
    n = model.n
    t = inc.superoperator(model, lambda x: a * x.T + (1 - a) * np.trace(x) / n * np.eye(n))
    return ch_.from_superoperator(model, t)


def test_multiplier_positivity_matches_choi():
    """A full matrix channel has a positive multiplier exactly when its Choi
    matrix is positive"""
    model = inc.full_matrix(3)
    gen = bq.sampling.rng(21)
    for _ in range(20):
        ch = ch_.from_multiplier(model, bq.sampling.cp_multiplier(gen, model))
        assert ch_.classify(ch).cp
        assert bq.numerics.is_positive(ch_.choi_matrix(ch))
    # the mix is CP iff a ≤ 1/(n+1)
    for a, expected in ((0.1, True), (0.2, True), (0.3, False), (0.6, False), (1.0, False)):
        ch = _transpose_mix(model, a)
        assert ch_.classify(ch).cp == expected
        assert bq.numerics.is_positive(ch_.choi_matrix(ch)) == expected


def test_classify_reports_witness():
    """A non-CP channel comes with a negative projection"""
    model = inc.full_matrix(2)
    report = ch_.classify(_transpose_mix(model, 1.0))
    assert not report.cp
    assert report.min_eigenvalue == pytest.approx(-1.0)
    assert report.witness is not None
    assert report.unital and report.trace_preserving


def test_unital_cp_multiplier():
    """Sampled CP multipliers are unital when asked"""
    gen = bq.sampling.rng(22)
    for model in (inc.spin(4), inc.full_matrix(2)):
        report = ch_.classify(ch_.from_multiplier(model, bq.sampling.cp_multiplier(gen, model)))
        assert report.cp and report.unital


def test_apply_routes_agree():
    """The transfer matrix and the multiplier formula give the same image"""
    gen = bq.sampling.rng(23)
    for model in (inc.spin(3), inc.full_matrix(2), inc.full_matrix(3)):
        ch = ch_.from_multiplier(model, bq.sampling.cp_multiplier(gen, model))
        x = bq.sampling.m_element(gen, model)
        y = ch_.apply(ch, x)
        assert np.allclose(y, model.act(ch.multiplier.data, x))


def test_compose_and_adjoint():
    """Composition multiplies transfer matrices; the adjoint transposes them"""
    gen = bq.sampling.rng(24)
    model = inc.full_matrix(2)
    a = ch_.from_multiplier(model, bq.sampling.cp_multiplier(gen, model))
    b = ch_.from_multiplier(model, bq.sampling.cp_multiplier(gen, model))
    assert np.allclose(ch_.compose(a, b).transfer, a.transfer @ b.transfer)
    assert np.allclose(ch_.adjoint(a).transfer, a.transfer.conj().T)
    with pytest.raises(bq.util.ModelMismatch):
        ch_.compose(a, ch_.identity(inc.full_matrix(3)))


def test_identity_channel():
    """The identity channel fixes everything and has a full peripheral
    spectrum"""
    model = inc.full_matrix(2)
    ident = ch_.identity(model)
    assert np.allclose(ident.transfer, np.eye(4))
    assert len(ch_.fixed_points(ident)) == 4
    assert len(ch_.peripheral_spectrum(ident)) == 4


def test_cesaro_mean_of_projection():
    """The Cesàro mean of an idempotent channel is itself"""
    model = inc.full_matrix(2)
    dep = _transpose_mix(model, 0.0)
    assert np.allclose(ch_.cesaro_mean(dep).transfer, dep.transfer, atol=1e-9)


def test_cesaro_mean_not_power_bounded():
    """Only CP unital channels have Cesàro means"""
    model = inc.spin(2)
    with pytest.raises(bq.util.NotPowerBounded):
        ch_.cesaro_mean(ch_.from_superoperator(model, 2 * np.eye(2)))
    with pytest.raises(bq.util.NotPowerBounded, match="cp=False"):
        ch_.cesaro_mean(_transpose_mix(inc.full_matrix(2), 1.0))


def test_from_superoperator_shape():
    """A superoperator of the wrong size is not a bimodule map of the model"""
    with pytest.raises(bq.util.NotBimodule):
        ch_.from_superoperator(inc.spin(2), np.eye(4))


def test_irreducibility_certificates():
    """Complete depolarization is irreducible by its convolution support;
    the identity on ℂ² has a fixed projection"""
    dep = _transpose_mix(inc.full_matrix(2), 0.0)
    assert ch_.relative_irreducibility(dep).verdict == ch_.IrreducibilityCertificate.YES
    cert = ch_.relative_irreducibility(ch_.identity(inc.spin(2)))
    assert cert.verdict == ch_.IrreducibilityCertificate.NO
    q = cert.witness
    assert np.allclose(q @ q, q)


def test_cs0_of_complete_graph():
    """The off-diagonal support of ℂ⁴ generates everything under
    convolution"""
    model = inc.spin(4)
    off = inc.b2(model, np.ones((4, 4)) - np.eye(4))
    assert ch_.is_identity_projection(ch_.cs0(off))
    assert not ch_.is_identity_projection(ch_.cs0(inc.jones_e2(model)))


def test_choi_needs_full_model():
    """Choi matrices are only formed for full matrix models"""
    with pytest.raises(bq.util.ModelMismatch):
        ch_.choi_matrix(ch_.identity(inc.spin(2)))


def test_commutator_bound_margin_is_finite():
    """The commutator diagnostic evaluates on a CP channel"""
    gen = bq.sampling.rng(25)
    model = inc.full_matrix(2)
    ch = ch_.from_multiplier(model, bq.sampling.cp_multiplier(gen, model))
    assert np.isfinite(ch_.commutator_bound_margin(ch, bq.sampling.m_element(gen, model)))
