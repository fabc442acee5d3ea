import numpy as np
import pytest
import bqms as bq

inc = bq.inclusion
gn = bq.generator
sy = bq.symmetry


def _davies(seed, n=2):
    model = inc.full_matrix(n)
    gen = bq.sampling.rng(seed)
    d = bq.sampling.density(gen, model, 5.0)
    L = gn.build(model, bq.sampling.reversible_l0(gen, model, d))
    return L, d


def _reversible_spin(seed, n=4):
    model = inc.spin(n)
    gen = bq.sampling.rng(seed)
    d = bq.sampling.density(gen, model, 5.0)
    L = gn.build(model, bq.sampling.reversible_l0(gen, model, d))
    return L, d


def test_c4_is_bimodule_gns():
    """The four-point walk is symmetric for its Δ̂ to machine precision"""
    L = bq.instances.c4_generator()
    report = sy.check_bimodule_gns(L, bq.instances.c4_delta())
    assert report.passed
    assert report.residual < 1e-12


def test_c4_delta_not_realized():
    """No state realizes the four-point Δ̂, and every broken edge is named"""
    result = sy.state_realizability(bq.instances.c4_delta())
    assert not result.realizable
    assert result.rho is None
    assert result.witnesses == bq.instances.C4_WITNESSES


def test_c4_delta_solved():
    """solve_delta recovers Δ̂ from the generator alone"""
    solution = sy.solve_delta(bq.instances.c4_generator())
    assert solution.status == sy.DeltaSolution.FOUND
    expected = bq.instances.c4_delta().delta_hat.data
    assert np.allclose(solution.datum.delta_hat.data, expected, atol=1e-12)
    assert not solution.realizability.realizable


def test_solve_delta_infeasible_on_one_way_rates():
    """A rate present in only one direction admits no Δ̂"""
    model = inc.spin(3)
    t = np.array([[1.0, -1.0, 0.0], [0.0, 1.0, -1.0], [-1.0, 0.0, 1.0]])
    L = gn.from_multiplier(model, model.f2_inv(t))
    solution = sy.solve_delta(L)
    assert solution.status == sy.DeltaSolution.INFEASIBLE
    assert "vanishes" in solution.witness


def test_spin_modular_delta_realized():
    """A modular Δ̂ with rational ratios is realized by its own density"""
    model = inc.spin(4)
    d = np.diag([1.0, 2.0, 3.0, 6.0])
    delta = sy.modular_multiplier(model, d)
    result = sy.state_realizability(delta)
    assert result.realizable
    assert result.witnesses == []
    assert np.allclose(result.rho, d / 3.0)


def test_full_modular_delta_realized():
    """On a full matrix model the density is read back from Δ̂"""
    model = inc.full_matrix(2)
    d = bq.sampling.density(bq.sampling.rng(4), model)
    result = sy.state_realizability(sy.modular_multiplier(model, d))
    assert result.realizable
    assert np.allclose(result.rho, d, atol=1e-8)


def test_davies_symmetric():
    """A Davies generator is GNS symmetric at every level"""
    for seed in range(3):
        L, d = _davies(seed)
        delta = sy.modular_multiplier(L.model, d)
        assert sy.check_bimodule_gns(L, delta).passed
        one = gn.evolve(L, 1.0)
        assert sy.check_bimodule_gns(one, delta).passed
        assert sy.check_gns_state(one, d).passed
        assert sy.check_equilibrium(one, d).passed
        assert sy.check_gns_semigroup(L, delta).passed


def test_reversible_spin_is_kms():
    """A reversible walk is symmetric for the half modular datum"""
    L, d = _reversible_spin(5)
    half = sy.modular_multiplier_half(L.model, d)
    assert half.half
    assert sy.check_bimodule_kms(L, half).passed
    assert sy.check_kms_state(gn.evolve(L, 1.0), d).passed
    eq = sy.check_equilibrium(gn.evolve(L, 1.0), d)
    assert eq.passed
    assert eq.agree
    assert sy.check_bimodule_gns(L, sy.modular_multiplier(L.model, d)).passed


def test_random_generator_not_symmetric():
    """A generic generator fails the bimodule GNS identity"""
    model = inc.full_matrix(2)
    gen = bq.sampling.rng(6)
    L = gn.build(model, bq.sampling.connected_l0(gen, model), bq.sampling.self_adjoint(gen, model))
    delta = sy.modular_multiplier(model, bq.sampling.density(gen, model))
    report = sy.check_bimodule_gns(L, delta)
    assert not report.passed
    assert "gns.bimodule" in report.failed
    with pytest.raises(bq.util.NotSymmetric):
        sy.semigroup_limit(L, delta)


def test_invalid_delta():
    """Δ̂ must fix e₂, be self-adjoint and be strictly positive"""
    model = inc.spin(2)
    with pytest.raises(bq.util.InvalidDelta):
        sy.SymmetryDatum(model, 2 * np.ones((2, 2)))
    with pytest.raises(bq.util.InvalidDelta):
        sy.SymmetryDatum(model, np.array([[1.0, -1.0], [-1.0, 1.0]]))
    with pytest.raises(bq.util.InvalidDelta):
        sy.SymmetryDatum(model, np.ones((3, 3)))


def test_delta_model_mismatch():
    """A datum from another model is refused"""
    L = bq.instances.c4_generator()
    delta = sy.modular_multiplier(inc.spin(3), np.eye(3))
    with pytest.raises(bq.util.InvalidDelta):
        sy.check_bimodule_gns(L, delta)


def test_density_must_be_positive():
    """Modular data need a strictly positive density"""
    with pytest.raises(bq.util.NotPositiveDensity):
        sy.modular_multiplier(inc.spin(2), np.diag([1.0, -1.0]))
    with pytest.raises(bq.util.NotPositiveDensity):
        sy.modular_multiplier(inc.full_matrix(2), np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_semigroup_limit_closed_form():
    """The long-time limit of a Davies semigroup matches its closed form"""
    L, d = _davies(1)
    model = L.model
    report = sy.semigroup_limit(L, sy.modular_multiplier(model, d))
    assert report.applicable
    assert report.residual <= 1e-8
    assert sy.spectral_gap(L) > 0
    d0 = bq.sampling.density(bq.sampling.rng(8), model)
    assert np.allclose(report.density_limit(2 * d0), 2 * d, atol=1e-6)


def test_c4_limit_has_no_closed_form():
    """Φ₁ of the four-point walk is not bimodule GNS, but the numeric limit still fixes τ"""
    L = bq.instances.c4_generator()
    report = sy.semigroup_limit(L, bq.instances.c4_delta())
    assert not report.applicable
    assert report.residual > 1e-3
    d0 = bq.sampling.density(bq.sampling.rng(12), L.model)
    expected = L.model.tau_m(d0) * bq.gradientflow.stationary_density(L)
    assert np.allclose(report.density_limit(d0), expected, atol=1e-6)


def test_c4_quoted_contradiction():
    """The quoted contradiction closes the same cycle as the solved witness on t3, t4"""
    witnesses = sy.state_realizability(bq.instances.c4_delta()).witnesses
    assert bq.instances.quoted_cycle_witness(witnesses) == "t4 = 4/3*t3 and t4 = 2/3*t3"
    assert bq.instances.quoted_cycle_witness(witnesses[:2]) is None
