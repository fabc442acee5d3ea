import numpy as np
import pytest
import bqms as bq

inc = bq.inclusion
gn = bq.generator
sy = bq.symmetry
gf = bq.gradientflow


def _davies(seed=1, n=2):
    model = inc.full_matrix(n)
    gen = bq.sampling.rng(seed)
    d = bq.sampling.density(gen, model, 5.0)
    L = gn.build(model, bq.sampling.reversible_l0(gen, model, d))
    return L, sy.modular_multiplier(model, d), d


def _reversible_spin(seed=2, n=4):
    model = inc.spin(n)
    gen = bq.sampling.rng(seed)
    d = bq.sampling.density(gen, model, 5.0)
    L = gn.build(model, bq.sampling.reversible_l0(gen, model, d))
    return L, sy.modular_multiplier(model, d), d


def test_k_operator_matches_quadrature():
    """The closed form of K_{D,μ} agrees with Gauss-Legendre quadrature"""
    model = inc.full_matrix(3)
    gen = bq.sampling.rng(10)
    d = bq.sampling.density(gen, model, 20.0)
    v = bq.sampling.ginibre(gen, 3)
    for mu in (1.0, 0.4, 2.5):
        closed = gf.kd_apply(d, mu, v)
        quad = gf.kd_apply_quadrature(d, mu, v, nodes=64)
        assert np.allclose(closed, quad, atol=1e-10)


@pytest.mark.parametrize("condition", [10.0, 1e3, 1e6])
def test_k_operator_commutator_identity(condition):
    """K_{D,μ}(log(μ⁻¹D)v − v log(μD)) = μ⁻¹Dv − μvD"""
    model = inc.full_matrix(3)
    gen = bq.sampling.rng(25)
    for mu in (1.0, 0.3, 4.0):
        d = bq.sampling.density(gen, model, condition)
        v = bq.sampling.ginibre(gen, 3)
        log_d = bq.numerics.mat_fun(d, "log")
        shift = np.log(mu) * np.eye(3)
        lhs = gf.kd_apply(d, mu, (log_d - shift) @ v - v @ (log_d + shift))
        rhs = d @ v / mu - mu * v @ d
        assert bq.util.norm2(lhs - rhs) <= 1e-8 * (1.0 + bq.util.norm2(rhs))


def test_k_operator_inverse():
    """kd_inverse undoes kd_apply"""
    model = inc.full_matrix(3)
    gen = bq.sampling.rng(11)
    d = bq.sampling.density(gen, model)
    v = bq.sampling.ginibre(gen, 3)
    assert np.allclose(gf.kd_inverse(d, 1.3, gf.kd_apply(d, 1.3, v)), v, atol=1e-10)


def test_k_operator_singular():
    """K_D needs a strictly positive D"""
    with pytest.raises(bq.util.SingularD):
        gf.KOperator(np.diag([1.0, 0.0]))


@pytest.mark.parametrize("make", [_davies, _reversible_spin], ids=["davies", "spin"])
def test_joint_spectrum(make):
    """The joint spectrum reproduces L̂₀Δ̂^{−1/2} and Δ̂ on the range of L̂₀"""
    L, delta, _ = make()
    js = gf.joint_spectrum(L, delta)
    assert len(js) > 0
    assert js.omega_residual() < 1e-8
    assert js.mu_residual() < 1e-8
    for j, k in enumerate(js.involution):
        assert js.involution[k] == j
        assert js[j].mu * js[k].mu == pytest.approx(1.0)


def test_divergence_is_adjoint_of_gradient():
    """τ(g·Div X) = ⟨∇g*, X⟩ for any field X"""
    L, delta, _ = _davies()
    model = L.model
    js = gf.joint_spectrum(L, delta)
    gen = bq.sampling.rng(12)
    g = bq.sampling.m_element(gen, model)
    field = [bq.sampling.ginibre(gen, model.n ** 2) for _ in range(len(js))]
    lhs = model.tau_m(g @ gf.divergence(js, field))
    rhs = sum(model.tau1(bq.util.dagger(a) @ b) for a, b in zip(gf.gradient(js, bq.util.dagger(g)), field))
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_gradient_kills_unit():
    """∇1 = 0"""
    L, delta, _ = _davies()
    js = gf.joint_spectrum(L, delta)
    assert all(np.allclose(x, 0.0) for x in gf.gradient(js, np.eye(2)))


@pytest.mark.parametrize("make", [_davies, _reversible_spin], ids=["davies", "spin"])
def test_balanced_derivation(make):
    """∂ = Σ_j μ_j^{1/4}∂_j^Δ, and (∂_j^Δ x)* = −∂_{j*}^Δ(x*)"""
    L, delta, _ = make()
    js = gf.joint_spectrum(L, delta)
    gen = bq.sampling.rng(26)
    x = bq.sampling.m_element(gen, L.model)
    xs = bq.util.dagger(x)
    parts = [gf.balanced_derivation(js, x, j).data for j in range(len(js))]
    assert np.allclose(gf.balanced_derivation(js, x).data, sum(parts), atol=1e-10)
    weighted = sum(js[j].mu ** 0.25 * part for j, part in enumerate(parts))
    assert np.allclose(weighted, gn.derivation(L, x).data, atol=1e-10)
    for j, k in enumerate(js.involution):
        twin = gf.balanced_derivation(js, xs, k).data
        assert np.allclose(bq.util.dagger(parts[j]), -twin, atol=1e-10)


def test_balanced_derivation_without_twist():
    """With Δ̂ = 1 every μ_j is 1 and ∂^Δ is ∂"""
    model = inc.spin(3)
    L = gn.build(model, np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 3.0], [2.0, 3.0, 0.0]]))
    js = gf.joint_spectrum(L, sy.modular_multiplier(model, np.eye(3)))
    assert all(item.mu == pytest.approx(1.0) for item in js)
    x = bq.sampling.m_element(bq.sampling.rng(27), model)
    assert np.allclose(gf.balanced_derivation(js, x).data, gn.derivation(L, x).data, atol=1e-12)


@pytest.mark.parametrize("make", [_davies, _reversible_spin], ids=["davies", "spin"])
def test_divergence_form_of_adjoint(make):
    """L*(D) = ½ Div K_D(∇log D − Y)"""
    L, delta, _ = make()
    gen = bq.sampling.rng(13)
    for _ in range(3):
        d0 = bq.sampling.density(gen, L.model)
        direct = gf.generator_adjoint(L, d0)
        div = gf.divergence_form_adjoint(L, delta, d0)
        assert np.allclose(direct, div, atol=1e-8)


def test_divergence_form_needs_symmetry():
    """A generic generator has no divergence form"""
    model = inc.full_matrix(2)
    gen = bq.sampling.rng(14)
    L = gn.build(model, bq.sampling.connected_l0(gen, model), bq.sampling.self_adjoint(gen, model))
    delta = sy.modular_multiplier(model, bq.sampling.density(gen, model))
    with pytest.raises(bq.util.NotSymmetric):
        gf.divergence_form_adjoint(L, delta, np.eye(2))


@pytest.mark.parametrize("make", [_davies, _reversible_spin], ids=["davies", "spin"])
def test_hidden_density_of_modular_datum(make):
    """For a modular Δ̂ the hidden density is the equilibrium density"""
    L, delta, d = make()
    js = gf.joint_spectrum(L, delta)
    d0 = bq.sampling.density(bq.sampling.rng(15), L.model)
    assert np.allclose(gf.hidden_density(js, d0), d, atol=1e-8)
    assert np.allclose(gf.stationary_density(L), d, atol=1e-8)


def test_hidden_density_spread():
    """A modular datum gives the same hidden density at every reference density"""
    L, delta, _ = _davies()
    js = gf.joint_spectrum(L, delta)
    gen = bq.sampling.rng(22)
    samples = [bq.sampling.density(gen, L.model) for _ in range(3)]
    assert gf.hidden_density_spread(js, samples) < 1e-8
    assert gf.hidden_density_spread(js, samples[:1]) == 0.0


def test_hidden_density_of_non_modular_datum():
    """On the four-point walk D_Δ moves with the reference density, yet
    L*(D) = ½ Div K_D(∇log D − ∇log D_Δ) holds at that density"""
    L = bq.instances.c4_generator()
    js = gf.joint_spectrum(L, bq.instances.c4_delta())
    gen = bq.sampling.rng(28)
    d0 = bq.sampling.density(gen, L.model, 5.0)
    hidden = gf.hidden_density(js, d0)
    assert L.model.tau_m(hidden).real == pytest.approx(1.0)
    g = bq.numerics.mat_fun(d0, "log") - bq.numerics.mat_fun(hidden, "log")
    summary = 0.5 * gf.divergence(js, gf.k_field(js, d0, gf.gradient(js, g)))
    assert np.allclose(summary, gf.generator_adjoint(L, d0), atol=1e-8)
    samples = [d0] + [bq.sampling.density(gen, L.model, 5.0) for _ in range(3)]
    assert gf.hidden_density_spread(js, samples) > 1e-6


def test_hidden_density_ill_conditioned():
    """A condition ceiling below the normal equations' condition number is
    refused unless regularization is asked for"""
    L = bq.instances.c4_generator()
    js = gf.joint_spectrum(L, bq.instances.c4_delta())
    d0 = bq.sampling.density(bq.sampling.rng(29), L.model, 5.0)
    strict = bq.util.Tolerances(condition=1.0)
    with pytest.raises(bq.util.IllConditioned):
        gf.hidden_density(js, d0, tol=strict)
    regularized = gf.hidden_density(js, d0, regularize=True, tol=strict)
    assert np.allclose(regularized, gf.hidden_density(js, d0), atol=1e-6)


def test_relative_entropy():
    """H(D‖D) = 0, H is positive otherwise, and support is enforced"""
    model = inc.full_matrix(3)
    gen = bq.sampling.rng(16)
    d = bq.sampling.density(gen, model)
    e = bq.sampling.density(gen, model)
    assert gf.relative_entropy(d, d) == pytest.approx(0.0, abs=1e-12)
    assert gf.relative_entropy(d, e) > 0
    with pytest.raises(bq.util.SupportViolation):
        gf.relative_entropy(np.eye(2), np.diag([2.0, 0.0]))


def test_metric_norm():
    """Ḋ must be traceless, and the zero tangent has norm zero"""
    L, delta, d = _davies()
    js = gf.joint_spectrum(L, delta)
    with pytest.raises(bq.util.NotInRange):
        gf.metric_norm(js, d, np.eye(2))
    value, x = gf.metric_norm(js, d, np.zeros((2, 2)))
    assert value == 0.0
    assert np.allclose(x, 0.0)


def test_flow_decreases_entropy():
    """Along the flow H(D_t‖D_Δ) is nonincreasing and tends to its limit"""
    L, delta, _ = _davies()
    d0 = bq.sampling.density(bq.sampling.rng(17), L.model)
    trace = gf.flow(L, delta, d0, np.linspace(0.0, 3.0, 13))
    assert len(trace) == 13
    assert np.all(np.diff(trace.entropies) <= 1e-10)
    assert np.all(trace.rates <= 1e-12)
    assert trace.limit_entropy == pytest.approx(0.0, abs=1e-9)
    assert np.all(trace.entropies >= trace.limit_entropy - 1e-10)
    assert trace.lsi_margins is None
    rows = trace.rows()
    assert len(rows) == 13 and np.isnan(rows[0][3])


def test_flow_rate_matches_central_difference():
    """For a modular datum the closed-form rate is the derivative of H"""
    L, delta, _ = _davies()
    d0 = bq.sampling.density(bq.sampling.rng(30), L.model)
    rate, difference = gf.central_slope(L, delta, d0, 1.0)
    assert rate < 0
    assert rate == pytest.approx(difference, rel=1e-4)
    trace = gf.flow(L, delta, d0, np.linspace(0.0, 2.0, 9))
    assert trace.violations == []
    assert np.allclose(trace.rates, trace.slopes, atol=1e-9)
    assert trace.entropy_increase == 0.0


def test_non_modular_flow_is_flagged():
    """With a hidden density that depends on D₀ the slope stays exact while the
    closed-form rate drifts, and the trace says so"""
    L = bq.instances.c4_generator()
    delta = bq.instances.c4_delta()
    d0 = bq.sampling.density(bq.sampling.rng(31), L.model, 5.0)
    hidden = gf.hidden_density(gf.joint_spectrum(L, delta), d0)
    step = 1e-4
    trace = gf.flow(L, delta, d0, [1.0 - step, 1.0, 1.0 + step], hidden=hidden)
    difference = (trace.entropies[2] - trace.entropies[0]) / (2 * step)
    assert trace.slopes[1] == pytest.approx(difference, rel=1e-4, abs=1e-10)
    assert trace.rate_residuals[1] > 1e-6
    assert any(v.startswith("rate identity fails") for v in trace.violations)
    start = gf.flow(L, delta, d0, [0.0], hidden=hidden)
    assert start.rates[0] == pytest.approx(start.slopes[0], abs=1e-8)


def test_flow_matches_runge_kutta():
    """Exact exponentials and RK4 give the same trajectory"""
    L, delta, _ = _davies()
    d0 = bq.sampling.density(bq.sampling.rng(18), L.model)
    grid = [0.0, 0.5, 1.0]
    trace = gf.flow(L, delta, d0, grid)
    coarse = gf.flow_rk4(L, d0, grid, substeps=50)
    for a, b in zip(trace.densities, coarse):
        assert np.allclose(a, b, atol=1e-7)


def test_flow_rejects_bad_input():
    """Flows need an increasing grid, a positive D₀ and a symmetric generator"""
    L, delta, d = _davies()
    with pytest.raises(bq.util.ShapeError):
        gf.flow(L, delta, d, [1.0, 0.5])
    with pytest.raises(bq.util.ShapeError):
        gf.flow(L, delta, d, [])
    with pytest.raises(bq.util.NotPositiveDensity):
        gf.flow(L, delta, np.diag([1.0, -1.0]), [0.0, 1.0])
    with pytest.raises(bq.util.NoBeta):
        gf.lsi_report(L, delta, d, [0.0, 1.0])
    with pytest.raises(bq.util.NoBeta):
        gf.talagrand_report(L, delta, d, beta=0.0)


def test_path_length_rules():
    """Simpson and trapezoid agree on a fine grid"""
    L, delta, _ = _davies()
    d0 = bq.sampling.density(bq.sampling.rng(19), L.model)
    trace = gf.flow(L, delta, d0, np.linspace(0.0, 2.0, 41))
    simpson = gf.path_length(trace)
    trapezoid = gf.path_length(trace, rule="trapezoid")
    assert simpson > 0
    assert simpson == pytest.approx(trapezoid, rel=1e-2)


@pytest.mark.parametrize("m", [1, 2])
def test_fermion_intertwining(m):
    """The parity twisted extension intertwines with β = cosh(βa/2)/n"""
    fm = gf.fermion_model(m, [1.0] * m, 1.0)
    assert np.allclose(fm.jump_norms, 1.0)
    fit = gf.find_intertwining(fm.L, list(fm.extensions.values()), fm.directions())
    assert fit.extension.name == "parity_twisted"
    assert fit.residual < 1e-9
    assert fit.beta == pytest.approx(fm.beta_tilde, rel=1e-8)
    assert fit.residuals["left_factor"] > 1e-2
    control = gf.intertwining_check(fm.L, fm.extensions["left_factor"], fit.beta, fm.directions())
    assert control > 1e-2


def test_fermion_model_is_symmetric():
    """The fermion generator is GNS symmetric for its Gibbs density"""
    fm = gf.fermion_model(2, [1.0, 0.5], 0.7)
    assert fm.beta_tilde is None
    assert sy.check_bimodule_gns(fm.L, fm.delta).passed
    assert np.allclose(gf.stationary_density(fm.L), fm.density, atol=1e-8)


def test_fermion_model_bad_shape():
    """Only 1 to 5 modes, with one energy per mode"""
    with pytest.raises(bq.util.ShapeError):
        gf.fermion_model(6, [1.0] * 6, 1.0)
    with pytest.raises(bq.util.ShapeError):
        gf.fermion_model(0, [], 1.0)
    with pytest.raises(bq.util.ShapeError):
        gf.fermion_model(2, [1.0], 1.0)


def test_fermion_log_sobolev():
    """With the fitted β the log-Sobolev margins and the envelope hold"""
    fm = gf.fermion_model(1, [1.0], 1.0)
    fit = gf.find_intertwining(fm.L, list(fm.extensions.values()), fm.directions())
    d0 = bq.sampling.density(bq.sampling.rng(20), fm.model)
    trace = gf.lsi_report(fm.L, fm.delta, d0, np.linspace(0.0, 4.0, 9), beta=fit.beta)
    assert trace.beta == fit.beta
    assert np.all(trace.lsi_margins >= -1e-8)
    assert np.all(trace.envelope_slacks >= -1e-8)


def test_fermion_talagrand_report():
    """The flow path is no longer than the entropy transport bound"""
    fm = gf.fermion_model(1, [1.0], 1.0)
    d0 = bq.sampling.density(bq.sampling.rng(21), fm.model)
    report = gf.talagrand_report(fm.L, fm.delta, d0, beta=fm.beta_tilde)
    excess = report.trace.entropies[0] - report.trace.limit_entropy
    assert report.bound == pytest.approx(2 * np.sqrt(excess / fm.beta_tilde))
    assert report.path_length > 0
    assert report.slack == pytest.approx(report.bound - report.path_length)
    assert report.slack >= -1e-6
    assert report.trace.talagrand_slacks is not None
