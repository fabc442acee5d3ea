"""Relative entropy as a gradient flow for bimodule GNS symmetric
semigroups.

A vector field is a list with one element of M₁ per term of the joint
spectrum of `(L̂₀, Δ̂)`. With `P_j = F⁻¹(p_j)`:

  * ∇x = (λ^{−1/4} ω_j^{1/2} [x, P_j])_j
  * Div X = λ^{−1/4} Σ_j ω_j^{1/2} E_M([X_j, P_j*])
  * K_D X = (K_{D, μ_j^{1/2}} X_j)_j, with D embedded in M₁

so that `L*(D) = ½ Div K_D(∇log D − Y)` with `Y_j = λ^{−1/4} ω_j^{1/2} (log μ_j) P_j`,
and the dual trajectory `D_t = e^{−tL*}D₀` satisfies `Ḋ = −L*(D)`.
"""

import logging
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid, simpson, trapezoid

from .generator import Lindbladian, apply_generator, build
from .inclusion import B2, BoxElement, InclusionModel, M1, b2, full_matrix
from .numerics import cluster, expm_general, gauss_legendre, herm_eig, log_mean, mat_fun, null_space, psd_power
from .sampling import kraus_multiplier
from .symmetry import SymmetryDatum, check_bimodule_gns, modular_multiplier
from .types import TField, TGrid
from .util import (IllConditioned, NoBeta, NoCandidate, NotCommuting, NotErgodic, NotInRange,
                   NotPositiveDensity, NotSymmetric, RelationViolation, ShapeError, SingularD,
                   SupportViolation, Tolerances, dagger, norm2, tolerances, within)

log = logging.getLogger(__name__)

# generic weights for separating the joint eigenspaces
_MIX = (1.0, 0.7548776662466927, 0.5698402909980532)


# -- joint spectrum


class SpectralTerm:
    """Members:
        p (BoxElement): a projection of B₂ in R(L̂₀)
        omega (float): L̂₀Δ̂^{−1/2} on p
        mu (float): Δ̂ on p"""

    def __init__(self, p: BoxElement, omega: float, mu: float) -> None:
        self.p = p
        self.omega = omega
        self.mu = mu

    def __repr__(self) -> str:
        return "<SpectralTerm: omega=%.6g, mu=%.6g>" % (self.omega, self.mu)


class JointSpectrum:
    """Simultaneous spectral data of L̂₀, Δ̂R(L̂₀) and conj(Δ̂)R(L̂₀).

    Members:
        L (Lindbladian)
        delta (SymmetryDatum)
        items (List[SpectralTerm])
        involution (List[int]): `j*`, with conj(p_j) = p_{j*}
        projections (List[np.ndarray]): `F⁻¹(p_j)` in M₁"""

    def __init__(self, L: Lindbladian, delta: SymmetryDatum, items: List[SpectralTerm],
                 involution: List[int]) -> None:
        self.L = L
        self.model = L.model
        self.delta = delta
        self.items = items
        self.involution = involution
        self.projections = [L.model.f1_inv(item.p.data) for item in items]

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, j: int) -> SpectralTerm:
        return self.items[j]

    def omega_residual(self) -> float:
        """‖L̂₀Δ̂^{−1/2} − Σ ω_j p_j‖."""
        model = self.model
        a = model.product_raw(B2, self.L.l0.data, model.b2_power(self.delta.delta_hat.data, -0.5))
        return norm2(a - sum((t.omega * t.p.data for t in self.items), np.zeros_like(a)))

    def mu_residual(self) -> float:
        """‖Δ̂R(L̂₀) − Σ μ_j p_j‖."""
        model = self.model
        r = model.b2_range(self.L.l0.data)
        dr = model.product_raw(B2, self.delta.delta_hat.data, r)
        return norm2(dr - sum((t.mu * t.p.data for t in self.items), np.zeros_like(dr)))

    def __repr__(self) -> str:
        return "<JointSpectrum: %d terms on %r>" % (len(self.items), self.model)


def _involution(model: InclusionModel, items: List[SpectralTerm], tol: Tolerances) -> List[int]:
    involution = []
    for j, item in enumerate(items):
        target = model.c2(item.p.data)
        match = [k for k, other in enumerate(items)
                 if norm2(other.p.data - target) <= np.sqrt(tol.equality) * (1.0 + norm2(target))]
        if len(match) != 1:
            raise NotCommuting("contragredient of term %d is not a term of the joint spectrum" % j)
        involution.append(match[0])
    for j, k in enumerate(involution):
        a, b = items[j], items[k]
        scale = 1.0 + abs(a.omega)
        if abs(a.omega - b.omega) > np.sqrt(tol.equality) * scale:
            raise NotCommuting("ω is not invariant under the involution (%d ↔ %d)" % (j, k))
        if abs(a.mu * b.mu - 1.0) > np.sqrt(tol.equality) * (1.0 + a.mu * b.mu):
            raise NotCommuting("μ_j μ_j* ≠ 1 for (%d ↔ %d)" % (j, k))
    return involution


def _joint_spin(L: Lindbladian, delta: SymmetryDatum, tol: Tolerances) -> List[SpectralTerm]:
    model = L.model
    l0 = np.real(L.l0.data)
    dh = np.real(delta.delta_hat.data)
    floor = tol.positivity * (1.0 + norm2(l0))
    items = []
    for a, b in zip(*np.nonzero(l0 > floor)):
        p = np.zeros_like(l0, dtype=complex)
        p[a, b] = 1.0
        mu = float(dh[a, b])
        items.append(SpectralTerm(b2(model, p), float(l0[a, b]) / np.sqrt(mu), mu))
    return items


def _joint_full(L: Lindbladian, delta: SymmetryDatum, tol: Tolerances) -> List[SpectralTerm]:
    model = L.model
    l0 = L.l0.data
    dh = delta.delta_hat.data
    cd = delta.conj()
    scale = norm2(l0) * (1.0 + norm2(dh)) * (1.0 + norm2(cd))
    for name, other in (("Δ̂", dh), ("conj Δ̂", cd)):
        residual = norm2(l0 @ other - other @ l0)
        if residual > np.sqrt(tol.equality) * (1.0 + scale):
            raise NotCommuting("L̂₀ does not commute with %s (residual %.3g)" % (name, residual))

    eig = herm_eig(l0, tol)
    keep = eig.values > tol.positivity * (1.0 + norm2(l0))
    q = eig.vectors[:, keep]
    if q.shape[1] == 0:
        return []
    a = l0 @ psd_power(dh, -0.5, tol)
    a = (a + dagger(a)) / 2
    mix = _MIX[0] * a + _MIX[1] * (dh + dagger(dh)) / 2 + _MIX[2] * (cd + dagger(cd)) / 2
    h = dagger(q) @ mix @ q
    values, vectors = np.linalg.eigh((h + dagger(h)) / 2)

    items = []
    for group in cluster(values, tol):
        w = q @ vectors[:, group]
        p = w @ dagger(w)
        rank = len(group)
        omega = float(np.real(np.trace(a @ p))) / rank
        mu = float(np.real(np.trace(dh @ p))) / rank
        joint = max(norm2(a @ p - omega * p), norm2(dh @ p - mu * p))
        if joint > np.sqrt(tol.equality) * (1.0 + scale):
            raise NotCommuting("eigenspace of the generic combination is not a joint eigenspace")
        items.append(SpectralTerm(b2(model, p), omega, mu))
    return items


def joint_spectrum(L: Lindbladian, delta: SymmetryDatum, tol: Optional[Tolerances] = None) -> JointSpectrum:
    """Raises:
        NotCommuting: the data do not generate a commutative algebra, or the
            involution does not preserve ω and invert μ"""
    tol = tolerances(tol)
    if L.model.kind == "spin":
        items = _joint_spin(L, delta, tol)
    else:
        items = _joint_full(L, delta, tol)
    return JointSpectrum(L, delta, items, _involution(L.model, items, tol))


# -- derivations, gradient and divergence


def _embedded(model: InclusionModel, x) -> np.ndarray:
    if isinstance(x, BoxElement):
        if x.space not in (M1, "B1"):
            raise ShapeError("expected an element of M or M₁")
        return x.data
    return model.embed_raw(x)


def balanced_derivation(js: JointSpectrum, x, j: Optional[int] = None) -> BoxElement:
    """∂^Δx = [x, F⁻¹(L̂₀^{1/2}Δ̂^{−1/4})], or its j-th component
    `ω_j^{1/2}[x, P_j]` (so that ∂_j = μ_j^{1/4}∂^Δ_j)."""
    model = js.model
    xt = _embedded(model, x)
    if j is not None:
        p = js.projections[j]
        return BoxElement(model, M1, np.sqrt(js[j].omega) * (xt @ p - p @ xt))
    total = np.zeros_like(xt)
    for item, p in zip(js.items, js.projections):
        total += np.sqrt(item.omega) * (xt @ p - p @ xt)
    return BoxElement(model, M1, total)


def gradient(js: JointSpectrum, x) -> TField:
    model = js.model
    xt = model.embed_raw(model.as_m(x))
    c = model.lam ** -0.25
    return [c * np.sqrt(item.omega) * (xt @ p - p @ xt) for item, p in zip(js.items, js.projections)]


def divergence(js: JointSpectrum, field: TField) -> np.ndarray:
    """The τ-adjoint of ∇: `τ(g·Div X) = ⟨∇g*, X⟩`."""
    model = js.model
    c = model.lam ** -0.25
    total = np.zeros((model.n, model.n), dtype=complex)
    for item, p, x in zip(js.items, js.projections, field):
        ps = dagger(p)
        total += c * np.sqrt(item.omega) * model.cond_expect_m_raw(x @ ps - ps @ x)
    return total


def log_ratio_field(js: JointSpectrum) -> TField:
    """Y_j = λ^{−1/4} ω_j^{1/2} (log μ_j) P_j."""
    c = js.model.lam ** -0.25
    return [c * np.sqrt(item.omega) * np.log(item.mu) * p for item, p in zip(js.items, js.projections)]


# -- K operators


class KOperator:
    """`K_{D,μ}(v) = ∫₀¹ μ^{1−2s} D^s v D^{1−s} ds` for a fixed D, evaluated in
    the eigenbasis of D.

    Raises:
        SingularD: D is not strictly positive"""

    def __init__(self, d, tol: Optional[Tolerances] = None) -> None:
        tol = tolerances(tol)
        d = np.asarray(d, dtype=complex)
        try:
            eig = herm_eig(d, tol)
        except Exception as e:
            raise SingularD("D is not Hermitian: %s" % e)
        if eig.values[0] <= tol.positivity * (1.0 + float(np.max(np.abs(eig.values)))):
            raise SingularD("D is not strictly positive (eigenvalue %.3g)" % eig.values[0])
        self.values = eig.values
        self.vectors = eig.vectors

    def _weights(self, mu: float) -> np.ndarray:
        return log_mean(self.values[:, None] / mu, mu * self.values[None, :])

    def _conjugate(self, v: np.ndarray, weights: np.ndarray) -> np.ndarray:
        u = self.vectors
        return u @ ((dagger(u) @ v @ u) * weights) @ dagger(u)

    def apply(self, mu: float, v: np.ndarray) -> np.ndarray:
        return self._conjugate(v, self._weights(mu))

    def inverse(self, mu: float, v: np.ndarray) -> np.ndarray:
        return self._conjugate(v, 1.0 / self._weights(mu))

    def power(self, s: float) -> np.ndarray:
        return (self.vectors * self.values ** s) @ dagger(self.vectors)


def kd_apply(d, mu: float, v, tol: Optional[Tolerances] = None) -> np.ndarray:
    return KOperator(d, tol).apply(mu, np.asarray(v, dtype=complex))


def kd_inverse(d, mu: float, v, tol: Optional[Tolerances] = None) -> np.ndarray:
    return KOperator(d, tol).inverse(mu, np.asarray(v, dtype=complex))


def kd_apply_quadrature(d, mu: float, v, nodes: int = 64, tol: Optional[Tolerances] = None) -> np.ndarray:
    """K_{D,μ}(v) by Gauss-Legendre quadrature of the defining integral."""
    k = KOperator(d, tol)
    v = np.asarray(v, dtype=complex)
    return gauss_legendre(lambda s: mu ** (1 - 2 * s) * k.power(s) @ v @ k.power(1 - s),
                          (0.0, 1.0), nodes)


def _k_field(js: JointSpectrum, k: KOperator, field: TField) -> TField:
    return [k.apply(np.sqrt(item.mu), x) for item, x in zip(js.items, field)]


def k_field(js: JointSpectrum, d, field: TField, tol: Optional[Tolerances] = None) -> TField:
    model = js.model
    return _k_field(js, KOperator(model.embed_raw(model.as_m(d)), tol), field)


def field_inner(js: JointSpectrum, d, x: TField, y: TField, tol: Optional[Tolerances] = None) -> complex:
    """⟨X, Y⟩_{D,Δ̂} = Σ_j τ₁((K_{D,j} Y_j)* X_j)."""
    model = js.model
    ky = k_field(js, d, y, tol)
    return sum((model.tau1(dagger(a) @ b) for a, b in zip(ky, x)), 0j)


# -- adjoints and hidden densities


def generator_adjoint(L: Lindbladian, d) -> np.ndarray:
    """L*(D), the τ-dual of L."""
    model = L.model
    return model.unvec(dagger(L.transfer) @ model.vec(model.as_m(d)))


def divergence_form_adjoint(L: Lindbladian, delta: SymmetryDatum, d,
                            js: Optional[JointSpectrum] = None,
                            tol: Optional[Tolerances] = None) -> np.ndarray:
    """L*(D) as `½ Div K_D(∇log D − Y)`.

    Raises:
        NotSymmetric: L is not bimodule GNS symmetric for `delta`"""
    tol = tolerances(tol)
    if js is None:
        if not check_bimodule_gns(L, delta, tol).passed:
            raise NotSymmetric("divergence form needs a bimodule GNS symmetric generator")
        js = joint_spectrum(L, delta, tol)
    model = js.model
    d = model.as_m(d)
    grad = gradient(js, mat_fun(d, "log", tol))
    field = [g - y for g, y in zip(grad, log_ratio_field(js))]
    return 0.5 * divergence(js, k_field(js, d, field, tol))


def _traceless_basis(model: InclusionModel, tol: Tolerances) -> List[np.ndarray]:
    q = null_space(model.vec1()[None, :].conj(), tol)
    return [model.unvec(q[:, i]) for i in range(q.shape[1])]


def hidden_log_density(js: JointSpectrum, d, regularize: bool = False,
                       tol: Optional[Tolerances] = None) -> np.ndarray:
    """The self-adjoint, τ-centered X_Δ whose gradient is the ⟨·,·⟩_{D,Δ̂}
    projection of Y onto the range of ∇.

    Raises:
        IllConditioned: the normal equations have condition number above
            `tol.condition` and `regularize` is off"""
    tol = tolerances(tol)
    model = js.model
    d = model.as_m(d)
    k = KOperator(model.embed_raw(d), tol)
    basis = _traceless_basis(model, tol)
    grads = [gradient(js, e) for e in basis]
    kgrads = [_k_field(js, k, g) for g in grads]
    ky = _k_field(js, k, log_ratio_field(js))

    size = len(basis)
    gram = np.zeros((size, size), dtype=complex)
    rhs = np.zeros(size, dtype=complex)
    for a in range(size):
        for b in range(size):
            gram[a, b] = sum((model.tau1(dagger(x) @ y) for x, y in zip(grads[a], kgrads[b])), 0j)
        rhs[a] = sum((model.tau1(dagger(x) @ y) for x, y in zip(grads[a], ky)), 0j)

    if size == 0:
        return np.zeros((model.n, model.n), dtype=complex)
    condition = np.linalg.cond(gram)
    if condition > tol.condition:
        if not regularize:
            raise IllConditioned("hidden density normal equations have condition %.3g" % condition)
        log.warning("regularizing hidden density normal equations (condition %.3g)", condition)
        gram = gram + tol.equality * norm2(gram) * np.eye(size)
    coeffs = np.linalg.solve(gram, rhs)
    x = sum((c * e for c, e in zip(coeffs, basis)), np.zeros((model.n, model.n), dtype=complex))
    x = (x + dagger(x)) / 2
    return x - model.tau_m(x) * np.eye(model.n)


def hidden_density(js: JointSpectrum, d, regularize: bool = False,
                   tol: Optional[Tolerances] = None) -> np.ndarray:
    """D_Δ = exp(X_Δ), τ-normalized."""
    model = js.model
    e = mat_fun(hidden_log_density(js, d, regularize, tol), "exp", tol)
    return e / model.tau_m(e).real


def hidden_density_spread(js: JointSpectrum, densities: Sequence, regularize: bool = False,
                          tol: Optional[Tolerances] = None) -> float:
    """Largest distance between the hidden densities computed at each of
    `densities` and at the first. Zero for a modular Δ̂."""
    densities = [hidden_density(js, d, regularize, tol) for d in densities]
    return max((norm2(d - densities[0]) for d in densities[1:]), default=0.0)


# -- entropy


def relative_entropy(rho, sigma, tol: Optional[Tolerances] = None) -> float:
    """H(ρ‖σ) = τ(ρ log ρ − ρ log σ) with the normalized trace.

    Raises:
        SupportViolation: ker σ ⊄ ker ρ"""
    tol = tolerances(tol)
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    n = rho.shape[0]
    r = herm_eig(rho, tol)
    s = herm_eig(sigma, tol)
    cutoff = tol.log_cutoff * (1.0 + float(np.max(np.abs(s.values))))
    support = s.values > cutoff
    kernel = s.vectors[:, ~support]
    if kernel.shape[1]:
        leak = norm2(dagger(kernel) @ rho @ kernel)
        if leak > np.sqrt(tol.equality) * (1.0 + norm2(rho)):
            raise SupportViolation("ρ is not supported in the support of σ (leak %.3g)" % leak)
    rv = np.clip(r.values, 0.0, None)
    first = float(np.sum(rv * np.log(np.where(rv > 0, rv, 1.0))))
    logs = np.zeros_like(s.values)
    logs[support] = np.log(s.values[support])
    log_sigma = (s.vectors * logs) @ dagger(s.vectors)
    second = float(np.real(np.trace(rho @ log_sigma)))
    return (first - second) / n


def stationary_density(L: Lindbladian, tol: Optional[Tolerances] = None) -> np.ndarray:
    """The unique density with L*(D) = 0 and τ(D) = 1.

    Raises:
        NotErgodic"""
    tol = tolerances(tol)
    model = L.model
    kernel = null_space(dagger(L.transfer), tol)
    if kernel.shape[1] != 1:
        raise NotErgodic("L* has a %d-dimensional kernel" % kernel.shape[1])
    d = model.unvec(kernel[:, 0])
    d = d / model.tau_m(d)
    return (d + dagger(d)) / 2


# -- flows


class FlowTrace:
    """The dual trajectory `D_t = e^{−tL*}D₀` sampled on a grid.

    Members:
        times (np.ndarray)
        densities (List[np.ndarray])
        entropies (np.ndarray): H(D_t‖D_Δ)
        metric_norms (np.ndarray): ‖Ḋ_t‖ in the metric g_L
        rates (np.ndarray): −½‖∇(log D_t − log D_Δ)‖²_{D_t,Δ̂}
        slopes (np.ndarray): dH/dt = −τ(L*(D_t)(log D_t − log D_Δ)), exact
        rate_residuals (np.ndarray): |rates − slopes|; zero when D_Δ does
            not move with D_t
        violations (List[str]): entropy increases and rate identity failures
        hidden (np.ndarray): D_Δ
        limit_entropy (float): H(lim D_t‖D_Δ)
        lsi_margins, envelope_slacks, talagrand_slacks (Optional[np.ndarray]):
            filled when an intertwining constant is known
        beta (Optional[float])"""

    def __init__(self, times, densities, entropies, metric_norms, rates, hidden, limit_entropy,
                 slopes=None) -> None:
        self.times = np.asarray(times, dtype=float)
        self.densities = densities
        self.entropies = np.asarray(entropies, dtype=float)
        self.metric_norms = np.asarray(metric_norms, dtype=float)
        self.rates = np.asarray(rates, dtype=float)
        self.slopes = self.rates if slopes is None else np.asarray(slopes, dtype=float)
        self.rate_residuals = np.abs(self.rates - self.slopes)
        self.violations = []  # type: List[str]
        self.hidden = hidden
        self.limit_entropy = limit_entropy
        self.lsi_margins = None  # type: Optional[np.ndarray]
        self.envelope_slacks = None  # type: Optional[np.ndarray]
        self.talagrand_slacks = None  # type: Optional[np.ndarray]
        self.beta = None  # type: Optional[float]

    def __len__(self) -> int:
        return len(self.times)

    @property
    def entropy_increase(self) -> float:
        """Largest increase of H between consecutive samples, 0 if none."""
        return float(np.max(np.diff(self.entropies), initial=0.0))

    def rows(self) -> List[List[float]]:
        nan = float("nan")
        out = []
        for i, t in enumerate(self.times):
            out.append([
                float(t), float(self.entropies[i]), float(self.metric_norms[i]),
                nan if self.lsi_margins is None else float(self.lsi_margins[i]),
                nan if self.talagrand_slacks is None else float(self.talagrand_slacks[i]),
            ])
        return out

    def __repr__(self) -> str:
        return "<FlowTrace: %d points, H0=%.6g>" % (len(self.times), self.entropies[0] if len(self) else 0.0)


def _check_grid(grid: TGrid) -> np.ndarray:
    times = np.asarray(list(grid), dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ShapeError("time grid must be a nonempty sequence")
    if np.any(times < 0) or np.any(np.diff(times) <= 0):
        raise ShapeError("time grid must be increasing and nonnegative")
    return times


def _positive_density(model: InclusionModel, d, tol: Tolerances, what: str = "D0") -> np.ndarray:
    d = model.as_m(d)
    d = (d + dagger(d)) / 2
    value = float(np.linalg.eigvalsh(d)[0])
    if value <= tol.positivity * (1.0 + norm2(d)):
        raise NotPositiveDensity("%s is not strictly positive (eigenvalue %.3g)" % (what, value))
    return d


def _metric_operator(js: JointSpectrum, k: KOperator, basis: List[np.ndarray]) -> np.ndarray:
    model = js.model
    columns = []
    for e in basis:
        columns.append(model.vec(0.5 * divergence(js, _k_field(js, k, gradient(js, e)))))
    return np.stack(columns, axis=1)


def metric_norm(js: JointSpectrum, d, ddot, tol: Optional[Tolerances] = None):
    """‖Ḋ‖ in the metric g_L at D, with the minimizing potential x:
    `Ḋ = ½ Div K_D(∇x)` and `‖Ḋ‖² = ⟨∇x, ∇x⟩_{D,Δ̂}`.

    Returns:
        (float, np.ndarray)

    Raises:
        NotInRange: Ḋ is not traceless or not reached by `½ Div K_D ∇`"""
    tol = tolerances(tol)
    model = js.model
    d = model.as_m(d)
    ddot = model.as_m(ddot)
    scale = norm2(ddot)
    if abs(model.tau_m(ddot)) > np.sqrt(tol.equality) * (1.0 + scale):
        raise NotInRange("Ḋ has nonzero trace %.3g" % abs(model.tau_m(ddot)))
    basis = _traceless_basis(model, tol)
    zero = np.zeros((model.n, model.n), dtype=complex)
    if scale == 0.0 or not basis:
        return 0.0, zero
    k = KOperator(model.embed_raw(d), tol)
    a = _metric_operator(js, k, basis)
    target = model.vec(ddot)
    coeffs, *_ = np.linalg.lstsq(a, target, rcond=None)
    residual = norm2(a @ coeffs - target)
    if residual > np.sqrt(tol.equality) * (1.0 + scale):
        raise NotInRange("Ḋ is outside the range of the divergence (residual %.3g)" % residual)
    x = sum((c * e for c, e in zip(coeffs, basis)), zero)
    grad = gradient(js, x)
    kg = _k_field(js, k, grad)
    value = float(np.real(sum((model.tau1(dagger(a_) @ b_) for a_, b_ in zip(grad, kg)), 0j)))
    return float(np.sqrt(max(value, 0.0))), x


def _rate(js: JointSpectrum, k: KOperator, g: np.ndarray) -> float:
    model = js.model
    grad = gradient(js, g)
    kg = _k_field(js, k, grad)
    return -0.5 * float(np.real(sum((model.tau1(dagger(a) @ b) for a, b in zip(grad, kg)), 0j)))


def _prepare(L: Lindbladian, delta: SymmetryDatum, tol: Tolerances) -> JointSpectrum:
    if not check_bimodule_gns(L, delta, tol).passed:
        raise NotSymmetric("the flow needs a bimodule GNS symmetric generator")
    return joint_spectrum(L, delta, tol)


def flow(L: Lindbladian, delta: SymmetryDatum, d0, grid: TGrid, beta: Optional[float] = None,
         hidden: Optional[np.ndarray] = None, tol: Optional[Tolerances] = None) -> FlowTrace:
    """Samples `D_t = e^{−tL*}D₀` by exact exponentials of the dual
    superoperator. The hidden density is computed at D₀ unless
    given.

    Raises:
        NotSymmetric, NotErgodic, NotPositiveDensity"""
    tol = tolerances(tol)
    model = L.model
    js = _prepare(L, delta, tol)
    d0 = _positive_density(model, d0, tol)
    times = _check_grid(grid)
    if hidden is None:
        hidden = hidden_density(js, d0, tol=tol)
    limit = model.tau_m(d0).real * stationary_density(L, tol)
    limit_entropy = relative_entropy(limit, hidden, tol)
    log_hidden = mat_fun(hidden, "log", tol)

    dual = dagger(L.transfer)
    v0 = model.vec(d0)
    densities, entropies, norms, rates, slopes = [], [], [], [], []
    for t in times:
        dt = model.unvec(expm_general(-t * dual) @ v0)
        dt = _positive_density(model, dt, tol, "D_t at t=%g" % t)
        k = KOperator(model.embed_raw(dt), tol)
        g = mat_fun(dt, "log", tol) - log_hidden
        densities.append(dt)
        entropies.append(relative_entropy(dt, hidden, tol))
        rates.append(_rate(js, k, g))
        slopes.append(-float(np.real(model.tau_m(generator_adjoint(L, dt) @ g))))
        norms.append(metric_norm(js, dt, -generator_adjoint(L, dt), tol)[0])
    trace = FlowTrace(times, densities, entropies, norms, rates, hidden, limit_entropy, slopes)
    _flag_violations(trace, tol)
    if beta is not None:
        _fill_margins(L, trace, beta, tol)
    log.debug("flow of %d points: H %.6g -> %.6g", len(times), entropies[0], entropies[-1])
    return trace


def central_slope(L: Lindbladian, delta: SymmetryDatum, d0, t: float, hidden: Optional[np.ndarray] = None,
                  step: float = 1e-4, tol: Optional[Tolerances] = None):
    """The closed-form rate of H at t next to a central difference of H with
    half-width `step`. t is raised to `step` if smaller.

    Returns:
        (float, float): rate, difference quotient"""
    t = max(float(t), step)
    trace = flow(L, delta, d0, [t - step, t, t + step], hidden=hidden, tol=tol)
    return float(trace.rates[1]), float((trace.entropies[2] - trace.entropies[0]) / (2 * step))


def _flag_violations(trace: FlowTrace, tol: Tolerances) -> None:
    scale = abs(trace.entropies[0])
    increase = trace.entropy_increase
    if not within(increase, tol.equality, scale):
        trace.violations.append("entropy increases by %.3g" % increase)
    worst = float(np.max(trace.rate_residuals))
    if not within(worst, np.sqrt(tol.equality), float(np.max(np.abs(trace.slopes)))):
        trace.violations.append("rate identity fails by %.3g; the hidden density depends on D0" % worst)
    for v in trace.violations:
        log.warning("flow: %s", v)


def _fill_margins(L: Lindbladian, trace: FlowTrace, beta: float, tol: Tolerances) -> None:
    excess = trace.entropies - trace.limit_entropy
    # entropy production is −dH/dt
    trace.lsi_margins = -trace.slopes / (2 * beta) - excess
    trace.envelope_slacks = np.exp(-2 * beta * (trace.times - trace.times[0])) * excess[0] - excess
    remaining = np.zeros_like(trace.times)
    if len(trace.times) > 1:
        covered = cumulative_trapezoid(trace.metric_norms, trace.times, initial=0.0)
        remaining = covered[-1] - covered
    trace.talagrand_slacks = 2 * np.sqrt(np.clip(excess, 0.0, None) / beta) - remaining
    trace.beta = beta


def flow_rk4(L: Lindbladian, d0, grid: TGrid, substeps: int = 20) -> List[np.ndarray]:
    """Classical Runge-Kutta integration of Ḋ = −L*(D), the coarse oracle for
    [[flow]]."""
    model = L.model
    times = _check_grid(grid)
    dual = dagger(L.transfer)
    v = model.vec(model.as_m(d0))
    f = lambda y: -dual @ y
    out = []
    current = 0.0
    for t in times:
        span = t - current
        h = span / substeps
        for _ in range(substeps if span > 0 else 0):
            k1 = f(v)
            k2 = f(v + h / 2 * k1)
            k3 = f(v + h / 2 * k2)
            k4 = f(v + h * k3)
            v = v + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        current = t
        out.append(model.unvec(v))
    return out


def path_length(trace: FlowTrace, rule: str = "simpson") -> float:
    """∫ ‖Ḋ_t‖_{g_L} dt over the sampled window."""
    if len(trace.times) < 2:
        return 0.0
    if rule == "simpson":
        return float(simpson(trace.metric_norms, x=trace.times))
    return float(trapezoid(trace.metric_norms, trace.times))


def lsi_report(L: Lindbladian, delta: SymmetryDatum, d0, grid: TGrid, beta: Optional[float] = None,
               tol: Optional[Tolerances] = None) -> FlowTrace:
    """Per grid point: the margin `(1/2β)τ(L*(D)(log D − log D_Δ)) − (H − H∞)`
    and the slack of the envelope `e^{−2βt}(H₀ − H∞)`.

    Raises:
        NoBeta: no intertwining constant was given"""
    if beta is None or beta <= 0:
        raise NoBeta("the logarithmic Sobolev check needs a positive intertwining constant")
    return flow(L, delta, d0, grid, beta, tol=tol)


class TalagrandReport:
    """Members:
        path_length (float): ∫‖Ḋ_t‖ dt up to the horizon
        bound (float): 2((H₀ − H∞)/β)^{1/2}
        trace (FlowTrace)"""

    def __init__(self, path_length: float, bound: float, trace: FlowTrace) -> None:
        self.path_length = path_length
        self.bound = bound
        self.trace = trace

    @property
    def slack(self) -> float:
        return self.bound - self.path_length

    def __repr__(self) -> str:
        return "<TalagrandReport: length=%.6g, bound=%.6g>" % (self.path_length, self.bound)


def talagrand_report(L: Lindbladian, delta: SymmetryDatum, d0, beta: Optional[float] = None,
                     horizon: Optional[float] = None, points: int = 801,
                     tol: Optional[Tolerances] = None) -> TalagrandReport:
    """Raises:
        NoBeta"""
    if beta is None or beta <= 0:
        raise NoBeta("the transport check needs a positive intertwining constant")
    horizon = 30.0 / beta if horizon is None else horizon
    grid = np.linspace(0.0, horizon, points)
    trace = flow(L, delta, d0, grid, beta, tol=tol)
    excess = max(trace.entropies[0] - trace.limit_entropy, 0.0)
    return TalagrandReport(path_length(trace), 2 * np.sqrt(excess / beta), trace)


# -- intertwining


class Extension:
    """A generator J on M₁ offered as an extension of L.

    Members:
        name (str)
        fn (Callable[[np.ndarray], np.ndarray]): J on M₁ matrices"""

    def __init__(self, name: str, fn: Callable[[np.ndarray], np.ndarray]) -> None:
        self.name = name
        self.fn = fn

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return self.fn(y)

    def __repr__(self) -> str:
        return "<Extension: %s>" % self.name


def _directions(L: Lindbladian, directions: Optional[Sequence[np.ndarray]]) -> List[np.ndarray]:
    if directions is not None:
        return list(directions)
    return [L.model.f1_inv(item.p.data) for item in L.jumps()]


def _stacks(L: Lindbladian, J: Callable, directions: List[np.ndarray]):
    model = L.model
    lhs, rhs = [], []
    for x in model.m_basis():
        xt = model.embed_raw(x)
        lx = model.embed_raw(apply_generator(L, x))
        for p in directions:
            dx = xt @ p - p @ xt
            lhs.append((lx @ p - p @ lx) - J(dx))
            rhs.append(dx)
    return lhs, rhs


def _restriction_residual(L: Lindbladian, J: Callable) -> float:
    model = L.model
    return max((norm2(J(model.embed_raw(x)) - model.embed_raw(apply_generator(L, x)))
                for x in model.m_basis()), default=0.0)


def intertwining_check(L: Lindbladian, J: Callable, beta: float,
                       directions: Optional[Sequence[np.ndarray]] = None,
                       tol: Optional[Tolerances] = None) -> float:
    """max over basis x and directions k of ‖∂_k L(x) − J(∂_k x) − β∂_k x‖.

    Raises:
        RelationViolation: J does not restrict to L on M"""
    tol = tolerances(tol)
    restriction = _restriction_residual(L, J)
    if restriction > np.sqrt(tol.equality) * (1.0 + norm2(L.transfer)):
        raise RelationViolation("extension does not restrict to L (residual %.3g)" % restriction)
    lhs, rhs = _stacks(L, J, _directions(L, directions))
    return max((norm2(a - beta * b) for a, b in zip(lhs, rhs)), default=0.0)


class IntertwiningFit:
    """Members:
        extension (Extension)
        beta (float): least-squares constant
        residual (float)
        residuals (Dict[str, float]): per catalog entry"""

    def __init__(self, extension: Extension, beta: float, residual: float, residuals: Dict[str, float]) -> None:
        self.extension = extension
        self.beta = beta
        self.residual = residual
        self.residuals = residuals

    def __repr__(self) -> str:
        return "<IntertwiningFit: %s, beta=%.6g, residual=%.3g>" % (self.extension.name, self.beta, self.residual)


def find_intertwining(L: Lindbladian, candidates: Sequence[Extension],
                      directions: Optional[Sequence[np.ndarray]] = None,
                      threshold: float = 1e-8, tol: Optional[Tolerances] = None) -> IntertwiningFit:
    """Fits `β = Re⟨∂x, R⟩/⟨∂x, ∂x⟩` for each catalog extension, where
    `R = ∂L(x) − J(∂x)`, and keeps the best.

    Raises:
        NoCandidate: no extension reaches `threshold`"""
    tol = tolerances(tol)
    dirs = _directions(L, directions)
    best = None
    residuals = {}
    for ext in candidates:
        if _restriction_residual(L, ext) > np.sqrt(tol.equality) * (1.0 + norm2(L.transfer)):
            log.debug("extension %s does not restrict to L", ext.name)
            continue
        lhs, rhs = _stacks(L, ext, dirs)
        num = sum((np.vdot(b, a) for a, b in zip(lhs, rhs)), 0j)
        den = sum((np.vdot(b, b) for b in rhs), 0j)
        beta = float(np.real(num / den)) if abs(den) > 0 else 0.0
        residual = max((norm2(a - beta * b) for a, b in zip(lhs, rhs)), default=0.0)
        residuals[ext.name] = residual
        log.info("intertwining %s: beta=%.12g residual=%.3g", ext.name, beta, residual)
        if best is None or residual < best[2]:
            best = (ext, beta, residual)
    if best is None or best[2] > threshold:
        raise NoCandidate("no catalog extension intertwines (residuals %s)" % residuals)
    return IntertwiningFit(best[0], best[1], best[2], residuals)


# -- free fermions


class FermionModel:
    """Quasi-free fermionic semigroup on M_{2^m}.

    Members:
        m (int), a (np.ndarray), beta (float)
        model (FullMatrix)
        L (Lindbladian)
        density (np.ndarray): exp(−βΣ a_j N_j), τ-normalized
        delta (SymmetryDatum): its modular multiplier
        q, p (List[np.ndarray]): the Clifford generators
        w (np.ndarray): the parity
        jumps (List[Tuple[np.ndarray, float]]): `(ṽ, rate)` with τ(ṽṽ*) = λ^{1/2}
        jump_norms (List[float]): τ(ṽṽ*)λ^{−1/2}
        extensions (Dict[str, Extension])
        beta_tilde (Optional[float]): cosh(βa/2)/n for uniform a"""

    def __repr__(self) -> str:
        return "<FermionModel: m=%d, beta=%g>" % (self.m, self.beta)

    def directions(self) -> List[np.ndarray]:
        model = self.model
        return [model.left(u) @ model.right(dagger(u)) for u, _ in self.jumps]


def _jordan_wigner(m: int):
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    y = np.array([[0, -1j], [1j, 0]], dtype=complex)
    z = np.diag([1.0, -1.0]).astype(complex)
    eye = np.eye(2, dtype=complex)

    def chain(site: int, op: np.ndarray) -> np.ndarray:
        out = np.eye(1, dtype=complex)
        for k in range(m):
            out = np.kron(out, z if k < site else op if k == site else eye)
        return out

    q = [chain(j, x) for j in range(m)]
    p = [chain(j, y) for j in range(m)]
    w = (-1) ** m * np.eye(1, dtype=complex)
    for _ in range(m):
        w = np.kron(w, z)
    return q, p, w


def _check_relations(q, p, w, jumps, tol: Tolerances) -> None:
    dim = w.shape[0]
    eye = np.eye(dim)
    eps = np.sqrt(tol.equality)
    for j in range(len(q)):
        for k in range(len(q)):
            expected = 2 * eye if j == k else 0 * eye
            for a, b in ((q[j], q[k]), (p[j], p[k])):
                if norm2(a @ b + b @ a - expected) > eps:
                    raise RelationViolation("Clifford relation fails at (%d,%d)" % (j, k))
            if norm2(q[j] @ p[k] + p[k] @ q[j]) > eps:
                raise RelationViolation("Q_%d and P_%d do not anticommute" % (j, k))
    if norm2(w @ w - eye) > eps:
        raise RelationViolation("w² ≠ 1")
    for u, _ in jumps:
        if norm2(w @ u @ w + u) > eps:
            raise RelationViolation("a jump is not odd under the parity")


def fermion_model(m: int, a, beta: float, tol: Optional[Tolerances] = None) -> FermionModel:
    """Raises:
        ShapeError: m outside 1..5 or `a` of the wrong length
        RelationViolation: the algebra relations fail"""
    tol = tolerances(tol)
    if not 1 <= m <= 5:
        raise ShapeError("fermion model needs 1 ≤ m ≤ 5, got %d" % m)
    a = np.asarray(a, dtype=float)
    if a.shape != (m,):
        raise ShapeError("expected %d mode energies, got %s" % (m, a.shape))
    n = 2 ** m
    model = full_matrix(n)
    q, p, w = _jordan_wigner(m)

    jumps = []
    number = np.zeros((n, n), dtype=complex)
    for j in range(m):
        f = (q[j] + 1j * p[j]) / 2
        number += a[j] * (dagger(f) @ f)
        v = np.sqrt(2.0 / n) * (w @ f)
        x = beta * a[j] / 2
        jumps.append((v, 0.5 * np.exp(x)))
        jumps.append((dagger(v), 0.5 * np.exp(-x)))
    _check_relations(q, p, w, jumps, tol)

    l0 = kraus_multiplier(model, [np.sqrt(rate) * u for u, rate in jumps])
    L = build(model, l0, None, tol)
    density = mat_fun(-beta * number, "exp", tol)
    density = density / model.tau_m(density).real

    fm = FermionModel()
    fm.m, fm.a, fm.beta = m, a, beta
    fm.model, fm.L = model, L
    fm.density = density
    fm.delta = modular_multiplier(model, density, tol)
    fm.q, fm.p, fm.w = q, p, w
    fm.jumps = jumps
    fm.jump_norms = [float(np.real(model.tau_m(u @ dagger(u)))) / np.sqrt(model.lam) for u, _ in jumps]
    fm.extensions = _extensions(model, jumps, w)
    fm.beta_tilde = float(np.cosh(beta * a[0] / 2) / n) if np.allclose(a, a[0]) else None
    return fm


def _extensions(model: InclusionModel, jumps, w: np.ndarray) -> Dict[str, Extension]:
    left_terms = []
    twisted_terms = []
    rw = model.right(w)
    for u, rate in jumps:
        lu = model.left(u)
        luu = model.left(dagger(u) @ u)
        left_terms.append((rate, luu, lu))
        twisted_terms.append((rate, luu, lu @ rw))

    def extension(terms):
        def fn(y: np.ndarray) -> np.ndarray:
            out = np.zeros_like(y, dtype=complex)
            for rate, anti, k in terms:
                out += rate * (0.5 * (anti @ y + y @ anti) - dagger(k) @ y @ k)
            return out
        return fn

    return {
        "left_factor": Extension("left_factor", extension(left_terms)),
        "parity_twisted": Extension("parity_twisted", extension(twisted_terms)),
    }
