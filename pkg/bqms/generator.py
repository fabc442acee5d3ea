"""Lindbladians of bimodule quantum Markov semigroups.

The sign convention is Φ_t = e^{−tL}. A generator is carried by its
multiplier L̂ ∈ B₂; its superoperator on L²(M) is `transfer(L̂)`.
"""

import logging
import threading
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import channel
from .channel import BimoduleChannel, is_identity_projection, multiplier_is_positive
from .inclusion import B2, M1, BoxElement, InclusionModel, _require, b2, superoperator
from .numerics import cluster, expm_general, herm_eig, null_space
from .util import (DegenerateGauge, NegativeTime, NotConnected, NotHermitian, NotPositive, ShapeError,
                   Tolerances, VerificationFailure, dagger, failed_names, norm2, tolerances, within)

log = logging.getLogger(__name__)


def _as_b2(model: InclusionModel, z, name: str) -> np.ndarray:
    if isinstance(z, BoxElement):
        return _require(z, model, B2)
    z = np.array(z, dtype=complex)
    if z.shape != model.shape_of(B2):
        raise ShapeError("%s must have shape %s, got %s" % (name, model.shape_of(B2), z.shape))
    return z


def _as_h(model: InclusionModel, h) -> np.ndarray:
    if h is None:
        return np.zeros((model.n, model.n), dtype=complex)
    return model.as_m(h)


def assemble(model: InclusionModel, L0, L1=None) -> BoxElement:
    """L̂ for `L(x) = ½(1*L₀)x + ½x(1*L₀) + iL₁x − ixL₁ − x*L₀`, without
    checking that the inputs make a valid generator."""
    l0 = _as_b2(model, L0, "L0")
    h = _as_h(model, L1)
    y = model.act(l0, np.eye(model.n))
    t = (0.5 * (model.left(y) + model.right(y))
         + 1j * (model.left(h) - model.right(h))
         - model.f2(l0))
    return b2(model, model.f2_inv(t))


def split_components(model: InclusionModel, lhat) -> Tuple[BoxElement, BoxElement]:
    """`(L̂₀, L̂₁) = (−(1−e₂)L̂(1−e₂), e₂L̂(1−e₂))`."""
    z = _as_b2(model, lhat, "lhat")
    e = model.e2()
    q = model.b2_identity() - e
    mul = lambda a, b: model.product_raw(B2, a, b)
    return (b2(model, -mul(mul(q, z), q)), b2(model, mul(mul(e, z), q)))


class GeneratorReport:
    """Residuals of the three validity conditions on L̂.

    Members:
        hermitian_residual (float): ‖L̂ − L̂*‖
        unital_residual (float): ‖L(1)‖
        min_eigenvalue (float): smallest eigenvalue of L̂₀
        witness (Optional[BoxElement]): projection where L̂₀ is negative
        checks (List[TCheck])"""

    def __init__(self, hermitian_residual: float, unital_residual: float,
                 min_eigenvalue: float, witness: Optional[BoxElement], checks) -> None:
        self.hermitian_residual = hermitian_residual
        self.unital_residual = unital_residual
        self.min_eigenvalue = min_eigenvalue
        self.witness = witness
        self.checks = checks

    @property
    def valid(self) -> bool:
        return not failed_names(self.checks)

    def __repr__(self) -> str:
        return "<GeneratorReport: valid=%s, failed=%s>" % (self.valid, failed_names(self.checks))


def validate(model: InclusionModel, lhat, tol: Optional[Tolerances] = None) -> GeneratorReport:
    tol = tolerances(tol)
    z = _as_b2(model, lhat, "lhat")
    scale = norm2(z)
    herm = norm2(z - model.adjoint_raw(B2, z))
    unital = norm2(model.f2(z) @ model.vec1())
    l0, _ = split_components(model, z)
    value, witness = model.b2_min_eig(model.adjoint_raw(B2, l0.data) / 2 + l0.data / 2)
    floor = tol.positivity * (1.0 + scale)
    checks = [
        ("validate.hermitian", herm, tol.hermitian, within(herm, tol.hermitian, scale)),
        ("validate.unital", unital, tol.equality, within(unital, tol.equality, scale)),
        ("validate.positive", max(-value, 0.0), floor, value >= -floor),
    ]
    return GeneratorReport(herm, unital, value, None if value >= -floor else b2(model, witness), checks)


class Jump:
    """One term `ω p` of `L̂₀ = Σ ω_j p_j`.

    Members:
        omega (float)
        p (BoxElement): a minimal projection of B₂ orthogonal to e₂
        v (Optional[np.ndarray]): the jump operator in M with τ(v v*) = λ^{1/2}
            (full matrix models only)"""

    def __init__(self, omega: float, p: BoxElement, v: Optional[np.ndarray] = None) -> None:
        self.omega = omega
        self.p = p
        self.v = v

    def __repr__(self) -> str:
        return "<Jump: omega=%.6g%s>" % (self.omega, "" if self.v is None else ", with v")


class JumpDecomposition:
    """Members:
        items (List[Jump])
        gauge_note (bool): some eigenvalue cluster has more than one
            projection, so the `p_j`, `v_j` inside it are one choice among a
            unitary family"""

    def __init__(self, items: List[Jump], gauge_note: bool) -> None:
        self.items = items
        self.gauge_note = gauge_note

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, j: int) -> Jump:
        return self.items[j]

    def clusters(self) -> List[List[int]]:
        """Indices of the jumps grouped by shared ω, in order."""
        groups = []  # type: List[List[int]]
        for j, item in enumerate(self.items):
            if groups and self.items[groups[-1][0]].omega == item.omega:
                groups[-1].append(j)
            else:
                groups.append([j])
        return groups

    def require_unique_gauge(self) -> "JumpDecomposition":
        if self.gauge_note:
            raise DegenerateGauge("jumps are fixed only up to a unitary inside each degenerate cluster")
        return self

    def regauge(self, model: InclusionModel, unitaries: Dict[int, np.ndarray]) -> "JumpDecomposition":
        """Another valid choice of jumps: the cluster starting at index k is
        rotated by `unitaries[k]`, acting on the eigenvectors of its `p_j`.

        Raises:
            ShapeError: a unitary does not match its cluster, or the model
                has no jump operators"""
        items = list(self.items)
        starts = {group[0]: group for group in self.clusters()}
        for start, u in unitaries.items():
            group = starts.get(start)
            u = np.asarray(u, dtype=complex)
            if group is None or u.shape != (len(group), len(group)):
                raise ShapeError("no cluster of size %s starts at jump %d" % (u.shape[0], start))
            if any(self.items[j].v is None for j in group):
                raise ShapeError("regauging needs jump operators")
            phis = np.stack([np.conj(self.items[j].v).reshape(-1) for j in group])
            for row, j in zip(u @ phis, group):
                items[j] = Jump(self.items[j].omega, b2(model, np.outer(row, np.conj(row))),
                                np.conj(row).reshape(model.n, model.n))
        return JumpDecomposition(items, self.gauge_note)

    def reconstruct(self, model: InclusionModel) -> np.ndarray:
        total = np.zeros(model.shape_of(B2), dtype=complex)
        for item in self.items:
            total += item.omega * item.p.data
        return total


class Lindbladian:
    """A validated generator.

    Members:
        model (InclusionModel)
        lhat (BoxElement): L̂
        l0 (BoxElement): L̂₀
        l1 (BoxElement): L̂₁
        transfer (np.ndarray): the superoperator of L on L²(M)"""

    def __init__(self, model: InclusionModel, lhat: BoxElement, tol: Optional[Tolerances] = None) -> None:
        self.model = model
        self.lhat = lhat
        self.l0, self.l1 = split_components(model, lhat)
        self.transfer = model.f2(lhat.data)
        self.tol = tolerances(tol)
        self._jumps = None  # type: Optional[JumpDecomposition]
        self._root = None   # type: Optional[np.ndarray]
        self._lock = threading.Lock()

    def jumps(self) -> JumpDecomposition:
        if self._jumps is None:
            with self._lock:
                if self._jumps is None:
                    self._jumps = _decompose(self.model, self.l0.data, self.tol)
        return self._jumps

    def root(self) -> np.ndarray:
        """`F⁻¹(L̂₀^{1/2})` as a matrix in M₁."""
        if self._root is None:
            with self._lock:
                if self._root is None:
                    self._root = self.model.f1_inv(self.model.b2_sqrt(self.l0.data, self.tol))
        return self._root

    def __repr__(self) -> str:
        return "<Lindbladian on %r>" % self.model


def build(model: InclusionModel, L0, L1=None, tol: Optional[Tolerances] = None) -> Lindbladian:
    """Builds the generator from `L0 ≥ 0` in B₂ and a
    Hermitian `L1` in M.

    Raises:
        NotPositive, NotHermitian"""
    tol = tolerances(tol)
    l0 = _as_b2(model, L0, "L0")
    positive, value, witness = multiplier_is_positive(model, l0, tol)
    if not positive:
        raise NotPositive("L0 is not positive (eigenvalue %.3g)" % value, value, witness)
    h = _as_h(model, L1)
    residual = norm2(h - dagger(h))
    if not within(residual, tol.hermitian, norm2(h)):
        raise NotHermitian("L1 is not Hermitian (residual %.3g)" % residual, residual)
    return Lindbladian(model, assemble(model, l0, h), tol)


def from_multiplier(model: InclusionModel, lhat, tol: Optional[Tolerances] = None) -> Lindbladian:
    """Wraps an explicit L̂ after validating it.

    Raises:
        NotHermitian, NotPositive: the corresponding condition fails
        VerificationFailure: L(1) ≠ 0"""
    tol = tolerances(tol)
    z = _as_b2(model, lhat, "lhat")
    report = validate(model, z, tol)
    failed = failed_names(report.checks)
    if "validate.hermitian" in failed:
        raise NotHermitian("L̂ is not Hermitian", report.hermitian_residual)
    if "validate.positive" in failed:
        raise NotPositive("L̂₀ is not positive", report.min_eigenvalue, report.witness)
    if failed:
        raise VerificationFailure(failed)
    return Lindbladian(model, b2(model, z), tol)


def _decompose(model: InclusionModel, l0: np.ndarray, tol: Tolerances) -> JumpDecomposition:
    floor = tol.positivity * (1.0 + norm2(l0))
    if model.kind == "spin":
        items = []
        values = np.real(l0)
        for a, b in zip(*np.nonzero(values > floor)):
            p = np.zeros_like(l0)
            p[a, b] = 1.0
            items.append(Jump(float(values[a, b]), b2(model, p)))
        return JumpDecomposition(items, False)

    eig = herm_eig(l0, tol)
    keep = np.nonzero(eig.values > floor)[0]
    items = []
    gauge = False
    for group in cluster(eig.values[keep], tol):
        indices = keep[group]
        omega = float(np.mean(eig.values[indices]))
        if len(indices) > 1:
            gauge = True
        for i in indices:
            phi = eig.vectors[:, i]
            items.append(Jump(omega, b2(model, np.outer(phi, np.conj(phi))),
                              np.conj(phi).reshape(model.n, model.n)))
    if gauge:
        log.debug("degenerate jump clusters on %r; jumps fixed up to a unitary gauge", model)
    return JumpDecomposition(items, gauge)


def jump_decomposition(L: Lindbladian) -> JumpDecomposition:
    return L.jumps()


def apply_generator(L: Lindbladian, x) -> np.ndarray:
    model = L.model
    return model.unvec(L.transfer @ model.vec(model.as_m(x)))


def hamiltonian(L: Lindbladian) -> np.ndarray:
    """The Hermitian `w` with `L(x) = Σ_j ω_j(½{v_j*v_j, x} − v_j*xv_j) + i[w, x]`,
    read off L̂₁."""
    model = L.model
    k = model.cond_expect_m_raw(model.f1_inv(L.l1.data))
    return (dagger(k) - k) / 2j


def apply_gkls(L: Lindbladian, x, jumps: Optional[JumpDecomposition] = None) -> np.ndarray:
    """L(x) from the jump operators and the Hamiltonian alone. `jumps`
    replaces L's own decomposition, e.g. by a regauged one."""
    model = L.model
    x = model.as_m(x)
    if model.kind == "spin":
        a = model.act(L.l0.data, np.eye(model.n))
        out = 0.5 * (a @ x + x @ a) - model.act(L.l0.data, x)
    else:
        out = np.zeros_like(x)
        for item in (L.jumps() if jumps is None else jumps):
            v, vs = item.v, dagger(item.v)
            out += item.omega * (0.5 * (vs @ v @ x + x @ vs @ v) - vs @ x @ v)
    w = hamiltonian(L)
    return out + 1j * (w @ x - x @ w)


def evolve(L: Lindbladian, t: float) -> BimoduleChannel:
    """Φ_t = e^{−tL}.

    Raises:
        NegativeTime"""
    if t < 0:
        raise NegativeTime("time must be nonnegative, got %g" % t)
    return channel.from_superoperator(L.model, expm_general(-t * L.transfer))


# -- derivations and gradient forms


def _m1(model: InclusionModel, y) -> np.ndarray:
    if isinstance(y, BoxElement):
        return _require(y, model, M1)
    return np.asarray(y, dtype=complex)


def _comm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def derivation(L: Lindbladian, x) -> BoxElement:
    """∂x = [x, F⁻¹(L̂₀^{1/2})] in M₁."""
    model = L.model
    return BoxElement(model, M1, _comm(model.embed_raw(x), L.root()))


def conj_derivation(L: Lindbladian, x) -> BoxElement:
    """The derivation of the contragredient generator, [x, F⁻¹(L̂₀^{1/2})*]."""
    model = L.model
    return BoxElement(model, M1, _comm(model.embed_raw(x), dagger(L.root())))


def directional_derivation(L: Lindbladian, j: int, x, jumps: Optional[JumpDecomposition] = None) -> BoxElement:
    """∂_j x = ω_j^{1/2}[x, F⁻¹(p_j)]."""
    model = L.model
    item = (L.jumps() if jumps is None else jumps)[j]
    return BoxElement(model, M1, np.sqrt(item.omega) * _comm(model.embed_raw(x), model.f1_inv(item.p.data)))


def derivation_adjoint(L: Lindbladian, y, j: Optional[int] = None) -> np.ndarray:
    """∂*y = E_M([y, F⁻¹(L̂₀^{1/2})*]), or the adjoint of ∂_j when `j` is given."""
    model = L.model
    if j is not None:
        item = L.jumps()[j]
        p = model.f1_inv(item.p.data)
        return np.sqrt(item.omega) * model.cond_expect_m_raw(_comm(_m1(model, y), dagger(p)))
    return model.cond_expect_m_raw(_comm(_m1(model, y), dagger(L.root())))


def conj_derivation_adjoint(L: Lindbladian, y) -> np.ndarray:
    model = L.model
    return model.cond_expect_m_raw(_comm(_m1(model, y), L.root()))


def gradient_form(L: Lindbladian, x, y, route: str = "convolution",
                  jumps: Optional[JumpDecomposition] = None) -> np.ndarray:
    """Γ(x, y), by the convolution formula or (`route="derivation"`) as
    `½λ^{−1/2} Σ_j E_M((∂_j y)*(∂_j x))` over `jumps`, by default L's own."""
    model = L.model
    x = model.as_m(x)
    y = model.as_m(y)
    if route == "derivation":
        total = np.zeros((model.n, model.n), dtype=complex)
        jumps = L.jumps() if jumps is None else jumps
        for j in range(len(jumps)):
            dx = directional_derivation(L, j, x, jumps).data
            dy = directional_derivation(L, j, y, jumps).data
            total += model.cond_expect_m_raw(dagger(dy) @ dx)
        return total / (2 * np.sqrt(model.lam))
    if route == "root":
        dx = derivation(L, x).data
        dy = derivation(L, y).data
        return model.cond_expect_m_raw(dagger(dy) @ dx) / (2 * np.sqrt(model.lam))

    act = lambda z: model.act(L.l0.data, z)
    ys = dagger(y)
    one = np.eye(model.n)
    return 0.5 * (ys @ act(one) @ x - ys @ act(x) - act(ys) @ x + act(ys @ x))


def laplacians(L: Lindbladian) -> Tuple[np.ndarray, np.ndarray]:
    """Superoperators of `L_a` and of its contragredient counterpart, where
    `L_a(x) = ½{1*L̂₀, x} − x*L̂₀`."""
    model = L.model
    one = np.eye(model.n)

    def laplacian(z: np.ndarray):
        a = model.act(z, one)
        return superoperator(model, lambda x: 0.5 * (a @ x + x @ a) - model.act(z, x))

    return laplacian(L.l0.data), laplacian(model.c2(L.l0.data))


def dirichlet_superoperator(L: Lindbladian) -> np.ndarray:
    """Superoperator of `(λ^{−1/2}/2)(∂*∂ + conj∂* conj∂)`."""
    model = L.model

    def fn(x):
        return (derivation_adjoint(L, derivation(L, x))
                + conj_derivation_adjoint(L, conj_derivation(L, x)))

    return superoperator(model, fn) / (2 * np.sqrt(model.lam))


# -- Poincaré constants


class PoincareReport:
    """Constants of the Poincaré inequality `τ(Γ(x,x)) ≥ (β̂ − β)τ(x*x)`
    for traceless x.

    Members:
        beta_hat (float): smallest eigenvalue of `λ^{−1/2}E_M(|A|²)` and
            `λ^{−1/2}E_M(|A*|²)`, `A = F⁻¹(L̂₀^{1/2})`
        beta (float): half the second-largest eigenvalue of `F⁻¹(L̂₀ + conj L̂₀)`
        beta_traceless (float): half its top eigenvalue on the traceless
            subspace, a diagnostic
        trace_term (float): `λ^{−1/2}τ₂(L̂₀)`
        bound0 (float): `β̂ − β`
        bound1_diagnostic (float): `λ^{−1/2}τ₂(L̂₀) − β`, the constant for
            irreducible inclusions, never asserted
        connected (bool): CS₀(L̂₀) = 1"""

    def __init__(self, L: Lindbladian, beta_hat: float, beta: float, beta_traceless: float,
                 trace_term: float, connected: bool) -> None:
        self.L = L
        self.beta_hat = beta_hat
        self.beta = beta
        self.beta_traceless = beta_traceless
        self.trace_term = trace_term
        self.connected = connected

    @property
    def bound0(self) -> float:
        return self.beta_hat - self.beta

    @property
    def bound1_diagnostic(self) -> float:
        return self.trace_term - self.beta

    def margin(self, x) -> float:
        """m(x) = τ(Γ(x,x)) − (β̂ − β)τ(x*x)."""
        model = self.L.model
        x = model.as_m(x)
        gamma = gradient_form(self.L, x, x)
        return float(np.real(model.tau_m(gamma)) - self.bound0 * np.real(model.ip(x, x)))

    def require_connected(self) -> "PoincareReport":
        if not self.connected:
            raise NotConnected("CS₀(L̂₀) ≠ 1: the Poincaré bound is not asserted")
        return self

    def __repr__(self) -> str:
        return "<PoincareReport: beta_hat=%.6g, beta=%.6g, connected=%s>" % (
            self.beta_hat, self.beta, self.connected)


def poincare_margins(L: Lindbladian, strict: bool = False,
                     tol: Optional[Tolerances] = None) -> PoincareReport:
    """Raises:
        NotHermitian: `F⁻¹(L̂₀ + conj L̂₀)` came out non-Hermitian
        NotConnected: `strict` and CS₀(L̂₀) ≠ 1"""
    tol = tolerances(tol)
    model = L.model
    l0 = L.l0.data
    y = model.f1_inv(l0) + model.f1_inv(model.c2(l0))
    residual = norm2(y - dagger(y))
    if not within(residual, tol.hermitian, norm2(y)):
        raise NotHermitian("F⁻¹(L̂₀ + conj L̂₀) is not Hermitian", residual)
    y = (y + dagger(y)) / 2

    spectrum = np.linalg.eigvalsh(y)
    beta = 0.5 * float(spectrum[-2]) if spectrum.size > 1 else 0.0
    q = null_space(model.vec1()[None, :].conj(), tol)
    compressed = dagger(q) @ y @ q
    beta_traceless = 0.5 * float(np.linalg.eigvalsh(compressed)[-1]) if q.shape[1] else 0.0
    trace_term = float(np.real(model.tau2(l0))) / np.sqrt(model.lam)

    a = L.root()
    one = np.eye(model.n)
    left = model.act(l0, one)
    right = model.cond_expect_m_raw(a @ dagger(a)) / np.sqrt(model.lam)
    beta_hat = min(float(np.linalg.eigvalsh((left + dagger(left)) / 2)[0]),
                   float(np.linalg.eigvalsh((right + dagger(right)) / 2)[0]))

    connected = is_identity_projection(channel.cs0(L.l0, tol), tol)
    report = PoincareReport(L, beta_hat, beta, beta_traceless, trace_term, connected)
    if not connected:
        log.info("L̂₀ is not connected; Poincaré margins are diagnostic only")
        if strict:
            report.require_connected()
    return report


def poincare_margin(L: Lindbladian, x, tol: Optional[Tolerances] = None) -> float:
    return poincare_margins(L, tol=tol).margin(x)
