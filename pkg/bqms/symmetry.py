"""Equilibrium states and detailed balance, at the state level and at the
level of multipliers.

Densities are taken with respect to τ: the state ρ(x) = τ(Dx) is passed as
the matrix D with τ(D) = 1.
"""

import logging
from collections import deque
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import channel
from .channel import BimoduleChannel
from .generator import Lindbladian, evolve
from .inclusion import B2, BoxElement, InclusionModel, _require, b2, superoperator
from .numerics import mat_fun, null_space, range_projection_matrix
from .util import (InvalidDelta, NotErgodic, NotPositiveDensity, NotSymmetric, Tolerances,
                   dagger, failed_names, norm2, tolerances, within)

log = logging.getLogger(__name__)


def _density(model: InclusionModel, rho, tol: Tolerances) -> np.ndarray:
    d = model.as_m(rho)
    scale = norm2(d)
    if norm2(d - dagger(d)) > tol.hermitian * (1.0 + scale):
        raise NotPositiveDensity("density is not Hermitian")
    d = (d + dagger(d)) / 2
    values = np.linalg.eigvalsh(d)
    if values[0] <= tol.positivity * (1.0 + scale):
        raise NotPositiveDensity("density is not strictly positive (eigenvalue %.3g)" % values[0])
    t = model.tau_m(d).real
    if abs(t - 1.0) > tol.equality:
        log.info("normalizing density with τ(D) = %.6g", t)
        d = d / t
    return d


def _b2_mul(model: InclusionModel, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return model.product_raw(B2, a, b)


def _b2_inv(model: InclusionModel, a: np.ndarray) -> np.ndarray:
    if model.kind == "spin":
        return 1.0 / a
    return np.linalg.inv(a)


class SymmetryDatum:
    """A strictly positive Δ̂ ∈ B₂ with Δ̂e₂ = e₂Δ̂ = e₂.

    Members:
        model (InclusionModel)
        delta_hat (BoxElement)
        half (bool): the datum is a square-root (KMS type) multiplier
        rho (Optional[np.ndarray]): the density it came from, if any

    Raises:
        InvalidDelta"""

    def __init__(self, model: InclusionModel, delta_hat, half: bool = False,
                 rho: Optional[np.ndarray] = None, tol: Optional[Tolerances] = None) -> None:
        tol = tolerances(tol)
        if isinstance(delta_hat, BoxElement):
            z = _require(delta_hat, model, B2)
        else:
            z = np.array(delta_hat, dtype=complex)
            if z.shape != model.shape_of(B2):
                raise InvalidDelta("Δ̂ must have shape %s" % (model.shape_of(B2),))
        scale = norm2(z)
        e = model.e2()
        residual = max(norm2(_b2_mul(model, z, e) - e), norm2(_b2_mul(model, e, z) - e))
        if residual > np.sqrt(tol.equality) * (1.0 + scale):
            raise InvalidDelta("Δ̂e₂ ≠ e₂ (residual %.3g)" % residual)
        if norm2(z - model.adjoint_raw(B2, z)) > tol.hermitian * (1.0 + scale):
            raise InvalidDelta("Δ̂ is not self-adjoint")
        value, _ = model.b2_min_eig(z)
        if value <= tol.positivity * (1.0 + scale):
            raise InvalidDelta("Δ̂ is not strictly positive (eigenvalue %.3g)" % value)
        self.model = model
        self.delta_hat = b2(model, z)
        self.half = half
        self.rho = rho

    def conj(self) -> np.ndarray:
        return self.model.c2(self.delta_hat.data)

    def inverse(self) -> np.ndarray:
        return _b2_inv(self.model, self.delta_hat.data)

    def __repr__(self) -> str:
        return "<SymmetryDatum on %r%s>" % (self.model, ", half" if self.half else "")


def _modular(model: InclusionModel, d: np.ndarray, power: float, tol: Tolerances) -> np.ndarray:
    if model.kind == "spin":
        v = np.real(np.diagonal(d)) ** power
        return (v[:, None] / v[None, :]).astype(complex)
    p = mat_fun(d, ("power", power), tol)
    q = mat_fun(d, ("power", -power), tol)
    return np.kron(p.T, q)


def modular_multiplier(model: InclusionModel, rho, tol: Optional[Tolerances] = None) -> SymmetryDatum:
    """Δ̂ of the state with density `rho`.

    Raises:
        NotPositiveDensity"""
    tol = tolerances(tol)
    d = _density(model, rho, tol)
    return SymmetryDatum(model, _modular(model, d, 1.0, tol), False, d, tol)


def modular_multiplier_half(model: InclusionModel, rho, tol: Optional[Tolerances] = None) -> SymmetryDatum:
    tol = tolerances(tol)
    d = _density(model, rho, tol)
    return SymmetryDatum(model, _modular(model, d, 0.5, tol), True, d, tol)


def modular_superoperator(model: InclusionModel, rho, tol: Optional[Tolerances] = None) -> np.ndarray:
    """x ↦ D x D⁻¹ on L²(M)."""
    tol = tolerances(tol)
    d = _density(model, rho, tol)
    inv = np.linalg.inv(d)
    return superoperator(model, lambda x: d @ x @ inv)


class SymmetryReport:
    """Named residual checks with an overall verdict.

    Members:
        checks (List[TCheck])
        residual (float): residual of the defining identity
        cross_residual (Optional[float]): residual of a second route, if any
        agree (Optional[bool]): whether both routes reached the same verdict"""

    def __init__(self, checks, cross_residual: Optional[float] = None,
                 agree: Optional[bool] = None) -> None:
        self.checks = checks
        self.cross_residual = cross_residual
        self.agree = agree

    @property
    def residual(self) -> float:
        return self.checks[0][1]

    @property
    def passed(self) -> bool:
        return not failed_names(self.checks)

    @property
    def failed(self) -> List[str]:
        return failed_names(self.checks)

    def __getitem__(self, name: str) -> float:
        for check in self.checks:
            if check[0] == name:
                return check[1]
        raise KeyError(name)

    def __repr__(self) -> str:
        return "<SymmetryReport: passed=%s, failed=%s>" % (self.passed, self.failed)


def _check(name: str, residual: float, tol: float, scale: float = 0.0):
    return (name, float(residual), tol, within(residual, tol, scale))


# -- state level


def check_equilibrium(ch: BimoduleChannel, rho, tol: Optional[Tolerances] = None) -> SymmetryReport:
    """ρ∘Φ = ρ, cross-checked by `1 * (Δ̂ · conj Φ̂) = 1`.

    The report passes when the state-level identity holds; `agree` records
    whether the multiplier condition reached the same verdict."""
    tol = tolerances(tol)
    model = ch.model
    d = _density(model, rho, tol)
    vd = model.vec(d)
    scale = norm2(ch.transfer)
    primary = norm2(dagger(ch.transfer) @ vd - vd)
    delta = _modular(model, d, 1.0, tol)
    z = _b2_mul(model, delta, model.c2(ch.multiplier.data))
    one = np.eye(model.n)
    cross = norm2(model.act(z, one) - one)
    p_ok = within(primary, tol.equality, scale)
    c_ok = within(cross, np.sqrt(tol.equality), scale)
    if p_ok != c_ok:
        log.warning("equilibrium routes disagree: state residual %.3g, multiplier residual %.3g",
                    primary, cross)
    return SymmetryReport([("equilibrium.state", primary, tol.equality, p_ok)], cross, p_ok == c_ok)


def _state_residual(model: InclusionModel, g1: np.ndarray, g2: np.ndarray) -> float:
    return float(np.max(np.abs(g1 - g2), initial=0.0)) / model.n


def check_gns_state(ch: BimoduleChannel, rho, tol: Optional[Tolerances] = None) -> SymmetryReport:
    """ρ(y*Φ(x)) = ρ(Φ(y)*x) over matrix units, and commutation of the
    transfer matrix with x ↦ DxD⁻¹."""
    tol = tolerances(tol)
    model = ch.model
    d = _density(model, rho, tol)
    t = ch.transfer
    r = model.right(d)
    residual = _state_residual(model, r @ t, dagger(t) @ r)
    sigma = model.left(d) @ model.right(np.linalg.inv(d))
    modular = norm2(t @ sigma - sigma @ t)
    scale = norm2(t) * norm2(sigma)
    return SymmetryReport([
        _check("gns.state", residual, tol.equality, norm2(t)),
        _check("gns.modular", modular, np.sqrt(tol.equality), scale),
    ])


def check_kms_state(ch: BimoduleChannel, rho, tol: Optional[Tolerances] = None) -> SymmetryReport:
    """ρ^{1/2}-symmetric form: τ(D^{1/2}y*D^{1/2}Φ(x)) = τ(D^{1/2}Φ(y)*D^{1/2}x)."""
    tol = tolerances(tol)
    model = ch.model
    d = _density(model, rho, tol)
    root = mat_fun(d, "sqrt", tol)
    s = model.left(root) @ model.right(root)
    t = ch.transfer
    residual = _state_residual(model, s @ t, dagger(t) @ s)
    return SymmetryReport([_check("kms.state", residual, tol.equality, norm2(t))])


# -- multiplier level


def _multiplier_of(obj) -> Tuple[InclusionModel, np.ndarray]:
    if isinstance(obj, BimoduleChannel):
        return obj.model, obj.multiplier.data
    if isinstance(obj, Lindbladian):
        return obj.model, obj.lhat.data
    if isinstance(obj, BoxElement):
        return obj.model, _require(obj, obj.model, B2)
    raise TypeError("expected a channel, a Lindbladian or a B2 element, got %r" % type(obj))


def _consequences(model: InclusionModel, x: np.ndarray, delta: SymmetryDatum,
                  tol: Tolerances) -> list:
    mul = lambda a, b: _b2_mul(model, a, b)
    cx = model.c2(x)
    dh = delta.delta_hat.data
    cd = delta.conj()
    r = model.b2_range(x, tol)
    scale = norm2(x) * (1.0 + norm2(dh)) * (1.0 + norm2(cd))
    eps = np.sqrt(tol.equality)
    return [
        _check("gns.normal", norm2(mul(x, cx) - mul(cx, x)), eps, scale),
        _check("gns.commutes_delta", norm2(mul(x, dh) - mul(dh, x)), eps, scale),
        _check("gns.commutes_conj_delta", norm2(mul(x, cd) - mul(cd, x)), eps, scale),
        _check("gns.range", norm2(mul(mul(r, dh), cd) - r), eps, scale),
    ]


def check_bimodule_gns(obj, delta: SymmetryDatum, tol: Optional[Tolerances] = None) -> SymmetryReport:
    """conj(Φ̂) = Φ̂ · conj(Δ̂), followed by its consequences (normality of Φ̂,
    commutation with Δ̂ and conj(Δ̂), and R(Φ̂)Δ̂conj(Δ̂) = R(Φ̂)).

    Raises:
        InvalidDelta: `delta` belongs to another model"""
    tol = tolerances(tol)
    model, x = _multiplier_of(obj)
    if delta.model != model:
        raise InvalidDelta("Δ̂ is defined on %r, not %r" % (delta.model, model))
    residual = norm2(model.c2(x) - _b2_mul(model, x, delta.conj()))
    checks = [_check("gns.bimodule", residual, tol.equality, norm2(x) * norm2(delta.conj()))]
    return SymmetryReport(checks + _consequences(model, x, delta, tol))


def check_bimodule_kms(obj, delta: SymmetryDatum, tol: Optional[Tolerances] = None) -> SymmetryReport:
    """conj(Φ̂) = conj(Δ̂)Φ̂conj(Δ̂) with R(Φ̂)conj(Δ̂) = R(Φ̂)Δ̂⁻¹. `delta`
    is normally a half datum.

    Raises:
        InvalidDelta"""
    tol = tolerances(tol)
    model, x = _multiplier_of(obj)
    if delta.model != model:
        raise InvalidDelta("Δ̂ is defined on %r, not %r" % (delta.model, model))
    mul = lambda a, b: _b2_mul(model, a, b)
    cd = delta.conj()
    residual = norm2(model.c2(x) - mul(mul(cd, x), cd))
    r = model.b2_range(x, tol)
    ranged = norm2(mul(r, cd) - mul(r, delta.inverse()))
    scale = norm2(x) * (1.0 + norm2(cd)) ** 2
    return SymmetryReport([
        _check("kms.bimodule", residual, tol.equality, scale),
        _check("kms.range", ranged, np.sqrt(tol.equality), scale),
    ])


def check_gns_semigroup(L: Lindbladian, delta: SymmetryDatum, times: Sequence[float] = (0.1, 1.0, 10.0),
                        tol: Optional[Tolerances] = None) -> SymmetryReport:
    """The bimodule GNS identity for Φ̂_t at each sample time."""
    tol = tolerances(tol)
    checks = []
    for t in times:
        report = check_bimodule_gns(evolve(L, t), delta, tol)
        checks.append(("gns.semigroup[t=%g]" % t, report.residual, tol.equality, report.passed))
    return SymmetryReport(checks)


# -- solving for Δ̂


class Realizability:
    """Whether a Δ̂ comes from a state.

    Members:
        realizable (bool)
        witnesses (List[str]): the violated relations, as
            `"t4 = 4/3*t3 and t4 = 2/3*t3"` (direct edge vs spanning tree)
        rho (Optional[np.ndarray]): a density realizing Δ̂"""

    def __init__(self, realizable: bool, witnesses: List[str], rho: Optional[np.ndarray] = None) -> None:
        self.realizable = realizable
        self.witnesses = witnesses
        self.rho = rho

    def __repr__(self) -> str:
        return "<Realizability: %s, %d witnesses>" % (self.realizable, len(self.witnesses))


def _fraction(value: float) -> Fraction:
    return Fraction(float(value)).limit_denominator(10 ** 6)


def state_realizability(delta: SymmetryDatum, support: Optional[np.ndarray] = None,
                        tol: Optional[Tolerances] = None) -> Realizability:
    """Decides whether Δ̂ is the modular multiplier of some density.

    For a spin model this solves `Δ̂[j,k] = t_k/t_j` over a spanning forest of
    `support` in exact rational arithmetic and reports every edge the tree
    solution violates. For a full matrix model the candidate density is read
    off a partial trace and compared."""
    tol = tolerances(tol)
    model = delta.model
    dh = delta.delta_hat.data
    if model.kind != "spin":
        return _realize_full(delta, tol)

    n = model.n
    if support is None:
        support = ~np.eye(n, dtype=bool)
    ratio = [[_fraction(np.real(dh[j, k])) for k in range(n)] for j in range(n)]
    t = [None] * n  # type: List[Optional[Fraction]]
    for root in range(n):
        if t[root] is not None:
            continue
        t[root] = Fraction(1)
        queue = deque([root])
        while queue:
            j = queue.popleft()
            for k in range(n):
                if k != j and support[j, k] and t[k] is None:
                    t[k] = t[j] * ratio[j][k]
                    queue.append(k)

    witnesses = []
    for j in range(n):
        for k in range(j + 1, n):
            if not support[j, k]:
                continue
            direct = ratio[j][k]
            tree = t[k] / t[j]
            if direct != tree:
                witnesses.append("t%d = %s*t%d and t%d = %s*t%d" % (k + 1, direct, j + 1, k + 1, tree, j + 1))
    if witnesses:
        log.info("Δ̂ is not realized by any state: %s", "; ".join(witnesses))
        return Realizability(False, witnesses)
    d = np.array([1.0 / float(x) for x in t])
    d = d / d.mean()
    return Realizability(True, [], np.diag(d).astype(complex))


def _realize_full(delta: SymmetryDatum, tol: Tolerances) -> Realizability:
    model = delta.model
    n = model.n
    dh = delta.delta_hat.data
    reduced = np.einsum("abcb->ac", dh.reshape(n, n, n, n))
    d = reduced.T
    d = (d + dagger(d)) / 2
    values = np.linalg.eigvalsh(d)
    if values[0] <= 0:
        return Realizability(False, ["partial trace of Δ̂ is not positive"])
    d = d / model.tau_m(d).real
    residual = norm2(_modular(model, d, 1.0, tol) - dh)
    if residual > np.sqrt(tol.equality) * (1.0 + norm2(dh)):
        return Realizability(False, ["Δ̂ is not of the form conj(D)⊗D⁻¹ (residual %.3g)" % residual])
    return Realizability(True, [], d)


class DeltaSolution:
    """Outcome of [[solve_delta]].

    Members:
        status (str): `"found"`, `"infeasible"` or `"underdetermined"`
        datum (Optional[SymmetryDatum])
        witness (Optional[str]): why no Δ̂ exists, for `"infeasible"`
        realizability (Optional[Realizability])"""

    FOUND = "found"
    INFEASIBLE = "infeasible"
    UNDERDETERMINED = "underdetermined"

    def __init__(self, status: str, datum: Optional[SymmetryDatum] = None,
                 witness: Optional[str] = None, realizability: Optional[Realizability] = None) -> None:
        self.status = status
        self.datum = datum
        self.witness = witness
        self.realizability = realizability

    def __repr__(self) -> str:
        return "<DeltaSolution: %s>" % self.status


def solve_delta(obj, tol: Optional[Tolerances] = None) -> DeltaSolution:
    """Finds a Δ̂ for which `obj` is bimodule GNS symmetric."""
    tol = tolerances(tol)
    model, x = _multiplier_of(obj)
    if model.kind == "spin":
        return _solve_spin(model, x, tol)
    return _solve_full(model, x, tol)


def _solve_spin(model: InclusionModel, x: np.ndarray, tol: Tolerances) -> DeltaSolution:
    n = model.n
    floor = tol.positivity * (1.0 + norm2(x))
    delta = np.ones((n, n), dtype=complex)
    support = np.zeros((n, n), dtype=bool)
    for j in range(n):
        for k in range(j + 1, n):
            a, b = x[j, k], x[k, j]
            zero_a, zero_b = abs(a) <= floor, abs(b) <= floor
            if zero_a and zero_b:
                continue
            if zero_a != zero_b:
                return DeltaSolution(DeltaSolution.INFEASIBLE, witness=(
                    "entry (%d,%d) vanishes but (%d,%d) does not" % ((j, k, k, j) if zero_a else (k, j, j, k))))
            ratio = b / a
            if abs(np.imag(ratio)) > tol.hermitian * (1 + abs(ratio)) or np.real(ratio) <= 0:
                return DeltaSolution(DeltaSolution.INFEASIBLE, witness=(
                    "ratio of entries (%d,%d) and (%d,%d) is not positive" % (k, j, j, k)))
            delta[k, j] = np.real(ratio)
            delta[j, k] = 1.0 / np.real(ratio)
            support[j, k] = support[k, j] = True
    datum = SymmetryDatum(model, delta, tol=tol)
    if not check_bimodule_gns(b2(model, x), datum, tol).passed:
        return DeltaSolution(DeltaSolution.UNDERDETERMINED)
    return DeltaSolution(DeltaSolution.FOUND, datum,
                         realizability=state_realizability(datum, support, tol))


def _solve_full(model: InclusionModel, x: np.ndarray, tol: Tolerances) -> DeltaSolution:
    cx = model.c2(x)
    r = range_projection_matrix(x, tol)
    rc = range_projection_matrix(cx, tol)
    if norm2(r - rc) > np.sqrt(tol.equality):
        return DeltaSolution(DeltaSolution.INFEASIBLE, witness="R(Φ̂) ≠ R(conj Φ̂)")
    one = model.b2_identity()
    candidate = np.linalg.pinv(x, rcond=tol.equality) @ cx + (one - r)
    try:
        datum = SymmetryDatum(model, model.c2(candidate), tol=tol)
    except InvalidDelta as e:
        log.info("no strictly positive Δ̂ from the range solve: %s", e)
        return DeltaSolution(DeltaSolution.UNDERDETERMINED)
    if not check_bimodule_gns(b2(model, x), datum, tol).passed:
        return DeltaSolution(DeltaSolution.UNDERDETERMINED)
    return DeltaSolution(DeltaSolution.FOUND, datum, realizability=state_realizability(datum, tol=tol))


# -- limits


class LimitReport:
    """Long-time limit of a relatively ergodic symmetric semigroup.

    Members:
        numeric (BoxElement): multiplier of Φ_t at a time far past the gap
        closed_form (BoxElement): λ^{1/2}·E_{M₁}(conj Δ̂)⁻¹
        applicable (bool): Φ₁ is itself bimodule GNS, so the closed form
            is asserted
        residual (float): ‖numeric − closed_form‖
        time (float)"""

    def __init__(self, model: InclusionModel, numeric: np.ndarray, closed_form: np.ndarray,
                 applicable: bool, time: float) -> None:
        self.model = model
        self.numeric = b2(model, numeric)
        self.closed_form = b2(model, closed_form)
        self.applicable = applicable
        self.residual = norm2(numeric - closed_form)
        self.time = time

    def density_limit(self, d) -> np.ndarray:
        """lim Φ_t*(D)."""
        model = self.model
        t = model.f2(self.numeric.data)
        return model.unvec(dagger(t) @ model.vec(model.as_m(d)))

    def __repr__(self) -> str:
        return "<LimitReport: applicable=%s, residual=%.3g>" % (self.applicable, self.residual)


def spectral_gap(L: Lindbladian, tol: Optional[Tolerances] = None) -> float:
    """Smallest nonzero real part in the spectrum of L."""
    tol = tolerances(tol)
    values = np.real(np.linalg.eigvals(L.transfer))
    nonzero = values[values > np.sqrt(tol.equality) * (1.0 + norm2(L.transfer))]
    return float(np.min(nonzero)) if nonzero.size else 0.0


def semigroup_limit(L: Lindbladian, delta: SymmetryDatum, tol: Optional[Tolerances] = None) -> LimitReport:
    """Raises:
        NotSymmetric: L is not bimodule GNS with respect to `delta`
        NotErgodic: the fixed points of Φ₁ are not ℂ1"""
    tol = tolerances(tol)
    model = L.model
    if not check_bimodule_gns(L, delta, tol).passed:
        raise NotSymmetric("generator is not bimodule GNS symmetric for this Δ̂")
    one = evolve(L, 1.0)
    fixed = channel.fixed_points(one, tol)
    if len(fixed) != 1:
        raise NotErgodic("fixed point algebra has dimension %d" % len(fixed))

    gap = spectral_gap(L, tol)
    time = 50.0 / gap
    numeric = evolve(L, time).multiplier.data
    closed = np.sqrt(model.lam) * _b2_inv(model, model.cond_expect_m1_raw(delta.conj()))
    applicable = check_bimodule_gns(one, delta, tol).passed
    report = LimitReport(model, numeric, closed, applicable, time)
    if applicable:
        log.debug("closed-form limit residual %.3g at t=%.3g", report.residual, time)
    else:
        log.info("Φ_t is not bimodule GNS; the closed-form limit is reported but not asserted")
    return report
