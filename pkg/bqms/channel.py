"""Bimodule channels carried by their Fourier multipliers."""

import logging
from typing import Dict, List, Optional

import numpy as np

from .inclusion import (B2, BoxElement, FullMatrix, InclusionModel, _require, b2,
                        range_projection)
from .numerics import cluster, herm_eig, min_eigenvalue, null_space
from .util import (ModelMismatch, NotBimodule, NotPositive, NotPowerBounded,
                   Tolerances, VerificationFailure, dagger, norm2, require_square,
                   tolerances, within)

log = logging.getLogger(__name__)


class BimoduleChannel:
    """A bimodule map on M given by its multiplier Φ̂ ∈ B₂, with the transfer
    matrix (its action on L²(M)) computed once at construction.

    Members:
        model (InclusionModel)
        multiplier (BoxElement): Φ̂
        transfer (np.ndarray): the B₁ element `transfer(Φ̂)`"""

    def __init__(self, model: InclusionModel, multiplier: BoxElement) -> None:
        _require(multiplier, model, B2)
        self.model = model
        self.multiplier = multiplier
        self.transfer = model.f2(multiplier.data)

    def __eq__(self, other) -> bool:
        return isinstance(other, BimoduleChannel) and other.multiplier == self.multiplier

    def __hash__(self):
        return hash(self.multiplier)

    def __repr__(self) -> str:
        return "<BimoduleChannel on %r>" % self.model


def from_multiplier(model: InclusionModel, m: BoxElement) -> BimoduleChannel:
    return BimoduleChannel(model, m)


def from_superoperator(model: InclusionModel, t) -> BimoduleChannel:
    """The channel whose transfer matrix on L²(M) is `t`.

    Raises:
        NotBimodule: `t` is not an operator on L²(M) of this model (e.g. a
            full `n²×n²` superoperator handed to a spin model)"""
    t = require_square(t, "transfer matrix")
    if t.shape != (model.gns_dim, model.gns_dim):
        raise NotBimodule("transfer matrix of shape %s does not act on L²(M) of %r"
                          % (t.shape, model))
    return BimoduleChannel(model, b2(model, model.f2_inv(t)))


def identity(model: InclusionModel) -> BimoduleChannel:
    return BimoduleChannel(model, b2(model, model.e2() / np.sqrt(model.lam)))


def to_superoperator(ch: BimoduleChannel) -> np.ndarray:
    return ch.transfer.copy()


def _apply_formula(ch: BimoduleChannel, x: np.ndarray) -> np.ndarray:
    """Φ(x) read directly off the multiplier entries."""
    model = ch.model
    z = ch.multiplier.data
    if isinstance(model, FullMatrix):
        n = model.n
        return np.einsum("pjqk,pq->jk", z.reshape(n, n, n, n), x)
    return model.unvec(z.T @ model.vec(x) / np.sqrt(model.n))


def apply(ch: BimoduleChannel, x, cross_check: bool = True,
          tol: Optional[Tolerances] = None) -> np.ndarray:
    """Applies the channel to `x ∈ M` through the transfer matrix and, unless
    `cross_check` is off, through the multiplier formula too.

    Raises:
        VerificationFailure: the two routes disagree"""
    model = ch.model
    x = model.as_m(x)
    y = model.unvec(ch.transfer @ model.vec(x))
    if cross_check:
        tol = tolerances(tol)
        other = _apply_formula(ch, x)
        residual = norm2(y - other)
        if not within(residual, tol.equality, norm2(x) * (1 + ch.multiplier.norm())):
            raise VerificationFailure(["apply"])
    return y


class ChannelReport:
    """Structural classification of a channel.

    Members:
        cp (bool), unital (bool), trace_preserving (bool)
        min_eigenvalue (float): smallest eigenvalue of the multiplier
        witness (Optional[BoxElement]): a projection on which the multiplier
            is negative, when not CP
        residuals (Dict[str, float])"""

    def __init__(self, cp: bool, unital: bool, trace_preserving: bool,
                 min_eigenvalue: float, witness: Optional[BoxElement],
                 residuals: Dict[str, float]) -> None:
        self.cp = cp
        self.unital = unital
        self.trace_preserving = trace_preserving
        self.min_eigenvalue = min_eigenvalue
        self.witness = witness
        self.residuals = residuals

    def __repr__(self) -> str:
        return "<ChannelReport: cp=%s, unital=%s, trace_preserving=%s>" % (
            self.cp, self.unital, self.trace_preserving)


def multiplier_is_positive(model: InclusionModel, z: np.ndarray, tol: Optional[Tolerances] = None):
    """`(positive, min eigenvalue, witness projection)` for a B₂ element."""
    tol = tolerances(tol)
    scale = norm2(z)
    herm = norm2(z - model.adjoint_raw(B2, z))
    value, witness = model.b2_min_eig(z)
    positive = within(herm, tol.hermitian, scale) and value >= -tol.positivity * (1.0 + scale)
    return positive, value, witness


def classify(ch: BimoduleChannel, tol: Optional[Tolerances] = None) -> ChannelReport:
    tol = tolerances(tol)
    model = ch.model
    cp, value, witness = multiplier_is_positive(model, ch.multiplier.data, tol)
    one = model.vec1()
    unital_residual = norm2(ch.transfer @ one - one)
    tp_residual = norm2(dagger(ch.transfer) @ one - one)
    scale = norm2(ch.transfer)
    return ChannelReport(
        cp=cp,
        unital=within(unital_residual, tol.equality, scale),
        trace_preserving=within(tp_residual, tol.equality, scale),
        min_eigenvalue=value,
        witness=None if cp else b2(model, witness),
        residuals={"unital": unital_residual, "trace_preserving": tp_residual,
                   "min_eigenvalue": value})


def _same_model(ch1: BimoduleChannel, ch2: BimoduleChannel) -> InclusionModel:
    if ch1.model != ch2.model:
        raise ModelMismatch("%r vs %r" % (ch1.model, ch2.model))
    return ch1.model


def compose(ch1: BimoduleChannel, ch2: BimoduleChannel) -> BimoduleChannel:
    """`Φ₁∘Φ₂`, whose multiplier is `Φ̂₂ * Φ̂₁`."""
    model = _same_model(ch1, ch2)
    return BimoduleChannel(model, b2(model, model.convolve_raw(ch2.multiplier.data,
                                                                ch1.multiplier.data)))


def adjoint(ch: BimoduleChannel) -> BimoduleChannel:
    """The τ-adjoint channel (transfer matrix `T*`)."""
    return from_superoperator(ch.model, dagger(ch.transfer))


def peripheral_spectrum(ch: BimoduleChannel, tol: Optional[Tolerances] = None) -> np.ndarray:
    """Eigenvalues of the transfer matrix on the unit circle."""
    tol = tolerances(tol)
    values = np.linalg.eigvals(ch.transfer)
    return values[np.abs(np.abs(values) - 1.0) <= np.sqrt(tol.equality)]


def cesaro_mean(ch: BimoduleChannel, tol: Optional[Tolerances] = None) -> BimoduleChannel:
    """`lim (1/ℓ) Σ_{k<ℓ} Φᵏ`, as the spectral projection of the transfer
    matrix at eigenvalue 1.

    Raises:
        NotPowerBounded: spectral radius above one, or a Jordan block at 1,
            or Φ is not CP and unital"""
    tol = tolerances(tol)
    report = classify(ch, tol)
    if not (report.cp and report.unital):
        raise NotPowerBounded("Cesàro means are taken of CP unital channels only (cp=%s, unital=%s)"
                              % (report.cp, report.unital))
    t = ch.transfer
    radius = float(np.max(np.abs(np.linalg.eigvals(t)))) if t.size else 0.0
    if radius > 1.0 + np.sqrt(tol.equality):
        raise NotPowerBounded("spectral radius %.6g exceeds 1" % radius)

    eye = np.eye(t.shape[0])
    right = null_space(t - eye, tol)
    left = null_space(dagger(t - eye), tol)
    if right.shape[1] == 0:
        return from_superoperator(ch.model, np.zeros_like(t))
    if right.shape[1] != left.shape[1]:
        raise NotPowerBounded("eigenvalue 1 is not semisimple")
    gram = dagger(left) @ right
    if np.linalg.cond(gram) > tol.condition:
        raise NotPowerBounded("eigenvalue 1 is not semisimple")
    projection = right @ np.linalg.solve(gram, dagger(left))
    return from_superoperator(ch.model, projection)


def _join(p: BoxElement, q: BoxElement, tol: Tolerances) -> BoxElement:
    return range_projection(p + q, tol)


def _close(p: BoxElement, q: BoxElement, tol: Tolerances) -> bool:
    return norm2(p.data - q.data) <= np.sqrt(tol.equality)


def _conv(p: BoxElement, q: BoxElement) -> BoxElement:
    return p.like(p.model.convolve_raw(p.data, q.data))


def convolution_support(x: BoxElement, tol: Optional[Tolerances] = None) -> BoxElement:
    """CS(x): join of the range projections of every finite convolution word
    in `x` and its contragredient."""
    tol = tolerances(tol)
    model = x.model
    _require(x, model, B2)
    support = _join(range_projection(x, tol), range_projection(x.like(model.c2(x.data)), tol), tol)
    for _ in range(model.dim_b2 + 1):
        grown = _join(support, range_projection(_conv(support, support), tol), tol)
        if _close(grown, support, tol):
            return grown
        support = grown
    return support


def cs0(x: BoxElement, tol: Optional[Tolerances] = None) -> BoxElement:
    """CS₀(x): join of the range projections of the convolution powers x^{*k},
    k ≥ 1. The ranges of the powers are followed until one repeats."""
    tol = tolerances(tol)
    model = x.model
    _require(x, model, B2)
    base = range_projection(x, tol)
    support = base
    seen = [base]
    current = base
    for _ in range(model.dim_b2 * model.dim_b2 + 1):
        current = range_projection(_conv(current, base), tol)
        support = _join(support, current, tol)
        if any(_close(current, s, tol) for s in seen):
            break
        seen.append(current)
    return support


def is_identity_projection(p: BoxElement, tol: Optional[Tolerances] = None) -> bool:
    tol = tolerances(tol)
    one = p.model.b2_identity() if p.space == B2 else p.model.b1_identity()
    return norm2(p.data - one) <= np.sqrt(tol.equality)


def fixed_points(ch: BimoduleChannel, tol: Optional[Tolerances] = None) -> List[np.ndarray]:
    """Basis of M(Φ) = {x : Φ(x) = x}, as elements of M."""
    tol = tolerances(tol)
    t = ch.transfer
    basis = null_space(t - np.eye(t.shape[0]), tol)
    return [ch.model.unvec(basis[:, i]) for i in range(basis.shape[1])]


def choi_matrix(ch: BimoduleChannel) -> np.ndarray:
    """`Σ E_ij ⊗ Φ(E_ij)` computed from the transfer matrix alone."""
    model = ch.model
    if not isinstance(model, FullMatrix):
        raise ModelMismatch("Choi matrices are formed for full matrix models only")
    n = model.n
    choi = np.zeros((n * n, n * n), dtype=complex)
    for i in range(n):
        for j in range(n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = 1.0
            image = model.unvec(ch.transfer @ model.vec(e))
            choi += np.kron(e, image)
    return choi


class IrreducibilityCertificate:
    """Three-valued verdict: `"yes-by-cs"`, `"no-by-witness"` or `"unknown"`.

    Members:
        verdict (str)
        witness (Optional[np.ndarray]): a non-trivial projection of M fixed by
            the channel, for `"no-by-witness"`"""

    YES = "yes-by-cs"
    NO = "no-by-witness"
    UNKNOWN = "unknown"

    def __init__(self, verdict: str, witness: Optional[np.ndarray] = None) -> None:
        self.verdict = verdict
        self.witness = witness

    def __repr__(self) -> str:
        return "<IrreducibilityCertificate: %s>" % self.verdict


def relative_irreducibility(ch: BimoduleChannel, tol: Optional[Tolerances] = None) -> IrreducibilityCertificate:
    tol = tolerances(tol)
    model = ch.model
    positive, _, _ = multiplier_is_positive(model, ch.multiplier.data, tol)
    if positive and is_identity_projection(convolution_support(ch.multiplier, tol), tol):
        return IrreducibilityCertificate(IrreducibilityCertificate.YES)

    one = np.eye(model.n)
    for x in fixed_points(ch, tol):
        for h in ((x + dagger(x)) / 2, (x - dagger(x)) / 2j):
            if norm2(h) <= tol.equality:
                continue
            eig = herm_eig(h, tol)
            for group in cluster(eig.values, tol):
                v = eig.vectors[:, group]
                q = v @ dagger(v)
                if norm2(q) == 0 or norm2(q - one) <= tol.equality:
                    continue
                q = model.as_m(np.where(np.abs(q) > tol.equality, q, 0))
                if norm2(apply(ch, q, cross_check=False) - q) <= np.sqrt(tol.equality):
                    return IrreducibilityCertificate(IrreducibilityCertificate.NO, q)
    return IrreducibilityCertificate(IrreducibilityCertificate.UNKNOWN)


def commutator_bound_margin(ch: BimoduleChannel, x, tol: Optional[Tolerances] = None) -> float:
    """Smallest eigenvalue of `Φ(x*x) + x*Φ(1)x − λ^{1/2}|[x, F⁻¹(Φ̂^{1/2})]|²`
    in M₁. A diagnostic: nothing asserts its sign.

    Raises:
        NotPositive: the channel is not CP"""
    tol = tolerances(tol)
    model = ch.model
    x = model.as_m(x)
    root = model.f1_inv(model.b2_sqrt(ch.multiplier.data, tol))
    c = model.embed_raw(x) @ root - root @ model.embed_raw(x)
    xs = dagger(x)
    phi_one = apply(ch, np.eye(model.n), cross_check=False)
    lhs = model.embed_raw(apply(ch, xs @ x, cross_check=False) + xs @ phi_one @ x)
    value, _ = min_eigenvalue(lhs - np.sqrt(model.lam) * dagger(c) @ c)
    return value
