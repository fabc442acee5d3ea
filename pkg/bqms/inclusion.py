"""The two desk-scale λ-extensions, ℂ ⊂ ℂⁿ (`Spin`) and ℂ ⊂ Mₙ(ℂ)
(`FullMatrix`), behind one interface.

Coordinates are fixed here once:

  * elements of M are `n×n` matrices (diagonal for `Spin`);
  * L²(M) is laid out by `vec(x)[j·n+k] = x[j,k]` (the diagonal for `Spin`);
  * B₁ = M₁ is the algebra of operators on L²(M), so `L_a`, `R_b` and every
    transfer matrix are B₁ elements;
  * B₂ is an `n×n` coefficient array with the entrywise product for `Spin`,
    and Mₙ⊗Mₙ as an `n²×n²` row-major Kronecker matrix for `FullMatrix`.

There are two directed Fourier transforms. `fourier` goes B₁→B₂ and
`transfer` goes B₂→B₁; `transfer` is the contragredient composed with
`inverse_fourier`, so `transfer(fourier(x))` is the contragredient of `x`
and the transfer matrix of a bimodule map is `transfer` of its multiplier.
"""

import logging
from typing import Callable, List, Optional, Union

import numpy as np

from .numerics import psd_power, psd_sqrt, range_projection_matrix
from .util import (ModelMismatch, NotPositive, ShapeError, Tolerances, WrongSpace, dagger,
                   norm2, require_square, tolerances)

log = logging.getLogger(__name__)

B1 = "B1"
B2 = "B2"
M1 = "M1"
_MATRIX_SPACES = (B1, M1)


class BoxElement:
    """An element of a box space, tagged with its space and model.

    Members:
        model (InclusionModel): the inclusion it belongs to
        space (str): `"B1"`, `"B2"` or `"M1"` (B1 and M1 coincide here)
        data (np.ndarray): the matrix (or `Spin` B₂ coefficient array)"""

    __array_priority__ = 100

    def __init__(self, model: "InclusionModel", space: str, data) -> None:
        if space not in (B1, B2, M1):
            raise WrongSpace("unknown space %r" % space)
        data = np.array(data, dtype=complex)
        expected = model.shape_of(space)
        if data.shape != expected:
            raise ShapeError("%s element of %r must have shape %s, got %s"
                             % (space, model, expected, data.shape))
        self.model = model
        self.space = space
        self.data = data

    def like(self, data) -> "BoxElement":
        return BoxElement(self.model, self.space, data)

    def adjoint(self) -> "BoxElement":
        return self.like(self.model.adjoint_raw(self.space, self.data))

    def _check(self, other: "BoxElement") -> None:
        if not isinstance(other, BoxElement):
            raise TypeError("expected a BoxElement, got %r" % type(other))
        if other.model != self.model:
            raise ModelMismatch("%r vs %r" % (self.model, other.model))
        if not same_space(self.space, other.space):
            raise WrongSpace("%s vs %s" % (self.space, other.space))

    def __add__(self, other: "BoxElement") -> "BoxElement":
        self._check(other)
        return self.like(self.data + other.data)

    def __sub__(self, other: "BoxElement") -> "BoxElement":
        self._check(other)
        return self.like(self.data - other.data)

    def __neg__(self) -> "BoxElement":
        return self.like(-self.data)

    def __mul__(self, scalar) -> "BoxElement":
        return self.like(self.data * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "BoxElement":
        return self.like(self.data / scalar)

    def __matmul__(self, other: "BoxElement") -> "BoxElement":
        """The algebra product of the space (entrywise for `Spin` B₂)."""
        self._check(other)
        return self.like(self.model.product_raw(self.space, self.data, other.data))

    def norm(self) -> float:
        return norm2(self.data)

    def __eq__(self, other) -> bool:
        return (isinstance(other, BoxElement) and other.model == self.model
                and same_space(other.space, self.space)
                and np.array_equal(other.data, self.data))

    def __hash__(self):
        return hash((self.model, self.space, self.data.tobytes()))

    def __repr__(self) -> str:
        return "<BoxElement: %s of %r, shape=%s>" % (self.space, self.model, self.data.shape)


def same_space(a: str, b: str) -> bool:
    return a == b or (a in _MATRIX_SPACES and b in _MATRIX_SPACES)


def _require(x: BoxElement, model: "InclusionModel", space: str) -> np.ndarray:
    if not isinstance(x, BoxElement):
        raise WrongSpace("expected a %s BoxElement, got %r" % (space, type(x)))
    if x.model != model:
        raise ModelMismatch("%r vs %r" % (x.model, model))
    if not same_space(x.space, space):
        raise WrongSpace("expected an element of %s, got %s" % (space, x.space))
    return x.data


class InclusionModel:
    """Common interface of the desk models.

    The `*_raw` methods work on bare arrays in the fixed coordinates and are
    what the other modules build on; the module-level operations wrap them
    with space checking.

    Members:
        kind (str): `"spin"` or `"full"`
        n (int): the size parameter
        lam (float): λ (the inverse index)
        dim_m (int): complex dimension of M
        gns_dim (int): dimension of L²(M)"""

    kind = ""

    def __init__(self, n: int) -> None:
        n = int(n)
        if n < 1:
            raise ShapeError("model size must be positive, got %d" % n)
        self.n = n

    # -- identity

    def __eq__(self, other) -> bool:
        return type(other) == type(self) and other.n == self.n

    def __hash__(self):
        return hash((self.kind, self.n))

    def __repr__(self) -> str:
        return "%s(%d)" % (type(self).__name__, self.n)

    # -- shapes and traces

    def shape_of(self, space: str):
        raise NotImplementedError

    def tau_m(self, x: np.ndarray) -> complex:
        """Normalized trace on M."""
        return complex(np.trace(x)) / self.n

    # -- L²(M)

    def as_m(self, x) -> np.ndarray:
        """Coerces an element of M to its `n×n` matrix form."""
        m = np.array(x, dtype=complex)
        if m.shape != (self.n, self.n):
            raise ShapeError("element of M for %r must have shape %s, got %s"
                             % (self, (self.n, self.n), m.shape))
        return m

    def vec1(self) -> np.ndarray:
        return self.vec(np.eye(self.n))

    def m_basis(self) -> List[np.ndarray]:
        """Matrix units spanning M."""
        return [self.unvec(e) for e in np.eye(self.gns_dim)]

    def ip(self, x: np.ndarray, y: np.ndarray) -> complex:
        """`τ(x*y)` for elements of M."""
        return complex(np.vdot(self.vec(x), self.vec(y))) / self.n

    # -- B₂ convolution and action

    def act(self, z: np.ndarray, x: np.ndarray) -> np.ndarray:
        """`x * z`: the bimodule map with multiplier `z` applied to `x ∈ M`."""
        return self.unvec(self.f2(z) @ self.vec(self.as_m(x)))

    def convolve_raw(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.f2_inv(self.f2(y) @ self.f2(x))

    def adjoint_raw(self, space: str, x: np.ndarray) -> np.ndarray:
        return dagger(x)

    def product_raw(self, space: str, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return x @ y

    def b2_sqrt(self, z: np.ndarray, tol: Optional[Tolerances] = None) -> np.ndarray:
        return psd_sqrt(z, tol)

    def b2_power(self, z: np.ndarray, alpha: float, tol: Optional[Tolerances] = None) -> np.ndarray:
        return psd_power(z, alpha, tol)

    def b2_range(self, z: np.ndarray, tol: Optional[Tolerances] = None) -> np.ndarray:
        return range_projection_matrix(z, tol)

    def b2_min_eig(self, z: np.ndarray):
        """Smallest eigenvalue of a B₂ element and a witness projection."""
        h = (z + dagger(z)) / 2
        values, vectors = np.linalg.eigh(h)
        v = vectors[:, :1]
        return float(values[0]), v @ dagger(v)

    def b1_identity(self) -> np.ndarray:
        return np.eye(self.gns_dim, dtype=complex)


class Spin(InclusionModel):
    """ℂ ⊂ ℂⁿ with λ = 1/n and a commutative B₂."""

    kind = "spin"

    def __init__(self, n: int) -> None:
        super().__init__(n)
        self.lam = 1.0 / n
        self.dim_m = n
        self.gns_dim = n
        self.dim_b2 = n * n

    def shape_of(self, space: str):
        return (self.n, self.n)

    def as_m(self, x) -> np.ndarray:
        m = np.array(x, dtype=complex)
        if m.shape == (self.n,):
            return np.diag(m)
        m = super().as_m(m)
        if np.any(m[~np.eye(self.n, dtype=bool)] != 0):
            raise ShapeError("element of M for %r must be diagonal" % self)
        return m

    def vec(self, x: np.ndarray) -> np.ndarray:
        return np.diagonal(np.asarray(x)).astype(complex)

    def unvec(self, v: np.ndarray) -> np.ndarray:
        return np.diag(np.asarray(v, dtype=complex))

    def left(self, a: np.ndarray) -> np.ndarray:
        return np.diag(self.vec(a))

    right = left

    def f1(self, x: np.ndarray) -> np.ndarray:
        return np.sqrt(self.n) * x

    def f1_inv(self, z: np.ndarray) -> np.ndarray:
        return z / np.sqrt(self.n)

    def f2(self, z: np.ndarray) -> np.ndarray:
        return z.T / np.sqrt(self.n)

    def f2_inv(self, x: np.ndarray) -> np.ndarray:
        return np.sqrt(self.n) * x.T

    def c1(self, x: np.ndarray) -> np.ndarray:
        return x.T

    def c2(self, z: np.ndarray) -> np.ndarray:
        return z.T

    def adjoint_raw(self, space: str, x: np.ndarray) -> np.ndarray:
        if space == B2:
            return np.conj(x)
        return dagger(x)

    def product_raw(self, space: str, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        if space == B2:
            return x * y
        return x @ y

    def b2_identity(self) -> np.ndarray:
        return np.ones((self.n, self.n), dtype=complex)

    def e2(self) -> np.ndarray:
        return np.eye(self.n, dtype=complex)

    def e1(self) -> np.ndarray:
        return np.ones((self.n, self.n), dtype=complex) / self.n

    def tau1(self, x: np.ndarray) -> complex:
        return complex(np.trace(x)) / self.n

    def tau2(self, z: np.ndarray) -> complex:
        return complex(np.sum(z)) / self.n ** 2

    def embed_raw(self, x: np.ndarray) -> np.ndarray:
        return self.as_m(x)

    def cond_expect_m_raw(self, y: np.ndarray) -> np.ndarray:
        return np.diag(np.diagonal(y))

    def cond_expect_m1_raw(self, z: np.ndarray) -> np.ndarray:
        """E_{M₁} on B₂: the row average."""
        return np.repeat(np.mean(z, axis=1, keepdims=True), self.n, axis=1)

    def b2_sqrt(self, z: np.ndarray, tol: Optional[Tolerances] = None) -> np.ndarray:
        return np.sqrt(self._b2_nonneg(z, tol)).astype(complex)

    def b2_power(self, z: np.ndarray, alpha: float, tol: Optional[Tolerances] = None) -> np.ndarray:
        tol = tolerances(tol)
        r = self._b2_nonneg(z, tol)
        keep = r > tol.positivity * (1.0 + np.max(r, initial=0.0))
        out = np.zeros_like(r)
        out[keep] = r[keep] ** alpha
        return out.astype(complex)

    def b2_range(self, z: np.ndarray, tol: Optional[Tolerances] = None) -> np.ndarray:
        tol = tolerances(tol)
        mag = np.abs(z)
        top = float(np.max(mag, initial=0.0))
        if top == 0.0:
            return np.zeros_like(z, dtype=complex)
        return (mag > tol.positivity * max(1.0, top)).astype(complex)

    def b2_min_eig(self, z: np.ndarray):
        r = np.real(z)
        j, k = np.unravel_index(np.argmin(r), r.shape)
        witness = np.zeros_like(z, dtype=complex)
        witness[j, k] = 1.0
        return float(r[j, k]), witness

    def _b2_nonneg(self, z: np.ndarray, tol: Optional[Tolerances]) -> np.ndarray:
        tol = tolerances(tol)
        scale = 1.0 + float(np.max(np.abs(z), initial=0.0))
        if np.max(np.abs(np.imag(z)), initial=0.0) > tol.hermitian * scale:
            raise NotPositive("spin B2 element has non-real entries")
        r = np.real(z)
        if np.min(r, initial=0.0) < -tol.positivity * scale:
            raise NotPositive("spin B2 element has a negative entry %.3g" % np.min(r),
                              float(np.min(r)))
        return np.clip(r, 0.0, None)


class FullMatrix(InclusionModel):
    """ℂ ⊂ Mₙ(ℂ) with λ = 1/n² and B₂ ≅ Mₙ⊗Mₙ."""

    kind = "full"

    def __init__(self, n: int) -> None:
        super().__init__(n)
        self.lam = 1.0 / n ** 2
        self.dim_m = n * n
        self.gns_dim = n * n
        self.dim_b2 = n * n

    def shape_of(self, space: str):
        return (self.n ** 2, self.n ** 2)

    def vec(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=complex).reshape(-1)

    def unvec(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(v, dtype=complex).reshape(self.n, self.n)

    def left(self, a: np.ndarray) -> np.ndarray:
        return np.kron(a, np.eye(self.n))

    def right(self, b: np.ndarray) -> np.ndarray:
        return np.kron(np.eye(self.n), np.asarray(b).T)

    def _four(self, x: np.ndarray) -> np.ndarray:
        n = self.n
        return np.asarray(x).reshape(n, n, n, n)

    def _two(self, x4: np.ndarray) -> np.ndarray:
        return x4.reshape(self.n ** 2, self.n ** 2)

    def f1(self, x: np.ndarray) -> np.ndarray:
        # E_{(j,k),(p,q)} -> E_{k,j} ⊗ E_{q,p}
        return self._two(np.einsum("jkpq->kqjp", self._four(x)))

    def f1_inv(self, z: np.ndarray) -> np.ndarray:
        return self._two(np.einsum("kqjp->jkpq", self._four(z)))

    def f2(self, z: np.ndarray) -> np.ndarray:
        return self._two(np.einsum("cadb->abcd", self._four(z)))

    def f2_inv(self, x: np.ndarray) -> np.ndarray:
        return self._two(np.einsum("abcd->cadb", self._four(x)))

    def c1(self, x: np.ndarray) -> np.ndarray:
        # L_a R_b -> L_b R_a
        return self._two(self._four(x).transpose(3, 2, 1, 0))

    def c2(self, z: np.ndarray) -> np.ndarray:
        # X ⊗ Y -> Yᵀ ⊗ Xᵀ
        return self._two(self._four(z).transpose(3, 2, 1, 0))

    def b2_identity(self) -> np.ndarray:
        return np.eye(self.n ** 2, dtype=complex)

    def omega(self) -> np.ndarray:
        return self.vec1() / np.sqrt(self.n)

    def e2(self) -> np.ndarray:
        w = self.omega()
        return np.outer(w, np.conj(w))

    def e1(self) -> np.ndarray:
        v = self.vec1()
        return np.outer(v, np.conj(v)) / self.n

    def tau1(self, x: np.ndarray) -> complex:
        return complex(np.trace(x)) / self.n ** 2

    def tau2(self, z: np.ndarray) -> complex:
        return complex(np.trace(z)) / self.n ** 2

    def embed_raw(self, x: np.ndarray) -> np.ndarray:
        return self.left(self.as_m(x))

    def cond_expect_m_raw(self, y: np.ndarray) -> np.ndarray:
        return np.einsum("ikjk->ij", self._four(y)) / self.n

    def cond_expect_m1_raw(self, z: np.ndarray) -> np.ndarray:
        """E_{M₁} on B₂: normalized partial trace over the second factor."""
        reduced = np.einsum("abcb->ac", self._four(z)) / self.n
        return np.kron(reduced, np.eye(self.n))


def spin(n: int) -> Spin:
    return Spin(n)


def full_matrix(n: int) -> FullMatrix:
    return FullMatrix(n)


def model_from(kind: str, n: int) -> InclusionModel:
    if kind == "spin":
        return Spin(n)
    if kind == "full":
        return FullMatrix(n)
    raise ShapeError("unknown model kind %r" % kind)


# -- operations


def b1(model: InclusionModel, data) -> BoxElement:
    return BoxElement(model, B1, data)


def b2(model: InclusionModel, data) -> BoxElement:
    return BoxElement(model, B2, data)


def fourier(model: InclusionModel, x: BoxElement) -> BoxElement:
    """B₁ → B₂."""
    return b2(model, model.f1(_require(x, model, B1)))


def inverse_fourier(model: InclusionModel, y: BoxElement) -> BoxElement:
    """B₂ → B₁, the inverse of [[fourier]]."""
    return b1(model, model.f1_inv(_require(y, model, B2)))


def transfer(model: InclusionModel, y: BoxElement) -> BoxElement:
    """B₂ → B₁: the transfer matrix of the bimodule map with multiplier `y`."""
    return b1(model, model.f2(_require(y, model, B2)))


def multiplier(model: InclusionModel, t) -> BoxElement:
    """B₁ → B₂, the inverse of [[transfer]]."""
    if isinstance(t, BoxElement):
        t = _require(t, model, B1)
    return b2(model, model.f2_inv(require_square(t, "transfer matrix")))


def contragredient(model: InclusionModel, x: BoxElement) -> BoxElement:
    if not isinstance(x, BoxElement):
        raise WrongSpace("expected a box space element, got %r" % type(x))
    if x.model != model:
        raise ModelMismatch("%r vs %r" % (x.model, model))
    if x.space == B2:
        return x.like(model.c2(x.data))
    return x.like(model.c1(x.data))


def convolve(model: InclusionModel, x: BoxElement, y: BoxElement) -> BoxElement:
    """`x * y`, so that `transfer(x * y) = transfer(y)·transfer(x)`."""
    return b2(model, model.convolve_raw(_require(x, model, B2), _require(y, model, B2)))


def trace(model: InclusionModel, x, space: Optional[str] = None) -> complex:
    """Normalized trace of `x` in `space` (taken from `x` when it is a
    [[BoxElement]]; `"M"` for bare matrices)."""
    if isinstance(x, BoxElement):
        if space is not None and not same_space(space, x.space):
            raise WrongSpace("element of %s traced in %s" % (x.space, space))
        if x.model != model:
            raise ModelMismatch("%r vs %r" % (x.model, model))
        return model.tau2(x.data) if x.space == B2 else model.tau1(x.data)
    if space not in (None, "M"):
        raise WrongSpace("bare matrices are elements of M, not %s" % space)
    return model.tau_m(model.as_m(x))


def jones_e1(model: InclusionModel) -> BoxElement:
    return b1(model, model.e1())


def jones_e2(model: InclusionModel) -> BoxElement:
    return b2(model, model.e2())


def identity(model: InclusionModel, space: str) -> BoxElement:
    if space == B2:
        return b2(model, model.b2_identity())
    return BoxElement(model, space, model.b1_identity())


def embed(model: InclusionModel, x) -> BoxElement:
    return BoxElement(model, M1, model.embed_raw(x))


def cond_expect_M(model: InclusionModel, y: BoxElement) -> np.ndarray:
    return model.cond_expect_m_raw(_require(y, model, M1))


def cond_expect_N(model: InclusionModel, x) -> np.ndarray:
    """E_N(x) = τ(x)·1 since N = ℂ."""
    return model.tau_m(model.as_m(x)) * np.eye(model.n, dtype=complex)


def cond_expect_M1(model: InclusionModel, z: BoxElement) -> BoxElement:
    return b2(model, model.cond_expect_m1_raw(_require(z, model, B2)))


def range_projection(x: BoxElement, tol: Optional[Tolerances] = None) -> BoxElement:
    if x.space == B2:
        return x.like(x.model.b2_range(x.data, tol))
    return x.like(range_projection_matrix(x.data, tol))


def superoperator(model: InclusionModel, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Matrix of a linear map on M in the L²(M) coordinates."""
    columns = [model.vec(model.as_m(fn(x))) for x in model.m_basis()]
    return np.stack(columns, axis=1)
