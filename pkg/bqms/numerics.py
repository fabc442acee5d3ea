"""Dense complex-matrix kernels, and the independent oracles (Taylor
exponential, Gauss-Legendre quadrature) the other modules are checked against."""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from numpy.polynomial.legendre import leggauss

from .types import TIntegrand, TMatFun
from .util import (NotHermitian, NotPositive, SingularForLog, Tolerances,
                   dagger, norm2, require_square, tolerances, within)

log = logging.getLogger(__name__)


class HermEig:
    """Eigendecomposition of a Hermitian matrix.

    Members:
        values (np.ndarray): real eigenvalues, ascending
        vectors (np.ndarray): unitary matrix whose columns are eigenvectors"""

    def __init__(self, values: np.ndarray, vectors: np.ndarray) -> None:
        self.values = values
        self.vectors = vectors

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ dagger(self.vectors)

    def apply(self, fn) -> np.ndarray:
        """Applies a function of the (real) eigenvalues in the eigenbasis."""
        return (self.vectors * fn(self.values)) @ dagger(self.vectors)

    def __repr__(self) -> str:
        return "<HermEig: values=%s>" % np.array2string(self.values, precision=6)


def hermitian_residual(a: np.ndarray) -> float:
    return norm2(a - dagger(a))


def herm_eig(a, tol: Optional[Tolerances] = None) -> HermEig:
    tol = tolerances(tol)
    a = require_square(a)
    residual = hermitian_residual(a)
    if not within(residual, tol.hermitian, norm2(a)):
        raise NotHermitian("matrix is not Hermitian (residual %.3g)" % residual, residual)
    values, vectors = scipy.linalg.eigh((a + dagger(a)) / 2)
    return HermEig(values, vectors)


def _parse_fun(f: TMatFun) -> Tuple[str, float]:
    if isinstance(f, tuple):
        name, alpha = f
        return name, float(alpha)
    return f, 1.0


def mat_fun(a, f: TMatFun, tol: Optional[Tolerances] = None) -> np.ndarray:
    """Applies `f` on the spectrum of a Hermitian matrix.

    Arguments:
        a: a Hermitian matrix; strictly positive for `log`, `sqrt` and
            non-integer powers
        f: `"exp"`, `"log"`, `"sqrt"`, `"positive_part"` or `("power", α)`

    Returns:
        the matrix `f(a)`

    Raises:
        NotHermitian, SingularForLog"""
    tol = tolerances(tol)
    name, alpha = _parse_fun(f)
    eig = herm_eig(a, tol)

    if name == "exp":
        return eig.apply(np.exp)
    if name == "positive_part":
        return eig.apply(lambda v: np.clip(v, 0.0, None))
    if name == "power" and float(alpha).is_integer() and alpha >= 0:
        return eig.apply(lambda v: v ** int(alpha))

    cutoff = tol.log_cutoff * max(norm2(a), 1.0)
    if eig.values[0] <= cutoff:
        raise SingularForLog("eigenvalue %.3g is below the cutoff %.3g for %s"
                             % (eig.values[0], cutoff, name))
    if name == "log":
        return eig.apply(np.log)
    if name == "sqrt":
        return eig.apply(np.sqrt)
    if name == "power":
        return eig.apply(lambda v: v ** alpha)
    raise ValueError("unknown matrix function %r" % (f,))


def min_eigenvalue(a) -> Tuple[float, np.ndarray]:
    """Smallest eigenvalue of the Hermitian part of `a` and its eigenvector."""
    a = require_square(a)
    values, vectors = scipy.linalg.eigh((a + dagger(a)) / 2)
    return float(values[0]), vectors[:, 0]


def is_positive(a, tol: Optional[Tolerances] = None) -> bool:
    tol = tolerances(tol)
    a = require_square(a)
    if not within(hermitian_residual(a), tol.hermitian, norm2(a)):
        return False
    value, _ = min_eigenvalue(a)
    return value >= -tol.positivity * (1.0 + norm2(a))


def psd_sqrt(a, tol: Optional[Tolerances] = None) -> np.ndarray:
    """Square root of a positive semidefinite matrix, singular allowed.

    Eigenvalues inside the positivity floor are treated as zero; anything
    more negative is an error, never clamped."""
    tol = tolerances(tol)
    eig = herm_eig(a, tol)
    floor = tol.positivity * (1.0 + norm2(a))
    if eig.values[0] < -floor:
        raise NotPositive("matrix has eigenvalue %.3g" % eig.values[0],
                          eig.values[0], eig.vectors[:, 0])
    return eig.apply(lambda v: np.sqrt(np.clip(v, 0.0, None)))


def psd_power(a, alpha: float, tol: Optional[Tolerances] = None) -> np.ndarray:
    """`a^α` on the support of a positive semidefinite matrix (zero elsewhere)."""
    tol = tolerances(tol)
    eig = herm_eig(a, tol)
    floor = tol.positivity * (1.0 + norm2(a))
    if eig.values[0] < -floor:
        raise NotPositive("matrix has eigenvalue %.3g" % eig.values[0], eig.values[0])
    keep = eig.values > floor
    powered = np.zeros_like(eig.values)
    powered[keep] = eig.values[keep] ** alpha
    return (eig.vectors * powered) @ dagger(eig.vectors)


def range_projection_matrix(a, tol: Optional[Tolerances] = None) -> np.ndarray:
    """Projection onto the column space of `a`."""
    tol = tolerances(tol)
    a = require_square(a)
    u, s, _ = scipy.linalg.svd(a)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros_like(a)
    keep = s > tol.positivity * max(1.0, s[0])
    q = u[:, keep]
    return q @ dagger(q)


def expm_general(a) -> np.ndarray:
    return scipy.linalg.expm(require_square(a))


def expm_taylor(a, terms: int = 24) -> np.ndarray:
    """Scaled-and-squared truncated Taylor series: the reference for
    [[expm_general]]."""
    a = require_square(a)
    squarings = max(0, int(np.ceil(np.log2(max(norm2(a), 1e-300)))) + 1)
    scaled = a / (2 ** squarings)
    result = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, terms + 1):
        term = term @ scaled / k
        result = result + term
    for _ in range(squarings):
        result = result @ result
    return result


def gauss_legendre(f: TIntegrand, interval: Tuple[float, float] = (0.0, 1.0),
                   nodes: int = 64):
    """Integrates `f` over `interval` with an n-point Gauss-Legendre rule."""
    lo, hi = interval
    x, w = leggauss(nodes)
    half = (hi - lo) / 2.0
    mid = (hi + lo) / 2.0
    total = None
    for xi, wi in zip(x, w):
        value = wi * np.asarray(f(mid + half * xi))
        total = value if total is None else total + value
    return half * total


def log_mean(a, b) -> np.ndarray:
    """Logarithmic mean `(a − b)/(log a − log b)` of positive arrays, with
    the limit `a` on the diagonal `a = b`."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x = np.log(a) - np.log(b)
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, b * (1.0 + x / 2.0 + x * x / 6.0), b * np.expm1(safe) / safe)


def cluster(values: Sequence[float], tol: Optional[Tolerances] = None) -> List[List[int]]:
    """Groups the indices of ascending `values` whose consecutive gaps are
    within the relative cluster tolerance."""
    tol = tolerances(tol)
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return []
    gap = tol.cluster * (1.0 + float(np.max(np.abs(values))))
    groups = [[0]]
    for i in range(1, values.size):
        if values[i] - values[groups[-1][-1]] <= gap:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def null_space(a, tol: Optional[Tolerances] = None) -> np.ndarray:
    """Orthonormal basis (columns) of the kernel of `a`."""
    tol = tolerances(tol)
    a = np.asarray(a, dtype=complex)
    return scipy.linalg.null_space(a, rcond=tol.equality)
