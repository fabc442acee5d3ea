import copy
import logging
import os
from typing import Iterable, List, Optional

import numpy as np

log = logging.getLogger(__name__)


class BQMSError(RuntimeError):
    """Base class of every error raised by this package."""


class NotHermitian(BQMSError):
    def __init__(self, message: str, residual: float = float("nan")) -> None:
        super().__init__(message)
        self.residual = residual


class NotPositive(BQMSError):
    def __init__(self, message: str, eigenvalue: float = float("nan"), witness=None) -> None:
        super().__init__(message)
        self.eigenvalue = eigenvalue
        self.witness = witness


class SingularForLog(BQMSError): pass
class WrongSpace(BQMSError): pass
class NotBimodule(BQMSError): pass
class ModelMismatch(BQMSError): pass
class NotPowerBounded(BQMSError): pass
class NotPositiveDensity(BQMSError): pass
class NegativeTime(BQMSError): pass
class DegenerateGauge(BQMSError): pass
class NotConnected(BQMSError): pass
class InvalidDelta(BQMSError): pass
class NotErgodic(BQMSError): pass
class NotSymmetric(BQMSError): pass
class NotCommuting(BQMSError): pass
class SingularD(BQMSError): pass
class IllConditioned(BQMSError): pass
class SupportViolation(BQMSError): pass
class NotInRange(BQMSError): pass
class NoBeta(BQMSError): pass
class NoCandidate(BQMSError): pass
class RelationViolation(BQMSError): pass
class ShapeError(BQMSError): pass


class ParseError(BQMSError):
    def __init__(self, message: str, line: int = 0, column: int = 0) -> None:
        super().__init__("%s (line %d, column %d)" % (message, line, column))
        self.line = line
        self.column = column


class VerificationFailure(BQMSError):
    def __init__(self, failed: List[str]) -> None:
        super().__init__("failed checks: %s" % ", ".join(failed))
        self.failed = list(failed)


class Tolerances:
    """The one numeric tolerance policy shared by every check.

    Members:
        hermitian (float): relative bound on ‖A − A*‖₂
        positivity (float): eigenvalue floor; `λ_min ≥ −positivity·(1+‖A‖₂)`
            counts as positive
        equality (float): relative bound for identities between matrices
        cluster (float): relative gap below which eigenvalues are merged
        log_cutoff (float): relative eigenvalue cutoff for `log`, `sqrt` and
            fractional powers
        condition (float): largest accepted condition number of a normal
            equations system"""

    FIELDS = ("hermitian", "positivity", "equality", "cluster", "log_cutoff", "condition")

    def __init__(self, hermitian=1e-10, positivity=1e-10, equality=1e-9,
                 cluster=1e-9, log_cutoff=1e-12, condition=1e12) -> None:
        self.hermitian = float(hermitian)
        self.positivity = float(positivity)
        self.equality = float(equality)
        self.cluster = float(cluster)
        self.log_cutoff = float(log_cutoff)
        self.condition = float(condition)

    def replace(self, **overrides) -> "Tolerances":
        unknown = [k for k in overrides if k not in self.FIELDS]
        if unknown:
            raise ParseError("unknown tolerance key(s): %s" % ", ".join(sorted(unknown)))
        result = copy.copy(self)
        for k, v in overrides.items():
            setattr(result, k, float(v))
        return result

    def scaled(self, factor: float) -> "Tolerances":
        # the condition bound is a ceiling, so it is never scaled
        return self.replace(**{k: getattr(self, k) * factor
                               for k in self.FIELDS if k != "condition"})

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.FIELDS}

    def __eq__(self, other) -> bool:
        return isinstance(other, Tolerances) and self.as_dict() == other.as_dict()

    def __repr__(self) -> str:
        return "<Tolerances: %s>" % ", ".join("%s=%g" % kv for kv in self.as_dict().items())


def _env_scale() -> float:
    raw = os.environ.get("BQMS_TOL_SCALE")
    if raw is None:
        return 1.0
    try:
        scale = float(raw)
        if not scale > 0:
            raise ValueError(raw)
        return scale
    except ValueError:
        log.warning("ignoring unparsable BQMS_TOL_SCALE=%r", raw)
        return 1.0


def tolerances(tol: Optional[Tolerances] = None) -> Tolerances:
    """Returns `tol` if given, otherwise the process default scaled by the
    `BQMS_TOL_SCALE` environment variable."""
    if tol is not None:
        return tol
    return Tolerances().scaled(_env_scale())


def norm2(a: np.ndarray) -> float:
    """Spectral norm of a matrix, or the Euclidean norm of a vector."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    if a.ndim < 2:
        return float(np.linalg.norm(a))
    return float(np.linalg.norm(a, 2))


def within(residual: float, tol: float, scale: float = 0.0) -> bool:
    """`residual ≤ tol·(1 + scale)`, the relative comparison used everywhere."""
    return residual <= tol * (1.0 + scale)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.asarray(a)).T


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return (a + dagger(a)) / 2


def as_complex_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerces to a 2-dimensional complex array with finite entries."""
    m = np.array(a, dtype=complex)
    if m.ndim != 2:
        raise ShapeError("%s must be 2-dimensional, got shape %s" % (name, m.shape))
    if not np.all(np.isfinite(m)):
        raise ShapeError("%s has non-finite entries" % name)
    return m


def require_square(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    m = as_complex_matrix(a, name)
    if m.shape[0] != m.shape[1]:
        raise ShapeError("%s must be square, got shape %s" % (name, m.shape))
    return m


def failed_names(checks: Iterable) -> List[str]:
    """Names of the failed entries of a list of `(name, residual, tol, passed)`."""
    return [name for name, _, _, passed in checks if not passed]
