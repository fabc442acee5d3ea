from typing import Callable, Iterable, List, Mapping, Optional, Sequence, Tuple, Union
import numpy as np

TMatrix = np.ndarray
"""A dense complex matrix. Elements of M are always carried as `n×n` matrices
(diagonal ones in a spin model); elements of M₁ and the box spaces are carried
in the matrix representation fixed by their [[InclusionModel]]."""


TVector = np.ndarray
"""A vector in the GNS space L²(M), laid out by `vec(x)[j·n+k] = x[j,k]`
for a full matrix model, and as the diagonal of `x` for a spin model."""


TSpace = str
"""One of `"B1"`, `"B2"`, `"M1"`. Since N = ℂ in every model here, B1 and
M1 are the same matrix algebra and the tags are interchangeable."""


TMatFun = Union[str, Tuple[str, float]]
"""A spectral function accepted by [[bqms.numerics.mat_fun]]: one of
`"exp"`, `"log"`, `"sqrt"`, `"positive_part"` or `("power", alpha)`."""


TIntegrand = Callable[[float], np.ndarray]
"""A scalar- or matrix-valued function of one real variable, integrated by
[[bqms.numerics.gauss_legendre]]."""


TLinearMap = Callable[[np.ndarray], np.ndarray]
"""A linear map on matrices, e.g. a channel applied to an element of M."""


TGrid = Sequence[float]
"""An increasing sequence of nonnegative times."""


TOverrides = Mapping[str, float]
"""Tolerance overrides keyed by [[bqms.util.Tolerances]] attribute name."""


TCheck = Tuple[str, float, float, bool]
"""A named verification result: `(check name, residual, tolerance, passed)`."""


TChecks = List[TCheck]
"""A list of objects of type [[TCheck]]."""


TJSONMatrix = Iterable[Iterable[Union[float, Tuple[float, float], List[float]]]]
"""A matrix in a scenario file: nested lists of either plain reals or
`[re, im]` pairs."""


TMaybeFloat = Optional[float]
"""Either a float or `None`."""


TField = List[np.ndarray]
"""A vector field: one element of M₁ per entry of a [[JointSpectrum]]."""
