"""Built-in instances with exactly known answers."""

from fractions import Fraction
from typing import List, Optional

import numpy as np

from .generator import Lindbladian, from_multiplier
from .inclusion import Spin, spin
from .symmetry import SymmetryDatum
from .util import Tolerances

F = Fraction

C4_TRANSITIONS = [
    [F(0), F(1, 3), F(1, 3), F(1, 3)],
    [F(1, 2), F(0), F(1, 4), F(1, 4)],
    [F(1, 4), F(1, 2), F(0), F(1, 4)],
    [F(1, 6), F(1, 2), F(1, 3), F(0)],
]
"""Transition probabilities of the four-point walk. Its generator is I − P
and the multiplier of Φ is 2Pᵀ."""

C4_DELTA = [
    [F(1), F(3, 2), F(3, 4), F(1, 2)],
    [F(2, 3), F(1), F(2), F(2)],
    [F(4, 3), F(1, 2), F(1), F(4, 3)],
    [F(2), F(1, 2), F(3, 4), F(1)],
]
"""Δ̂ with `Δ̂[k,j] = P[j,k]/P[k,j]`. The matrix as usually printed is its
Fourier image Δ̂ᵀ/2."""

C4_WITNESSES = [
    "t3 = 2*t2 and t3 = 1/2*t2",
    "t4 = 2*t2 and t4 = 1/3*t2",
    "t4 = 4/3*t3 and t4 = 2/3*t3",
]
"""Every forced edge violated by the spanning-tree solve rooted at t1."""

C4_QUOTED_CONTRADICTION = "t4 = 4*t3 and t4 = 2/3*t3"
"""The contradiction on the cycle t1, t3, t4 as it is usually quoted. The
quoted form reads the (3,4) ratio as 1/4; the printed Δ̂ has 3/4 there, which
forces t4 = 4/3*t3 instead. The path side t4 = 2/3*t3 agrees either way."""


def quoted_cycle_witness(witnesses: List[str]) -> Optional[str]:
    """The witness among `witnesses` that closes the same cycle as
    C4_QUOTED_CONTRADICTION, if any."""
    path_side = C4_QUOTED_CONTRADICTION.split(" and ")[1]
    for w in witnesses:
        if w.startswith("t4 = ") and w.endswith(" and " + path_side):
            return w
    return None


def _array(rows: List[List[Fraction]]) -> np.ndarray:
    return np.array([[float(x) for x in row] for row in rows], dtype=complex)


def c4_model() -> Spin:
    return spin(4)


def c4_transitions() -> np.ndarray:
    return _array(C4_TRANSITIONS)


def c4_generator(tol: Optional[Tolerances] = None) -> Lindbladian:
    """L = I − P on ℂ⁴, given through its multiplier."""
    model = c4_model()
    return from_multiplier(model, model.f2_inv(np.eye(4) - c4_transitions()), tol)


def c4_delta(tol: Optional[Tolerances] = None) -> SymmetryDatum:
    return SymmetryDatum(c4_model(), _array(C4_DELTA), tol=tol)
