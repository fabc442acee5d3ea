"""Seeded random elements for checks and test instances.

Every sampler takes a `numpy.random.Generator`, so a scenario seed fixes
everything downstream."""

from typing import Optional

import numpy as np

from .inclusion import BoxElement, FullMatrix, InclusionModel, b2
from .util import dagger


def rng(seed: Optional[int] = None) -> np.random.Generator:
    return np.random.default_rng(seed)


def ginibre(gen: np.random.Generator, rows: int, cols: Optional[int] = None) -> np.ndarray:
    cols = rows if cols is None else cols
    return gen.standard_normal((rows, cols)) + 1j * gen.standard_normal((rows, cols))


def hermitian(gen: np.random.Generator, d: int, scale: float = 1.0) -> np.ndarray:
    g = ginibre(gen, d)
    h = (g + dagger(g)) / 2
    return scale * h / max(np.linalg.norm(h, 2), 1e-300)


def unitary(gen: np.random.Generator, d: int) -> np.ndarray:
    q, r = np.linalg.qr(ginibre(gen, d))
    phases = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * phases


def psd(gen: np.random.Generator, d: int, rank: Optional[int] = None) -> np.ndarray:
    g = ginibre(gen, d, d if rank is None else rank)
    return g @ dagger(g) / d


def m_element(gen: np.random.Generator, model: InclusionModel) -> np.ndarray:
    """A random (generally non-Hermitian) element of M."""
    if model.kind == "spin":
        return model.unvec(ginibre(gen, 1, model.n)[0])
    return ginibre(gen, model.n)


def self_adjoint(gen: np.random.Generator, model: InclusionModel) -> np.ndarray:
    x = m_element(gen, model)
    return (x + dagger(x)) / 2


def traceless(gen: np.random.Generator, model: InclusionModel, hermitian_only: bool = False) -> np.ndarray:
    x = self_adjoint(gen, model) if hermitian_only else m_element(gen, model)
    return x - model.tau_m(x) * np.eye(model.n)


def density(gen: np.random.Generator, model: InclusionModel, condition: float = 50.0) -> np.ndarray:
    """A strictly positive element of M with τ(D) = 1 and bounded condition
    number."""
    n = model.n
    spectrum = np.exp(gen.uniform(0.0, np.log(condition), n))
    if model.kind == "spin":
        d = np.diag(spectrum).astype(complex)
    else:
        u = unitary(gen, n)
        d = (u * spectrum) @ dagger(u)
        d = (d + dagger(d)) / 2
    return d / model.tau_m(d).real


def positive_b2(gen: np.random.Generator, model: InclusionModel, rank: Optional[int] = None) -> BoxElement:
    if model.kind == "spin":
        return b2(model, gen.uniform(0.0, 1.0, (model.n, model.n)))
    return b2(model, psd(gen, model.dim_b2, rank))


def cp_multiplier(gen: np.random.Generator, model: InclusionModel, unital: bool = True) -> BoxElement:
    """Multiplier of a random completely positive map, rescaled to be
    unital when asked."""
    z = positive_b2(gen, model).data
    if not unital:
        return b2(model, z)
    if model.kind == "spin":
        t = z.T / np.sqrt(model.n)
        t = t / t.sum(axis=1, keepdims=True)
        return b2(model, np.sqrt(model.n) * t.T)
    # Kraus form: Φ(x) = Σ K_i* x K_i with Σ K_i* K_i normalized to 1
    values, vectors = np.linalg.eigh(z)
    kraus = [np.sqrt(max(v, 0.0)) * np.conj(vectors[:, i]).reshape(model.n, model.n)
             for i, v in enumerate(values)]
    total = sum(dagger(k) @ k for k in kraus)
    w, u = np.linalg.eigh(total)
    s = (u / np.sqrt(w)) @ dagger(u)
    kraus = [k @ s for k in kraus]
    return kraus_multiplier(model, kraus)


def kraus_multiplier(model: InclusionModel, kraus) -> BoxElement:
    """Multiplier of `x ↦ Σ K* x K` on a full matrix model."""
    if not isinstance(model, FullMatrix):
        raise TypeError("Kraus multipliers need a full matrix model")
    z = np.zeros((model.dim_b2, model.dim_b2), dtype=complex)
    for k in kraus:
        v = np.conj(np.asarray(k, dtype=complex)).reshape(-1)
        z += np.outer(v, np.conj(v))
    return b2(model, z)


def connected_l0(gen: np.random.Generator, model: InclusionModel) -> BoxElement:
    """A positive B₂ element orthogonal to e₂ with full support there."""
    if model.kind == "spin":
        t = gen.uniform(0.1, 1.0, (model.n, model.n))
        np.fill_diagonal(t, 0.0)
        return b2(model, np.sqrt(model.n) * t.T)
    q = np.eye(model.dim_b2) - model.e2()
    z = psd(gen, model.dim_b2)
    return b2(model, q @ z @ q)


def reversible_l0(gen: np.random.Generator, model: InclusionModel, d: np.ndarray) -> BoxElement:
    """A positive B₂ element orthogonal to e₂ whose generator is detailed
    balanced with respect to the density `d`.

    For a spin model the rate matrix is `s_jk·(d_k/d_j)^{1/2}` with `s`
    symmetric. For a full matrix model the jumps are the eigen-operators
    `U E_ab U*` of the modular group of `d`, weighted by `s_ab·(d_a/d_b)^{1/2}`,
    plus one dephasing jump commuting with `d`."""
    n = model.n
    if model.kind == "spin":
        dd = np.real(np.diagonal(d))
        s = gen.uniform(0.1, 1.0, (n, n))
        s = (s + s.T) / 2
        t = s * np.sqrt(dd[None, :] / dd[:, None])
        np.fill_diagonal(t, 0.0)
        return b2(model, np.sqrt(n) * t.T)

    values, u = np.linalg.eigh(d)
    s = gen.uniform(0.1, 1.0, (n, n))
    s = (s + s.T) / 2
    kraus = []
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            e = np.zeros((n, n))
            e[a, b] = 1.0
            weight = s[a, b] * np.sqrt(values[a] / values[b])
            kraus.append(np.sqrt(weight) * (u @ e @ dagger(u)))
    h = gen.standard_normal(n)
    h = h - h.mean()
    h = h / np.linalg.norm(h)
    kraus.append(u @ np.diag(h) @ dagger(u))
    return kraus_multiplier(model, kraus)
