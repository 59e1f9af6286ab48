"""Shared constructions for the test modules."""
import numpy as np

from fermikit.car import FockSpace, LatticeState, algebra_A, grading_operator, subsets, zeta
from fermikit.duality import conjugation_map, mixture_map
from fermikit.numlin import dagger


def lattice(n=2, sites=(1,), probs=None, iota=None):
    """Fock space, grading, A(I), A(L \\ I), state and zeta for a small chain."""
    fs = FockSpace(n)
    sites = tuple(sites)
    iota = iota or {l: l + len(sites) for l in sites}
    ss = subsets(sites)
    if probs is None:
        probs = {s: 1.0 / len(ss) for s in ss}
    st = LatticeState(sites, probs, iota)
    comp = tuple(l for l in fs.sites if l not in sites)
    return {"fs": fs, "g": grading_operator(fs), "alg": algebra_A(sites, fs),
            "comp": algebra_A(comp, fs), "st": st, "z": zeta(st, fs)}


def random_even_unitary(rng, alg, g):
    """``exp(iH)`` for a random even Hermitian H in the algebra."""
    c = rng.standard_normal(alg.dim) + 1j * rng.standard_normal(alg.dim)
    h = alg.element(c)
    h = 0.5 * (h + dagger(h))
    h = 0.5 * (h + g.gamma @ h @ g.gamma)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(1j * w)) @ dagger(v)


def random_even_channel(rng, alg, g, terms=3):
    """Mixture of conjugations by even unitaries of ``alg``: even, unital, CP, trace preserving."""
    w = rng.dirichlet(np.ones(terms))
    return mixture_map([(float(wi), conjugation_map(alg, random_even_unitary(rng, alg, g)))
                        for wi in w])
