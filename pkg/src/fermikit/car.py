"""Fock space, CAR operators, JKW matrix units and lattice states.

Basis vectors of the n-site Fock space are indexed by bitmasks: bit ``l-1`` is
set when site ``l`` is occupied.  ``f_s`` for an increasing site list ``s`` is
``a_{l1}^+ ... a_{lk}^+`` applied to the vacuum, which is the basis vector of
mask ``s`` with coefficient +1.  Site labels are 1-based everywhere.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import (DimensionMismatch, InvalidProbabilities, NoConvergence,
                     OverlappingSets)
from .graded import Grading, homogeneous_basis, klein_K
from .numlin import DEFAULT_TOL, dagger, fro, gram_schmidt_extend


# ---------------------------------------------------------------- subsets

def mask_of(sites):
    m = 0
    for l in sites:
        m |= 1 << (l - 1)
    return m


def sites_of(mask):
    out, l = [], 1
    while mask:
        if mask & 1:
            out.append(l)
        mask >>= 1
        l += 1
    return tuple(out)


def subset_key(sites):
    """Scenario-file key for a subset: ``"1,3"``; ``""`` for the empty set."""
    return ",".join(str(l) for l in sorted(sites))


def parse_subset_key(key):
    key = key.strip()
    if not key:
        return ()
    return tuple(int(t) for t in key.split(","))


def subsets(sites):
    """All subsets of ``sites`` as increasing tuples, ordered by bitmask."""
    sites = sorted(sites)
    out = []
    for r in range(1 << len(sites)):
        out.append(tuple(sites[i] for i in range(len(sites)) if r >> i & 1))
    return sorted(out, key=mask_of)


# ---------------------------------------------------------------- Fock space

@lru_cache(maxsize=16)
def _creators(n):
    d = 1 << n
    ops = []
    for l in range(1, n + 1):
        bit = 1 << (l - 1)
        below = bit - 1
        c = np.zeros((d, d), dtype=complex)
        for m in range(d):
            if m & bit:
                continue
            sign = -1.0 if bin(m & below).count("1") % 2 else 1.0
            c[m | bit, m] = sign
        c.setflags(write=False)
        ops.append(c)
    return tuple(ops)


@dataclass(frozen=True)
class FockSpace:
    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 0:
            raise ValueError(f"site count must be a non-negative integer, got {self.n!r}")
        if self.n > 12:
            raise ValueError("site count above 12 is outside the dense range")

    @property
    def dim(self):
        return 1 << self.n

    @property
    def sites(self):
        return tuple(range(1, self.n + 1))

    def _site(self, l):
        if not 1 <= l <= self.n:
            raise ValueError(f"site {l} outside 1..{self.n}")
        return l

    def vacuum(self):
        v = np.zeros(self.dim, dtype=complex)
        v[0] = 1.0
        return v

    def basis_vector(self, sites):
        """``a_{l1}^+ ... a_{lk}^+ f_empty`` for the given (not necessarily sorted) string."""
        v = self.vacuum()
        for l in reversed(list(sites)):
            v = creation(l, self) @ v
        return v


def creation(l, fs):
    fs._site(l)
    return _creators(fs.n)[l - 1]


def annihilation(l, fs):
    return dagger(creation(l, fs))


def number(l, fs):
    c = creation(l, fs)
    return c @ dagger(c)


def car_residual(fs):
    """Largest anticommutator defect over all pairs of sites."""
    d = fs.dim
    worst = 0.0
    for j in fs.sites:
        aj = annihilation(j, fs)
        for k in fs.sites:
            ak = annihilation(k, fs)
            r1 = fro(aj @ ak + ak @ aj)
            r2 = fro(dagger(aj) @ ak + ak @ dagger(aj) - (np.eye(d) if j == k else 0.0))
            worst = max(worst, r1 + r2)
    return worst


def grading_operator(fs):
    diag = np.array([-1.0 if bin(m).count("1") % 2 else 1.0 for m in range(fs.dim)])
    return Grading(np.diag(diag).astype(complex))


def k_operator(fs):
    diag = np.array([-1j if bin(m).count("1") % 2 else 1.0 for m in range(fs.dim)])
    return np.diag(diag)


# ---------------------------------------------------------------- JKW units

def jkw_units(fs):
    """Matrix units ``e[j-1, k, l]`` for site j, with k, l in {0, 1} for labels 1, 2."""
    n, d = fs.n, fs.dim
    e = np.zeros((n, 2, 2, d, d), dtype=complex)
    v = np.eye(d, dtype=complex)
    for j in range(1, n + 1):
        a = annihilation(j, fs)
        ad = creation(j, fs)
        e[j - 1, 0, 0] = a @ ad
        e[j - 1, 0, 1] = v @ a
        e[j - 1, 1, 0] = v @ ad
        e[j - 1, 1, 1] = ad @ a
        v = v @ (a @ ad - ad @ a)
    return e


def jkw_unitary(fs, units=None):
    """Unitary sending the tensor basis of M_2^{(x) n} onto the Fock basis.

    Column for tensor index (i_1, ..., i_n), site 1 most significant, is
    ``e_{i_1 1}(1) ... e_{i_n 1}(n) f_empty``.
    """
    e = jkw_units(fs) if units is None else units
    n, d = fs.n, fs.dim
    w = np.zeros((d, d), dtype=complex)
    vac = fs.vacuum()
    for col in range(d):
        idx = [(col >> (n - 1 - t)) & 1 for t in range(n)]
        v = vac
        for j in reversed(range(n)):
            v = e[j, idx[j], 0] @ v
        w[:, col] = v
    return w


def embedded_unit(n, j, k, l):
    """``I (x) ... (x) E_kl (x) ... (x) I`` with E_kl at tensor slot j (1-based)."""
    u = np.zeros((2, 2), dtype=complex)
    u[k, l] = 1.0
    return np.kron(np.kron(np.eye(1 << (j - 1)), u), np.eye(1 << (n - j)))


def jkw_residuals(fs, samples=200, seed=0):
    """Residuals of the matrix-unit relations and of the isomorphism onto M_2^{(x) n}."""
    e = jkw_units(fs)
    n, d = fs.n, fs.dim
    unit, cross = 0.0, 0.0
    for j in range(n):
        unit = max(unit, fro(e[j, 0, 0] + e[j, 1, 1] - np.eye(d)))
        for k, l, m, q in itertools.product(range(2), repeat=4):
            target = e[j, k, q] if l == m else 0.0
            unit = max(unit, fro(e[j, k, l] @ e[j, m, q] - target))
        for k, l in itertools.product(range(2), repeat=2):
            unit = max(unit, fro(dagger(e[j, k, l]) - e[j, l, k]))
        for i in range(j):
            for k, l, m, q in itertools.product(range(2), repeat=4):
                cross = max(cross, fro(e[i, k, l] @ e[j, m, q] - e[j, m, q] @ e[i, k, l]))
    w = jkw_unitary(fs, e)
    iso = fro(dagger(w) @ w - np.eye(d))
    for j in range(n):
        for k, l in itertools.product(range(2), repeat=2):
            iso = max(iso, fro(e[j, k, l] - w @ embedded_unit(n, j + 1, k, l) @ dagger(w)))
    # products of one unit per site against the tensor product of units
    rng = np.random.default_rng(seed)
    mult = 0.0
    wh = dagger(w)
    for _ in range(samples if n else 0):
        kl = rng.integers(0, 2, size=(n, 2))
        prod = np.eye(d, dtype=complex)
        tens = np.ones((1, 1), dtype=complex)
        for j in range(n):
            prod = prod @ e[j, kl[j, 0], kl[j, 1]]
            u = np.zeros((2, 2), dtype=complex)
            u[kl[j, 0], kl[j, 1]] = 1.0
            tens = np.kron(tens, u)
        mult = max(mult, fro(prod - w @ tens @ wh))
    return {"unit": unit, "cross": cross, "iso": iso, "mult": mult}


def jkw_transport(sites, fs):
    """Images in A(sites) of the matrix units of M_{2^k}.

    Returns an array ``phi`` with ``phi[r, c]`` the image of ``E_rc`` under the
    *-isomorphism built from the local JKW units of the listed sites (first
    listed site most significant).
    """
    sites = sorted(sites)
    k = len(sites)
    dk = 1 << k
    # the sign strings run over the listed sites only, so gaps in the list
    # do not pull operators from outside A(sites)
    e = np.zeros((k, 2, 2, fs.dim, fs.dim), dtype=complex)
    v = np.eye(fs.dim, dtype=complex)
    for t, l in enumerate(sites):
        a, ad = annihilation(l, fs), creation(l, fs)
        e[t, 0, 0], e[t, 0, 1] = a @ ad, v @ a
        e[t, 1, 0], e[t, 1, 1] = v @ ad, ad @ a
        v = v @ (a @ ad - ad @ a)
    out = np.zeros((dk, dk, fs.dim, fs.dim), dtype=complex)
    for r in range(dk):
        for c in range(dk):
            m = np.eye(fs.dim, dtype=complex)
            for t in range(k):
                rr = (r >> (k - 1 - t)) & 1
                cc = (c >> (k - 1 - t)) & 1
                m = m @ e[t, rr, cc]
            out[r, c] = m
    return out


# ---------------------------------------------------------------- algebras

@dataclass(frozen=True, eq=False)
class OperatorAlgebra:
    """A *-subalgebra given by a Hilbert-Schmidt orthonormal basis."""

    basis: np.ndarray
    grading: Grading | None = None
    label: str = ""
    parities: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=complex)
        if b.ndim != 3 or b.shape[1] != b.shape[2]:
            raise DimensionMismatch(f"basis must have shape (m, d, d), got {b.shape}")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def dim(self):
        return self.basis.shape[0]

    @property
    def d(self):
        return self.basis.shape[1]

    def coords(self, x):
        return np.conj(self.basis.reshape(self.dim, -1)) @ np.asarray(x).reshape(-1)

    def element(self, c):
        return np.tensordot(c, self.basis, axes=(0, 0))

    def residual(self, x):
        """Distance from ``x`` to the span."""
        return fro(x - self.element(self.coords(x)))

    def contains(self, x, tol=DEFAULT_TOL):
        return self.residual(x) <= tol * max(1.0, fro(x))

    def closure_residual(self, samples=None, seed=0):
        """Largest distance of ``B_k^H`` and ``B_j B_k`` from the span, and of I."""
        m = self.dim
        worst = self.residual(np.eye(self.d))
        for b in self.basis:
            worst = max(worst, self.residual(dagger(b)))
        if samples is None or samples >= m * m:
            pairs = itertools.product(range(m), repeat=2)
        else:
            rng = np.random.default_rng(seed)
            pairs = rng.integers(0, m, size=(samples, 2))
        for j, k in pairs:
            worst = max(worst, self.residual(self.basis[j] @ self.basis[k]))
        return worst


def scalars(d):
    return OperatorAlgebra(np.eye(d, dtype=complex)[None] / np.sqrt(d), label="scalars")


def generated_algebra(generators, d, tol=DEFAULT_TOL, grading=None, label=""):
    """Smallest unital *-algebra containing the generators.

    Starts from the identity and repeatedly left-multiplies newly accepted
    basis elements by every generator and adjoint until nothing new appears.
    """
    letters = []
    for g in generators:
        g = np.asarray(g, dtype=complex)
        if g.shape != (d, d):
            raise DimensionMismatch(f"generator of shape {g.shape}, expected {(d, d)}")
        letters.append(g)
        letters.append(dagger(g))
    basis, _ = gram_schmidt_extend(np.zeros((0, d, d), dtype=complex),
                                   np.eye(d, dtype=complex)[None], tol)
    fresh = basis
    for _ in range(d * d + 1):
        if len(fresh) == 0 or not letters:
            break
        cands = np.array([g @ b for b in fresh for g in letters])
        before = len(basis)
        basis, _ = gram_schmidt_extend(basis, cands, tol)
        fresh = basis[before:]
    else:
        raise NoConvergence("algebra generation did not stabilise")
    return OperatorAlgebra(basis, grading, label)


def _local_word(fs, l, kind):
    a = annihilation(l, fs)
    ad = creation(l, fs)
    return {0: a @ ad, 1: a, 2: ad, 3: ad @ a}[kind]


@lru_cache(maxsize=64)
def _algebra_A_cached(sites, n):
    fs = FockSpace(n)
    d = fs.dim
    k = len(sites)
    norm = np.sqrt(float(1 << (n - k)))
    mats = np.empty((4 ** k, d, d), dtype=complex)
    pars = np.empty(4 ** k, dtype=int)
    for idx, kinds in enumerate(itertools.product(range(4), repeat=k)):
        m = np.eye(d, dtype=complex)
        odd = 0
        for l, kind in zip(sites, kinds):
            m = m @ _local_word(fs, l, kind)
            odd += kind in (1, 2)
        mats[idx] = m / norm
        pars[idx] = -1 if odd % 2 else 1
    return mats, pars


def algebra_A(sites, fs):
    """A(I): orthonormal basis of site-ordered local words over the sites of I.

    At each site the local factor is one of ``a a^+, a, a^+, a^+ a``; distinct
    words have disjoint supports in the Fock basis, so the normalized words
    are already orthonormal and homogeneous.
    """
    sites = tuple(sorted(set(sites)))
    for l in sites:
        fs._site(l)
    mats, pars = _algebra_A_cached(sites, fs.n)
    label = "A({" + subset_key(sites) + "})"
    return OperatorAlgebra(mats, grading_operator(fs), label, pars)


def complement(sites, fs):
    s = set(sites)
    return tuple(l for l in fs.sites if l not in s)


# ---------------------------------------------------------------- self-dual field

def selfdual_field(z, fs):
    """``c(z) = sum conj(x_l) a_l + sum conj(y_l) a_l^+`` for ``z = (x, y)``.

    With this convention ``c(e_l, 0) = a_l``, ``c(0, e_l) = a_l^+`` and
    ``c(z)^H = c(C z)`` for ``C(x, y) = (conj y, conj x)``.
    """
    z = np.asarray(z, dtype=complex)
    if z.shape != (2 * fs.n,):
        raise DimensionMismatch(f"z must have length {2 * fs.n}")
    x, y = z[: fs.n], z[fs.n:]
    out = np.zeros((fs.dim, fs.dim), dtype=complex)
    for l in fs.sites:
        out += np.conj(x[l - 1]) * annihilation(l, fs) + np.conj(y[l - 1]) * creation(l, fs)
    return out


def conj_C(z):
    z = np.asarray(z, dtype=complex)
    h = len(z) // 2
    return np.concatenate([np.conj(z[h:]), np.conj(z[:h])])


def algebra_MZ(z_basis, fs, tol=DEFAULT_TOL):
    gens = [selfdual_field(z, fs) for z in z_basis]
    return generated_algebra(gens, fs.dim, tol, grading_operator(fs), "M(Z)")


def site_subspace(sites, fs):
    """Basis ``{(e_k, 0), (0, e_k): k in sites}`` of the doubled one-particle space."""
    out = []
    for k in sorted(sites):
        for off in (0, fs.n):
            z = np.zeros(2 * fs.n, dtype=complex)
            z[off + k - 1] = 1.0
            out.append(z)
    return out


def orthogonal_subspace(z_basis, dim):
    """Orthonormal basis of the orthogonal complement in C^dim."""
    if len(z_basis) == 0:
        return list(np.eye(dim, dtype=complex))
    z = np.array(z_basis, dtype=complex)
    _, s, vh = np.linalg.svd(z, full_matrices=True)
    rank = int(np.sum(s >= DEFAULT_TOL * s[0]))
    return list(np.conj(vh[rank:]))


# ---------------------------------------------------------------- lattice states

@dataclass(frozen=True, eq=False)
class LatticeState:
    """Diagonal state on A(I) plus a copying bijection iota: I -> L \\ I.

    ``probs`` maps increasing site tuples (subsets of I) to probabilities.
    Missing subsets have probability zero.
    """

    sites: tuple
    probs: dict
    iota: dict

    def __post_init__(self):
        sites = tuple(sorted(self.sites))
        object.__setattr__(self, "sites", sites)
        if len(set(sites)) != len(sites):
            raise ValueError("repeated site in I")
        probs = {}
        valid = set(subsets(sites))
        for key, p in self.probs.items():
            s = tuple(sorted(key))
            if s not in valid:
                raise InvalidProbabilities(f"subset {list(s)} is not contained in I")
            p = float(p)
            if not np.isfinite(p) or p < 0:
                raise InvalidProbabilities(f"probability of {list(s)} is {p}")
            probs[s] = p
        total = sum(probs.values())
        if abs(total - 1.0) > 1e-9:
            raise InvalidProbabilities(f"probabilities sum to {total!r}")
        object.__setattr__(self, "probs", probs)
        iota = {int(k): int(v) for k, v in self.iota.items()}
        if set(iota) != set(sites):
            raise ValueError("iota must be defined exactly on I")
        img = list(iota.values())
        if len(set(img)) != len(img):
            raise ValueError("iota is not injective")
        if set(img) & set(sites):
            raise OverlappingSets("iota(I) meets I")
        object.__setattr__(self, "iota", iota)

    def p(self, s):
        return self.probs.get(tuple(sorted(s)), 0.0)

    def faithful(self):
        return all(self.p(s) > 0 for s in subsets(self.sites))

    def check_sites(self, fs):
        for l in list(self.sites) + list(self.iota.values()):
            fs._site(l)


def uniform_state(sites, iota):
    ss = subsets(sites)
    return LatticeState(tuple(sites), {s: 1.0 / len(ss) for s in ss}, iota)


def rho_I(st, fs):
    st.check_sites(fs)
    diag = np.zeros(fs.dim)
    for s in subsets(st.sites):
        diag[mask_of(s)] = st.p(s)
    return np.diag(diag).astype(complex)


def zeta_with_signs(st, fs):
    """The vector ``sum sqrt(p_s) f_{s iota(s)}`` and the subsets whose sign is -1.

    ``iota(s)`` lists the images in the order of ``s``; the creation string is
    sorted into canonical order and the resulting sign kept.
    """
    st.check_sites(fs)
    z = np.zeros(fs.dim, dtype=complex)
    flips = []
    for s in subsets(st.sites):
        p = st.p(s)
        string = list(s) + [st.iota[l] for l in s]
        v = fs.basis_vector(string)
        m = mask_of(string)
        if v[m].real < 0:
            flips.append(s)
        z += np.sqrt(p) * v
    return z, flips


def zeta(st, fs):
    return zeta_with_signs(st, fs)[0]


def state_functional(vec):
    """``a -> <a v, v> = v^H a v``."""
    v = np.asarray(vec)
    return lambda a: complex(np.vdot(v, a @ v))


def k_matches_klein(fs):
    return fro(k_operator(fs) - klein_K(grading_operator(fs)))


def homogeneous(alg, tol=DEFAULT_TOL):
    """Return ``(basis, parities)`` with every basis element of definite parity."""
    if alg.parities is not None:
        return alg.basis, alg.parities
    return homogeneous_basis(alg.basis, alg.grading, tol)
