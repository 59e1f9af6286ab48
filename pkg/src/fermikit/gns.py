"""Finite-dimensional GNS construction, modular data, diagonal state, Stinespring.

Vectors of a GNS space are stored in an orthonormal basis of the quotient.
``T`` maps coordinates of an algebra element (in the algebra's orthonormal
basis) to its class.  Antilinear operators are stored as a matrix ``M``
acting after complex conjugation of coordinates: ``S v = M conj(v)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotCP, NotFaithful, NotPositive
from .graded import EVEN, ODD, fermi_sign, homogeneous_basis
from .numlin import DEFAULT_TOL, dagger, fro, herm_eigh


@dataclass(frozen=True, eq=False)
class GnsTriple:
    alg: object
    T: np.ndarray            # (r, m): coordinates -> GNS vectors
    T_pinv: np.ndarray       # (m, r): right inverse of T
    pi: np.ndarray           # (m, r, r): images of the basis elements
    xi: np.ndarray           # cyclic vector
    gram: np.ndarray = field(repr=False)

    @property
    def dim(self):
        return self.T.shape[0]

    def rep(self, x):
        """``pi(x)`` for an element of the algebra."""
        return np.tensordot(self.alg.coords(x), self.pi, axes=(0, 0))

    def vector(self, x):
        """The class of ``x`` in the GNS space."""
        return self.T @ self.alg.coords(x)


def _coords_stack(alg, mats):
    return np.conj(alg.basis.reshape(alg.dim, -1)) @ mats.reshape(len(mats), -1).T


def left_mult_matrices(alg):
    """``L[j]`` is left multiplication by basis element j in basis coordinates."""
    m = alg.dim
    out = np.empty((m, m, m), dtype=complex)
    for j in range(m):
        prods = alg.basis[j] @ alg.basis
        out[j] = _coords_stack(alg, prods)
    return out


def gns(alg, f, tol=DEFAULT_TOL):
    """GNS triple of the functional ``f`` on ``alg``.

    The Gram matrix ``H[l, k] = f(B_l^* B_k)`` is diagonalized; directions with
    eigenvalue below ``tol`` times the largest form the null ideal.
    """
    m = alg.dim
    b = alg.basis
    bh = dagger(b)
    h = np.empty((m, m), dtype=complex)
    for l in range(m):
        prods = bh[l] @ b
        h[l] = [f(p) for p in prods]
    scale = max(fro(h), 1e-300)
    w, u = herm_eigh(h, tol=1e-8)
    if m and w[0] < -tol * max(scale, 1.0):
        raise NotPositive(f"Gram matrix has eigenvalue {w[0]:.3e}")
    keep = w > tol * max(w[-1] if m else 0.0, 1e-300) if m else np.zeros(0, bool)
    if m and w[-1] <= 0:
        keep = np.zeros(m, dtype=bool)
    lam = w[keep]
    ur = u[:, keep]
    t = np.sqrt(lam)[:, None] * dagger(ur)
    t_pinv = ur / np.sqrt(lam)[None, :]
    L = left_mult_matrices(alg)
    pi = np.einsum("rm,jmk,ks->jrs", t, L, t_pinv) if lam.size else np.zeros((m, 0, 0), complex)
    xi = t @ alg.coords(np.eye(alg.d))
    return GnsTriple(alg, t, t_pinv, pi, xi, h)


def spatial_triple(alg, xi, tol=DEFAULT_TOL):
    """Use the ambient space itself when ``xi`` is cyclic and separating.

    Then ``T`` is the square matrix with columns ``B_k xi`` and ``pi`` is the
    identity representation.
    """
    xi = np.asarray(xi, dtype=complex)
    z = np.einsum("kij,j->ik", alg.basis, xi)
    if z.shape[0] != z.shape[1]:
        raise NotFaithful("vector cannot be cyclic and separating: dimensions differ")
    s = np.linalg.svd(z, compute_uv=False)
    if s[-1] < tol * s[0]:
        raise NotFaithful("vector is not cyclic and separating")
    h = dagger(z) @ z
    return GnsTriple(alg, z, np.linalg.inv(z), alg.basis.copy(), xi, h)


def round_trip_residual(g, f):
    """Largest ``|f(B_k) - <pi(B_k) xi, xi>|`` over the basis."""
    worst = 0.0
    for k in range(g.alg.dim):
        val = np.vdot(g.xi, g.pi[k] @ g.xi)
        worst = max(worst, abs(val - f(g.alg.basis[k])))
    return worst


def rep_residual(g, pairs=None):
    """Multiplicativity and adjoint defects of pi on basis pairs."""
    alg = g.alg
    m = alg.dim
    worst = 0.0
    idx = range(m) if pairs is None else sorted({p for pr in pairs for p in pr})
    for j in idx:
        worst = max(worst, fro(g.rep(dagger(alg.basis[j])) - dagger(g.pi[j])))
    pair_iter = ((j, k) for j in range(m) for k in range(m)) if pairs is None else pairs
    for j, k in pair_iter:
        worst = max(worst, fro(g.rep(alg.basis[j] @ alg.basis[k]) - g.pi[j] @ g.pi[k]))
    return worst


def covariant_unitary(g, theta):
    """Unitary on the GNS space with ``V x_phi = (theta x)_phi``."""
    alg = g.alg
    th = np.array([theta(b) for b in alg.basis])
    c = _coords_stack(alg, th)
    return g.T @ c @ g.T_pinv


@dataclass(frozen=True, eq=False)
class ModularData:
    delta: np.ndarray
    J: np.ndarray            # J v = J @ conj(v)
    S: np.ndarray            # S v = S @ conj(v)

    def apply_J(self, v):
        return self.J @ np.conj(v)

    def conj_by_J(self, a):
        """``J a J`` as a linear operator."""
        return self.J @ np.conj(a) @ np.conj(self.J)

    def j(self, a):
        """``j(a) = J a^* J``, a linear *-antiautomorphism onto the commutant."""
        return self.conj_by_J(dagger(a))


def modular_data(g, tol=DEFAULT_TOL):
    """Tomita data from ``S x_phi = (x^*)_phi`` written as ``S = J Delta^{1/2}``."""
    alg = g.alg
    if g.dim != alg.dim:
        raise NotFaithful(f"GNS dimension {g.dim} is smaller than algebra dimension {alg.dim}")
    adj = _coords_stack(alg, dagger(alg.basis))
    tinv = g.T_pinv
    s = g.T @ adj @ np.conj(tinv)
    # antilinear adjoint of M C is M^T C, hence Delta = M^T conj(M)
    delta = s.T @ np.conj(s)
    delta = 0.5 * (delta + dagger(delta))
    w, u = herm_eigh(delta, tol=1e-8)
    if w[0] <= 0:
        raise NotFaithful("modular operator is singular")
    d_inv_half = (u / np.sqrt(w)) @ dagger(u)
    J = s @ np.conj(d_inv_half)
    return ModularData(delta, J, s)


def modular_residuals(g, md):
    """Residuals of the defining properties of the modular data."""
    xi = g.xi
    d = md.delta
    w, u = herm_eigh(0.5 * (d + dagger(d)), tol=1e-8)
    d_half = (u * np.sqrt(w)) @ dagger(u)
    d_inv = (u / w) @ dagger(u)
    out = {
        "delta_xi": fro(d @ xi - xi),
        "J_xi": fro(md.apply_J(xi) - xi),
        "J_squared": fro(md.J @ np.conj(md.J) - np.eye(len(xi))),
        "J_delta_J": fro(md.J @ np.conj(d) @ np.conj(md.J) - d_inv) / max(1.0, fro(d_inv)),
        "J_unitary": fro(dagger(md.J) @ md.J - np.eye(len(xi))),
    }
    comm = 0.0
    jp = [md.conj_by_J(p) for p in g.pi]
    for a in jp:
        for p in g.pi:
            comm = max(comm, fro(a @ p - p @ a))
    out["JpiJ_commutes"] = comm
    alg = g.alg
    adj = _coords_stack(alg, dagger(alg.basis))
    polar = 0.0
    for k in range(alg.dim):
        lhs = md.apply_J(d_half @ g.T[:, k])
        polar = max(polar, fro(lhs - g.T @ adj[:, k]))
    out["polar"] = polar
    return out


def klein_eta_V(y, v):
    """Klein automorphism for the grading unitary ``v``: ``y_+ + i v y_-``."""
    vyv = v @ y @ v
    return 0.5 * (y + vyv) + 0.5j * (v @ (y - vyv))


@dataclass(frozen=True, eq=False)
class DiagonalState:
    """The diagonal state on the Fermi product of an algebra with its opposite."""

    g: GnsTriple
    md: ModularData
    V: np.ndarray
    left: np.ndarray = field(repr=False)    # pi(B_k)
    right: np.ndarray = field(repr=False)   # eta_V(J pi(B_l^*) J)

    def __call__(self, a, b):
        """``delta(a (x) b°)`` for algebra elements a, b."""
        pa = self.g.rep(a)
        pb = self.right_op(b)
        return complex(np.vdot(self.g.xi, pa @ pb @ self.g.xi))

    def right_op(self, b):
        # J pi(b^*) J = j(pi(b))
        return klein_eta_V(self.md.j(self.g.rep(b)), self.V)

    def pi_delta(self, a, b):
        return self.g.rep(a) @ self.right_op(b)


def diagonal_state(g, grading, tol=DEFAULT_TOL):
    md = modular_data(g, tol)
    V = covariant_unitary(g, lambda x: grading.gamma @ x @ grading.gamma)
    left = g.pi
    right = np.array([klein_eta_V(md.j(p), V) for p in g.pi])
    return DiagonalState(g, md, V, left, right)


def diagonal_gram(ds, grading, tol=DEFAULT_TOL):
    """Gram certificates of the diagonal state over homogeneous elementary tensors.

    Returns ``(gram, gram_via_rep, basis_parities)``: the first uses the
    opposite-algebra product rules directly, the second evaluates
    ``<pi_delta(x_k) xi, pi_delta(x_l) xi>``.
    """
    alg = ds.g.alg
    hb, par = homogeneous_basis(alg.basis, grading, tol)
    m = len(hb)
    dmat = np.empty((m, m), dtype=complex)
    for k in range(m):
        for l in range(m):
            dmat[k, l] = ds(hb[k], hb[l])
    flat = hb.reshape(m, -1)
    hbh = dagger(hb)

    def coords(mats):
        return np.conj(flat) @ mats.reshape(len(mats), -1).T

    # C[k, k'] = coords(B_k^* B_k'), E[l', l] = coords(B_l' B_l^*)
    C = np.stack([coords(hbh[k] @ hb) for k in range(m)])      # (k, p, k')
    E = np.stack([coords(hb[lp] @ hbh) for lp in range(m)])    # (l', q, l)
    sgn_ab = np.array([[fermi_sign(int(par[k]), int(par[l])) for l in range(m)] for k in range(m)])
    # (a (x) b°)^* (c (x) d°) = eps(a, b) eps(b, c) a^*c (x) (d b^*)°
    core = np.einsum("kpc,pq,eql->klce", C, dmat, E)
    sgn_bc = sgn_ab.T  # eps(b_l, c_k') is symmetric in its arguments
    gram = core * sgn_ab[:, :, None, None] * sgn_bc[None, :, :, None]
    gram = gram.reshape(m * m, m * m)
    vecs = np.empty((ds.g.dim, m * m), dtype=complex)
    for k in range(m):
        for l in range(m):
            vecs[:, k * m + l] = ds.pi_delta(hb[k], hb[l]) @ ds.g.xi
    gram_rep = dagger(vecs) @ vecs
    return gram, gram_rep, par


def pi_delta_rep_residual(ds, grading, tol=DEFAULT_TOL, pairs=64, seed=0):
    """Multiplicativity and star defects of ``a (x) b° -> pi(a) eta_V(J pi(b^*) J)``."""
    alg = ds.g.alg
    hb, par = homogeneous_basis(alg.basis, grading, tol)
    m = len(hb)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(pairs):
        a, b, c, d = rng.integers(0, m, size=4)
        lhs = ds.pi_delta(hb[a], hb[b]) @ ds.pi_delta(hb[c], hb[d])
        rhs = fermi_sign(int(par[b]), int(par[c])) * ds.pi_delta(hb[a] @ hb[c], hb[d] @ hb[b])
        worst = max(worst, fro(lhs - rhs))
        st = fermi_sign(int(par[a]), int(par[b])) * ds.pi_delta(dagger(hb[a]), dagger(hb[b]))
        worst = max(worst, fro(dagger(ds.pi_delta(hb[a], hb[b])) - st))
    return worst


@dataclass(frozen=True, eq=False)
class Stinespring:
    V: np.ndarray
    kraus: np.ndarray
    d_in: int
    d_out: int
    min_choi_eig: float

    def pi(self, a):
        return np.kron(a, np.eye(len(self.kraus)))

    def compress(self, a):
        return dagger(self.V) @ self.pi(a) @ self.V


def choi_matrix(phi, d_in):
    """``sum_ij E_ij (x) phi(E_ij)``."""
    blocks = []
    for i in range(d_in):
        row = []
        for j in range(d_in):
            e = np.zeros((d_in, d_in), dtype=complex)
            e[i, j] = 1.0
            row.append(np.asarray(phi(e), dtype=complex))
        blocks.append(row)
    return np.block(blocks)


def stinespring(phi, d_in, tol=DEFAULT_TOL):
    """Stinespring dilation ``phi(a) = V^* (a (x) I_r) V`` from the Choi matrix."""
    c = choi_matrix(phi, d_in)
    d_out = c.shape[0] // d_in
    w, u = herm_eigh(c, tol=1e-8)
    scale = max(abs(w[-1]), 1.0)
    if w[0] < -tol * scale:
        raise NotCP(f"Choi matrix has eigenvalue {w[0]:.3e}")
    keep = w > tol * scale
    kraus = np.array([np.sqrt(lam) * u[:, k].reshape(d_in, d_out).T
                      for k, lam in zip(np.nonzero(keep)[0], w[keep])])
    r = len(kraus)
    V = np.zeros((d_in * r, d_out), dtype=complex)
    for k in range(r):
        e = np.zeros((r, 1))
        e[k, 0] = 1.0
        V += np.kron(dagger(kraus[k]), e)
    return Stinespring(V, kraus, d_in, d_out, float(w[0]))


def stinespring_residual(st, phi, samples=None, seed=0):
    """Largest ``||V^* pi(a) V - phi(a)||`` over matrix units (or random samples)."""
    d = st.d_in
    worst = 0.0
    if samples is None:
        for i in range(d):
            for j in range(d):
                e = np.zeros((d, d), dtype=complex)
                e[i, j] = 1.0
                worst = max(worst, fro(st.compress(e) - phi(e)))
    else:
        rng = np.random.default_rng(seed)
        for _ in range(samples):
            a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            worst = max(worst, fro(st.compress(a) - phi(a)) / fro(a))
    return worst


__all__ = [
    "GnsTriple", "gns", "spatial_triple", "round_trip_residual", "rep_residual",
    "covariant_unitary", "ModularData", "modular_data", "modular_residuals",
    "klein_eta_V", "DiagonalState", "diagonal_state", "diagonal_gram",
    "pi_delta_rep_residual", "Stinespring", "choi_matrix", "stinespring",
    "stinespring_residual", "EVEN", "ODD",
]
