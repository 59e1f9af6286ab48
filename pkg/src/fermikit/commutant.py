"""Commutants, twisted commutants, subspace comparison and cyclicity certificates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .car import (OperatorAlgebra, algebra_MZ, complement, grading_operator,
                  k_operator, orthogonal_subspace, site_subspace)
from .errors import NotGradingStable
from .graded import klein_eta, klein_kappa
from .numlin import DEFAULT_TOL, dagger, fro

# number of random probe elements used to stand in for a generating set
N_PROBES = 1
FALLBACKS = []


@dataclass(frozen=True)
class SubspaceComparison:
    equal: bool
    distance: float


@dataclass(frozen=True)
class RankVerdict:
    ok: bool
    rank: int
    needed: int
    min_sv: float


def _is_identity(m):
    return np.array_equal(m, np.eye(m.shape[0]))


def conjugate_all(gamma, mats):
    """``gamma B gamma`` for a stack of matrices; cheap when gamma is diagonal."""
    if np.count_nonzero(gamma - np.diag(np.diagonal(gamma))) == 0:
        dg = np.diagonal(gamma)
        return mats * np.multiply.outer(dg, dg)
    return gamma @ mats @ gamma


def _normal_block(probes, idx, real):
    """Normal-equation matrix sum A^H A restricted to the vec indices ``idx``.

    ``A = I (x) B - B^T (x) I`` acts on column-stacked ``vec(X)``, so
    ``A^H A = I (x) B^H B - B^T (x) B^H - conj(B) (x) B + conj(B) B^T (x) I``.
    Entry ``(r, r')`` of ``X (x) Y`` with ``r = i + d j`` is ``X[j, j'] Y[i, i']``.
    """
    d = probes[0].shape[0]
    ii, jj = idx % d, idx // d

    def block(x, y):
        return x[np.ix_(jj, jj)] * y[np.ix_(ii, ii)]

    eye = np.eye(d, dtype=probes[0].dtype)
    left = sum(dagger(b) @ b for b in probes)
    right = sum(np.conj(b) @ b.T for b in probes)
    n = block(eye, left) + block(right, eye)
    for b in probes:
        n = n - block(b.T, dagger(b)) - block(np.conj(b), b)
    return n.real if real else n


def _null_vectors(n, tol, scale):
    """Eigenvectors of ``n`` with eigenvalue at most ``tol * max(lambda_max, scale)``.

    ``scale`` keeps a numerically zero ``n`` from being judged against its own
    rounding noise.
    """
    if n.shape[0] == 0:
        return np.zeros((0, 0))
    w, v = np.linalg.eigh(n)
    top = max(abs(w[-1]), scale, 1e-300)
    keep = w <= tol * top
    return v[:, keep]


def _commuting_span(probes, d, frame, parity_of, tol):
    """Null space of the commutation map for homogeneous probes, sector by sector.

    Returns ``(basis, parities)``; parities is None without a grading.
    """
    real = all(not np.any(p.imag) for p in probes) and not np.any(frame.imag)
    if real:
        probes = [p.real for p in probes]
    if parity_of is None:
        sectors = [(np.arange(d * d), 0)]
    else:
        # column-stacked index r = i + d*j of entry (i, j)
        pij = np.multiply.outer(parity_of, parity_of).reshape(-1, order="F")
        sectors = [(np.nonzero(pij > 0)[0], 1), (np.nonzero(pij < 0)[0], -1)]
    mats, pars = [], []
    for idx, par in sectors:
        nb = _normal_block(probes, idx, real)
        v = _null_vectors(nb, tol, sum(fro(p) ** 2 for p in probes))
        for k in range(v.shape[1]):
            full = np.zeros(d * d, dtype=complex)
            full[idx] = v[:, k]
            mats.append(full.reshape((d, d), order="F"))
            pars.append(par)
    if not mats:
        return np.zeros((0, d, d), dtype=complex), (None if parity_of is None else np.zeros(0, int))
    mats = np.array(mats)
    if not _is_identity(frame):
        mats = frame @ mats @ np.conj(frame.T)
    return mats, (None if parity_of is None else np.array(pars))


def _probe_elements(alg, rng, frame):
    """Random combinations of the basis, split into even and odd parts, plus adjoints."""
    basis = alg.basis if _is_identity(frame) else np.conj(frame.T) @ alg.basis @ frame
    real_basis = not np.any(basis.imag)
    probes = []
    for _ in range(N_PROBES):
        c = rng.standard_normal(alg.dim)
        if not real_basis:
            c = c + 1j * rng.standard_normal(alg.dim)
        r = np.tensordot(c, basis, axes=(0, 0))
        probes.append(r)
    return probes


def commutant(alg, tol=DEFAULT_TOL, generators=None, seed=0):
    """Orthonormal basis of ``{X : X B = B X for all B in alg}``.

    The commutant of a *-algebra equals the commutant of any generating set.
    Unless generators are supplied, a few seeded random elements of the
    algebra (and their adjoints) are used; the result is then certified
    against every basis element and recomputed from the full basis if the
    certificate fails.  When the algebra carries a grading and is stable
    under it, the problem splits into even and odd sectors.
    """
    d = alg.d
    frame = np.eye(d, dtype=complex)
    parity_of = None
    g = alg.grading
    if g is not None and graded_stable_residual(alg, g) <= tol:
        gam = g.gamma
        if np.allclose(gam, np.diag(np.diag(gam)), atol=0, rtol=0):
            parity_of = np.sign(np.diag(gam).real)
        else:
            w, frame = np.linalg.eigh(gam)
            parity_of = np.sign(w)
    rng = np.random.default_rng(seed)
    if generators is not None:
        gens = [np.conj(frame.T) @ np.asarray(x, dtype=complex) @ frame for x in generators]
    else:
        gens = _probe_elements(alg, rng, frame)
    probes = _expand(gens, parity_of)
    basis, pars = _commuting_span(probes, d, frame, parity_of, tol)
    if _commutes_with(basis, alg.basis, tol) > tol:
        FALLBACKS.append(alg.label)
        full = [np.conj(frame.T) @ b @ frame for b in alg.basis]
        basis, pars = _commuting_span(_expand(full, parity_of), d, frame, parity_of, tol)
    # null vectors are orthonormal per sector and the frame change is unitary
    return OperatorAlgebra(basis, g, f"{alg.label}'" if alg.label else "commutant", pars)


def _expand(gens, parity_of):
    out = []
    for x in gens:
        if parity_of is None:
            parts = [x]
        else:
            sgn = np.multiply.outer(parity_of, parity_of)
            parts = [0.5 * (x + sgn * x), 0.5 * (x - sgn * x)]
        for p in parts:
            if np.any(p):
                out.append(p)
                out.append(dagger(p))
    return out


def _commutes_with(basis, others, tol):
    if len(basis) == 0:
        return 0.0
    worst = 0.0
    for b in others:
        nb = max(fro(b), 1.0)
        c = basis @ b - b @ basis
        worst = max(worst, float(np.sqrt(np.max(np.sum(np.abs(c) ** 2, axis=(1, 2))))) / nb)
    return worst


def graded_stable_residual(alg, g):
    """How far ``gamma B gamma`` leaves the span, worst basis element."""
    gb = conjugate_all(g.gamma, alg.basis)
    if alg.parities is not None:
        diff = gb - alg.parities[:, None, None] * alg.basis
        return float(np.sqrt(np.max(np.sum(np.abs(diff) ** 2, axis=(1, 2))))) if len(diff) else 0.0
    v = alg.basis.reshape(alg.dim, -1)
    w = gb.reshape(alg.dim, -1)
    r = w - (w @ np.conj(v.T)) @ v
    return float(np.sqrt(np.max(np.sum(np.abs(r) ** 2, axis=1)))) if len(r) else 0.0


def graded_image(alg, g, fn, label=""):
    """Apply a parity-preserving HS isometry ``fn(b, g)`` to every basis element."""
    mats = np.array([fn(b, g) for b in alg.basis]).reshape(alg.basis.shape)
    return OperatorAlgebra(mats, g, label, alg.parities)


def twisted_commutant(alg, g=None, tol=DEFAULT_TOL, seed=0):
    """``kappa(M')``: the Klein image of the commutant."""
    g = g or alg.grading
    if g is None:
        raise NotGradingStable("no grading supplied")
    if graded_stable_residual(alg, g) > tol:
        raise NotGradingStable("algebra is not stable under the grading")
    c = commutant(OperatorAlgebra(alg.basis, g, alg.label, alg.parities), tol, seed=seed)
    # kappa is a Hilbert-Schmidt isometry, so the image basis stays orthonormal
    label = f"{alg.label}~" if alg.label else "twisted commutant"
    return graded_image(c, g, klein_kappa, label)


def eta_commutant(alg, g=None, tol=DEFAULT_TOL, seed=0):
    g = g or alg.grading
    c = commutant(OperatorAlgebra(alg.basis, g, alg.label, alg.parities), tol, seed=seed)
    return graded_image(c, g, klein_eta, "eta(M')")


def ad_gamma_algebra(alg, g=None):
    g = g or alg.grading
    return graded_image(alg, g, lambda b, gg: gg.gamma @ b @ gg.gamma, "ad(M)")


def _as_basis(x):
    b = x.basis if hasattr(x, "basis") else np.asarray(x)
    return b.reshape(b.shape[0], -1)


def subspace_equal(a, b, tol=DEFAULT_TOL):
    """Frobenius distance between the HS projections onto two spans."""
    va, vb = _as_basis(a), _as_basis(b)
    full = va.shape[1]
    if va.shape[0] == full or vb.shape[0] == full:
        # an orthonormal family of full length spans everything, and then
        # ||P_a - P_b||^2 = ambient - dim of the other span
        dist = float(np.sqrt(abs(va.shape[0] - vb.shape[0])))
        scale = np.sqrt(max(va.shape[0], vb.shape[0], 1))
        return SubspaceComparison(dist <= tol * scale, dist)
    if not np.any(va.imag) and not np.any(vb.imag):
        va, vb = va.real, vb.real
    if va.shape[0] == 0 and vb.shape[0] == 0:
        return SubspaceComparison(True, 0.0)
    # ||P_a - P_b||^2 = ||(1 - P_b) V_a||^2 + ||(1 - P_a) V_b||^2 for orthonormal V
    ra = va - (va @ np.conj(vb.T)) @ vb if vb.shape[0] else va
    rb = vb - (vb @ np.conj(va.T)) @ va if va.shape[0] else vb
    dist = float(np.sqrt(np.sum(np.abs(ra) ** 2) + np.sum(np.abs(rb) ** 2)))
    scale = np.sqrt(max(va.shape[0], vb.shape[0], 1))
    return SubspaceComparison(dist <= tol * scale, dist)


def _orbit_matrix(xi, alg):
    return np.einsum("kij,j->ik", alg.basis, np.asarray(xi, dtype=complex))


def _rank(m, tol):
    if m.size == 0:
        return 0, 0.0
    s = np.linalg.svd(m, compute_uv=False)
    if s[0] == 0.0:
        return 0, 0.0
    r = int(np.sum(s >= tol * s[0]))
    return r, float(s[-1] / s[0])


def cyclic_check(xi, alg, tol=DEFAULT_TOL):
    """Cyclic iff ``{B_k xi}`` spans the ambient space."""
    z = _orbit_matrix(xi, alg)
    r, smin = _rank(z, tol)
    return RankVerdict(r == alg.d, r, alg.d, smin)


def separating_check(xi, alg, tol=DEFAULT_TOL):
    """Separating iff ``B -> B xi`` is injective on the span."""
    z = _orbit_matrix(xi, alg)
    r, smin = _rank(z, tol)
    return RankVerdict(r == alg.dim, r, alg.dim, smin)


def bjl_duality_check(sites, fs, tol=DEFAULT_TOL):
    """Distance between ``M(Z)'`` and ``K M(Z^perp) K^*`` for ``Z`` spanned by the sites.

    Also reports whether the vacuum is cyclic for M(Z) exactly when ``K f_empty``
    is separating for the twisted commutant.
    """
    z = site_subspace(sites, fs)
    zperp = orthogonal_subspace(z, 2 * fs.n)
    g = grading_operator(fs)
    mz = algebra_MZ(z, fs, tol)
    mzp = algebra_MZ(zperp, fs, tol)
    lhs = commutant(OperatorAlgebra(mz.basis, g), tol)
    k = k_operator(fs)
    rhs = np.array([k @ b @ dagger(k) for b in mzp.basis])
    cmp = subspace_equal(lhs, rhs, tol)
    vac = fs.vacuum()
    cyc = cyclic_check(vac, mz, tol).ok
    sep = separating_check(k @ vac, twisted_commutant(OperatorAlgebra(mz.basis, g), g, tol), tol).ok
    return {"distance": cmp.distance, "equal": cmp.equal, "cyclic_iff_separating": cyc == sep,
            "dim_commutant": lhs.dim, "dim_rhs": len(rhs)}


def complement_check(sites, fs, tol=DEFAULT_TOL):
    """Distance between the twisted commutant of A(I) and A(L \\ I)."""
    from .car import algebra_A

    a = algebra_A(sites, fs)
    tw = twisted_commutant(a, tol=tol)
    return subspace_equal(tw, algebra_A(complement(sites, fs), fs), tol)


def twisted_commutant_theorems(alg, g=None, tol=DEFAULT_TOL):
    """Distances for ``M~ = eta(M')`` and ``M~~ = ad_gamma(M)``."""
    g = g or alg.grading
    if graded_stable_residual(alg, g) > tol:
        raise NotGradingStable("algebra is not stable under the grading")
    c = commutant(OperatorAlgebra(alg.basis, g, alg.label, alg.parities), tol)
    tw = graded_image(c, g, klein_kappa, "twisted commutant")
    eta = graded_image(c, g, klein_eta)
    tw2 = twisted_commutant(tw, g, tol)
    return {"eta_form": subspace_equal(tw, eta, tol).distance,
            "double": subspace_equal(tw2, ad_gamma_algebra(alg, g), tol).distance,
            "twisted": tw}
