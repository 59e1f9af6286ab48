"""Copying isomorphisms and detailed-balance residuals."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .car import (OperatorAlgebra, algebra_A, annihilation, complement, creation,
                  grading_operator, zeta)
from .duality import AlgebraMap, dual_map, map_distance, twisted_dual
from .errors import NotCyclic, OverlappingSets
from .gns import diagonal_state, modular_data, spatial_triple
from .graded import klein_eta, klein_eta_inv, trivial_grading
from .numlin import DEFAULT_TOL, dagger, fro


# ------------------------------------------------------------------ copying

def normal_ordered_words(sites, fs):
    """Words ``a_{l1}^+ ... a_{lj}^+ a_{k1} ... a_{km}`` with increasing indices.

    Returns ``(words, labels)`` where each label is ``(creators, annihilators)``.
    """
    sites = sorted(sites)
    words, labels = [], []
    for cr in itertools.product((0, 1), repeat=len(sites)):
        for an in itertools.product((0, 1), repeat=len(sites)):
            m = np.eye(fs.dim, dtype=complex)
            cs = [l for l, c in zip(sites, cr) if c]
            ans = [l for l, c in zip(sites, an) if c]
            for l in cs:
                m = m @ creation(l, fs)
            for l in ans:
                m = m @ annihilation(l, fs)
            words.append(m)
            labels.append((tuple(cs), tuple(ans)))
    return np.array(words), labels


def _word_image(label, iota, fs):
    cs, ans = label
    m = np.eye(fs.dim, dtype=complex)
    for l in cs:
        m = m @ creation(iota[l], fs)
    for l in ans:
        m = m @ annihilation(iota[l], fs)
    return m


@dataclass(frozen=True, eq=False)
class CopyIso:
    """The *-isomorphism of A(I) onto A(iota(I)) extending ``a_l -> a_{iota(l)}``."""

    iota: dict
    source: OperatorAlgebra
    target: OperatorAlgebra
    images: np.ndarray = field(repr=False)      # images of the source basis
    residuals: dict = field(default_factory=dict)

    def __call__(self, x):
        return np.tensordot(self.source.coords(x), self.images, axes=(0, 0))

    def inverse(self, y):
        # the copy is a Hilbert-Schmidt isometry, so the images are orthonormal
        c = np.conj(self.images.reshape(len(self.images), -1)) @ np.asarray(y).reshape(-1)
        return np.tensordot(c, self.source.basis, axes=(0, 0))

    def as_map(self):
        return AlgebraMap(self.source, self.target, self.images)


def copy_iso(iota, fs, tol=DEFAULT_TOL):
    """Build the copy on the normal-ordered word basis and verify it."""
    iota = {int(k): int(v) for k, v in iota.items()}
    sites = tuple(sorted(iota))
    img = list(iota.values())
    if set(img) & set(sites):
        raise OverlappingSets("iota(I) meets I")
    if len(set(img)) != len(img):
        raise ValueError("iota is not injective")
    source = algebra_A(sites, fs)
    target = algebra_A(tuple(sorted(img)), fs)
    words, labels = normal_ordered_words(sites, fs)
    wimg = np.array([_word_image(lab, iota, fs) for lab in labels])
    # words = basis^T C, so basis = words C^{-1}
    c = np.conj(source.basis.reshape(source.dim, -1)) @ words.reshape(len(words), -1).T
    cinv = np.linalg.inv(c)
    images = np.tensordot(cinv.T, wimg, axes=(1, 0))
    k = CopyIso(iota, source, target, images)
    k.residuals.update(copy_residuals(k, fs))
    return k


def copy_residuals(k, fs):
    g = grading_operator(fs).gamma
    src, im = k.source.basis, k.images
    m = len(src)
    conj_src = np.conj(src.reshape(m, -1))
    mult = 0.0
    for a, ka in zip(src, im):
        coords = (a @ src).reshape(m, -1) @ conj_src.T
        kp = np.tensordot(coords, im, axes=(1, 0))
        mult = max(mult, float(np.max(np.linalg.norm((kp - ka @ im).reshape(m, -1), axis=1))))
    star = max(fro(k(dagger(a)) - dagger(ka)) for a, ka in zip(src, im))
    grad = max(fro(k(g @ a @ g) - g @ ka @ g) for a, ka in zip(src, im))
    onto = max(k.target.residual(x) for x in im)
    return {"mult": mult, "star": star, "grading": grad, "onto": onto}


def copy_map(psi, k):
    """``Psi^iota = kappa o Psi o kappa^{-1}`` on A(iota(I))."""
    images = np.array([k(psi(k.inverse(b))) for b in k.target.basis])
    return AlgebraMap(k.target, k.target, images)


# ------------------------------------------------------------------ lattice balance

def _scaled(raw, psi):
    return raw / max(1.0, psi.basis_norm())


def _pair_table(left, right, z):
    """``T[k, l] = <L_k R_l z, z>`` as ``(L_k^* z)^H (R_l z)``."""
    u = np.einsum("kji,j->ki", np.conj(left), z)        # L_k^* z
    w = np.einsum("lij,j->li", right, z)
    return np.conj(u) @ w.T


def fsqdb_residual(psi, st, k, fs, tol=DEFAULT_TOL, cross_check=True):
    """Residual of ``phi(a Psi^iota(b)) = phi(Psi(a) b)`` with ``phi = <. zeta, zeta>``.

    The maximum runs over the basis of A(I) for ``a`` and of A(iota(I)) for
    ``b``.  When ``cross_check`` is set and ``iota(I)`` is the whole
    complement, the map distance between the twisted dual and the copied map
    is reported too.
    """
    z = zeta(st, fs)
    a = psi.domain.basis
    pk = copy_map(psi, k)
    b = k.target.basis
    lhs = np.einsum("i,kij,ljm,m->kl", np.conj(z), a, pk.images, z)
    rhs = np.einsum("i,kij,ljm,m->kl", np.conj(z), psi.images, b, z)
    raw = float(np.max(np.abs(lhs - rhs)))
    scaled = _scaled(raw, psi)
    out = {"residual": raw, "scaled": scaled, "holds": bool(scaled <= tol)}
    full = tuple(sorted(k.iota.values())) == complement(st.sites, fs)
    if cross_check and full:
        g = grading_operator(fs)
        try:
            tw = twisted_dual(psi, g, g, z, z, tol)
            out["twisted_vs_copy"] = map_distance(pk, tw, basis=b)
            out["twisted_relation"] = tw.info["residual"]
        except NotCyclic as exc:
            out["twisted_vs_copy"] = None
            out["cross_check_error"] = str(exc)
    return out


def diag_fsqdb_residual(psi, st, k, fs, tol=DEFAULT_TOL):
    """The same balance condition written as ``B(a, Psi^kappa(b)) = B(Psi(a), b)``.

    ``B(a, b) = delta_zeta(a (x) b)`` is evaluated as an inner product of the
    vectors ``a^* zeta`` and ``b zeta``; ``Psi^kappa`` is assembled from
    coordinate matrices instead of pointwise application.
    """
    z = zeta(st, fs)
    src, tgt = k.source, k.target
    # coordinate matrices: kappa (source -> target), Psi (source -> source)
    kmat = np.conj(tgt.basis.reshape(tgt.dim, -1)) @ k.images.reshape(src.dim, -1).T
    pmat = psi.matrix()
    pk = kmat @ pmat @ np.linalg.inv(kmat)
    pk_imgs = np.tensordot(pk.T, tgt.basis, axes=(1, 0))
    lhs = _pair_table(src.basis, pk_imgs, z)
    rhs = _pair_table(psi.images, tgt.basis, z)
    raw = float(np.max(np.abs(lhs - rhs)))
    scaled = _scaled(raw, psi)
    return {"residual": raw, "scaled": scaled, "holds": bool(scaled <= tol)}


def kappa_tilde(x, st, fs, tol=DEFAULT_TOL):
    """``eta(j(theta(x)))`` with theta the transpose in the Fock basis."""
    alg = algebra_A(st.sites, fs)
    md = modular_data(spatial_triple(alg, zeta(st, fs), tol), tol)
    g = grading_operator(fs)
    return klein_eta(md.j(np.asarray(x).T), g)


# ------------------------------------------------------------------ theta balance

def _full_left(n):
    """Orthonormal basis ``E_rc (x) I`` of M_n acting on the first factor."""
    eye = np.eye(n)
    out = np.zeros((n * n, n * n, n * n), dtype=complex)
    for r in range(n):
        for c in range(n):
            e = np.zeros((n, n))
            e[r, c] = 1.0
            out[r * n + c] = np.kron(e, eye) / np.sqrt(n)
    return out


def _full_right(n):
    eye = np.eye(n)
    out = np.zeros((n * n, n * n, n * n), dtype=complex)
    for r in range(n):
        for c in range(n):
            e = np.zeros((n, n))
            e[r, c] = 1.0
            out[r * n + c] = np.kron(eye, e) / np.sqrt(n)
    return out


@dataclass(frozen=True, eq=False)
class StandardForm:
    """``M_n (x) I`` on ``C^n (x) C^n`` with the purification of a density matrix."""

    n: int
    rho: np.ndarray
    alg: OperatorAlgebra
    comm: OperatorAlgebra
    xi: np.ndarray

    def lift(self, fn):
        """``A (x) I -> fn(A) (x) I`` as an AlgebraMap on ``alg``."""
        n = self.n
        imgs = []
        for r in range(n):
            for c in range(n):
                e = np.zeros((n, n), dtype=complex)
                e[r, c] = 1.0
                imgs.append(np.kron(fn(e), np.eye(n)) / np.sqrt(n))
        return AlgebraMap(self.alg, self.alg, np.array(imgs))


def standard_form(rho):
    rho = np.asarray(rho, dtype=complex)
    n = rho.shape[0]
    w, u = np.linalg.eigh(0.5 * (rho + dagger(rho)))
    root = (u * np.sqrt(np.clip(w, 0, None))) @ dagger(u)
    xi = root.reshape(-1)
    g = trivial_grading(n * n)
    return StandardForm(n, rho, OperatorAlgebra(_full_left(n), g, "M_n (x) I"),
                        OperatorAlgebra(_full_right(n), g, "I (x) M_n"), xi)


def transpose(x):
    return np.asarray(x).T


def theta_sqdb_residual(psi_fn, rho, theta=transpose, tol=DEFAULT_TOL):
    """Residual of ``Psi^theta = Psi`` for a map on M_n under the state ``tr(rho .)``.

    ``Psi^theta = theta o j o Psi' o j o theta`` with ``Psi'`` the dual on the
    commutant of the standard form and ``j(a) = J a^* J``.  ``theta`` acts on the
    ambient space of the standard form (transpose by default, which is the
    transpose on the first factor).  Also reports the distance between the
    twisted dual under the trivial grading and the ordinary dual, and the
    copying form ``Psi' = Psi^varrho`` with ``varrho = j o theta``.
    """
    sf = standard_form(rho)
    psi = sf.lift(psi_fn)
    tg = trivial_grading(sf.n * sf.n)
    d = dual_map(psi, sf.xi, sf.xi, tol, m_prime=sf.comm, n_prime=sf.comm)
    tw = twisted_dual(psi, tg, tg, sf.xi, sf.xi, tol, m_prime=sf.comm, n_prime=sf.comm)
    md = modular_data(spatial_triple(sf.alg, sf.xi, tol), tol)
    j = md.j
    state_theta = max(abs(np.vdot(sf.xi, (theta(b) - b) @ sf.xi)) for b in sf.alg.basis)
    worst = 0.0
    for b, pb in zip(sf.alg.basis, psi.images):
        ptb = theta(j(d(j(theta(b)))))
        worst = max(worst, fro(ptb - pb))
    rho_form = 0.0
    for bp in sf.comm.basis:
        copied = j(theta(psi(theta(j(bp)))))
        rho_form = max(rho_form, fro(d(bp) - copied))
    scaled = _scaled(worst, psi)
    return {"residual": worst, "scaled": scaled, "holds": bool(scaled <= tol),
            "dual_relation": d.info["residual"],
            "twisted_vs_dual": map_distance(tw, d, basis=sf.comm.basis),
            "varrho_form": rho_form, "state_theta": float(state_theta)}


def davies_kraus(p1, kappa):
    """Kraus operators of a two-level Davies-type map balanced for ``diag(p1, 1 - p1)``."""
    p2 = 1.0 - p1
    lam = kappa * p1 / p2
    if not (0 <= kappa <= 1 and 0 <= lam <= 1):
        raise ValueError("rates out of range")
    e12 = np.array([[0, 1], [0, 0]], dtype=complex)
    return [np.sqrt(lam) * e12, np.sqrt(kappa) * e12.T,
            np.diag([np.sqrt(1 - kappa), np.sqrt(1 - lam)]).astype(complex)]


def heisenberg(kraus):
    ks = [np.asarray(k, dtype=complex) for k in kraus]
    return lambda x: sum(dagger(k) @ x @ k for k in ks)


# ------------------------------------------------------------------ abstract form

def lattice_opposite(k, st, fs, tol=DEFAULT_TOL):
    """The anti-automorphism ``r = j o eta^{-1} o kappa`` of A(I).

    ``x -> r(x)°`` is a *-isomorphism of A(I) onto its opposite algebra.
    """
    g = grading_operator(fs)
    md = modular_data(spatial_triple(k.source, zeta(st, fs), tol), tol)
    return lambda x: md.j(klein_eta_inv(k(x), g))


def opposite_residuals(alg, r, ds=None):
    """Check that ``r`` reverses products, commutes with ``*`` and maps ``alg`` onto itself.

    When a diagonal state is given, also checks that its right operators
    multiply in the opposite order.
    """
    basis = alg.basis
    rb = np.array([r(b) for b in basis])
    anti = star = 0.0
    for x, rx in zip(basis, rb):
        for y, ry in zip(basis, rb):
            anti = max(anti, fro(r(x @ y) - ry @ rx))
        star = max(star, fro(r(dagger(x)) - dagger(rx)))
    out = {"anti": anti, "star": star, "into": max(alg.residual(x) for x in rb),
           "rank_defect": alg.dim - int(np.linalg.matrix_rank(rb.reshape(alg.dim, -1)))}
    if ds is not None:
        ro = np.array([ds.right_op(b) for b in basis])
        opp = 0.0
        for x, ox in zip(basis, ro):
            for y, oy in zip(basis, ro):
                opp = max(opp, fro(ox @ oy - ds.right_op(y @ x)))
        out["opposite_product"] = opp
    return out


def abstract_fsqdb_residual(phi, ds, r, tol=DEFAULT_TOL, rho_name="user"):
    """Residual of ``delta(a (x) Phi^rho(b°)) = delta(Phi(a) (x) b°)``.

    ``r`` is an anti-automorphism of the algebra, so that ``x -> r(x)°`` is a
    *-isomorphism onto the opposite algebra and ``Phi^rho(b°) = (r Phi r^{-1}(b))°``.
    ``ds`` is the diagonal state of the algebra's faithful even state.
    """
    alg = phi.domain
    basis = alg.basis
    rmat = np.conj(basis.reshape(alg.dim, -1)) @ np.array([r(b) for b in basis]).reshape(alg.dim, -1).T
    rinv = np.linalg.inv(rmat)
    worst = 0.0
    for b in basis:
        pre = np.tensordot(rinv @ alg.coords(b), basis, axes=(0, 0))
        prb = r(phi(pre))
        for a, pa in zip(basis, phi.images):
            worst = max(worst, abs(ds(a, prb) - ds(pa, b)))
    checks = opposite_residuals(alg, r, ds)
    scaled = _scaled(worst, phi)
    return {"residual": worst, "scaled": scaled, "holds": bool(scaled <= tol),
            "rho": rho_name, "opposite": checks}


def lattice_diagonal_state(st, fs, tol=DEFAULT_TOL):
    alg = algebra_A(st.sites, fs)
    g = spatial_triple(alg, zeta(st, fs), tol)
    return diagonal_state(g, grading_operator(fs), tol)


__all__ = [name for name in dir() if not name.startswith("_")]
