"""Duals and twisted duals of positive maps, positivity and CP certificates."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .car import OperatorAlgebra
from .commutant import commutant, cyclic_check
from .errors import DimensionMismatch, NotCyclic, NotFullAlgebra, StateMismatch
from .graded import klein_eta, klein_eta_inv, klein_kappa
from .numlin import DEFAULT_TOL, dagger, fro, herm_eigvals, numerical_rank


@dataclass(frozen=True, eq=False)
class AlgebraMap:
    """Linear map between operator algebras, given by the images of the domain basis."""

    domain: OperatorAlgebra
    codomain: OperatorAlgebra
    images: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        im = np.asarray(self.images, dtype=complex)
        if im.shape != (self.domain.dim, self.codomain.d, self.codomain.d):
            raise DimensionMismatch(f"images have shape {im.shape}")
        object.__setattr__(self, "images", im)

    def __call__(self, x):
        return np.tensordot(self.domain.coords(x), self.images, axes=(0, 0))

    def matrix(self):
        """Action in basis coordinates: column k holds the codomain coords of image k."""
        flat = np.conj(self.codomain.basis.reshape(self.codomain.dim, -1))
        return flat @ self.images.reshape(self.domain.dim, -1).T

    def basis_norm(self):
        return max((fro(im) for im in self.images), default=0.0)


def map_from_callable(fn, domain, codomain=None):
    codomain = codomain if codomain is not None else domain
    return AlgebraMap(domain, codomain, np.array([fn(b) for b in domain.basis]))


def map_distance(p, q, basis=None):
    """Largest ``||p(B) - q(B)||_F`` over a basis of p's domain."""
    basis = p.domain.basis if basis is None else basis
    return max((fro(p(b) - q(b)) for b in basis), default=0.0)


def compose(p, q):
    """``p o q``."""
    return AlgebraMap(q.domain, p.codomain, np.array([p(im) for im in q.images]))


# ------------------------------------------------------------------ map kinds

def identity_map(alg):
    return AlgebraMap(alg, alg, alg.basis.copy())


def grading_map(alg, g):
    return map_from_callable(lambda x: g.gamma @ x @ g.gamma, alg)


def even_projection_map(alg, g):
    return map_from_callable(lambda x: 0.5 * (x + g.gamma @ x @ g.gamma), alg)


def kraus_map(alg, kraus, codomain=None):
    """Heisenberg-picture map ``x -> sum_k K_k^* x K_k``."""
    ks = [np.asarray(k, dtype=complex) for k in kraus]
    return map_from_callable(lambda x: sum(dagger(k) @ x @ k for k in ks), alg, codomain)


def conjugation_map(alg, u):
    """``x -> u x u^*``."""
    u = np.asarray(u, dtype=complex)
    return map_from_callable(lambda x: u @ x @ dagger(u), alg)


def superop_map(alg, s):
    """Map given by a ``d^2 x d^2`` matrix on column-stacked vectors."""
    s = np.asarray(s, dtype=complex)
    d = alg.d
    if s.shape != (d * d, d * d):
        raise DimensionMismatch(f"superoperator must be {d * d}x{d * d}")
    return map_from_callable(
        lambda x: (s @ x.reshape(-1, order="F")).reshape((d, d), order="F"), alg)


def mixture_map(parts):
    """Convex (or general linear) combination ``sum w_i Psi_i`` of maps on one domain."""
    dom = parts[0][1].domain
    cod = parts[0][1].codomain
    return AlgebraMap(dom, cod, sum(w * p.images for w, p in parts))


# ------------------------------------------------------------------ duals

def _vector_state(xi):
    return lambda x: complex(np.vdot(xi, x @ xi))


def state_mismatch(psi, xi_mu, xi_nu):
    """``max_k |nu(Psi(B_k)) - mu(B_k)|`` over the domain basis."""
    mu, nu = _vector_state(xi_mu), _vector_state(xi_nu)
    return max(abs(nu(im) - mu(b)) for b, im in zip(psi.domain.basis, psi.images))


def _solve_dual(lhs_ops, a_basis, xi_mu, rhs, tol, what):
    """Solve ``sum_p x_p <C_p a_k xi, xi> = rhs[k, q]`` for every column q."""
    amat = np.einsum("i,pij,kjl,l->kp", np.conj(xi_mu), lhs_ops, a_basis, xi_mu)
    rank = numerical_rank(amat, tol)
    if rank < amat.shape[1]:
        raise NotCyclic(f"{what}: dual relation does not determine the map (rank {rank} < {amat.shape[1]})")
    x, *_ = np.linalg.lstsq(amat, rhs, rcond=None)
    res = float(np.max(np.abs(amat @ x - rhs))) if rhs.size else 0.0
    return x, res


def dual_map(psi, xi_mu, xi_nu, tol=DEFAULT_TOL, m_prime=None, n_prime=None):
    """The dual ``Psi': N' -> M'`` fixed by ``<Psi'(b') a xi_mu, xi_mu> = <b' Psi(a) xi_nu, xi_nu>``.

    Commutants may be passed in to avoid recomputation.  The returned map's
    ``info`` records the residual of the defining relation over all basis pairs.
    """
    M, N = psi.domain, psi.codomain
    xi_mu = np.asarray(xi_mu, dtype=complex)
    xi_nu = np.asarray(xi_nu, dtype=complex)
    if not cyclic_check(xi_mu, M, tol).ok:
        raise NotCyclic("xi_mu is not cyclic for the domain algebra")
    if not cyclic_check(xi_nu, N, tol).ok:
        raise NotCyclic("xi_nu is not cyclic for the codomain algebra")
    mism = state_mismatch(psi, xi_mu, xi_nu)
    if mism > tol * max(1.0, psi.basis_norm()):
        raise StateMismatch(f"nu o Psi differs from mu by {mism:.3e}")
    mp = m_prime if m_prime is not None else commutant(M, tol)
    np_ = n_prime if n_prime is not None else commutant(N, tol)
    # rhs[k, q] = <D_q Psi(a_k) xi_nu, xi_nu>
    rhs = np.einsum("i,qij,kjl,l->kq", np.conj(xi_nu), np_.basis, psi.images, xi_nu)
    x, res = _solve_dual(mp.basis, M.basis, xi_mu, rhs, tol, "dual")
    images = np.tensordot(x.T, mp.basis, axes=(1, 0))
    return AlgebraMap(np_, mp, images, {"residual": res})


def twisted_dual(psi, g_mu, g_nu, xi_mu, xi_nu, tol=DEFAULT_TOL, m_prime=None, n_prime=None):
    """``Psi~ = kappa_mu o Psi' o kappa_nu`` on the twisted commutant of the codomain."""
    d = dual_map(psi, xi_mu, xi_nu, tol, m_prime, n_prime)
    n_tw = OperatorAlgebra(np.array([klein_kappa(b, g_nu) for b in d.domain.basis]),
                           g_nu, "twisted commutant", d.domain.parities)
    m_tw = OperatorAlgebra(np.array([klein_kappa(b, g_mu) for b in d.codomain.basis]),
                           g_mu, "twisted commutant", d.codomain.parities)
    images = np.array([klein_kappa(d(klein_kappa(b, g_nu)), g_mu) for b in n_tw.basis])
    out = AlgebraMap(n_tw, m_tw, images, {"dual": d})
    out.info["residual"] = twisted_relation_residual(psi, out, xi_mu, xi_nu)
    return out


def twisted_dual_eta(psi, g_mu, g_nu, xi_mu, xi_nu, tol=DEFAULT_TOL, dual=None):
    """Alternative form ``eta_mu o Psi' o eta_nu^{-1}`` (valid for even Psi)."""
    d = dual if dual is not None else dual_map(psi, xi_mu, xi_nu, tol)
    n_tw = OperatorAlgebra(np.array([klein_kappa(b, g_nu) for b in d.domain.basis]), g_nu)
    m_tw = OperatorAlgebra(np.array([klein_kappa(b, g_mu) for b in d.codomain.basis]), g_mu)
    images = np.array([klein_eta(d(klein_eta_inv(b, g_nu)), g_mu) for b in n_tw.basis])
    return AlgebraMap(n_tw, m_tw, images)


def twisted_relation_residual(psi, tw, xi_mu, xi_nu, left=False):
    """Largest defect of ``<Psi~(b) a xi_mu, xi_mu> = <b Psi(a) xi_nu, xi_nu>``.

    With ``left=True`` the left-handed form ``<a Psi~(b) xi_mu, xi_mu> =
    <Psi(a) b xi_nu, xi_nu>`` is checked instead.
    """
    xi_mu = np.asarray(xi_mu, dtype=complex)
    xi_nu = np.asarray(xi_nu, dtype=complex)
    a = psi.domain.basis
    pa = psi.images
    b = tw.domain.basis
    tb = tw.images
    if left:
        lhs = np.einsum("i,kij,qjl,l->kq", np.conj(xi_mu), a, tb, xi_mu)
        rhs = np.einsum("i,kij,qjl,l->kq", np.conj(xi_nu), pa, b, xi_nu)
    else:
        lhs = np.einsum("i,qij,kjl,l->kq", np.conj(xi_mu), tb, a, xi_mu)
        rhs = np.einsum("i,qij,kjl,l->kq", np.conj(xi_nu), b, pa, xi_nu)
    return float(np.max(np.abs(lhs - rhs))) if lhs.size else 0.0


def double_twisted_dual(psi, g_mu, g_nu, xi_mu, xi_nu, tol=DEFAULT_TOL):
    """``(Psi~)~``, a map from ad_gamma(M) = M back into N."""
    tw = twisted_dual(psi, g_mu, g_nu, xi_mu, xi_nu, tol)
    # the twisted dual maps N~ (vector xi_nu) into M~ (vector xi_mu)
    return twisted_dual(tw, g_nu, g_mu, xi_nu, xi_mu, tol), tw


def check_even(psi, g_mu, g_nu, tol=DEFAULT_TOL):
    """``(is_even, residual)`` for ``Psi o ad_Gamma_mu = ad_Gamma_nu o Psi``."""
    worst = 0.0
    for b, im in zip(psi.domain.basis, psi.images):
        worst = max(worst, fro(psi(g_mu.gamma @ b @ g_mu.gamma) - g_nu.gamma @ im @ g_nu.gamma))
    return worst <= tol * max(1.0, psi.basis_norm()), worst


@dataclass(frozen=True)
class CPVerdict:
    cp: bool
    min_choi_eig: float


def is_full_matrix_algebra(alg, tol=DEFAULT_TOL):
    return alg.dim == alg.d * alg.d


def check_cp(psi, transport=None, tol=DEFAULT_TOL):
    """Choi-matrix test of complete positivity.

    ``transport[r, c]`` gives the image of the matrix unit ``E_rc`` of some
    ``M_k`` inside the domain under a *-isomorphism; without it the domain
    must be the full matrix algebra on its ambient space.
    """
    if transport is None:
        if not is_full_matrix_algebra(psi.domain):
            raise NotFullAlgebra("domain is not a full matrix algebra and no transport was given")
        k = psi.domain.d
        units = np.zeros((k, k, k, k), dtype=complex)
        for r in range(k):
            for c in range(k):
                units[r, c, r, c] = 1.0
    else:
        units = np.asarray(transport)
        k = units.shape[0]
    dout = psi.codomain.d
    choi = np.zeros((k * dout, k * dout), dtype=complex)
    for r in range(k):
        for c in range(k):
            choi[r * dout:(r + 1) * dout, c * dout:(c + 1) * dout] = psi(units[r, c])
    w = herm_eigvals(choi, tol=1e-8)
    scale = max(1.0, abs(w[-1]))
    return CPVerdict(bool(w[0] >= -tol * scale), float(w[0]))


@dataclass(frozen=True)
class PositivityCertificate:
    passed: bool
    worst_min_eig: float
    samples: int
    seed: int


def _random_elements(alg, rng, count):
    c = rng.standard_normal((count, alg.dim)) + 1j * rng.standard_normal((count, alg.dim))
    return np.tensordot(c, alg.basis, axes=(1, 0))


def check_positive_sampled(psi, samples=200, seed=42, tol=DEFAULT_TOL):
    """Sampled positivity: ``Psi(y^* y)`` must have no eigenvalue below ``-tol``."""
    rng = np.random.default_rng(seed)
    worst = np.inf
    for y in _random_elements(psi.domain, rng, samples):
        x = dagger(y) @ y
        px = psi(x)
        w = herm_eigvals(0.5 * (px + dagger(px)), tol=1.0)
        worst = min(worst, float(w[0]) / max(1.0, fro(x)))
    return PositivityCertificate(bool(worst >= -tol), worst, samples, seed)


def check_n_positive_sampled(psi, n, samples=100, seed=42, tol=DEFAULT_TOL):
    """Sampled n-positivity on block matrices ``Y^* Y`` with entries in the domain."""
    rng = np.random.default_rng(seed)
    d = psi.domain.d
    worst = np.inf
    for _ in range(samples):
        blocks = _random_elements(psi.domain, rng, n * n).reshape(n, n, d, d)
        y = np.block([[blocks[i, j] for j in range(n)] for i in range(n)])
        x = dagger(y) @ y
        out = np.block([[psi(x[i * d:(i + 1) * d, j * d:(j + 1) * d]) for j in range(n)]
                        for i in range(n)])
        w = herm_eigvals(0.5 * (out + dagger(out)), tol=1.0)
        worst = min(worst, float(w[0]) / max(1.0, fro(x)))
    return PositivityCertificate(bool(worst >= -tol), worst, samples, seed)


def faithfulness_sampled(tw, samples=50, seed=42, tol=DEFAULT_TOL):
    """Smallest ``||Psi(b^* b)|| / ||b^* b||`` over random b in the domain."""
    rng = np.random.default_rng(seed)
    worst = np.inf
    for b in _random_elements(tw.domain, rng, samples):
        x = dagger(b) @ b
        worst = min(worst, fro(tw(x)) / fro(x))
    return worst


# ------------------------------------------------------------------ lattice

def bilinear_dual(psi, other, xi, tol=DEFAULT_TOL):
    """Map ``X`` on ``other`` with ``<a X(b) xi, xi> = <Psi(a) b xi, xi>`` for a in the domain of Psi."""
    xi = np.asarray(xi, dtype=complex)
    a = psi.domain.basis
    c = other.basis
    amat = np.einsum("i,kij,pjl,l->kp", np.conj(xi), a, c, xi)
    rank = numerical_rank(amat, tol)
    if rank < amat.shape[1]:
        raise NotCyclic(f"bilinear form is degenerate (rank {rank} < {amat.shape[1]})")
    rhs = np.einsum("i,kij,qjl,l->kq", np.conj(xi), psi.images, c, xi)
    x, *_ = np.linalg.lstsq(amat, rhs, rcond=None)
    res = float(np.max(np.abs(amat @ x - rhs)))
    images = np.tensordot(x.T, c, axes=(1, 0))
    return AlgebraMap(other, other, images, {"residual": res})


def fermionic_dual(psi, zeta_vec, other, grading, tol=DEFAULT_TOL, cross_check=True):
    """Fermionic dual on ``other`` (the complementary CAR algebra) w.r.t. ``<. zeta, zeta>``.

    Solves the bilinear relation directly and, when requested, compares with
    the twisted dual taken at the same vector.
    """
    even, _ = check_even(psi, grading, grading, tol)
    if not even:
        warnings.warn("map is not even: the fermionic dual is computed but positivity is not implied",
                      stacklevel=2)
    out = bilinear_dual(psi, other, zeta_vec, tol)
    out.info["even"] = even
    if cross_check:
        tw = twisted_dual(psi, grading, grading, zeta_vec, zeta_vec, tol)
        out.info["twisted_distance"] = map_distance(out, tw, basis=other.basis)
    return out


__all__ = [name for name in dir() if not name.startswith("_")]
