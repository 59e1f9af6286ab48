"""Z2-graded structure: gradings, Klein maps, Fermi tensor products, product states.

A grading is a self-adjoint unitary ``gamma`` on the ambient space.  Elements of
the Fermi tensor product of two graded matrix algebras are stored as ordinary
matrices on the Kronecker space; the graded product and involution are
obtained from the four parity sectors, recomputed on demand.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CommutationFailed, DimensionMismatch, NotHermitian
from .numlin import DEFAULT_TOL, as_cmat, dagger, fro, herm_eigvals, kron

EVEN, ODD = 1, -1


@dataclass(frozen=True, eq=False)
class Grading:
    gamma: np.ndarray

    def __post_init__(self):
        g = as_cmat(self.gamma, "gamma")
        d = g.shape[0]
        if g.shape[1] != d:
            raise DimensionMismatch("grading must be square")
        tol = 1e-10 * max(1.0, fro(g))
        if fro(g - dagger(g)) > tol:
            raise NotHermitian("grading is not self-adjoint")
        if fro(g @ g - np.eye(d)) > tol:
            raise ValueError("grading does not square to the identity")
        g = g.copy()
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)

    @property
    def dim(self):
        return self.gamma.shape[0]

    @property
    def p_plus(self):
        return 0.5 * (np.eye(self.dim) + self.gamma)

    @property
    def p_minus(self):
        return 0.5 * (np.eye(self.dim) - self.gamma)

    def is_trivial(self, tol=DEFAULT_TOL):
        return fro(self.gamma - np.eye(self.dim)) <= tol


def trivial_grading(d):
    return Grading(np.eye(d, dtype=complex))


def _check_dim(a, g):
    a = np.asarray(a)
    if a.shape[-2:] != (g.dim, g.dim):
        raise DimensionMismatch(f"operator of shape {a.shape} does not match grading of dim {g.dim}")
    return a


def ad_gamma(a, g):
    a = _check_dim(a, g)
    return g.gamma @ a @ g.gamma


def even_part(a, g):
    a = _check_dim(a, g)
    return 0.5 * (a + g.gamma @ a @ g.gamma)


def odd_part(a, g):
    a = _check_dim(a, g)
    return 0.5 * (a - g.gamma @ a @ g.gamma)


def parity(a, g, tol=DEFAULT_TOL):
    """+1 for even, -1 for odd, 0 for mixed elements (zero counts as even)."""
    e, o = even_part(a, g), odd_part(a, g)
    scale = max(fro(a), 1e-300)
    if fro(o) <= tol * scale:
        return EVEN
    if fro(e) <= tol * scale:
        return ODD
    return 0


def klein_kappa(a, g):
    """Left Klein map ``a_+ + gamma a_-``; an involution."""
    return even_part(a, g) + g.gamma @ odd_part(a, g)


def klein_eta(a, g):
    """Klein automorphism ``a_+ + i gamma a_-``."""
    return even_part(a, g) + 1j * (g.gamma @ odd_part(a, g))


def klein_eta_inv(a, g):
    return even_part(a, g) - 1j * (g.gamma @ odd_part(a, g))


def eps_tilde(a, g):
    """``a_+ + i a_-``; composing with kappa gives eta in either order."""
    return even_part(a, g) + 1j * odd_part(a, g)


def klein_K(g):
    """Unitary ``P_+ - i P_-`` implementing eta; its square is gamma."""
    return g.p_plus - 1j * g.p_minus


def fermi_sign(i, j):
    if i not in (EVEN, ODD) or j not in (EVEN, ODD):
        raise ValueError("parities must be +1 or -1")
    return -1 if (i == ODD and j == ODD) else 1


def product_grading(ga, gb):
    return Grading(np.kron(ga.gamma, gb.gamma))


@dataclass(frozen=True, eq=False)
class FermiTensorElement:
    """Element of the Fermi tensor product, stored on the Kronecker space."""

    matrix: np.ndarray
    ga: Grading
    gb: Grading
    _left: np.ndarray = field(init=False, repr=False)
    _right: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        d = self.ga.dim * self.gb.dim
        m = as_cmat(self.matrix, "matrix")
        if m.shape != (d, d):
            raise DimensionMismatch(f"element has shape {m.shape}, expected {(d, d)}")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "_left", np.kron(self.ga.gamma, np.eye(self.gb.dim)))
        object.__setattr__(self, "_right", np.kron(np.eye(self.ga.dim), self.gb.gamma))

    def left_part(self, p):
        """Component of definite parity ``p`` in the first leg."""
        x = self.matrix
        return 0.5 * (x + p * (self._left @ x @ self._left))

    def right_part(self, p):
        x = self.matrix
        return 0.5 * (x + p * (self._right @ x @ self._right))

    def sector(self, i, j):
        y = FermiTensorElement(self.left_part(i), self.ga, self.gb)
        return y.right_part(j)

    def sectors(self):
        return {(i, j): self.sector(i, j) for i in (EVEN, ODD) for j in (EVEN, ODD)}

    def like(self, m):
        return FermiTensorElement(m, self.ga, self.gb)


def elementary(a, b, ga, gb):
    """The elementary tensor ``a (x) b`` of the Fermi product."""
    return FermiTensorElement(kron(a, b), ga, gb)


def _same_factors(x, y):
    if x.ga.dim != y.ga.dim or x.gb.dim != y.gb.dim:
        raise DimensionMismatch("elements live in different Fermi products")
    if fro(x.ga.gamma - y.ga.gamma) > DEFAULT_TOL or fro(x.gb.gamma - y.gb.gamma) > DEFAULT_TOL:
        raise DimensionMismatch("elements carry different gradings")


def fermi_star(x):
    """Graded involution: sum of ``eps(i, j) x_ij^H`` over the four sectors."""
    odd_odd = x.sector(ODD, ODD)
    return x.like(dagger(x.matrix) - 2.0 * dagger(odd_odd))


def fermi_mul(x, y):
    """Graded product: ``sum eps(j, k) x_ij y_kl``.

    Only ``j = k = -1`` picks up a sign, so the product is the ambient
    product minus twice (right-odd part of x) times (left-odd part of y).
    """
    _same_factors(x, y)
    return x.like(x.matrix @ y.matrix - 2.0 * (x.right_part(ODD) @ y.left_part(ODD)))


def fermi_rep(x):
    """Faithful *-representation of the Fermi product on the Kronecker space.

    ``a (x) b`` is sent to ``a gamma_A^{deg b} (x) b``.
    """
    return x.right_part(EVEN) + x.right_part(ODD) @ x._left


def conditional_expectation_even(x):
    """Even projection applied to the first leg."""
    return x.like(x.left_part(EVEN))


@dataclass(frozen=True, eq=False)
class GradedFunctional:
    """The functional ``x -> trace(density x)``."""

    density: np.ndarray
    grading: Grading | None = None

    def __post_init__(self):
        object.__setattr__(self, "density", as_cmat(self.density, "density"))

    def __call__(self, x):
        return complex(np.trace(self.density @ np.asarray(x)))

    def is_state(self, tol=DEFAULT_TOL):
        w = herm_eigvals(self.density, tol=max(tol, 1e-12))
        return bool(w[0] >= -tol and abs(np.trace(self.density) - 1.0) <= tol)

    def is_even(self, tol=DEFAULT_TOL):
        if self.grading is None:
            return True
        rho = self.density
        return fro(ad_gamma(rho, self.grading) - rho) <= tol * max(1.0, fro(rho))


def product_functional(om, ph, x):
    """Product functional evaluated on a Fermi tensor element."""
    m = x.matrix if isinstance(x, FermiTensorElement) else np.asarray(x)
    return complex(np.trace(np.kron(om.density, ph.density) @ m))


@dataclass(frozen=True)
class PositivityVerdict:
    psd: bool
    min_eig: float
    gram: np.ndarray = field(repr=False)


def _plain_star(x):
    return dagger(x)


def _plain_mul(x, y):
    return x @ y


def functional_positivity_gram(f, basis, star=None, mul=None, tol=DEFAULT_TOL):
    """Gram certificate ``G_kl = f(b_k* b_l)``; positive iff min eigenvalue >= -tol.

    ``star`` and ``mul`` default to the ordinary matrix operations; pass
    ``fermi_star``/``fermi_mul`` for the Fermi product.
    """
    star = star or _plain_star
    mul = mul or _plain_mul
    m = len(basis)
    stars = [star(b) for b in basis]
    gram = np.empty((m, m), dtype=complex)
    for k in range(m):
        for l in range(m):
            gram[k, l] = f(mul(stars[k], basis[l]))
    herm_tol = 1e-8
    w = herm_eigvals(gram, tol=herm_tol)
    min_eig = float(w[0]) if m else 0.0
    return PositivityVerdict(min_eig >= -tol, min_eig, gram)


def homogeneous_basis(basis, g, tol=DEFAULT_TOL):
    """Split a basis of a graded-stable span into even and odd orthonormal parts.

    Returns ``(basis, parities)``; even elements come first.
    """
    from .numlin import span_basis

    basis = np.asarray(basis, dtype=complex)
    d = g.dim
    ev = span_basis(np.array([even_part(b, g) for b in basis]), d=d, tol=tol)
    od = span_basis(np.array([odd_part(b, g) for b in basis]), d=d, tol=tol)
    out = np.concatenate([ev, od]) if len(od) else ev
    par = np.array([EVEN] * len(ev) + [ODD] * len(od))
    return out, par


def matrix_units(d):
    units = np.zeros((d * d, d, d), dtype=complex)
    for i in range(d):
        for j in range(d):
            units[i * d + j, i, j] = 1.0
    return units


def fermi_product_basis(basis_a, ga, basis_b, gb, tol=DEFAULT_TOL):
    """Elementary tensors of homogeneous bases, as FermiTensorElements."""
    ha, _ = homogeneous_basis(basis_a, ga, tol)
    hb, _ = homogeneous_basis(basis_b, gb, tol)
    return [elementary(a, b, ga, gb) for a in ha for b in hb]


def product_state_gram(om, ph, basis_a=None, basis_b=None, tol=DEFAULT_TOL):
    """Positivity certificate for the product functional on the Fermi product."""
    ga = om.grading or trivial_grading(om.density.shape[0])
    gb = ph.grading or trivial_grading(ph.density.shape[0])
    basis_a = matrix_units(ga.dim) if basis_a is None else basis_a
    basis_b = matrix_units(gb.dim) if basis_b is None else basis_b
    ha, pa = homogeneous_basis(basis_a, ga, tol)
    hb, pb = homogeneous_basis(basis_b, gb, tol)
    # (a (x) b)^* (c (x) d) = eps(a, b) eps(b, c) a^*c (x) b^*d on homogeneous
    # elementary tensors, so the Gram is a sign-twisted product of factor Grams
    gom = np.einsum("rs,ksp,lpr->kl", om.density, dagger(ha), ha)
    gph = np.einsum("rs,ksp,lpr->kl", ph.density, dagger(hb), hb)
    odd_a = np.asarray(pa) == ODD
    odd_b = np.asarray(pb) == ODD
    s = np.where(np.logical_and.outer(odd_a, odd_b), -1.0, 1.0)
    gram = np.einsum("ij,kj,ik,jl->ijkl", s, s, gom, gph).reshape(len(ha) * len(hb), -1)
    w = herm_eigvals(gram, tol=1e-8)
    min_eig = float(w[0]) if len(w) else 0.0
    return PositivityVerdict(min_eig >= -tol, min_eig, gram)


def _car1_gram_tensor():
    """``T[k, l] = b_k* . b_l`` over the Fermi basis of CAR(1) x CAR(1)."""
    g = Grading(np.diag([1.0, -1.0]).astype(complex))
    elems = fermi_product_basis(matrix_units(2), g, matrix_units(2), g)
    stars = [fermi_star(e) for e in elems]
    m = len(elems)
    t = np.empty((m, m, 4, 4), dtype=complex)
    for k in range(m):
        for l in range(m):
            t[k, l] = fermi_mul(stars[k], elems[l]).matrix
    return t


def counterexample_search(samples=10_000, seed=42, batch=2_000):
    """Seeded scan over pairs of pure non-even states on CAR(1).

    Each state is ``(cos t, e^{i phi} sin t)`` with ``t`` away from the even
    points.  Returns a dict with the most negative Gram eigenvalue and the
    witnessing densities.
    """
    rng = np.random.default_rng(seed)
    t = _car1_gram_tensor()
    best = {"min_eig": np.inf}
    done = 0
    while done < samples:
        nb = min(batch, samples - done)
        ang = rng.uniform(0.05, np.pi / 2 - 0.05, size=(nb, 2))
        ph = rng.uniform(0.0, 2 * np.pi, size=(nb, 2))
        psi_a = np.stack([np.cos(ang[:, 0]), np.exp(1j * ph[:, 0]) * np.sin(ang[:, 0])], axis=1)
        psi_b = np.stack([np.cos(ang[:, 1]), np.exp(1j * ph[:, 1]) * np.sin(ang[:, 1])], axis=1)
        rho_a = np.einsum("bi,bj->bij", psi_a, psi_a.conj())
        rho_b = np.einsum("bi,bj->bij", psi_b, psi_b.conj())
        rho = np.einsum("bij,bkl->bikjl", rho_a, rho_b).reshape(nb, 4, 4)
        grams = np.einsum("bij,klji->bkl", rho, t)
        grams = 0.5 * (grams + np.conj(np.swapaxes(grams, 1, 2)))
        w = np.linalg.eigvalsh(grams)[:, 0]
        i = int(np.argmin(w))
        if w[i] < best["min_eig"]:
            best = {"min_eig": float(w[i]), "rho_a": rho_a[i], "rho_b": rho_b[i],
                    "sample": done + i}
        done += nb
    best["samples"] = samples
    best["seed"] = seed
    return best


def check_graded_product_rep(pi1, pi2, basis1, g1, basis2, g2, tol=DEFAULT_TOL,
                             pairs=64, seed=0):
    """Check that two representations graded-commute and jointly represent the Fermi product.

    ``pi1``/``pi2`` map matrices of the two domain algebras into a common
    matrix algebra.  Returns the largest residual found; raises
    CommutationFailed when the graded commutation relation is violated.
    """
    h1, p1 = homogeneous_basis(basis1, g1, tol)
    h2, p2 = homogeneous_basis(basis2, g2, tol)
    im1 = [np.asarray(pi1(a)) for a in h1]
    im2 = [np.asarray(pi2(b)) for b in h2]
    worst = 0.0
    for a, pa in zip(im1, p1):
        for b, pb in zip(im2, p2):
            r = fro(a @ b - fermi_sign(pa, pb) * (b @ a)) / max(1.0, fro(a) * fro(b))
            worst = max(worst, r)
    if worst > tol:
        raise CommutationFailed(f"graded commutation residual {worst:.3e} exceeds {tol:.1e}")

    def pi_of(x):
        # expand the ambient matrix in the product basis h1 (x) h2
        x4 = x.matrix.reshape(g1.dim, g2.dim, g1.dim, g2.dim)
        c = np.einsum("kij,lmn,imjn->kl", np.conj(h1), np.conj(h2), x4)
        out = np.zeros_like(im1[0])
        for k in range(len(h1)):
            for l in range(len(h2)):
                if c[k, l] != 0:
                    out = out + c[k, l] * (im1[k] @ im2[l])
        return out

    rng = np.random.default_rng(seed)
    n1, n2 = len(h1), len(h2)
    for _ in range(pairs):
        i, j, k, l = rng.integers(n1), rng.integers(n2), rng.integers(n1), rng.integers(n2)
        x = elementary(h1[i], h2[j], g1, g2)
        y = elementary(h1[k], h2[l], g1, g2)
        lhs = (im1[i] @ im2[j]) @ (im1[k] @ im2[l])
        rhs = pi_of(fermi_mul(x, y))
        worst = max(worst, fro(lhs - rhs) / max(1.0, fro(lhs)))
        sx = dagger(im1[i] @ im2[j])
        worst = max(worst, fro(sx - pi_of(fermi_star(x))) / max(1.0, fro(sx)))
    return worst
