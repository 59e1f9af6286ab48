import numpy as np
import pytest
from hypothesis import given, strategies as st

from fermikit.car import FockSpace, algebra_A, annihilation, grading_operator
from fermikit.errors import CommutationFailed, NotHermitian
from fermikit.graded import (EVEN, ODD, GradedFunctional, Grading, check_graded_product_rep,
                             conditional_expectation_even, counterexample_search, elementary,
                             eps_tilde, even_part, fermi_mul, fermi_product_basis, fermi_rep,
                             fermi_sign, fermi_star, functional_positivity_gram, klein_K,
                             klein_eta, klein_eta_inv, klein_kappa, matrix_units, odd_part,
                             parity, product_functional, product_grading, product_state_gram,
                             trivial_grading)
from fermikit.numlin import dagger, fro, random_matrix

G1 = Grading(np.diag([1.0, -1.0]).astype(complex))
A1 = np.array([[0, 1], [0, 0]], dtype=complex)       # a on CAR(1): f_1 -> f_0
seeds = st.integers(0, 2 ** 32 - 1)


def random_grading(rng, d):
    signs = rng.choice([-1.0, 1.0], size=d)
    q, _ = np.linalg.qr(random_matrix(rng, d))
    return Grading(q @ np.diag(signs) @ q.conj().T)


def test_grading_validation():
    with pytest.raises(NotHermitian):
        Grading(np.array([[0, 1], [0, 0]], dtype=complex))
    with pytest.raises(ValueError):
        Grading(np.diag([1.0, 2.0]))


def test_even_part_of_gamma():
    g = grading_operator(FockSpace(2))
    assert fro(even_part(g.gamma, g) - g.gamma) == 0


def test_odd_part_identity():
    assert fro(odd_part(np.eye(2), G1)) == 0


def test_even_part_of_a1_vanishes():
    fs = FockSpace(2)
    g = grading_operator(fs)
    assert fro(even_part(annihilation(1, fs), g)) == 0


def test_parity():
    assert parity(np.eye(2), G1) == EVEN
    assert parity(A1, G1) == ODD
    assert parity(np.eye(2) + A1, G1) == 0


def test_kappa_trivial_grading(rng):
    a = random_matrix(rng, 3)
    assert np.array_equal(klein_kappa(a, trivial_grading(3)), a)


def test_kappa_of_odd_generator():
    fs = FockSpace(2)
    g = grading_operator(fs)
    a = annihilation(1, fs)
    assert fro(klein_kappa(a, g) - g.gamma @ a) == 0


def test_eta_unit():
    assert fro(klein_eta(np.eye(2), G1) - np.eye(2)) == 0


def test_K_examples():
    assert np.array_equal(klein_K(trivial_grading(2)), np.eye(2))
    assert np.allclose(klein_K(G1), np.diag([1, -1j]))
    fs = FockSpace(2)
    k = klein_K(grading_operator(fs))
    f1 = fs.basis_vector([1])
    assert np.allclose(k @ f1, -1j * f1)


def test_fermi_sign_table():
    assert fermi_sign(EVEN, EVEN) == 1
    assert fermi_sign(ODD, ODD) == -1
    assert fermi_sign(ODD, EVEN) == 1
    assert fermi_sign(EVEN, ODD) == 1


def test_star_even_even(rng):
    a = even_part(random_matrix(rng, 2), G1)
    b = even_part(random_matrix(rng, 2), G1)
    x = fermi_star(elementary(a, b, G1, G1))
    assert fro(x.matrix - np.kron(dagger(a), dagger(b))) < 1e-15


def test_star_odd_odd():
    x = fermi_star(elementary(A1, A1, G1, G1))
    assert fro(x.matrix + np.kron(dagger(A1), dagger(A1))) == 0


def test_mul_unit_legs(rng):
    a, b = random_matrix(rng, 2), random_matrix(rng, 2)
    x = fermi_mul(elementary(a, np.eye(2), G1, G1), elementary(np.eye(2), b, G1, G1))
    assert fro(x.matrix - np.kron(a, b)) < 1e-15


def test_mul_odd_swap():
    b = A1
    big_a = dagger(A1)
    x = fermi_mul(elementary(np.eye(2), b, G1, G1), elementary(big_a, np.eye(2), G1, G1))
    assert fro(x.matrix + np.kron(big_a, b)) == 0


def test_product_grading():
    assert np.array_equal(product_grading(trivial_grading(2), trivial_grading(2)).gamma, np.eye(4))
    assert np.array_equal(product_grading(G1, G1).gamma.real, np.diag([1.0, -1, -1, 1]))
    x = elementary(A1, A1, G1, G1)
    g = product_grading(G1, G1)
    assert parity(x.matrix, g) == EVEN


def test_product_functional_examples(rng):
    om = GradedFunctional(np.diag([0.3, 0.7]), G1)
    ph = GradedFunctional(np.eye(2) / 2, G1)
    assert abs(product_functional(om, ph, elementary(np.eye(2), np.eye(2), G1, G1)) - 1) < 1e-15
    a = random_matrix(rng, 2)
    assert abs(product_functional(om, ph, elementary(a, np.eye(2), G1, G1)) - om(a)) < 1e-14
    tr = GradedFunctional(np.eye(2) / 2, G1)
    assert product_functional(tr, tr, elementary(A1, A1, G1, G1)) == 0


def test_gram_trace_state_m2():
    f = GradedFunctional(np.eye(2) / 2)
    v = functional_positivity_gram(f, matrix_units(2))
    # oracle: G_kl = tr(E_k^* E_l)/2 = I/2 for the matrix units
    assert v.psd and abs(v.min_eig - 0.5) < 1e-15
    assert np.allclose(v.gram, np.eye(4) / 2)


def test_gram_one_even_factor(rng):
    for _ in range(5):
        om = GradedFunctional(np.diag(rng.dirichlet([1, 1])).astype(complex), G1)
        v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        v /= np.linalg.norm(v)
        ph = GradedFunctional(np.outer(v, v.conj()), G1)
        assert product_state_gram(om, ph).psd


def test_counterexample_exists():
    ce = counterexample_search(samples=500, seed=1)
    assert ce["min_eig"] < -1e-6
    assert not GradedFunctional(ce["rho_a"], G1).is_even()
    assert not GradedFunctional(ce["rho_b"], G1).is_even()


def test_conditional_expectation_examples(rng):
    b = random_matrix(rng, 2)
    x = elementary(np.eye(2), b, G1, G1)
    assert fro(conditional_expectation_even(x).matrix - x.matrix) == 0
    assert fro(conditional_expectation_even(elementary(A1, b, G1, G1)).matrix) == 0


def test_conditional_expectation_positive(rng):
    for _ in range(5):
        x = elementary(random_matrix(rng, 2), random_matrix(rng, 2), G1, G1)
        x = x.like(x.matrix + np.kron(random_matrix(rng, 2), random_matrix(rng, 2)))
        y = fermi_mul(fermi_star(x), x)
        e = conditional_expectation_even(y)
        # the faithful representation turns E(x*x) into a PSD matrix
        w = np.linalg.eigvalsh(0.5 * (fermi_rep(e) + dagger(fermi_rep(e))))
        assert w[0] > -1e-12


def test_conditional_expectation_bimodule(rng):
    x = elementary(random_matrix(rng, 2), random_matrix(rng, 2), G1, G1)
    y = elementary(even_part(random_matrix(rng, 2), G1), random_matrix(rng, 2), G1, G1)
    lhs = conditional_expectation_even(fermi_mul(x, y))
    rhs = fermi_mul(conditional_expectation_even(x), y)
    assert fro(lhs.matrix - rhs.matrix) < 1e-13


def test_graded_product_rep_lattice_legs():
    # CAR(1) sent onto site 1 and site 2 of a two-site chain by its word basis
    fs = FockSpace(2)
    a = algebra_A((1,), FockSpace(1))
    w1 = algebra_A((1,), fs).basis * np.sqrt(2)
    w2 = algebra_A((2,), fs).basis * np.sqrt(2)
    pi1 = lambda x: np.tensordot(a.coords(x), w1, axes=(0, 0))
    pi2 = lambda x: np.tensordot(a.coords(x), w2, axes=(0, 0))
    assert check_graded_product_rep(pi1, pi2, a.basis, a.grading, a.basis, a.grading) < 1e-12


def test_graded_product_rep_rejects_same_leg():
    fs = FockSpace(1)
    a = algebra_A((1,), fs)
    ident = lambda x: x
    with pytest.raises(CommutationFailed):
        check_graded_product_rep(ident, ident, a.basis, a.grading, a.basis, a.grading)


def test_graded_product_rep_trivial_gradings():
    t = trivial_grading(2)
    pi1 = lambda x: np.kron(x, np.eye(2))
    pi2 = lambda x: np.kron(np.eye(2), x)
    assert check_graded_product_rep(pi1, pi2, matrix_units(2), t, matrix_units(2), t) < 1e-14


# ---------------------------------------------------------------- properties

@given(seeds, st.integers(1, 6))
def test_klein_identities(seed, d):
    rng = np.random.default_rng(seed)
    g = random_grading(rng, d)
    a, b = random_matrix(rng, d), random_matrix(rng, d)
    k = klein_K(g)
    e = klein_eta(a, g)
    assert fro(klein_kappa(klein_kappa(a, g), g) - a) < 1e-12 * max(1, fro(a))
    assert fro(e - k @ a @ dagger(k)) < 1e-12 * max(1, fro(a))
    assert fro(k @ k - g.gamma) < 1e-12
    assert fro(klein_eta(e, g) - g.gamma @ a @ g.gamma) < 1e-12 * max(1, fro(a))
    assert fro(e - eps_tilde(klein_kappa(a, g), g)) < 1e-12 * max(1, fro(a))
    assert fro(e - klein_kappa(eps_tilde(a, g), g)) < 1e-12 * max(1, fro(a))
    assert fro(klein_eta_inv(e, g) - a) < 1e-12 * max(1, fro(a))
    assert fro(klein_eta(a @ b, g) - e @ klein_eta(b, g)) < 1e-11 * max(1, fro(a) * fro(b))
    ev = even_part(a, g)
    assert fro(klein_kappa(ev, g) - klein_eta(ev, g)) < 1e-12 * max(1, fro(a))


@given(seeds, st.integers(1, 6))
def test_kappa_trace_property(seed, d):
    rng = np.random.default_rng(seed)
    g = random_grading(rng, d)
    rho = even_part(random_matrix(rng, d, hermitian=True), g)
    a, b = random_matrix(rng, d), random_matrix(rng, d)
    lhs = np.trace(rho @ klein_kappa(a, g) @ b)
    # only even rho: omega(kappa(a) b) = omega(a b) needs b's odd part to pair with gamma
    rhs = np.trace(rho @ a @ b)
    assert abs(np.trace(rho @ klein_kappa(a, g) @ even_part(b, g))
               - np.trace(rho @ a @ even_part(b, g))) < 1e-10 * max(1, abs(lhs), abs(rhs))


@given(seeds)
def test_fermi_star_involutive_and_antimultiplicative(seed):
    rng = np.random.default_rng(seed)
    ga, gb = random_grading(rng, 2), random_grading(rng, 3)
    x = elementary(random_matrix(rng, 2), random_matrix(rng, 3), ga, gb)
    x = x.like(x.matrix + np.kron(random_matrix(rng, 2), random_matrix(rng, 3)))
    y = x.like(np.kron(random_matrix(rng, 2), random_matrix(rng, 3)))
    assert fro(fermi_star(fermi_star(x)).matrix - x.matrix) < 1e-13
    lhs = fermi_star(fermi_mul(x, y)).matrix
    rhs = fermi_mul(fermi_star(y), fermi_star(x)).matrix
    assert fro(lhs - rhs) < 1e-11 * max(1, fro(lhs))


@given(seeds)
def test_fermi_mul_associative(seed):
    rng = np.random.default_rng(seed)
    ga, gb = random_grading(rng, 2), random_grading(rng, 2)
    x, y, z = (elementary(random_matrix(rng, 2), random_matrix(rng, 2), ga, gb) for _ in range(3))
    lhs = fermi_mul(fermi_mul(x, y), z).matrix
    rhs = fermi_mul(x, fermi_mul(y, z)).matrix
    assert fro(lhs - rhs) < 1e-12 * max(1, fro(lhs))


@given(seeds)
def test_fermi_mul_trivial_grading_is_ordinary(seed):
    rng = np.random.default_rng(seed)
    x = elementary(random_matrix(rng, 2), random_matrix(rng, 2), G1, trivial_grading(2))
    y = elementary(random_matrix(rng, 2), random_matrix(rng, 2), G1, trivial_grading(2))
    assert fro(fermi_mul(x, y).matrix - x.matrix @ y.matrix) < 1e-13


@given(seeds)
def test_sectors_sum_back(seed):
    rng = np.random.default_rng(seed)
    x = elementary(random_matrix(rng, 2), random_matrix(rng, 2), G1, G1)
    x = x.like(x.matrix + np.kron(random_matrix(rng, 2), random_matrix(rng, 2)))
    total = sum(x.sectors().values())
    assert fro(total - x.matrix) < 1e-13


@given(seeds)
def test_fermi_rep_is_star_homomorphism(seed):
    rng = np.random.default_rng(seed)
    x, y = (elementary(random_matrix(rng, 2), random_matrix(rng, 2), G1, G1) for _ in range(2))
    assert fro(fermi_rep(fermi_mul(x, y)) - fermi_rep(x) @ fermi_rep(y)) < 1e-12
    assert fro(fermi_rep(fermi_star(x)) - dagger(fermi_rep(x))) < 1e-12


@given(seeds)
def test_product_state_cauchy_schwarz(seed):
    rng = np.random.default_rng(seed)
    om = GradedFunctional(np.diag(rng.dirichlet([1, 1])).astype(complex), G1)
    ph = GradedFunctional(np.diag(rng.dirichlet([1, 1])).astype(complex), G1)
    basis = fermi_product_basis(matrix_units(2), G1, matrix_units(2), G1)
    c = rng.standard_normal(len(basis)) + 1j * rng.standard_normal(len(basis))
    x = basis[0].like(sum(ci * b.matrix for ci, b in zip(c, basis)))
    val = product_functional(om, ph, x)
    xx = product_functional(om, ph, fermi_mul(fermi_star(x), x))
    assert abs(val) ** 2 <= xx.real + 1e-10


@given(seeds, st.sampled_from([(1, 1), (1, 2), (2, 1)]))
def test_product_gram_closed_form_matches_fermi_products(seed, sizes):
    from fermikit.car import FockSpace
    rng = np.random.default_rng(seed)
    ga, gb = (grading_operator(FockSpace(k)) for k in sizes)

    def state(g):
        x = random_matrix(rng, g.dim)
        r = x @ dagger(x)
        return r / np.trace(r)

    om = GradedFunctional(even_part(state(ga), ga), ga)
    ph = GradedFunctional(state(gb), gb)
    fast = product_state_gram(om, ph)
    elems = fermi_product_basis(matrix_units(ga.dim), ga, matrix_units(gb.dim), gb)
    slow = functional_positivity_gram(lambda x: product_functional(om, ph, x), elems,
                                      fermi_star, fermi_mul)
    assert np.max(np.abs(fast.gram - slow.gram)) < 1e-14
    assert abs(fast.min_eig - slow.min_eig) < 1e-12
