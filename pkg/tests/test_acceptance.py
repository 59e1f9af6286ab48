"""The fourteen acceptance criteria, each at its stated tolerance.

Every test prints one ``criterion N: PASS|FAIL`` line before asserting, so
``pytest -s`` or the captured output shows the full scorecard.
"""
import json

import numpy as np
import pytest

from fermikit.balance import (copy_iso, davies_kraus,
                              diag_fsqdb_residual, fsqdb_residual, heisenberg, kappa_tilde,
                              lattice_diagonal_state, theta_sqdb_residual)
from fermikit.car import (FockSpace, LatticeState, OperatorAlgebra, algebra_A, annihilation, car_residual,
                          complement, creation, grading_operator, jkw_residuals, jkw_transport,
                          number, subsets, uniform_state, zeta)
from fermikit.checks import Context
from fermikit.cli import main
from fermikit.commutant import (bjl_duality_check, cyclic_check, separating_check,
                                subspace_equal, twisted_commutant_theorems)
from fermikit.duality import (check_cp, conjugation_map, double_twisted_dual, dual_map,
                              even_projection_map, grading_map, identity_map, map_distance,
                              mixture_map)
from fermikit.gns import (diagonal_gram, gns, modular_data, modular_residuals,
                          round_trip_residual, spatial_triple, stinespring,
                          stinespring_residual)
from fermikit.graded import (GradedFunctional, Grading, counterexample_search, eps_tilde,
                             even_part, klein_K, klein_eta, klein_kappa, matrix_units,
                             product_state_gram)
from fermikit.numlin import dagger, fro, random_matrix
from fermikit.scenario import build_map, load_scenario, perturbed_map_spec

from helpers import random_even_channel
from test_cli import SCEN


@pytest.fixture
def verdict(capsys):
    def record(n, ok, detail=""):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip())
        assert ok, f"criterion {n}: {detail}"
    return record


def test_criterion_01_car(verdict):
    worst = max(car_residual(FockSpace(n)) for n in range(1, 7))
    verdict(1, worst <= 1e-13, f"max anticommutator residual {worst:.2e}")


def test_criterion_02_jkw(verdict):
    worst = max(max(jkw_residuals(FockSpace(n), samples=100).values()) for n in range(1, 7))
    verdict(2, worst <= 1e-12, f"max matrix-unit/commutation/multiplicativity residual {worst:.2e}")


def test_criterion_03_klein(verdict):
    rng = np.random.default_rng(3)
    worst = 0.0
    for t in range(100):
        d = int(rng.integers(1, 65))
        signs = rng.choice([-1.0, 1.0], size=d)
        if t % 2:
            # grading in a random basis
            q, _ = np.linalg.qr(random_matrix(rng, d))
            gamma = q @ np.diag(signs) @ dagger(q)
            gamma = 0.5 * (gamma + dagger(gamma))
        else:
            gamma = np.diag(signs).astype(complex)
        g = Grading(gamma)
        a = random_matrix(rng, d)
        a /= fro(a)
        k = klein_K(g)
        e = klein_eta(a, g)
        worst = max(worst, fro(e - k @ a @ dagger(k)), fro(k @ k - g.gamma),
                    fro(klein_eta(e, g) - g.gamma @ a @ g.gamma),
                    fro(e - eps_tilde(klein_kappa(a, g), g)))
    verdict(3, worst <= 1e-12, f"100 random unit-norm matrices, d <= 64, max residual {worst:.2e}")


def test_criterion_04_twisted_commutant(verdict):
    worst = {"eta_form": 0.0, "double": 0.0, "complement": 0.0}
    for n in range(1, 6):
        fs = FockSpace(n)
        for sites in subsets(fs.sites):
            r = twisted_commutant_theorems(algebra_A(sites, fs))
            worst["eta_form"] = max(worst["eta_form"], r["eta_form"])
            worst["double"] = max(worst["double"], r["double"])
            comp = algebra_A(complement(sites, fs), fs)
            worst["complement"] = max(worst["complement"], subspace_equal(r["twisted"], comp).distance)
    ok = max(worst.values()) <= 1e-10
    verdict(4, ok, "all I, n <= 5: " + ", ".join(f"{k} {v:.2e}" for k, v in worst.items()))


def test_criterion_05_bjl(verdict):
    worst, agree = 0.0, True
    for n in range(1, 5):
        fs = FockSpace(n)
        for sites in subsets(fs.sites):
            r = bjl_duality_check(sites, fs)
            worst = max(worst, r["distance"])
            agree = agree and r["cyclic_iff_separating"]
    verdict(5, worst <= 1e-10 and agree, f"all I, n <= 4: max distance {worst:.2e}")


def test_criterion_06_zeta_cyclic_separating(verdict):
    rng = np.random.default_rng(6)
    ok, worst_sv = True, np.inf
    for _ in range(20):
        k = int(rng.integers(1, 4))
        n = 2 * k
        fs = FockSpace(n)
        sites = tuple(sorted(rng.choice(np.arange(1, n + 1), size=k, replace=False).tolist()))
        comp = list(complement(sites, fs))
        rng.shuffle(comp)
        iota = dict(zip(sites, (int(c) for c in comp)))
        ss = subsets(sites)
        st_ = LatticeState(sites, dict(zip(ss, rng.dirichlet(np.ones(len(ss))))), iota)
        z = zeta(st_, fs)
        alg = algebra_A(sites, fs)
        c, s = cyclic_check(z, alg), separating_check(z, alg)
        ok = ok and c.ok and s.ok
        worst_sv = min(worst_sv, c.min_sv)
    verdict(6, ok, f"20 random states, n <= 6, |I| <= 3, smallest relative singular value {worst_sv:.2e}")


def test_criterion_07_worked_example(verdict):
    fs = FockSpace(4)
    st_ = uniform_state((1, 2), {1: 3, 2: 4})
    z = zeta(st_, fs)
    shown = 0.5 * (fs.basis_vector([]) + fs.basis_vector([1, 3]) + fs.basis_vector([2, 4])
                   + fs.basis_vector([1, 2, 3, 4]))
    dz = float(np.max(np.abs(z - shown)))
    md = modular_data(spatial_triple(algebra_A((1, 2), fs), z))
    a1 = annihilation(1, fs)
    target = creation(3, fs) @ (np.eye(16) - 2 * number(4, fs)) @ grading_operator(fs).gamma
    dj = fro(md.j(a1) - target)
    k = copy_iso({1: 3, 2: 4}, fs)
    dk = fro(k(a1) - annihilation(3, fs))
    sep = float(np.linalg.norm(k(a1) - kappa_tilde(a1, st_, fs), 2))
    ok = dz <= 1e-14 and dj <= 1e-10 and dk <= 1e-12 and sep > 0.5
    verdict(7, ok, f"zeta {dz:.1e}, j(a1) {dj:.1e}, kappa(a1)-a3 {dk:.1e}, |kappa - kappa~| {sep:.3f}")


def _occupation_unitary(rng, sites, fs):
    """``sum_s e^{i t_s} P_s`` over occupation projections of the sites: even, diagonal, in A(I)."""
    u = np.zeros((fs.dim, fs.dim), dtype=complex)
    for s in subsets(sites):
        p = np.eye(fs.dim, dtype=complex)
        for l in sites:
            p = p @ (number(l, fs) if l in s else np.eye(fs.dim) - number(l, fs))
        u += np.exp(1j * rng.uniform(0, 2 * np.pi)) * p
    return u


def _criterion8_map(rng, alg, g, fs, sites, biased):
    if not biased:
        return random_even_channel(rng, alg, g)
    w = rng.dirichlet(np.ones(3))
    return mixture_map([(float(w[0]), conjugation_map(alg, _occupation_unitary(rng, sites, fs))),
                        (float(w[1]), conjugation_map(alg, _occupation_unitary(rng, sites, fs))),
                        (float(w[2]), even_projection_map(alg, g))])


def test_criterion_08_duality(verdict):
    rng = np.random.default_rng(8)
    fs = FockSpace(4)
    sites, iota = (1, 2), {1: 3, 2: 4}
    g = grading_operator(fs)
    alg = algebra_A(sites, fs)
    units_comp = jkw_transport((3, 4), fs)
    eye = np.eye(fs.dim)
    worst = {"relation": 0.0, "unital": 0.0, "state_dual": 0.0, "double": 0.0}
    min_choi = np.inf
    for t in range(20):
        biased = t % 2 == 1
        if biased:
            ss = subsets(sites)
            st_ = LatticeState(sites, dict(zip(ss, rng.dirichlet(np.ones(4)))), iota)
        else:
            st_ = uniform_state(sites, iota)
        z = zeta(st_, fs)
        psi = _criterion8_map(rng, alg, g, fs, sites, biased)
        d = dual_map(psi, z, z)
        dd, tw = double_twisted_dual(psi, g, g, z, z)
        worst["relation"] = max(worst["relation"], d.info["residual"], tw.info["residual"])
        worst["unital"] = max(worst["unital"], fro(tw(eye) - eye))
        worst["state_dual"] = max(worst["state_dual"], max(
            abs(np.vdot(z, tw(b) @ z) - np.vdot(z, b @ z)) for b in tw.domain.basis))
        worst["double"] = max(worst["double"], map_distance(dd, psi, basis=alg.basis))
        min_choi = min(min_choi, check_cp(tw, units_comp).min_choi_eig)
    ok = (worst["relation"] <= 1e-10 and worst["unital"] <= 1e-10 and worst["state_dual"] <= 1e-10
          and worst["double"] <= 1e-9 and min_choi >= -1e-10)
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    verdict(8, ok, f"20 random even CP maps: {detail}, min Choi eig {min_choi:.1e}")


def test_criterion_09_product_positivity(verdict):
    rng = np.random.default_rng(9)
    gradings = [Grading(np.diag([1.0, -1.0]).astype(complex)), grading_operator(FockSpace(2))]

    def state(d):
        x = random_matrix(rng, d)
        r = x @ dagger(x)
        return r / np.trace(r)

    worst = np.inf
    for t in range(50):
        ga = gradings[t % 2]
        gb = gradings[(t // 2) % 2]
        rho_a = even_part(state(ga.dim), ga)
        rho_a /= np.trace(rho_a)
        om, ph = GradedFunctional(rho_a, ga), GradedFunctional(state(gb.dim), gb)
        if t % 3 == 0:
            om, ph = ph, om
        worst = min(worst, product_state_gram(om, ph).min_eig)
    ce = counterexample_search(samples=10_000, seed=42)
    ok = worst >= -1e-10 and ce["min_eig"] < -1e-6
    verdict(9, ok, f"50 pairs with an even factor: min eig {worst:.1e}; "
                   f"non-even witness min eig {ce['min_eig']:.3e}")


def test_criterion_10_diagonal_state(verdict):
    fs = FockSpace(4)
    ss = subsets((1, 2))
    st_ = LatticeState((1, 2), dict(zip(ss, [0.4, 0.3, 0.2, 0.1])), {1: 3, 2: 4})
    z = zeta(st_, fs)
    phi = lambda x: complex(np.vdot(z, x @ z))
    g = grading_operator(fs)
    ds = lattice_diagonal_state(st_, fs)
    gram, gram_rep, _ = diagonal_gram(ds, g)
    min_eig = float(np.linalg.eigvalsh(0.5 * (gram + dagger(gram)))[0])
    eye = np.eye(16)
    basis = algebra_A((1, 2), fs).basis
    marg = max(max(abs(ds(b, eye) - phi(b)), abs(ds(eye, b) - phi(b))) for b in basis)
    ok = min_eig >= -1e-10 and marg <= 1e-12 and fro(gram - gram_rep) <= 1e-10
    verdict(10, ok, f"Gram min eig {min_eig:.1e}, marginals {marg:.1e}")


def test_criterion_11_fsqdb(verdict):
    fs = FockSpace(4)
    st_ = uniform_state((1, 2), {1: 3, 2: 4})
    k = copy_iso({1: 3, 2: 4}, fs)
    g = grading_operator(fs)
    alg = k.source
    balanced = {"id": identity_map(alg), "gamma": grading_map(alg, g),
                "eps": even_projection_map(alg, g)}
    res = {name: fsqdb_residual(m, st_, k, fs, cross_check=False)["residual"]
           for name, m in balanced.items()}
    pert = build_map(perturbed_map_spec(4, 0.1), alg, fs)
    r_pert = fsqdb_residual(pert, st_, k, fs, cross_check=False)["residual"]
    gap = 0.0
    for path in sorted(SCEN.iterdir()):
        if "malformed" in path.name:
            continue
        ctx = Context(load_scenario(str(path)))
        a = fsqdb_residual(ctx.psi, ctx.st, ctx.kappa, ctx.fs, cross_check=False)["residual"]
        b = diag_fsqdb_residual(ctx.psi, ctx.st, ctx.kappa, ctx.fs)["residual"]
        gap = max(gap, abs(a - b) / ctx.scale)
    for m in list(balanced.values()) + [pert]:
        a = fsqdb_residual(m, st_, k, fs, cross_check=False)["residual"]
        gap = max(gap, abs(a - diag_fsqdb_residual(m, st_, k, fs)["residual"]))
    ok = max(res.values()) <= 1e-12 and r_pert > 1e-3 and gap <= 1e-10
    detail = ", ".join(f"{n} {v:.1e}" for n, v in res.items())
    verdict(11, ok, f"{detail}; perturbed {r_pert:.4f}; |fsqdb - diag| {gap:.1e}")


def test_criterion_12_theta_sqdb(verdict):
    worst_res, worst_tw = 0.0, 0.0
    for p1 in (2 / 3, 0.55, 0.8):
        r = theta_sqdb_residual(heisenberg(davies_kraus(p1, 0.2)), np.diag([p1, 1 - p1]))
        worst_res = max(worst_res, r["residual"])
        worst_tw = max(worst_tw, r["twisted_vs_dual"])
    ok = worst_res <= 1e-8 and worst_tw <= 1e-12
    verdict(12, ok, f"Davies residual {worst_res:.1e}, twisted vs ordinary dual {worst_tw:.1e}")


def test_criterion_13_gns_modular(verdict):
    fs = FockSpace(4)
    ss = subsets((1, 2))
    st_ = LatticeState((1, 2), dict(zip(ss, [0.4, 0.3, 0.2, 0.1])), {1: 3, 2: 4})
    z = zeta(st_, fs)
    phi = lambda x: complex(np.vdot(z, x @ z))
    tri = gns(algebra_A((1, 2), fs), phi)
    rt = round_trip_residual(tri, phi)
    mod = max(modular_residuals(tri, modular_data(tri)).values())
    rho = np.diag([2 / 3, 1 / 3]).astype(complex)
    tri2 = gns(OperatorAlgebra(matrix_units(2)), lambda x: complex(np.trace(rho @ x)))
    mod = max(mod, max(modular_residuals(tri2, modular_data(tri2)).values()))
    gam = grading_operator(FockSpace(3)).gamma
    eps = lambda x: 0.5 * (x + gam @ x @ gam)
    sp = stinespring_residual(stinespring(eps, 8), eps)
    kr = heisenberg(davies_kraus(0.7, 0.3))
    sp = max(sp, stinespring_residual(stinespring(kr, 2), kr))
    ok = rt <= 1e-12 and mod <= 1e-10 and sp <= 1e-10
    verdict(13, ok, f"round trip {rt:.1e}, modular {mod:.1e}, Stinespring {sp:.1e}")


def test_criterion_14_determinism(verdict, tmp_path, capsys):
    outs = []
    for i in range(2):
        path = tmp_path / f"r{i}.json"
        assert main(["demo", "--sites", "4", "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    capsys.readouterr()
    ok = outs[0] == outs[1] and json.loads(outs[0])["passed"]
    verdict(14, ok, f"two demo reports, {len(outs[0])} bytes each, identical: {outs[0] == outs[1]}")
