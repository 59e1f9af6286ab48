"""The named checks a scenario can request, and report assembly."""
from __future__ import annotations

import os
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from functools import cached_property

import numpy as np

from . import __version__
from .balance import (abstract_fsqdb_residual, copy_iso, diag_fsqdb_residual,
                      fsqdb_residual, kappa_tilde, lattice_diagonal_state,
                      lattice_opposite, theta_sqdb_residual)
from .car import (algebra_A, annihilation, car_residual, complement,
                  grading_operator, jkw_residuals, jkw_transport, k_matches_klein,
                  mask_of, subset_key, subsets, zeta_with_signs)
from .commutant import (bjl_duality_check, commutant, complement_check, cyclic_check,
                        graded_stable_residual, separating_check, twisted_commutant_theorems)
from .duality import (bilinear_dual, check_cp, check_even, double_twisted_dual, dual_map,
                      faithfulness_sampled, fermionic_dual, map_distance,
                      twisted_dual, twisted_dual_eta, twisted_relation_residual)
from .errors import FermikitError, NotCP
from .gns import (diagonal_gram, diagonal_state, gns, modular_data, modular_residuals,
                  pi_delta_rep_residual, rep_residual, round_trip_residual,
                  stinespring, stinespring_residual)
from .graded import (GradedFunctional, Grading, counterexample_search, klein_K,
                     klein_eta, klein_kappa, eps_tilde, product_state_gram)
from .numlin import dagger, fro, random_matrix
from .scenario import CHECKS, build_map

# above this many basis elements the diagonal-state Gram matrix is not formed
DIAGONAL_GRAM_MAX = 16


def sub_seed(seed, name):
    """Per-check seed derived from the scenario seed and the check name."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(zlib.crc32(name.encode()),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class Context:
    """Lazily computed objects shared between the checks of one scenario."""

    def __init__(self, sc):
        self.sc = sc
        self.tol = sc.tol
        self.fs = sc.fs
        self.st = sc.state()

    @cached_property
    def grading(self):
        return grading_operator(self.fs)

    @cached_property
    def alg(self):
        return algebra_A(self.st.sites, self.fs)

    @cached_property
    def comp(self):
        return algebra_A(complement(self.st.sites, self.fs), self.fs)

    @cached_property
    def copy_full(self):
        return tuple(sorted(self.st.iota.values())) == complement(self.st.sites, self.fs)

    @cached_property
    def zeta(self):
        return zeta_with_signs(self.st, self.fs)

    @property
    def z(self):
        return self.zeta[0]

    @cached_property
    def phi(self):
        z = self.z
        return lambda a: complex(np.vdot(z, a @ z))

    @cached_property
    def psi(self):
        return build_map(self.sc.map_spec, self.alg, self.fs)

    @cached_property
    def scale(self):
        return max(1.0, self.psi.basis_norm())

    @cached_property
    def alg_commutant(self):
        return commutant(self.alg, self.tol)

    @cached_property
    def kappa(self):
        return copy_iso(self.st.iota, self.fs, self.tol)

    @cached_property
    def dual(self):
        return dual_map(self.psi, self.z, self.z, self.tol, self.alg_commutant, self.alg_commutant)

    @cached_property
    def twisted(self):
        g = self.grading
        return twisted_dual(self.psi, g, g, self.z, self.z, self.tol,
                            self.alg_commutant, self.alg_commutant)

    @cached_property
    def gns_triple(self):
        return gns(self.alg, self.phi, self.tol)

    @cached_property
    def units(self):
        return jkw_transport(self.st.sites, self.fs)

    @cached_property
    def psi_cp(self):
        return check_cp(self.psi, transport=self.units, tol=self.tol)

    @cached_property
    def even(self):
        return check_even(self.psi, self.grading, self.grading, self.tol)

    def transported(self, fn=None):
        """The map (default Psi) pulled back to M_{2^k} through the JKW units."""
        fn = fn or self.psi
        units = self.units
        dk = units.shape[0]
        norm2 = float(self.fs.dim >> len(self.st.sites))
        flat = np.conj(units.reshape(dk * dk, -1))

        def pulled(x):
            y = fn(np.tensordot(x, units, axes=([0, 1], [0, 1])))
            return (flat @ y.reshape(-1)).reshape(dk, dk) / norm2
        return pulled

    @cached_property
    def transported_state(self):
        units = self.units
        dk = units.shape[0]
        vals = np.array([[self.phi(units[r, c]) for c in range(dk)] for r in range(dk)])
        return vals.T


# ------------------------------------------------------------------ checks

def check_car_relations(ctx, seed):
    r = car_residual(ctx.fs)
    return r <= ctx.tol, {"anticommutator": r}, {}


def check_jkw_iso(ctx, seed):
    r = jkw_residuals(ctx.fs, seed=seed % (2 ** 32))
    return max(r.values()) <= ctx.tol, r, {}


def check_grading(ctx, seed):
    g = ctx.grading
    rng = np.random.default_rng(seed)
    k = klein_K(g)
    res = dict.fromkeys(["eta_is_KaK", "K_squared", "eta_squared", "eta_eps_kappa",
                         "kappa_involution"], 0.0)
    res["K_squared"] = fro(k @ k - g.gamma)
    for _ in range(20):
        a = random_matrix(rng, g.dim)
        e = klein_eta(a, g)
        res["eta_is_KaK"] = max(res["eta_is_KaK"], fro(e - k @ a @ dagger(k)))
        res["eta_squared"] = max(res["eta_squared"], fro(klein_eta(e, g) - g.gamma @ a @ g.gamma))
        res["eta_eps_kappa"] = max(res["eta_eps_kappa"], fro(e - eps_tilde(klein_kappa(a, g), g)))
        res["kappa_involution"] = max(res["kappa_involution"],
                                      fro(klein_kappa(klein_kappa(a, g), g) - a))
    res["k_operator"] = k_matches_klein(ctx.fs)
    res["algebra_graded_stable"] = graded_stable_residual(ctx.alg, g)
    return max(res.values()) <= ctx.tol, res, {}


def check_twisted_commutant(ctx, seed):
    th = twisted_commutant_theorems(ctx.alg, ctx.grading, ctx.tol)
    comp = complement_check(ctx.st.sites, ctx.fs, ctx.tol)
    res = {"eta_form": th["eta_form"], "double": th["double"], "complement": comp.distance}
    return max(res.values()) <= ctx.tol, res, {"dim_twisted": th["twisted"].dim}


def check_bjl(ctx, seed):
    r = bjl_duality_check(ctx.st.sites, ctx.fs, ctx.tol)
    ok = r["equal"] and r["cyclic_iff_separating"]
    return ok, {"distance": r["distance"]}, {"cyclic_iff_separating": r["cyclic_iff_separating"]}


def check_cyclic_separating(ctx, seed):
    cyc = cyclic_check(ctx.z, ctx.alg, ctx.tol)
    sep = separating_check(ctx.z, ctx.alg, ctx.tol)
    info = {"cyclic": cyc.ok, "separating": sep.ok, "rank": cyc.rank,
            "faithful_state": ctx.st.faithful()}
    return cyc.ok and sep.ok, {"min_singular_ratio": sep.min_sv}, info


def check_product_positivity(ctx, seed):
    rng = np.random.default_rng(seed)
    k = len(ctx.st.sites)
    dk = 1 << k
    par = np.array([(-1) ** bin(r).count("1") for r in range(dk)], dtype=complex)
    gk = Grading(np.diag(par))
    units = ctx.units
    transport_grading = max(fro(ctx.grading.gamma @ units[r, c] @ ctx.grading.gamma
                                - par[r] * par[c] * units[r, c])
                            for r in range(dk) for c in range(dk))
    om = GradedFunctional(ctx.transported_state, gk)
    w = rng.dirichlet(np.ones(2))
    g1 = Grading(np.diag([1.0, -1.0]).astype(complex))
    ph = GradedFunctional(np.diag(w).astype(complex), g1)
    verdict = product_state_gram(om, ph, tol=ctx.tol)
    ce = counterexample_search(samples=2000, seed=seed % (2 ** 32))
    res = {"gram_min_eig": verdict.min_eig, "counterexample_min_eig": ce["min_eig"],
           "transport_grading": transport_grading}
    ok = verdict.psd and ce["min_eig"] < -1e-6 and transport_grading <= ctx.tol
    return ok, res, {"state_even": om.is_even(ctx.tol)}


def check_gns(ctx, seed):
    g = ctx.gns_triple
    res = {"round_trip": round_trip_residual(g, ctx.phi), "representation": rep_residual(g)}
    info = {"gns_dim": g.dim}
    try:
        fn = ctx.transported()
        st = stinespring(fn, 1 << len(ctx.st.sites), ctx.tol)
        res["stinespring"] = stinespring_residual(st, fn)
        info["kraus_rank"] = len(st.kraus)
    except NotCP as exc:
        info["stinespring"] = f"skipped: {exc}"
    return max(res.values()) <= ctx.tol, res, info


def check_modular(ctx, seed):
    md = modular_data(ctx.gns_triple, ctx.tol)
    res = modular_residuals(ctx.gns_triple, md)
    return max(res.values()) <= ctx.tol, res, {}


def check_diagonal_state(ctx, seed):
    ds = diagonal_state(ctx.gns_triple, ctx.grading, ctx.tol)
    basis = ctx.alg.basis
    eye = np.eye(ctx.fs.dim)
    res = {
        "left_marginal": max(abs(ds(b, eye) - ctx.phi(b)) for b in basis),
        "right_marginal": max(abs(ds(eye, b) - ctx.phi(b)) for b in basis),
        "representation": pi_delta_rep_residual(ds, ctx.grading, ctx.tol, seed=seed % (2 ** 32)),
    }
    info = {}
    ok = max(res.values()) <= ctx.tol
    if ctx.alg.dim <= DIAGONAL_GRAM_MAX:
        gram, gram_rep, _ = diagonal_gram(ds, ctx.grading, ctx.tol)
        w = np.linalg.eigvalsh(0.5 * (gram + dagger(gram)))
        res["gram_min_eig"] = float(w[0])
        res["gram_vs_rep"] = fro(gram - gram_rep)
        ok = ok and w[0] >= -ctx.tol and res["gram_vs_rep"] <= ctx.tol * max(1.0, fro(gram))
    else:
        info["gram"] = f"skipped: algebra dimension above {DIAGONAL_GRAM_MAX}"
    return ok, res, info


def check_dual(ctx, seed):
    d = ctx.dual
    eye = np.eye(ctx.fs.dim)
    res = {"relation": d.info["residual"], "unital": fro(d(eye) - eye)}
    return max(res.values()) <= ctx.tol * ctx.scale, res, {}


def check_twisted_dual(ctx, seed):
    tw = ctx.twisted
    z = ctx.z
    eye = np.eye(ctx.fs.dim)
    res = {
        "relation": tw.info["residual"],
        "unital": fro(tw(eye) - eye),
        "state_dual": max(abs(np.vdot(z, tw(b) @ z) - np.vdot(z, b @ z)) for b in tw.domain.basis),
    }
    info = {"even": ctx.even[0]}
    ok = max(res.values()) <= ctx.tol * ctx.scale
    if ctx.even[0]:
        g = ctx.grading
        eta = twisted_dual_eta(ctx.psi, g, g, z, z, ctx.tol, dual=ctx.dual)
        res["eta_form"] = map_distance(eta, tw)
        ok = ok and res["eta_form"] <= ctx.tol * ctx.scale
        if ctx.psi_cp.cp and ctx.copy_full:
            cp = check_cp(tw, jkw_transport(complement(ctx.st.sites, ctx.fs), ctx.fs), ctx.tol)
            res["choi_min_eig"] = cp.min_choi_eig
            res["left_form"] = twisted_relation_residual(ctx.psi, tw, z, z, left=True)
            info["faithfulness_ratio"] = faithfulness_sampled(tw, seed=seed % (2 ** 32))
            ok = ok and cp.cp and res["left_form"] <= ctx.tol * ctx.scale
            ok = ok and info["faithfulness_ratio"] > ctx.tol
    return ok, res, info


def check_double_dual(ctx, seed):
    g = ctx.grading
    dd, _ = double_twisted_dual(ctx.psi, g, g, ctx.z, ctx.z, ctx.tol)
    res = {"distance": map_distance(dd, ctx.psi, basis=ctx.alg.basis)}
    return res["distance"] <= ctx.tol * ctx.scale, res, {}


def check_fermionic_dual(ctx, seed):
    import warnings

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        fd = fermionic_dual(ctx.psi, ctx.z, ctx.comp, ctx.grading, ctx.tol)
    # dual of the fermionic dual, with the two sides of the bilinear form exchanged
    back = bilinear_dual(fd, ctx.alg, ctx.z, ctx.tol)
    eye = np.eye(ctx.fs.dim)
    res = {"relation": fd.info["residual"], "vs_twisted_dual": fd.info["twisted_distance"],
           "unital": fro(fd(eye) - eye),
           "double": map_distance(back, ctx.psi, basis=ctx.alg.basis)}
    info = {"even": fd.info["even"], "warnings": [str(w.message) for w in caught]}
    return max(res.values()) <= ctx.tol * ctx.scale, res, info


def check_fsqdb(ctx, seed):
    r = fsqdb_residual(ctx.psi, ctx.st, ctx.kappa, ctx.fs, ctx.tol)
    dg = diag_fsqdb_residual(ctx.psi, ctx.st, ctx.kappa, ctx.fs, ctx.tol)
    res = {"residual": r["residual"], "scaled": r["scaled"], "diag_residual": dg["residual"],
           "path_difference": abs(r["residual"] - dg["residual"])}
    if r.get("twisted_vs_copy") is not None:
        res["twisted_vs_copy"] = r["twisted_vs_copy"]
    res.update({f"copy_{k}": v for k, v in ctx.kappa.residuals.items()})
    consistent = res["path_difference"] <= 1e-10 * ctx.scale and dg["holds"] == r["holds"]
    copy_ok = max(ctx.kappa.residuals.values()) <= ctx.tol
    return r["holds"] and consistent and copy_ok, res, {"holds": r["holds"], "paths_agree": consistent}


def check_theta_sqdb(ctx, seed):
    r = theta_sqdb_residual(ctx.transported(), ctx.transported_state, tol=ctx.tol)
    res = {k: v for k, v in r.items() if k != "holds"}
    ok = r["holds"] and r["twisted_vs_dual"] <= ctx.tol and r["state_theta"] <= ctx.tol
    return ok, res, {}


def check_abstract_fsqdb(ctx, seed):
    ds = lattice_diagonal_state(ctx.st, ctx.fs, ctx.tol)
    r = lattice_opposite(ctx.kappa, ctx.st, ctx.fs, ctx.tol)
    out = abstract_fsqdb_residual(ctx.psi, ds, r, ctx.tol, rho_name="j o eta^-1 o kappa")
    res = {"residual": out["residual"], "scaled": out["scaled"]}
    res.update({f"opposite_{k}": v for k, v in out["opposite"].items()})
    opp_ok = max(v for k, v in out["opposite"].items() if k != "rank_defect") <= ctx.tol
    ok = out["holds"] and opp_ok and out["opposite"]["rank_defect"] == 0
    return ok, res, {"rho": out["rho"]}


REGISTRY = {
    "car-relations": check_car_relations,
    "jkw-iso": check_jkw_iso,
    "grading": check_grading,
    "twisted-commutant": check_twisted_commutant,
    "bjl-duality": check_bjl,
    "cyclic-separating": check_cyclic_separating,
    "product-positivity": check_product_positivity,
    "gns": check_gns,
    "modular": check_modular,
    "diagonal-state": check_diagonal_state,
    "dual": check_dual,
    "twisted-dual": check_twisted_dual,
    "double-dual": check_double_dual,
    "fermionic-dual": check_fermionic_dual,
    "fsqdb": check_fsqdb,
    "theta-sqdb": check_theta_sqdb,
    "abstract-fsqdb": check_abstract_fsqdb,
}
assert tuple(REGISTRY) == CHECKS


def _clean(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def run_check(ctx, name, timing=False):
    seed = sub_seed(ctx.sc.seed, name)
    t0 = time.perf_counter()
    rec = {"name": name}
    try:
        ok, residuals, info = REGISTRY[name](ctx, seed)
        rec["pass"] = bool(ok)
        rec["residuals"] = _clean(residuals)
        if info:
            rec["info"] = _clean(info)
    except FermikitError as exc:
        rec["pass"] = False
        rec["error"] = f"{type(exc).__name__}: {exc}"
    rec["tolerances"] = {"tol": ctx.tol}
    rec["seed"] = seed
    if timing:
        rec["elapsed_ms"] = round(1000 * (time.perf_counter() - t0), 3)
    return rec


def thread_cap():
    try:
        return max(1, int(os.environ.get("FERMIKIT_THREADS", "1")))
    except ValueError:
        return 1


def facts(ctx):
    """Closed-form facts of a lattice scenario: zeta, the copy on generators, j on generators."""
    z, flips = ctx.zeta
    fs = ctx.fs
    out = {"zeta": {}, "zeta_sign_flips": [subset_key(s) for s in flips]}
    for s in subsets(ctx.st.sites):
        string = list(s) + [ctx.st.iota[l] for l in s]
        m = mask_of(string)
        out["zeta"][subset_key(sorted(string))] = [_round(z[m].real), _round(z[m].imag)]
    k = ctx.kappa
    md = modular_data(_spatial(ctx), ctx.tol)
    out["kappa_generators"] = {}
    out["kappa_tilde_distance"] = {}
    out["j_generators"] = {}
    for l in ctx.st.sites:
        a = annihilation(l, fs)
        img = annihilation(ctx.st.iota[l], fs)
        out["kappa_generators"][str(l)] = _round(fro(k(a) - img))
        out["kappa_tilde_distance"][str(l)] = _round(float(np.linalg.norm(
            k(a) - kappa_tilde(a, ctx.st, fs, ctx.tol), 2)))
        out["j_generators"][str(l)] = _sparse(md.j(a))
    return out


def _spatial(ctx):
    from .gns import spatial_triple
    return spatial_triple(ctx.alg, ctx.z, ctx.tol)


def _round(v, digits=12):
    v = round(float(v), digits)
    return 0.0 if v == 0 else v


def _sparse(m, digits=12):
    """Nonzero entries as ``[row_mask, col_mask, re, im]``."""
    out = []
    for r, c in zip(*np.nonzero(np.abs(m) > 10.0 ** -digits)):
        out.append([int(r), int(c), _round(m[r, c].real, digits), _round(m[r, c].imag, digits)])
    return out


def run_scenario(sc, timing=False):
    """Run every requested check and assemble the report."""
    ctx = Context(sc)
    names = list(sc.checks)
    threads = thread_cap()
    if threads > 1 and len(names) > 1:
        # shared lazy objects are computed up front so workers only read them
        _ = (ctx.psi, ctx.alg_commutant)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda n: run_check(ctx, n, timing), names))
    else:
        records = [run_check(ctx, n, timing) for n in names]
    report = {
        "toolkit": "fermikit",
        "version": __version__,
        "scenario": sc.name,
        "digest": sc.digest(),
        "tol": sc.tol,
        "seed": sc.seed,
        "checks": records,
        "passed": all(r["pass"] for r in records),
    }
    if sc.report_facts:
        report["facts"] = facts(ctx)
    return report


__all__ = ["REGISTRY", "Context", "run_check", "run_scenario", "sub_seed", "facts", "thread_cap"]
