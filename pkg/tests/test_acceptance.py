"""The nine acceptance criteria at their stated tolerances.

Each test prints one PASS/FAIL line (visible even under output capture) and
then asserts the criterion.
"""

import time

import numpy as np
import pytest

from cr3lab import analysis as A
from cr3lab import fields as F
from cr3lab import hodge as H
from cr3lab import operators as O
from cr3lab import spectral as Sp
from cr3lab import structures as S
from cr3lab.errors import NotSasakian
from cr3lab.operators import WeightedTensorCoefficient as W

SUITE_START = time.perf_counter()


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}")
        assert ok, detail
    return emit


def decompose(sd):
    return H.kohn_decompose(H.sigma_eta(H.construct_sigma(sd)), sd)


def models():
    return {
        "sphere": S.solve_structure(S.reference_coframe()),
        "left_invariant(1.1)": S.solve_structure(S.left_invariant_coframe(1.1)),
        "perturbed": S.solve_structure(S.build_model(S.ModelSpec("perturbed", eps=0.1))),
    }


def test_criterion_1_structure_solver(verdict):
    t0 = time.perf_counter()
    sd = S.solve_structure(S.reference_coframe())
    wall = time.perf_counter() - t0
    a11 = F.sup_norm(sd.A11)
    r_dev = F.sup_norm(sd.R - sd.integrate(sd.R).real / sd.volume().real)
    se = sd.residuals["structure_equation"]
    ok = a11 <= 1e-10 and r_dev <= 1e-10 and se <= 1e-9 and wall <= 1.0
    verdict(1, "structure solver", ok,
            f"|A11| {a11:.1e}, R deviation {r_dev:.1e}, structure residual {se:.1e}, {wall:.3f} s")


def test_criterion_2_commutation(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for sd in (S.solve_structure(S.reference_coframe()), S.solve_structure(S.left_invariant_coframe(1.1))):
        for _ in range(20):
            worst = max(worst, *O.check_commutation(W(F.random_real_field(rng, 3), 0), sd))
        worst = max(worst, *O.check_commutation(W(sd.A11, 2), sd))
    wall = time.perf_counter() - t0
    verdict(2, "commutation relations on exact-polynomial models", worst <= 1e-8 and wall <= 5.0,
            f"max relative residual {worst:.1e}, {wall:.2f} s")


def test_criterion_3_paneitz_contracts(verdict):
    worst_sym = worst_form = worst_kill = 0.0
    crph = [S.named_field("one")]
    for d in range(1, 7):
        for a in range(d + 1):
            m = F.Field.monomial(a, d - a)
            crph += [m.real, m.imag]
    for name in ("sphere", "perturbed"):
        sd = models()[name]
        m = Sp.assemble(sd, 6)
        worst_sym = max(worst_sym, m.asymmetry)
        worst_form = max(worst_form, m.form_residual)
        worst_kill = max(worst_kill, max(F.sup_norm(O.p0(e, sd)) for e in crph))
    sph = Sp.eigensolve(Sp.assemble(models()["sphere"], 6))
    mu = sph.eigenvalues
    non_kernel = mu[np.abs(mu) > sph.threshold]
    ok = (worst_sym <= 1e-8 and worst_form <= 1e-8 and worst_kill <= 1e-9
          and mu[0] >= -1e-9 and bool(np.all(non_kernel > 0)))
    verdict(3, "Paneitz contracts at N = 6", ok,
            f"asymmetry {worst_sym:.1e}, by-parts form {worst_form:.1e}, P0 on CR-pluriharmonic "
            f"{worst_kill:.1e}, min eigenvalue {mu[0]:.1e}, gap ratio {sph.gap:.1e}")


def test_criterion_4_kernel_identification(verdict):
    rep = Sp.eigensolve(Sp.assemble(models()["sphere"], 4))
    ang = Sp.principal_angles(rep).max() if rep.kernel_dim == 29 else np.inf
    verdict(4, "kernel of P0 on the sphere at N = 4", rep.kernel_dim == 29 and ang <= 1e-6,
            f"kernel dimension {rep.kernel_dim}, max principal angle {ang:.1e}")


def test_criterion_5_transformation_laws(verdict):
    saved = F.workspace()
    F.set_workspace(F.Workspace(cap=48, series_order=12))
    try:
        t0 = time.perf_counter()
        base = S.solve_structure(S.reference_coframe())
        lam = S.named_field("re_zwbar") * 0.1
        tilde = S.solve_structure(S.conformal_rescale(base.coframe, log=lam))
        f = S.named_field("zzbar") + S.named_field("re_zw")
        rows = O.check_transformations(base, tilde, lam, f, F.random_points(50, 5))
        wall = time.perf_counter() - t0
    finally:
        F.set_workspace(saved)
    gated = {k: rows[k] for k in ("w1", "p1", "p0", "q", "w1_expanded")}
    ok = max(gated.values()) <= 1e-5 and wall <= 60.0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in gated.items())
    verdict(5, "conformal transformation laws (eps 0.1, J 12, 50 points)", ok,
            f"{detail}; coefficient-3 Q law {rows['q_coef3']:.1e}; {wall:.2f} s")


def test_criterion_6_convexity(verdict):
    pts = A.random_points(100, seed=6)
    rows = A.convexity_table(pts)
    diff = max(r["abs_diff"] for r in rows)
    agree = all(r["convex"] == r["form_verdict"] for r in rows)
    n_conv = sum(r["convex"] for r in rows)
    n_deg = sum(p._bc()[1] == 0.0 for p in pts)
    ok = diff <= 1e-6 and agree and 0 < n_conv < 100 and n_deg > 0
    verdict(6, "convexity closed form and pinching equivalence", ok,
            f"max |closed - sampled| {diff:.1e}, verdicts agree {agree}, "
            f"{n_conv} convex / {100 - n_conv} not, {n_deg} degenerate")


def test_criterion_7_pipeline(verdict):
    ms = models()
    pt = ms["perturbed"]
    out0, *_ = H.run_pipeline(pt, S.named_field("zero"))
    out1, *_ = H.run_pipeline(pt, S.named_field("re_zw"))
    g10 = 0.0
    sasakian = 0
    for sd in (ms["sphere"], S.solve_structure(S.left_invariant_coframe(1.0))):
        try:
            g10 = max(g10, H.check_torsion_free_gamma(sd, decompose(sd))["gamma_1_0"])
            sasakian += 1
        except NotSasakian:
            pass
    ok = (out0["w1_identity"] <= 1e-5 and out0["w1_tilde"] <= 1e-4 and out1["w1_tilde"] <= 1e-4
          and sasakian == 2 and g10 <= 1e-8)
    verdict(7, "pseudo-Einstein pipeline", ok,
            f"W1 identity {out0['w1_identity']:.1e}, |W~1| {out0['w1_tilde']:.1e} (f = 0), "
            f"{out1['w1_tilde']:.1e} (f = Re zw), Sasakian |gamma_1,0| {g10:.1e}")


def test_criterion_8_bochner(verdict):
    ms = models()
    worst = {}
    inter = 0.0
    for name, tol in (("perturbed", 1e-4), ("left_invariant(1.1)", 1e-5)):
        sd = ms[name]
        dec = decompose(sd)
        f, _ = H.solve_pe_equation(sd, dec)
        r1 = A.check_bochner_pe(sd, f, dec)
        r2 = A.check_bochner_q(sd, dec)
        worst[name] = (max(r1["bochner"], r2["bochner_q"]), tol)
        inter = max(inter, r1["torsion_balance"], r1["p0_by_parts"], r1["p1_to_torsion"],
                    r2["t_by_parts"], r2["bochner_torsion"])
    ok = all(v <= tol for v, tol in worst.values()) and inter <= 1e-5
    detail = ", ".join(f"{k} {v:.1e}" for k, (v, _) in worst.items())
    verdict(8, "Bochner-type identities", ok, f"{detail}; intermediate steps {inter:.1e}")


def test_criterion_9_eigenvalue_bound(verdict):
    details = []
    ok = True
    for name, sd in models().items():
        rep = Sp.eigensolve(Sp.assemble(sd, 6, cross_check=False))
        res = Sp.check_perp_bound(sd, decompose(sd).u, S.q_curvature(sd), rep)
        if res["hypothesis"]:
            ok &= res["margin"] >= 0
            details.append(f"{name} margin {res['margin']:.2e}")
        else:
            details.append(f"{name} hypothesis unmet")
    rows = Sp.lambda_table(models()["sphere"], (6, 8))
    drift = abs(rows[1]["Lambda"] - rows[0]["Lambda"]) / abs(rows[1]["Lambda"])
    total = time.perf_counter() - SUITE_START
    ok &= drift < 0.05 and total <= 600.0
    verdict(9, "eigenvalue bound on the kernel complement", ok,
            f"{'; '.join(details)}; Lambda drift N 6 to 8 {drift:.1e}; suite {total:.1f} s")
