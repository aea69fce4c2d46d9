import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cr3lab import analysis as A
from cr3lab import fields as F
from cr3lab import hodge as H
from cr3lab import structures as S
from cr3lab.errors import PreconditionViolated

coef = st.floats(-3, 3, allow_nan=False)
cpos = st.floats(0, 1, allow_nan=False)


def brute_max(p, n=200001, S_=1e6):
    s = np.sinh(np.linspace(-math.asinh(S_), math.asinh(S_), n))
    return max(float(p.f(s).max()), p.tail())


@given(st.floats(0, 10), coef, coef, coef, coef, cpos, cpos)
@settings(max_examples=60, deadline=None)
def test_closed_form_max_matches_brute_force(R, a, b, c, d, C0, C1):
    p = A.ConvexityPoint(R, complex(a, b), complex(c, d), C0, C1)
    closed, _ = A.convexity_closed_form(p)
    assert closed >= brute_max(p) - 1e-9
    assert abs(closed - A.convexity_sampled(p)) < 1e-6


def test_degenerate_branch():
    # C = 2 C0 a + C1 c = 0: sup is approached only as |s| grows or at s = 0
    p = A.ConvexityPoint(1.0, complex(0.5, 0.3), complex(-1.0, 0.2), 0.5, 0.5)
    assert p._bc()[1] == 0.0
    closed, _ = A.convexity_closed_form(p)
    B = 2 * 0.5 * 0.3 + 0.5 * 0.2
    assert closed == pytest.approx(0.5 * 0.2 + abs(B), abs=1e-15)
    assert abs(closed - A.convexity_sampled(p)) < 1e-6


def test_form_matches_f_on_real_direction():
    p = A.ConvexityPoint(2.0, complex(0.3, -0.4), complex(0.1, 0.7), 0.4, 0.6)
    for s in (-3.0, 0.0, 0.5, 10.0):
        x = complex(1.0, s)
        val = A.convexity_form(p, x) / abs(x) ** 2
        assert val == pytest.approx(p.R - p.f(s), abs=1e-12)


@given(coef, coef, coef, coef, cpos, cpos)
@settings(max_examples=20, deadline=None)
def test_phase_worst_equals_pinching_bound(a, b, c, d, C0, C1):
    p = A.ConvexityPoint(1.0, complex(a, b), complex(c, d), C0, C1)
    assert A.phase_worst_sup(p) == pytest.approx(p.pinching_bound(), rel=1e-4, abs=1e-6)


def test_is_convex_agrees_on_random_points():
    for p in A.random_points(40, seed=5):
        v = A.is_convex(p)
        assert v["agree"]


def test_fixed_phase_is_weaker_than_pinching():
    # at a fixed phase the form can be positive although the pinching bound fails
    p = A.ConvexityPoint(0.26, complex(0.418, -0.568), complex(-0.302, -0.216), 0.0856, 0.2368)
    assert A.convex_at_fixed_phase(p)
    assert not A.is_convex(p, check=False)


def test_convexity_table_and_csv(tmp_path):
    rows = A.convexity_table(A.random_points(10, seed=1))
    assert max(r["abs_diff"] for r in rows) < 1e-6
    path = tmp_path / "c.csv"
    A.write_csv(rows, path)
    assert path.read_text().splitlines()[0].startswith("R,a,b")


def test_negative_constants_rejected():
    with pytest.raises(ValueError):
        A.ConvexityPoint(1.0, 0j, 0j, -0.1, 0.5)


@pytest.fixture(scope="module")
def models():
    out = {}
    for name, cf in (("sphere", S.reference_coframe()), ("li", S.left_invariant_coframe(1.1)),
                     ("perturbed", S.build_model(S.ModelSpec("perturbed")))):
        sd = S.solve_structure(cf)
        dec = H.kohn_decompose(H.sigma_eta(H.construct_sigma(sd)), sd)
        out[name] = (sd, dec)
    return out


def test_structure_convexity(models):
    sd, _ = models["sphere"]
    convex, margin = A.structure_is_convex(sd, F.sample_points())
    assert convex and margin == pytest.approx(2.0)
    sd, _ = models["li"]
    # R = a^2 + a^-2 against |A11| = a^2 - a^-2, A_{11,1bar} = 0
    convex, margin = A.structure_is_convex(sd, F.sample_points())
    assert margin == pytest.approx(2 * 1.1**-2, rel=1e-12)


def test_torsion_forms_real_and_tor_prime_linear(models):
    sd, _ = models["li"]
    g1 = S.named_field("re_z") * (1 + 0.5j)
    rep = A.torsion_forms(sd, g1)
    assert rep.integrals["max_imag"] < 1e-14
    assert F.same_field(A.tor_prime_gamma(sd, g1 * 2.0), A.tor_prime_gamma(sd, g1) * 2.0, 1e-13)
    assert F.same_field(A.tor_gamma(sd, g1 * 2.0), A.tor_gamma(sd, g1) * 4.0, 1e-13)


def test_torsion_pairing_on_sphere(models):
    sd, _ = models["sphere"]
    # gamma_1 = z satisfies gamma_{1,1bar} = 0 on the sphere
    res = A.check_torsion_pairing(sd, S.named_field("zzbar") + S.named_field("re_zw"), F.coordinate("z"))
    assert res["residual"] < 1e-12 and res["tor_residual"] < 1e-12
    with pytest.raises(PreconditionViolated):
        A.check_torsion_pairing(sd, S.named_field("re_z"), F.coordinate("zbar"))


@pytest.mark.parametrize("name,tol", [("perturbed", 1e-4), ("li", 1e-5), ("sphere", 1e-10)])
def test_bochner_identities(models, name, tol):
    sd, dec = models[name]
    f, _ = H.solve_pe_equation(sd, dec)
    res = A.check_bochner_pe(sd, f, dec)
    assert res["bochner"] < tol
    for key in ("p1_pointwise", "torsion_balance", "p0_by_parts", "p1_to_torsion"):
        assert res[key] < 1e-5, key
    res = A.check_bochner_q(sd, dec)
    assert res["bochner_q"] < tol
    for key in ("bochner_torsion", "w1_pointwise", "t_by_parts", "Qu+P0u"):
        assert res[key] < 1e-5, key


def test_bochner_q_terms_on_perturbed(models):
    # gamma = 0 here, so the identity reduces to int Q u = -int (P0 u) u
    sd, dec = models["perturbed"]
    res = A.check_bochner_q(sd, dec)
    assert res["terms"]["Qu"] == pytest.approx(-res["terms"]["P0u"], rel=1e-12)
    assert res["terms"]["Qu"] < 0


def test_bochner_precondition(models):
    sd, dec = models["perturbed"]
    with pytest.raises(PreconditionViolated):
        A.check_bochner_pe(sd, S.named_field("zzbar"), dec)
