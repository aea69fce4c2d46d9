import numpy as np
import pytest

from cr3lab import fields as F
from cr3lab import hodge as H
from cr3lab import structures as S
from cr3lab.errors import NotSasakian
from cr3lab.operators import ZeroOneForm, dbar_b, p1


@pytest.fixture(scope="module")
def sphere():
    return S.solve_structure(S.reference_coframe())


@pytest.fixture(scope="module")
def perturbed():
    return S.solve_structure(S.build_model(S.ModelSpec("perturbed")))


@pytest.fixture(scope="module")
def li():
    return S.solve_structure(S.left_invariant_coframe(1.1))


def decompose(sd):
    return H.kohn_decompose(H.sigma_eta(H.construct_sigma(sd)), sd)


def test_sigma_on_sphere_is_minus_iR_theta(sphere):
    sig = H.construct_sigma(sphere)
    # omega = -2i theta, so s0 = -R = -2 and the horizontal part vanishes
    assert F.sup_norm(sig.s0 + 2.0) < 1e-14
    assert F.sup_norm(sig.s1bar) < 1e-14
    assert all(v < 1e-14 for v in H.verify_sigma(sig, sphere).values())


def test_sigma_identities(perturbed, li):
    for sd in (perturbed, li):
        res = H.verify_sigma(H.construct_sigma(sd), sd)
        assert max(res.values()) < 1e-12


def test_sigma_gauge_is_closed(perturbed):
    h = S.named_field("re_z2")
    sig = H.construct_sigma(perturbed, gauge=h)
    assert max(H.verify_sigma(sig, perturbed).values()) < 1e-12


def test_kohn_recovers_exact_part(perturbed):
    rng = np.random.default_rng(3)
    phi0 = F.random_real_field(rng, 3) * (1 + 0.2j)
    eta = dbar_b(phi0, perturbed)
    dec = H.kohn_decompose(eta, perturbed, n=4)
    assert dec.residual < 1e-12
    assert F.sup_norm(dec.gamma.g1bar) < 1e-10
    # phi is determined up to a CR function
    assert F.sup_norm(dbar_b(dec.phi - phi0, perturbed).g1bar) < 1e-10


def test_kohn_gamma_is_harmonic(perturbed, li):
    for sd in (perturbed, li):
        dec = decompose(sd)
        assert dec.harmonic_residual < 1e-10
        assert max(H.check_gamma_harmonic(sd, dec).values()) < 1e-10


def test_w1_identity(perturbed, li, sphere):
    for sd in (sphere, perturbed, li):
        assert H.check_w1_identity(sd, decompose(sd)) < 1e-10


def test_u_is_minus_three_lambda_mod_kernel(perturbed):
    # [DERIVED] W1 = 0 on the sphere and W~1 = -6 e^{-3 lam} P1 lam = 2 P~1 u, so P1(u + 3 lam) = 0
    dec = decompose(perturbed)
    lam = perturbed.coframe.log
    assert F.sup_norm(p1(dec.u + 3.0 * lam, perturbed).value) < 1e-10


@pytest.mark.parametrize("fname", ["zero", "re_zw"])
def test_pipeline_perturbed(perturbed, fname):
    out, _, _, _ = H.run_pipeline(perturbed, S.named_field(fname))
    assert out["w1_identity"] < 1e-5
    assert out["w1_tilde"] < 1e-4


def test_candidate_is_pseudo_einstein_for_solved_f(li):
    dec = decompose(li)
    f, res = H.solve_pe_equation(li, dec)
    assert res < 1e-10
    _, _, wt = H.pe_candidate(li, dec, f)
    assert wt < 1e-9


def test_p0_torsion_identity(perturbed):
    dec = decompose(perturbed)
    f, _ = H.solve_pe_equation(perturbed, dec)
    assert H.check_p0_torsion_identity(perturbed, dec, f) < 1e-10


def test_sasakian_gamma(sphere, li):
    res = H.check_torsion_free_gamma(sphere, decompose(sphere))
    assert res["gamma_1_0"] < 1e-8 and res["r1_identity"] < 1e-10
    with pytest.raises(NotSasakian):
        H.check_torsion_free_gamma(li, decompose(li))


def test_pipeline_log():
    dec = H.KohnDecomposition(S.named_field("re_z"), ZeroOneForm(F.Field()), 0.0, 0.0)
    lam = H.pipeline_log(dec, S.named_field("re_zw"))
    ref = (S.named_field("re_zw") + 2 * S.named_field("re_z")) * (1 / 6)
    assert F.same_field(lam, ref, 1e-15)
