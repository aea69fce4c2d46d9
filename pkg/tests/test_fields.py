import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cr3lab import fields as F
from cr3lab.errors import CapExceeded, IllConditioned, MixedWeights
from cr3lab.fields import Field, T, Z1, Z1BAR

z, w, zb, wb = (F.coordinate(n) for n in ("z", "w", "zbar", "wbar"))
exps = st.integers(0, 5)


def rand_field(seed, n=3):
    rng = np.random.default_rng(seed)
    keys = F.canonical_keys(n)
    coefs = rng.standard_normal(keys.size) + 1j * rng.standard_normal(keys.size)
    return Field.from_vector(keys, coefs)


@given(exps, exps, exps, exps)
def test_encode_decode_roundtrip(a, b, c, d):
    key = F.encode(a, b, c, d)
    assert tuple(int(x[0]) for x in F.decode(np.array([key]))) == (a, b, c, d)
    assert F.key_degree(np.array([key]))[0] == a + b + c + d


def test_sphere_relation_reduces_to_one():
    one = z * zb + w * wb
    assert F.same_field(one, Field.const(1.0))


def test_volume_constant():
    # [TRIVIAL] 4 pi^2 with the Hopf measure dt dxi1 dxi2
    assert F.VOLUME == pytest.approx(4 * math.pi**2)
    assert F.integrate(Field.const(1.0)) == pytest.approx(F.VOLUME)


@given(exps, exps, exps, exps)
@settings(max_examples=40, deadline=None)
def test_monomial_integral_matches_quadrature(a, b, c, d):
    # independent oracle: Gauss-Legendre x trapezoid product rule in Hopf coordinates
    x = Field.monomial(a, b, c, d)
    exact = F.integrate(x)
    assert abs(exact - F.quadrature_integrate(x)) < 1e-11
    if (a, b) == (c, d):
        ref = 4 * math.pi**2 * math.factorial(a) * math.factorial(b) / math.factorial(a + b + 1)
        assert exact == pytest.approx(ref, rel=1e-13)
    else:
        assert abs(exact) < 1e-14


@given(st.integers(0, 10**6), st.integers(0, 10**6))
@settings(max_examples=25, deadline=None)
def test_product_is_pointwise(s1, s2):
    x, y = rand_field(s1), rand_field(s2)
    pts = F.random_points(20, s1)
    np.testing.assert_allclose((x * y)(pts), x(pts) * y(pts), atol=1e-12)
    np.testing.assert_allclose(x.conj()(pts), np.conj(x(pts)), atol=1e-13)
    assert F.same_field(x * y, y * x, 1e-13)


@given(st.integers(0, 10**6))
@settings(max_examples=20, deadline=None)
def test_frame_actions_match_ambient_vector_fields(seed):
    # independent oracle: apply the ambient expressions of Z, Zbar, T by the chain rule
    x = rand_field(seed)
    comps = {
        Z1: (wb, -zb, Field(), Field()),
        Z1BAR: (Field(), Field(), w, -z),
        T: (z * 1j, w * 1j, zb * -1j, wb * -1j),
    }
    for d, comp in comps.items():
        assert F.same_field(F.frame_derive(x, d), F.ambient_apply(x, comp), 1e-12)


@given(st.integers(0, 10**6))
@settings(max_examples=20, deadline=None)
def test_reference_brackets(seed):
    x = rand_field(seed)
    Zx, Zbx, Tx = (F.frame_derive(x, d) for d in (Z1, Z1BAR, T))
    zzb = F.frame_derive(Zbx, Z1) - F.frame_derive(Zx, Z1BAR)
    assert F.same_field(zzb, Tx * -1j, 1e-11)
    tz = F.frame_derive(Zx, T) - F.frame_derive(Tx, Z1)
    assert F.same_field(tz, Zx * -2j, 1e-11)
    tzb = F.frame_derive(Zbx, T) - F.frame_derive(Tx, Z1BAR)
    assert F.same_field(tzb, Zbx * 2j, 1e-11)


@given(st.integers(0, 10**6), st.integers(0, 10**6))
@settings(max_examples=15, deadline=None)
def test_leibniz_rule(s1, s2):
    x, y = rand_field(s1, 2), rand_field(s2, 2)
    for d in (Z1, Z1BAR, T):
        lhs = F.frame_derive(x * y, d)
        rhs = F.frame_derive(x, d) * y + x * F.frame_derive(y, d)
        assert F.same_field(lhs, rhs, 1e-11)


def test_t_is_real_operator():
    x = rand_field(3)
    assert F.same_field(F.frame_derive(x.conj(), T), F.frame_derive(x, T).conj(), 1e-13)


def test_weighted_integral_against_quadrature():
    lam = ((z * wb + zb * w) * 0.05).real
    for k in (1, 2, 4, -3):
        x = F.exp_weight(lam, k) * (z * zb + 0.3)
        assert abs(F.integrate(x) - F.quadrature_integrate(x)) < 1e-12


def test_constant_log_is_factored_out():
    lam = Field.const(0.7) + (z * wb + zb * w) * 0.01
    x = F.exp_weight(lam, 2)
    assert F.integrate(x) == pytest.approx(F.quadrature_integrate(x), rel=1e-13)


def test_series_tail_and_order():
    lam = ((z * wb + zb * w) * 0.1).real
    order = F.series_order_for(lam, 4)
    assert order >= F.SERIES_ORDER
    assert F.series_tail_bound(lam, 4, order) < 1e-16


def test_mixed_logs_rejected():
    a = F.exp_weight((z * zb).real * 0.1, 1)
    b = F.exp_weight((w * wb).real * 0.1, 1)
    with pytest.raises(MixedWeights):
        a + b


def test_cap_exceeded():
    with pytest.raises(CapExceeded):
        F.multiply(Field.monomial(30), Field.monomial(30), cap=48)


def test_json_roundtrip():
    lam = ((z * wb + zb * w) * 0.1).real
    x = F.exp_weight(lam, 2) * z + zb
    y = Field.from_json(x.to_json())
    pts = F.random_points(10, 1)
    np.testing.assert_allclose(y(pts), x(pts), atol=1e-15)
    assert x.to_json() == y.to_json()


def test_project_recovers_polynomial():
    x = rand_field(11, 3)
    pts, wts = F.quadrature(12, 24)
    fit, resid = F.project(pts, x(pts), 3, wts)
    assert resid < 1e-12
    assert F.same_field(fit, x, 1e-10)


def test_project_underdetermined():
    with pytest.raises(IllConditioned):
        F.project(F.random_points(5), np.zeros(5), 3)


def test_pairing_matrix_is_integral_of_product():
    xs = [rand_field(s, 2) for s in range(3)]
    ys = [rand_field(s + 10, 2) for s in range(2)]
    M = F.pairing_matrix(xs, ys)
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            assert M[i, j] == pytest.approx(F.integrate(x * y), abs=1e-12)


def test_real_basis_is_real_and_spans():
    basis = F.real_basis(3)
    assert all(e.is_real() for e in basis)
    assert len(basis) == F.canonical_dimension(3)
    gram = F.pairing_matrix(basis, basis).real
    assert np.linalg.eigvalsh(gram)[0] > 0


def test_workspace_gram_positive():
    ws = F.Workspace(cap=8)
    g = ws.gram(4)
    assert np.allclose(g, g.conj().T)
    assert np.linalg.eigvalsh(g)[0] > 0


def test_divide_by_constant_only():
    x = rand_field(2)
    assert F.same_field(F.divide(x, Field.const(2.0)) * 2.0, x, 1e-14)
    with pytest.raises(IllConditioned):
        F.divide(x, z + 2.0)
