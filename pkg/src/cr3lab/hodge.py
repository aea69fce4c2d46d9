"""Chern-class potential, Kohn decomposition and the pseudo-Einstein construction.

The pipeline on a structure sd:

1. sigma: a pure imaginary 1-form with d sigma = d omega_1^1;
2. eta = sigma_{1bar} theta^1bar is split as dbar_b phi + gamma with gamma
   dbar_b^*-closed (least squares against the range of dbar_b);
3. u = Re phi, and then W1 = 2 P1 u + i(A11 gamma_{1bar} - gamma_{1,0});
4. the contact form exp((f + 2u)/3) theta is pseudo-Einstein when
   P1 f = i(A11 gamma_{1bar} - gamma_{1,0}).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import fields as F
from .errors import IllConditioned, NoPrimitive, NotSasakian, PreconditionViolated
from .fields import Field, sup_norm
from .operators import (WeightedTensorCoefficient as W, ZeroOneForm, cov, dbar_b, dbar_star, p0, p1)
from .structures import (add_forms, conformal_rescale, d1, eval1, form_norm,
                         solve_structure)

logger = logging.getLogger(__name__)


@dataclass
class PureImaginaryOneForm:
    """sigma = s1bar theta^1bar - conj(s1bar) theta^1 + i s0 theta (frame of the structure).

    ``ref`` holds the same form by reference components.
    """

    s1bar: Field
    s0: Field
    ref: tuple

    @property
    def s1(self):
        return self.s1bar.conj()


@dataclass
class KohnDecomposition:
    phi: Field
    gamma: ZeroOneForm
    residual: float
    harmonic_residual: float
    orthogonality: float = 0.0
    dimension: int = 0

    @property
    def u(self):
        return self.phi.real

    @property
    def v(self):
        return self.phi.imag


def sigma_from_reference(ref, sd):
    """Frame components of a pure imaginary 1-form given by reference components."""
    t, z1, z1b = sd.frame
    s1bar = eval1(ref, z1b)
    s1 = -eval1(ref, z1)
    s0 = -1j * eval1(ref, t)
    imag = sup_norm(s1 - s1bar.conj()) + sup_norm(s0.imag)
    if imag > 1e-9 * max(1.0, sup_norm(s0), sup_norm(s1bar)):
        raise ValueError(f"1-form is not pure imaginary (residual {imag:.2e})")
    return PureImaginaryOneForm(s1bar, s0.real, ref)


def _ls_primitive(target, n):
    """Least-squares polynomial 1-form alpha of degree <= n with d alpha = target."""
    keys = F.canonical_keys(n)
    cols = []
    for slot in range(3):
        for key in keys:
            m = Field.from_vector(np.array([key]), np.array([1.0]))
            alpha = tuple(m if j == slot else Field() for j in range(3))
            cols.append(d1(alpha))
    flat_t = list(target)
    allk = np.unique(np.concatenate([c.parts[0][0] for form in cols + [tuple(flat_t)] for c in form
                                     if 0 in c.parts]))
    rows = []
    for comp in range(3):
        _, mat = F.coefficient_matrix([form[comp] for form in cols], allk)
        rows.append(mat)
    a = np.vstack(rows)
    b = np.concatenate([F.coefficient_matrix([flat_t[c]], allk)[1][:, 0] for c in range(3)])
    sol, *_ = np.linalg.lstsq(a, b, rcond=1e-12)
    nk = keys.size
    alpha = tuple(Field.from_vector(keys, sol[j * nk:(j + 1) * nk]) for j in range(3))
    return alpha, float(np.linalg.norm(a @ sol - b))


def construct_sigma(sd, gauge=None, tol=1e-9, n=None):
    """Pure imaginary sigma with d sigma = d omega_1^1.

    On S^3 the frame is global, so omega_1^1 itself is such a form; it is the
    seed and equals -i R0 theta on the round sphere.  ``gauge`` (a real field h)
    adds the exact form i dh.  If the seed check fails a least-squares
    primitive of degree ``n`` is sought (polynomial structures only).
    """
    target = d1(sd.omega_form())
    ref = sd.omega_form()
    if gauge is not None:
        h = gauge.real
        ref = add_forms(ref, tuple(1j * h.derive(dirn) for dirn in (F.T, F.Z1, F.Z1BAR)))
    res = form_norm(add_forms(d1(ref), target, coefs=[1.0, -1.0]))
    if res > tol:
        if not all(c.is_polynomial for c in target) or n is None:
            raise NoPrimitive(f"seed residual {res:.2e} and no least-squares fallback available")
        alpha, _ = _ls_primitive(target, n)
        ref = tuple((a - b.conj()) * 0.5 for a, b in zip(alpha, (alpha[0], alpha[2], alpha[1])))
        res = form_norm(add_forms(d1(ref), target, coefs=[1.0, -1.0]))
        if res > tol:
            raise NoPrimitive(f"least-squares primitive residual {res:.2e} exceeds {tol:.1e}")
    sig = sigma_from_reference(ref, sd)
    logger.info("sigma residual %.2e", res)
    return sig


def verify_sigma(sigma, sd):
    """Residuals of R = s1bar,1 + s1,1bar - s0 and A11,1bar = s1,0 + i s0,1 - A11 s1bar."""
    d_res = form_norm(add_forms(d1(sigma.ref), d1(sd.omega_form()), coefs=[1.0, -1.0]))
    r_rhs = cov(W(sigma.s1bar, -1), "1", sd).value + cov(W(sigma.s1, 1), "b", sd).value - sigma.s0
    a_lhs = cov(W(sd.A11, 2), "b", sd).value
    a_rhs = (cov(W(sigma.s1, 1), "0", sd).value + 1j * cov(W(sigma.s0, 0), "1", sd).value
             - sd.A11 * sigma.s1bar)
    return {"dsigma": d_res, "R": sup_norm(sd.R - r_rhs), "A11_1bar": sup_norm(a_lhs - a_rhs)}


def kohn_decompose(eta, sd, n=8, cond_max=1e13):
    """eta = dbar_b phi + gamma with phi of degree <= n and gamma L^2-orthogonal to the range.

    phi ranges over canonical monomials that are not CR (those with a zbar or
    wbar factor); CR monomials are the kernel of dbar_b and are left out.
    """
    keys = F.canonical_keys(n)
    a, b, c, d = F.decode(keys)
    keys = keys[(c + d) > 0]
    basis = [Field.from_vector(np.array([k]), np.array([1.0])) for k in keys]
    cols = [dbar_b(e, sd).g1bar for e in basis]
    dens = sd.density
    weighted = [col * dens for col in cols]
    conj_cols = [col.conj() for col in cols]
    gram = F.pairing_matrix(conj_cols, weighted)          # gram[i, j] = <col_j, col_i>
    rhs = F.pairing_matrix(conj_cols, [eta.g1bar * dens])[:, 0]
    evals, evecs = np.linalg.eigh(gram)
    if evals[0] <= 0 or evals[-1] / evals[0] > cond_max:
        raise IllConditioned(f"Kohn normal equations: eigenvalue range {evals[0]:.2e}..{evals[-1]:.2e}")
    coef = evecs @ ((evecs.conj().T @ rhs) / evals)
    phi = Field.from_vector(keys, coef).chop(1e-12)
    gamma = ZeroOneForm((eta.g1bar - dbar_b(phi, sd).g1bar).chop(1e-13))
    resid = sup_norm(eta.g1bar - dbar_b(phi, sd).g1bar - gamma.g1bar)
    harm = sup_norm(dbar_star(gamma, sd))
    orth_vec = F.pairing_matrix(conj_cols, [gamma.g1bar * dens])[:, 0]
    orth = float(np.abs(orth_vec).max()) if orth_vec.size else 0.0
    logger.info("Kohn decomposition: dim %d, |gamma| %.2e, harmonic residual %.2e",
                keys.size, sup_norm(gamma.g1bar), harm)
    return KohnDecomposition(phi, gamma, resid, harm, orth, int(keys.size))


def sigma_eta(sigma):
    return ZeroOneForm(sigma.s1bar)


def torsion_gamma_term(sd, dec):
    """i (A11 gamma_{1bar} - gamma_{1,0}), a weight-1 coefficient."""
    g10 = cov(W(dec.gamma.g1, 1), "0", sd).value
    return 1j * (sd.A11 * dec.gamma.g1bar - g10)


def check_w1_identity(sd, dec):
    """sup |W1 - 2 P1 u - i(A11 gamma_{1bar} - gamma_{1,0})|."""
    from .structures import w1
    lhs = w1(sd).value
    rhs = 2.0 * p1(dec.u, sd).value + torsion_gamma_term(sd, dec)
    return sup_norm(lhs - rhs)


def check_gamma_harmonic(sd, dec):
    """Both gamma_{1bar,1} and its conjugate gamma_{1,1bar}."""
    g1b1 = cov(W(dec.gamma.g1bar, -1), "1", sd).value
    g11b = cov(W(dec.gamma.g1, 1), "b", sd).value
    return {"gamma_1bar_1": sup_norm(g1b1), "gamma_1_1bar": sup_norm(g11b)}


def pipeline_log(dec, f):
    """lambda = (f + 2u)/6, so that exp(2 lambda) = exp((f + 2u)/3)."""
    return ((f + 2.0 * dec.u) * (1.0 / 6.0)).real


def pe_candidate(sd, dec, f):
    """Rescale by exp((f + 2u)/3) and return (coframe, structure, sup |W~1|)."""
    from .structures import w1
    lam = pipeline_log(dec, f)
    cf = conformal_rescale(sd.coframe, log=lam)
    tilde = solve_structure(cf)
    return cf, tilde, sup_norm(w1(tilde).value)


def pe_equation_residual(sd, dec, f):
    """sup |P1 f - i(A11 gamma_{1bar} - gamma_{1,0})|."""
    return sup_norm(p1(f, sd).value - torsion_gamma_term(sd, dec))


def solve_pe_equation(sd, dec, n=4):
    """Least-squares real f of degree <= n for P1 f = i(A11 gamma_{1bar} - gamma_{1,0})."""
    rhs = torsion_gamma_term(sd, dec)
    basis = F.real_basis(n)[1:]
    cols = [p1(e, sd).value for e in basis]
    dens = sd.density
    gram = F.pairing_matrix([c.conj() for c in cols], [c * dens for c in cols]).real
    b = F.pairing_matrix([c.conj() for c in cols], [rhs * dens])[:, 0].real
    evals, evecs = np.linalg.eigh(gram)
    keep = evals > 1e-10 * evals[-1]
    coef = evecs[:, keep] @ ((evecs[:, keep].T @ b) / evals[keep])
    f = Field()
    for cf_, e in zip(coef, basis):
        if abs(cf_) > 1e-14:
            f = f + cf_ * e
    return f, pe_equation_residual(sd, dec, f)


def check_p0_torsion_identity(sd, dec, f, delta=1e-6):
    """Residual of P0 f = 2i[(A11 gamma_{1bar})_{,1bar} - (A1b1b gamma_1)_{,1}]."""
    r_pe = pe_equation_residual(sd, dec, f)
    if r_pe > delta:
        raise PreconditionViolated(f"pseudo-Einstein residual {r_pe:.2e} exceeds {delta:.1e}")
    lhs = p0(f, sd)
    rhs = 2j * (cov(W(sd.A11 * dec.gamma.g1bar, 1), "b", sd).value
                - cov(W(sd.A1b1b * dec.gamma.g1, -1), "1", sd).value)
    return sup_norm(lhs - rhs)


def check_torsion_free_gamma(sd, dec, tol=1e-10):
    """On Sasakian structures: sup |gamma_{1,0}| and the residual of R_{,1} = 2u_{1bar11} - i gamma_{1,0}."""
    if sup_norm(sd.A11) > tol:
        raise NotSasakian(f"|A11| = {sup_norm(sd.A11):.2e}")
    g10 = cov(W(dec.gamma.g1, 1), "0", sd).value
    r1 = cov(W(sd.R, 0), "1", sd).value
    r1_id = r1 - (2.0 * cov(W(dec.u, 0), "b11", sd).value - 1j * g10)
    return {"gamma_1_0": sup_norm(g10), "r1_identity": sup_norm(r1_id)}


def run_pipeline(sd, f=None, n=8):
    """sigma -> decomposition -> W1 identity -> pseudo-Einstein candidate."""
    f = Field() if f is None else f
    sigma = construct_sigma(sd)
    dec = kohn_decompose(sigma_eta(sigma), sd, n=n)
    out = {
        "sigma": verify_sigma(sigma, sd),
        "kohn_residual": dec.residual,
        "harmonic_residual": dec.harmonic_residual,
        "orthogonality": dec.orthogonality,
        "gamma_norm": sup_norm(dec.gamma.g1bar),
        "w1_identity": check_w1_identity(sd, dec),
        "pe_equation": pe_equation_residual(sd, dec, f),
    }
    _, tilde, wt = pe_candidate(sd, dec, f)
    out["w1_tilde"] = wt
    return out, sigma, dec, tilde
