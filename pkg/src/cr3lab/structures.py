"""Admissible coframes on S^3 and their Tanaka-Webster data.

Forms are stored by components over the reference coframe
(theta0, theta0^1, theta0^1bar) of :mod:`cr3lab.fields`:

* a 1-form is a triple (a0, a1, a2) meaning a0 theta0 + a1 theta0^1 + a2 theta0^1bar;
* a 2-form is a triple (b01, b02, b12) over theta0^theta0^1, theta0^theta0^1bar,
  theta0^1^theta0^1bar;
* a vector is a triple of components along (T, Z1, Z1bar) of the reference frame.

The reference structure constants are

    d theta0 = i theta0^1 ^ theta0^1bar,  d theta0^1 = 2i theta0 ^ theta0^1,
    d theta0^1bar = -2i theta0 ^ theta0^1bar.

For a coframe (theta, theta^1) the first structure equation
d theta^1 = theta^1 ^ omega + theta ^ A_{1bar1bar} theta^1bar is solved
pointwise-algebraically: writing d theta^1 = p theta^theta^1 + q theta^theta^1bar
+ r theta^1^theta^1bar one gets omega = -p theta - conj(r) theta^1 + r theta^1bar
and A_{1bar1bar} = q.  R is the theta^1^theta^1bar coefficient of d omega.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import fields as F
from .errors import NonAdmissible, NotPositive, Singular
from .fields import Field, T, Z1, Z1BAR, sup_norm

logger = logging.getLogger(__name__)

REF_DIRS = (T, Z1, Z1BAR)
ADMISSIBLE_TOL = 1e-7


# --------------------------------------------------------------------------
# forms over the reference coframe


def zero_form():
    return (Field(), Field(), Field())


def d1(alpha):
    """Exterior derivative of a 1-form, returned as a 2-form."""
    a0, a1, a2 = alpha
    b01 = a1.derive(T) - a0.derive(Z1) + 2j * a1
    b02 = a2.derive(T) - a0.derive(Z1BAR) - 2j * a2
    b12 = a2.derive(Z1) - a1.derive(Z1BAR) + 1j * a0
    return (b01, b02, b12)


def d2(beta):
    """Exterior derivative of a 2-form: coefficient of theta0^theta0^1^theta0^1bar."""
    b01, b02, b12 = beta
    return b01.derive(Z1BAR) - b02.derive(Z1) + b12.derive(T)


def wedge11(alpha, beta):
    a0, a1, a2 = alpha
    b0, b1, b2 = beta
    return (a0 * b1 - a1 * b0, a0 * b2 - a2 * b0, a1 * b2 - a2 * b1)


def add_forms(*forms, coefs=None):
    coefs = coefs or [1.0] * len(forms)
    out = []
    for parts in zip(*forms):
        acc = Field()
        for c, p in zip(coefs, parts):
            acc = acc + c * p
        out.append(acc)
    return tuple(out)


def scale_form(alpha, f):
    return tuple(f * a for a in alpha)


def conj_form(alpha):
    """Complex conjugate of a 1-form (theta0^1 and theta0^1bar swap)."""
    a0, a1, a2 = alpha
    return (a0.conj(), a2.conj(), a1.conj())


def eval1(alpha, X):
    return alpha[0] * X[0] + alpha[1] * X[1] + alpha[2] * X[2]


def eval2(beta, X, Y):
    b01, b02, b12 = beta
    return (b01 * (X[0] * Y[1] - X[1] * Y[0]) + b02 * (X[0] * Y[2] - X[2] * Y[0])
            + b12 * (X[1] * Y[2] - X[2] * Y[1]))


def apply_vector(X, f):
    """Derivative of the field f along the vector X (components over T, Z1, Z1bar)."""
    out = Field()
    for comp, direction in zip(X, REF_DIRS):
        if comp.parts:
            out = out + comp * f.derive(direction)
    return out


def form_norm(form, points=None):
    return max(sup_norm(c, points) for c in form)


# --------------------------------------------------------------------------
# coframes


@dataclass
class Coframe:
    """theta and theta^1 by components over the reference coframe.

    ``base`` is the underlying polynomial coframe and ``log`` the conformal
    log-factor lambda with theta = exp(2 lambda) theta_base (None if unscaled).
    """

    theta: tuple
    theta1: tuple
    base: "Coframe | None" = None
    log: Field | None = None
    label: str = ""

    @property
    def theta1bar(self):
        return conj_form(self.theta1)

    def matrix(self):
        return [list(self.theta), list(self.theta1), list(self.theta1bar)]

    def polynomial_base(self):
        return self if self.base is None else self.base


def reference_coframe():
    one, zero = Field.const(1.0), Field()
    return Coframe((one, zero, zero), (zero, one, zero), label="sphere")


def left_invariant_coframe(a):
    """Left-invariant deformation: Z1 = alpha Z + beta Zbar with alpha^2 - beta^2 = 1."""
    if a <= 0:
        raise ValueError("parameter a must be positive")
    alpha = 0.5 * (a + 1.0 / a)
    beta = 0.5 * (a - 1.0 / a)
    one, zero = Field.const(1.0), Field()
    return Coframe((one, zero, zero), (zero, Field.const(alpha), Field.const(-beta)),
                   label=f"left_invariant(a={a:g})")


def _det3(m):
    return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))


def _adj3(m):
    def cof(i, j):
        r = [k for k in range(3) if k != i]
        c = [k for k in range(3) if k != j]
        minor = m[r[0]][c[0]] * m[r[1]][c[1]] - m[r[0]][c[1]] * m[r[1]][c[0]]
        return minor if (i + j) % 2 == 0 else -minor
    return [[cof(j, i) for j in range(3)] for i in range(3)]


def dual_frame(cf, points=None):
    """Frame (T, Z1, Z1bar) dual to the coframe, each as reference components.

    Returns (frame, det) where det = det of the coframe matrix, which is also the
    density of theta ^ d theta against the reference volume.
    """
    m = cf.matrix()
    det = _det3(m)
    vals = det.evaluate(F.sample_points() if points is None else points)
    if np.min(np.abs(vals)) < 1e-12:
        raise Singular("coframe matrix degenerates at a sample point")
    adj = _adj3(m)
    inv = [[F.divide(adj[i][j], det) for j in range(3)] for i in range(3)]
    frame = tuple(tuple(inv[j][i] for j in range(3)) for i in range(3))
    return frame, det


def admissibility_residual(cf, points=None):
    """sup of d theta - i theta^1 ^ theta^1bar at sample points."""
    lhs = d1(cf.theta)
    rhs = wedge11(cf.theta1, cf.theta1bar)
    return form_norm(add_forms(lhs, rhs, coefs=[1.0, -1j]), points)


def check_coframe(cf, tol=ADMISSIBLE_TOL, points=None):
    """Assert admissibility, reality of theta and nonvanishing volume."""
    res = admissibility_residual(cf, points)
    if res > tol:
        raise NonAdmissible(f"admissibility residual {res:.3e} exceeds {tol:.1e}")
    imag = max(sup_norm(c.imag, points) for c in (cf.theta[0],)) + sup_norm(
        cf.theta[1] - cf.theta[2].conj(), points)
    if imag > tol:
        raise NonAdmissible(f"theta is not real (residual {imag:.3e})")
    return res


def reeb(cf, points=None):
    """Reeb field: theta(T) = 1 and d theta(T, .) = 0.

    Returns the reference components of T and a residual dictionary.
    """
    frame, _ = dual_frame(cf, points)
    t = frame[0]
    dtheta = d1(cf.theta)
    res = {
        "theta(T)-1": sup_norm(eval1(cf.theta, t) - 1.0, points),
        "dtheta(T,Z1)": sup_norm(eval2(dtheta, t, frame[1]), points),
        "dtheta(T,Z1bar)": sup_norm(eval2(dtheta, t, frame[2]), points),
        "theta1(T)": sup_norm(eval1(cf.theta1, t), points),
    }
    return t, res


def _log_from_phi(phi, n=8):
    """lambda with phi = exp(2 lambda), exactly when phi = C exp(k*log)."""
    pts = F.sample_points()
    vals = phi.evaluate(pts)
    if np.any(vals.real <= 0) or np.max(np.abs(vals.imag)) > 1e-10 * np.max(np.abs(vals)):
        raise NotPositive("conformal factor is not positive at every sample point")
    chopped = phi.chop(1e-14)
    if len(chopped.parts) == 1:
        (k, (keys, coefs)), = chopped.parts.items()
        if keys.size == 1 and keys[0] == 0:
            c = coefs[0].real
            lam = Field.const(0.5 * math.log(c))
            if k:
                lam = lam + chopped.log * (0.5 * k)
            return lam.real, 0.0
    # general positive factor: least-squares fit of log(phi) / 2
    rule = F.quadrature(n + 4, 2 * n + 8)
    lam, resid = F.project(rule[0], 0.5 * np.log(phi.evaluate(rule[0]).real), n, rule[1])
    logger.info("conformal factor log projected at degree %d, residual %.2e", n, resid)
    return lam.real, resid


def conformal_rescale(cf, phi=None, log=None):
    """theta~ = phi theta with phi = exp(2 lambda); theta~^1 = e^lambda (theta^1 + c theta).

    Pass either the factor ``phi`` (a positive Field) or ``log`` = lambda.
    The correction c = 2i lambda_{,1bar} is the unique choice making theta~
    admissible; it is computed in closed form and checked afterwards.
    """
    if (phi is None) == (log is None):
        raise ValueError("give exactly one of phi and log")
    if log is None:
        log, _ = _log_from_phi(phi)
    if not log.is_polynomial:
        raise ValueError("log-factor must be a polynomial field")
    base = cf.polynomial_base()
    total = log if cf.log is None else cf.log + log
    total = total.real
    if total.is_zero(1e-300):
        return base
    frame, _ = dual_frame(base)
    c = 2j * apply_vector(frame[2], total)
    two = F.exp_weight(total, 2)
    one = F.exp_weight(total, 1)
    theta = tuple(two * a for a in base.theta)
    theta1 = tuple(one * (a + c * b) for a, b in zip(base.theta1, base.theta))
    out = Coframe(theta, theta1, base=base, log=total, label=f"{base.label}*conformal")
    res = admissibility_residual(out)
    logger.info("conformal rescale admissibility residual %.2e", res)
    return out


# --------------------------------------------------------------------------
# structure data


@dataclass
class StructureData:
    """Tanaka-Webster data of an admissible coframe.

    omega holds the frame components (omega(T), omega(Z1), omega(Z1bar)) of
    the connection form omega_1^1; ``frame`` the dual frame; ``density`` the
    volume theta ^ d theta relative to the reference volume.
    """

    coframe: Coframe
    frame: tuple
    omega: tuple
    A11: Field
    A1b1b: Field
    R: Field
    density: Field
    residuals: dict = dc_field(default_factory=dict)

    @property
    def reeb(self):
        return self.frame[0]

    def derive(self, f, direction):
        idx = {T: 0, Z1: 1, Z1BAR: 2}[direction]
        return apply_vector(self.frame[idx], f)

    def omega_dir(self, direction):
        return self.omega[{T: 0, Z1: 1, Z1BAR: 2}[direction]]

    def omega_form(self):
        """omega_1^1 as reference components."""
        cf = self.coframe
        return add_forms(scale_form(cf.theta, self.omega[0]), scale_form(cf.theta1, self.omega[1]),
                         scale_form(cf.theta1bar, self.omega[2]))

    def integrate(self, f):
        """Integral against theta ^ d theta of this structure."""
        return F.integrate(f * self.density)

    def volume(self):
        return self.integrate(Field.const(1.0)).real

    def to_dict(self):
        return {
            "schema": "cr3lab.structure/1",
            "label": self.coframe.label,
            "A11": self.A11.to_dict(),
            "R": self.R.to_dict(),
            "omega": [w.to_dict() for w in self.omega],
            "residuals": self.residuals,
        }


def solve_structure(cf, tol=ADMISSIBLE_TOL, points=None):
    """Solve the first structure equation and extract omega_1^1, A11, R."""
    adm = check_coframe(cf, tol, points)
    frame, det = dual_frame(cf, points)
    t, z1, z1b = frame
    dth1 = d1(cf.theta1)
    p = eval2(dth1, t, z1)
    q = eval2(dth1, t, z1b)
    r = eval2(dth1, z1, z1b)
    omega = (-p, -r.conj(), r)
    A1b1b = q
    A11 = q.conj()
    density = det
    sd = StructureData(cf, frame, omega, A11, A1b1b, Field(), density)

    domega = d1(sd.omega_form())
    R = eval2(domega, z1, z1b)
    sd.R = R

    # first structure equation re-substituted
    lhs = dth1
    rhs = add_forms(wedge11(cf.theta1, sd.omega_form()), wedge11(cf.theta, scale_form(cf.theta1bar, A1b1b)))
    resid = form_norm(add_forms(lhs, rhs, coefs=[1.0, -1.0]), points)
    _, reeb_res = reeb(cf, points)
    sd.residuals = {
        "admissibility": adm,
        "structure_equation": resid,
        "omega_pure_imaginary": sup_norm(p.real, points),
        "R_real": sup_norm(R.imag, points),
        "tau_wedge_theta1": 0.0,
        **{f"reeb:{k}": v for k, v in reeb_res.items()},
    }
    # tau^1 = A^1_{1bar} theta^1bar, so tau_1 ^ theta^1 = A11 theta^1 ^ theta^1 = 0 identically
    logger.info("structure %s residuals %s", cf.label, sd.residuals)
    return sd


def dR_independent(sd):
    """R recomputed from d(omega) via frame brackets instead of reference d.

    d omega(Z1, Z1bar) = Z1 omega(Z1bar) - Z1bar omega(Z1) - omega([Z1, Z1bar]).
    """
    z1, z1b = sd.frame[1], sd.frame[2]
    bracket = tuple(apply_vector(z1, z1b[j]) - apply_vector(z1b, z1[j]) for j in range(3))
    # the reference frame itself has [Z, Zbar] = -i T
    bracket = (bracket[0] + (-1j) * (z1[1] * z1b[2] - z1[2] * z1b[1]),
               bracket[1] + (-2j) * (z1[0] * z1b[1] - z1[1] * z1b[0]),
               bracket[2] + 2j * (z1[0] * z1b[2] - z1[2] * z1b[0]))
    om = sd.omega_form()
    return (sd.derive(sd.omega[2], Z1) - sd.derive(sd.omega[1], Z1BAR) - eval1(om, bracket))


# --------------------------------------------------------------------------
# models


@dataclass
class ModelSpec:
    """kind is 'sphere', 'left_invariant' (parameter a) or 'perturbed' (base, g, eps)."""

    kind: str = "sphere"
    a: float = 1.0
    base: "ModelSpec | None" = None
    g: Field | None = None
    eps: float = 0.1
    g_name: str = "re_zwbar"

    def __post_init__(self):
        if self.kind not in ("sphere", "left_invariant", "perturbed"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == "left_invariant" and self.a <= 0:
            raise ValueError("a must be positive")
        if self.kind == "perturbed":
            if self.base is None:
                self.base = ModelSpec("sphere")
            if self.g is None:
                self.g = named_field(self.g_name)
            if not self.g.is_real():
                raise ValueError("exponent g must be real")

    @property
    def log(self):
        """lambda of the perturbation: theta = exp(2 lambda) theta_base."""
        return (self.g * self.eps).real if self.kind == "perturbed" else None

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "left_invariant":
            d["a"] = self.a
        if self.kind == "perturbed":
            g = self.g_name
            if g == "custom":
                g = [[*idx, c.real, c.imag] for idx, c in _term_list(self.g)]
            d.update(base=self.base.to_dict(), g=g, eps=self.eps)
        return d

    @classmethod
    def from_dict(cls, data):
        kind = data.get("kind", "sphere")
        if kind == "perturbed":
            base = cls.from_dict(data.get("base", {"kind": "sphere"}))
            g = data.get("g", "re_zwbar")
            eps = float(data.get("eps", 0.1))
            if isinstance(g, str):
                return cls(kind, base=base, eps=eps, g_name=g)
            return cls(kind, base=base, eps=eps, g=field_from_coefficients(g), g_name="custom")
        return cls(kind, a=float(data.get("a", 1.0)))


def field_from_coefficients(rows):
    """Field from rows [a, b, c, d, re] or [a, b, c, d, re, im] meaning coef z^a w^b zbar^c wbar^d."""
    terms = []
    for row in rows:
        if len(row) not in (5, 6):
            raise ValueError(f"coefficient row needs 5 or 6 entries, got {row!r}")
        a, b, c, d = (int(x) for x in row[:4])
        if min(a, b, c, d) < 0:
            raise ValueError(f"negative exponent in {row!r}")
        terms.append(((a, b, c, d), complex(row[4], row[5] if len(row) == 6 else 0.0)))
    return Field.from_terms(terms)


def _term_list(x):
    return sorted((tuple(i), c) for i, c in x.terms().items())


def named_field(name):
    """Small vocabulary of named real test functions."""
    z, w, zb, wb = (F.coordinate(n) for n in ("z", "w", "zbar", "wbar"))
    table = {
        "zero": lambda: Field(),
        "one": lambda: Field.const(1.0),
        "re_z": lambda: (z + zb) * 0.5,
        "re_zwbar": lambda: (z * wb + zb * w) * 0.5,
        "im_zwbar": lambda: (z * wb - zb * w) * (-0.5j),
        "re_zw": lambda: (z * w + zb * wb) * 0.5,
        "im_zw": lambda: (z * w - zb * wb) * (-0.5j),
        "re_z2": lambda: (z * z + zb * zb) * 0.5,
        "zzbar": lambda: z * zb,
    }
    if name not in table:
        raise ValueError(f"unknown named field {name!r}; choose from {sorted(table)}")
    return table[name]()


def build_model(spec):
    if spec.kind == "sphere":
        return reference_coframe()
    if spec.kind == "left_invariant":
        return left_invariant_coframe(spec.a)
    base = build_model(spec.base)
    return conformal_rescale(base, log=spec.log)


# --------------------------------------------------------------------------
# curvature-level quantities


def w1(sd):
    """W_1 = R_{,1} - i A_{11,1bar} (weight 1)."""
    from .operators import WeightedTensorCoefficient as W, cov_derive
    r1 = cov_derive(W(sd.R, 0), Z1, sd)
    a = cov_derive(W(sd.A11, 2), Z1BAR, sd)
    return W(r1.value - 1j * a.value, 1)


def q_curvature(sd, tol=1e-9, return_both=False):
    """Q = -Re(R_{,11bar} - i A_{11,1bar1bar}); the alternative form is checked."""
    from .operators import WeightedTensorCoefficient as W, cov_derive, sublaplacian
    r11b = cov_derive(cov_derive(W(sd.R, 0), Z1, sd), Z1BAR, sd).value
    a = cov_derive(cov_derive(W(sd.A11, 2), Z1BAR, sd), Z1BAR, sd).value
    q1 = -(r11b - 1j * a).real
    abar = cov_derive(cov_derive(W(sd.A1b1b, -2), Z1, sd), Z1, sd).value
    q2 = (sublaplacian(sd.R, sd) - 1j * (a - abar)) * (-0.5)
    diff = sup_norm(q1 - q2)
    scale = max(1.0, sup_norm(q1))
    if diff > tol * scale:
        logger.warning("the two Q-curvature formulas differ by %.3e", diff)
    return (q1, q2.real, diff) if return_both else q1


def cartan_tensor(sd):
    """Q_11 = R_{,11}/6 + (i/2) R A11 - A_{11,0} - (2i/3) A_{11,1bar1} (weight 2)."""
    from .operators import WeightedTensorCoefficient as W, cov_derive
    r11 = cov_derive(cov_derive(W(sd.R, 0), Z1, sd), Z1, sd).value
    a0 = cov_derive(W(sd.A11, 2), T, sd).value
    a1b1 = cov_derive(cov_derive(W(sd.A11, 2), Z1BAR, sd), Z1, sd).value
    val = r11 * (1 / 6) + 0.5j * sd.R * sd.A11 - a0 - (2j / 3) * a1b1
    return W(val, 2)


def check_omega_derivative(sd, points=None):
    """sup of d(omega + i R theta) - i (W1 theta^1 + conj(W1) theta^1bar) ^ theta."""
    cf = sd.coframe
    lhs = d1(add_forms(sd.omega_form(), scale_form(cf.theta, 1j * sd.R)))
    W = w1(sd).value
    inner = add_forms(scale_form(cf.theta1, W), scale_form(cf.theta1bar, W.conj()))
    rhs = scale_form(wedge11(inner, cf.theta), 1j)
    return form_norm(add_forms(lhs, rhs, coefs=[1.0, -1.0]), points)


def structure_json(sd):
    return json.dumps(sd.to_dict(), sort_keys=True)
