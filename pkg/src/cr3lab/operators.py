"""Weighted covariant derivatives and the CR operators built from them.

A coefficient of weight k (number of lower 1 indices minus lower 1bar
indices) has covariant derivative

    C_{,X} = X C - k omega_1^1(X) C,

since the Tanaka-Webster connection acts by nabla Z1 = omega_1^1 (x) Z1.  The
Levi form is normalised to the identity, so raising an index is conjugation of
the index type and the comma indices coincide with raised ones.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass


from . import fields as F
from .errors import FrameGaugeMismatch
from .fields import Field, T, Z1, Z1BAR, sup_norm

logger = logging.getLogger(__name__)

_SHIFT = {Z1: 1, Z1BAR: -1, T: 0}


@dataclass(frozen=True)
class WeightedTensorCoefficient:
    value: Field
    k: int

    def conj(self):
        return WeightedTensorCoefficient(self.value.conj(), -self.k)

    def __add__(self, other):
        if other.k != self.k:
            raise ValueError(f"cannot add weights {self.k} and {other.k}")
        return WeightedTensorCoefficient(self.value + other.value, self.k)

    def __sub__(self, other):
        if other.k != self.k:
            raise ValueError(f"cannot subtract weights {self.k} and {other.k}")
        return WeightedTensorCoefficient(self.value - other.value, self.k)

    def scale(self, c):
        return WeightedTensorCoefficient(self.value * c, self.k)


@dataclass(frozen=True)
class ZeroOneForm:
    """gamma = g1bar theta^1bar."""

    g1bar: Field

    @property
    def g1(self):
        """Coefficient of the conjugate (1,0)-form."""
        return self.g1bar.conj()

    def __add__(self, other):
        return ZeroOneForm(self.g1bar + other.g1bar)

    def __sub__(self, other):
        return ZeroOneForm(self.g1bar - other.g1bar)


def cov_derive(t, direction, sd):
    """Covariant derivative of a weight-k coefficient along Z1, Z1bar or T."""
    if not isinstance(t, WeightedTensorCoefficient):
        t = WeightedTensorCoefficient(t, 0)
    val = sd.derive(t.value, direction)
    if t.k:
        val = val - t.k * sd.omega_dir(direction) * t.value
    return WeightedTensorCoefficient(val, t.k + _SHIFT[direction])


def cov(t, path, sd):
    """Iterated covariant derivative; path is a string over '0', '1', 'b' (1bar)."""
    dirs = {"0": T, "1": Z1, "b": Z1BAR}
    for ch in path:
        t = cov_derive(t, dirs[ch], sd)
    return t


def _rel(resid, *terms):
    scale = max([1.0] + [sup_norm(x) for x in terms])
    return sup_norm(resid) / scale


def check_commutation(t, sd, second_sign=-1):
    """Relative residuals of the three commutation relations for a weight-k coefficient.

        C_{,01} - C_{,10} = C_{,1bar} A11 - k C A_{11,1bar}
        C_{,01bar} - C_{,1bar0} = C_{,1} A1b1b + second_sign * k C A_{1b1b,1}
        C_{,11bar} - C_{,1bar1} = i C_{,0} + k R C

    The default second_sign = -1 is the form as usually displayed.  Conjugating
    the first relation (conj C has weight -k) gives second_sign = +1, which is
    what the connection actually satisfies; the two agree whenever k = 0 or
    A_{1b1b,1} = 0.
    """
    if not isinstance(t, WeightedTensorCoefficient):
        t = WeightedTensorCoefficient(t, 0)
    C, k = t.value, t.k
    a11_1b = cov(WeightedTensorCoefficient(sd.A11, 2), "b", sd).value
    a1b_1 = cov(WeightedTensorCoefficient(sd.A1b1b, -2), "1", sd).value
    c0 = cov(t, "0", sd).value
    c1 = cov(t, "1", sd).value
    c1b = cov(t, "b", sd).value

    lhs1 = cov(t, "01", sd).value - cov(t, "10", sd).value
    rhs1 = c1b * sd.A11 - k * C * a11_1b
    lhs2 = cov(t, "0b", sd).value - cov(t, "b0", sd).value
    rhs2 = c1 * sd.A1b1b + second_sign * k * C * a1b_1
    lhs3 = cov(t, "1b", sd).value - cov(t, "b1", sd).value
    rhs3 = 1j * c0 + k * sd.R * C
    return (_rel(lhs1 - rhs1, lhs1, rhs1), _rel(lhs2 - rhs2, lhs2, rhs2), _rel(lhs3 - rhs3, lhs3, rhs3))


def sublaplacian(f, sd):
    """Delta_b f = f_{,11bar} + f_{,1bar1} (nonpositive)."""
    t = WeightedTensorCoefficient(f, 0)
    return cov(t, "1b", sd).value + cov(t, "b1", sd).value


def p1(f, sd):
    """P_1 f = f_{,1bar11} + i A11 f_{,1bar}, a weight-1 coefficient."""
    t = WeightedTensorCoefficient(f, 0)
    f1b = cov(t, "b", sd)
    val = cov(f1b, "11", sd).value + 1j * sd.A11 * f1b.value
    return WeightedTensorCoefficient(val, 1)


def p1_ordering_discrepancy(f, sd):
    """sup |f_{,1bar11} - f_{,11bar1}|: the commutator between the two index orderings."""
    t = WeightedTensorCoefficient(f, 0)
    return sup_norm(cov(t, "b11", sd).value - cov(t, "1b1", sd).value)


def p0(f, sd):
    """P_0 f = (P_1 f)_{,1bar} + (conj P_1 f)_{,1}."""
    p = p1(f, sd)
    return cov(p, "b", sd).value + cov(p.conj(), "1", sd).value


def p0_from_p1(pf, sd):
    """P_0 given a precomputed P_1 f."""
    return cov(pf, "b", sd).value + cov(pf.conj(), "1", sd).value


def paneitz_form(f, g, sd):
    """-integral of (P1 f) g_{,1bar} + conj(P1 f) g_{,1} against the structure volume.

    Equals the integral of (P0 f) g for real g after integrating by parts.
    """
    pf = p1(f, sd)
    t = WeightedTensorCoefficient(g, 0)
    integrand = pf.value * cov(t, "b", sd).value + pf.value.conj() * cov(t, "1", sd).value
    return -sd.integrate(integrand)


def dbar_b(phi, sd):
    return ZeroOneForm(cov(WeightedTensorCoefficient(phi, 0), "b", sd).value)


def dbar_star(gamma, sd):
    """Formal L^2 adjoint of dbar_b: -gamma_{1bar,1}."""
    return -cov(WeightedTensorCoefficient(gamma.g1bar, -1), "1", sd).value


def box_b(gamma, sd):
    """Kohn-Rossi Laplacian on (0,1)-forms: 2 dbar_b dbar_b^* (dbar_b gamma = 0 in dimension 3)."""
    return ZeroOneForm(2.0 * dbar_b(dbar_star(gamma, sd), sd).g1bar)


def form_inner(gamma, eta, sd):
    return sd.integrate(gamma.g1bar * eta.g1bar.conj())


def function_inner(f, g, sd):
    return sd.integrate(f * g.conj())


# --------------------------------------------------------------------------


def check_transformations(base, tilde, lam, f, points=None):
    """Pointwise residuals of the conformal transformation laws.

    ``tilde`` must be the structure of exp(2 lam) times the base contact form.
    Rows:
      w1:      W~1 = e^{-3 lam} (W1 - 6 P1 lam)
      p1:      P~1 f = e^{-3 lam} P1 f
      p0:      P~0 f = e^{-4 lam} P0 f
      q:       Q~ = e^{-4 lam} (Q + (3/4) P0 lam)
      w1_expanded: same as w1 with R_{,1} and A_{11,1bar} kept separate
    plus the diagnostic row q_coef3 using the coefficient 3 in place of 3/4.
    """
    from .structures import q_curvature, w1

    pts = F.sample_points(50, 7) if points is None else points
    log = tilde.coframe.log
    if base.coframe.log is not None:
        raise FrameGaugeMismatch("base structure must be an unscaled polynomial coframe")
    if log is None:
        if not lam.is_zero(1e-14):
            raise FrameGaugeMismatch("tilde structure carries no conformal factor")
        e = {-3: Field.const(1.0), -4: Field.const(1.0)}
    else:
        if not (log - lam).is_zero(1e-12):
            raise FrameGaugeMismatch("tilde structure was not obtained by rescaling base with lam")
        e = {k: F.exp_weight(log, k) for k in (-3, -4)}

    def res(a, b):
        scale = max(1.0, F.sup_at(a, pts), F.sup_at(b, pts))
        return F.sup_at(a - b, pts) / scale

    w_base = w1(base).value
    w_tilde = w1(tilde).value
    p1lam = p1(lam, base).value
    p0lam = p0(lam, base)
    q_base = q_curvature(base)
    q_tilde = q_curvature(tilde)
    r1 = cov(WeightedTensorCoefficient(base.R, 0), "1", base).value
    a1b = cov(WeightedTensorCoefficient(base.A11, 2), "b", base).value
    rows = {
        "w1": res(w_tilde, e[-3] * (w_base - 6.0 * p1lam)),
        "p1": res(p1(f, tilde).value, e[-3] * p1(f, base).value),
        "p0": res(p0(f, tilde), e[-4] * p0(f, base)),
        "q": res(q_tilde, e[-4] * (q_base + 0.75 * p0lam)),
        "w1_expanded": res(w_tilde, e[-3] * (r1 - 1j * a1b - 6.0 * p1lam)),
        "q_coef3": res(q_tilde, e[-4] * (q_base + 3.0 * p0lam)),
    }
    return rows
