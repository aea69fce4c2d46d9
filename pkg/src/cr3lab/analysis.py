"""(C0, C1)-convexity, torsion quadratic forms and the Bochner-type identities.

Pointwise data: A11 = a + b i, A_{11,1bar} = c + d i.  For X = (1 + s i) Z1 the
convexity form R|x|^2 - 2 C0 Re(i A1b1b xbar^2) - 2 C1 Re(i A_{1b1b,1} xbar)
is positive iff R > f(s) with

    f(s) = -2 [C0 b - (B + C s) / (1 + s^2)],  B = 2 C0 b + C1 d,  C = 2 C0 a + C1 c,

whose supremum over s is C1 d + sqrt(B^2 + C^2).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionViolated
from .fields import Field, sup_norm
from .operators import WeightedTensorCoefficient as W, cov, p0, p1

# --------------------------------------------------------------------------
# convexity


@dataclass(frozen=True)
class ConvexityPoint:
    R: float
    A11: complex
    A11_1bar: complex
    C0: float = 0.5
    C1: float = 0.5

    def __post_init__(self):
        if self.C0 < 0 or self.C1 < 0:
            raise ValueError("C0 and C1 must be nonnegative")

    def _bc(self):
        a, b = self.A11.real, self.A11.imag
        c, d = self.A11_1bar.real, self.A11_1bar.imag
        return 2 * self.C0 * b + self.C1 * d, 2 * self.C0 * a + self.C1 * c

    def f(self, s):
        s = np.asarray(s, dtype=float)
        B, C = self._bc()
        return -2.0 * (self.C0 * self.A11.imag - (B + C * s) / (1.0 + s * s))

    def tail(self):
        """Limit of f(s) as |s| -> infinity."""
        return -2.0 * self.C0 * self.A11.imag

    def pinching_bound(self):
        return 2.0 * (self.C0 * abs(self.A11) + self.C1 * abs(self.A11_1bar))

    def rotated(self, phi_a, phi_c):
        return ConvexityPoint(self.R, self.A11 * np.exp(1j * phi_a), self.A11_1bar * np.exp(1j * phi_c),
                              self.C0, self.C1)


def convexity_closed_form(p):
    """(sup_s f(s), s0).  s0 is inf when the supremum is only approached at |s| -> inf."""
    B, C = p._bc()
    root = math.hypot(B, C)
    value = p.C1 * p.A11_1bar.imag + root
    # (root - B) / C rewritten to avoid cancellation and overflow
    s0 = C / (B + root) if B + root > 0 else math.inf
    return value, s0


def default_grid(S=1e8, n=40001):
    """Grid on [-S, S], dense near the origin (sinh spacing)."""
    t = np.linspace(-1.0, 1.0, n)
    return np.sinh(t * math.asinh(S))


def convexity_sampled(p, grid=None, refine=True):
    """Sampled sup of f over the grid, the tail limit, and a local refinement."""
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    vals = p.f(grid)
    best = float(vals.max())
    if refine:
        i = int(np.argmax(vals))
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, grid.size - 1)]
        for _ in range(3):
            fine = np.linspace(lo, hi, 2001)
            fv = p.f(fine)
            j = int(np.argmax(fv))
            best = max(best, float(fv[j]))
            step = fine[1] - fine[0]
            lo, hi = fine[j] - step, fine[j] + step
    return max(best, p.tail())


def convexity_form(p, x):
    """The convexity quadratic form evaluated at X = x Z1 (x complex)."""
    x = np.asarray(x, dtype=complex)
    xb = np.conj(x)
    a1b1b = np.conj(p.A11)
    a1b1b_1 = np.conj(p.A11_1bar)
    return (p.R * (x * xb).real - 2 * p.C0 * (1j * a1b1b * xb * xb).real
            - 2 * p.C1 * (1j * a1b1b_1 * xb).real)


def phase_worst_sup(p, n_phase=720, grid=None):
    """sup over sampled phases of A11 and A11,1bar (fixed moduli) and s of f.

    The analytic aligned phase pair (both purely imaginary with positive imaginary
    part) and the closed-form s0 of every rotated point are included.
    """
    grid = np.linspace(-50.0, 50.0, 401) if grid is None else grid
    n_a = int(round(math.sqrt(n_phase)))
    n_c = max(1, n_phase // n_a)
    phis_a = 2 * np.pi * np.arange(n_a) / n_a
    phis_c = 2 * np.pi * np.arange(n_c) / n_c
    pairs = [(pa, pc) for pa in phis_a for pc in phis_c]
    # align both to the positive imaginary axis
    align_a = math.pi / 2 - (np.angle(p.A11) if p.A11 != 0 else 0.0)
    align_c = math.pi / 2 - (np.angle(p.A11_1bar) if p.A11_1bar != 0 else 0.0)
    pairs.append((align_a, align_c))
    best = -math.inf
    for pa, pc in pairs:
        q = p.rotated(pa, pc)
        cand = [float(q.f(grid).max()), q.tail()]
        _, s0 = convexity_closed_form(q)
        if math.isfinite(s0):
            cand.append(float(q.f(s0)))
        best = max(best, *cand)
    return best


def is_convex(p, check=True):
    """Pinching verdict R > 2(C0|A11| + C1|A11,1bar|).

    With check=True the sampled phase-worst supremum of the convexity form is
    computed as well and the two verdicts are returned side by side.
    """
    verdict = p.R > p.pinching_bound()
    if not check:
        return verdict
    sup = phase_worst_sup(p)
    return {"convex": bool(verdict), "form_verdict": bool(p.R > sup), "pinching_bound": p.pinching_bound(),
            "phase_worst_sup": sup, "agree": bool(verdict == (p.R > sup))}


def convex_at_fixed_phase(p, grid=None):
    """Positivity of the form at the given phases only (R > sup_s f(s))."""
    return p.R > convexity_closed_form(p)[0]


def random_points(n, seed=0, degenerate_fraction=0.2):
    """Random ConvexityPoints; a fraction has 2 C0 a + C1 c = 0 exactly."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        C0, C1 = rng.uniform(0, 1, 2)
        A = complex(*rng.normal(0, 1, 2))
        A1 = complex(*rng.normal(0, 1, 2))
        if i < int(degenerate_fraction * n):
            if C1 > 0:
                A1 = complex(-2 * C0 * A.real / C1, A1.imag)
            else:
                A = complex(0.0, A.imag)
        R = float(rng.uniform(0, 2 * (C0 * abs(A) + C1 * abs(A1)) * 1.5 + 0.1))
        out.append(ConvexityPoint(R, A, A1, float(C0), float(C1)))
    return out


def convexity_table(points):
    rows = []
    for p in points:
        closed, s0 = convexity_closed_form(p)
        sampled = convexity_sampled(p)
        v = is_convex(p)
        rows.append({
            "R": p.R, "a": p.A11.real, "b": p.A11.imag, "c": p.A11_1bar.real, "d": p.A11_1bar.imag,
            "C0": p.C0, "C1": p.C1, "closed_max": closed, "s0": s0, "sampled_max": sampled,
            "abs_diff": abs(closed - sampled), "convex": v["convex"], "form_verdict": v["form_verdict"],
        })
    return rows


def write_csv(rows, path):
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        for r in rows:
            writer.writerow(r)


def structure_convexity_points(sd, points, C0=0.5, C1=0.5):
    """ConvexityPoints of a structure at the given sample points."""
    a = sd.A11.evaluate(points)
    a1 = cov(W(sd.A11, 2), "b", sd).value.evaluate(points)
    r = sd.R.evaluate(points).real
    return [ConvexityPoint(float(r[i]), complex(a[i]), complex(a1[i]), C0, C1) for i in range(len(r))]


def structure_is_convex(sd, points, C0=0.5, C1=0.5):
    pts = structure_convexity_points(sd, points, C0, C1)
    margins = [p.R - p.pinching_bound() for p in pts]
    return min(margins) > 0, float(min(margins))


# --------------------------------------------------------------------------
# torsion quadratic forms (gamma_1 = conj(gamma_1bar))


def tor_gamma(sd, g1):
    """Tor(gamma, gamma) = 2 Re(i A1b1b gamma_1^2)."""
    return (2j * sd.A1b1b * g1 * g1).real


def tor_prime_gamma(sd, g1):
    """Tor'(gamma, gamma) = 2 Re(i A_{1b1b,1} gamma_1), the C1 term of the convexity form."""
    a1 = cov(W(sd.A1b1b, -2), "1", sd).value
    return (2j * a1 * g1).real


def tor_df_gamma(sd, f, g1):
    """Tor(d_b f, gamma) = 2 Re(i A1b1b f_{,1} gamma_1)."""
    f1 = cov(W(f, 0), "1", sd).value
    return (2j * sd.A1b1b * f1 * g1).real


@dataclass
class TorsionFormReport:
    tor: Field
    tor_prime: Field
    two_r_minus_tor: Field
    integrals: dict


def torsion_forms(sd, g1):
    t = tor_gamma(sd, g1)
    tp = tor_prime_gamma(sd, g1)
    q = 2.0 * sd.R * (g1 * g1.conj()) - t
    ints = {"tor": sd.integrate(t).real, "tor_prime": sd.integrate(tp).real,
            "2R-tor": sd.integrate(q).real}
    imag = max(sup_norm(x.imag) for x in (t, tp, q))
    ints["max_imag"] = imag
    return TorsionFormReport(t, tp, q, ints)


def _int(sd, x):
    return complex(sd.integrate(x))


def check_torsion_pairing(sd, f, g1, tol=1e-8):
    """For gamma_{1,1bar} = 0 and any real f:
    int (i A11 g1bar + R g1 - g1_{,11bar}) f_{,1bar} = i int (A11 g1bar f_{,1bar} - A1b1b g1 f_{,1}).
    """
    pre = sup_norm(cov(W(g1, 1), "b", sd).value)
    if pre > tol:
        raise PreconditionViolated(f"gamma_(1,1bar) = {pre:.2e}")
    g1b = g1.conj()
    f1b = cov(W(f, 0), "b", sd).value
    f1 = cov(W(f, 0), "1", sd).value
    g11b = cov(W(g1, 1), "1b", sd).value
    lhs = _int(sd, (1j * sd.A11 * g1b + sd.R * g1 - g11b) * f1b)
    rhs = 1j * _int(sd, sd.A11 * g1b * f1b - sd.A1b1b * g1 * f1)
    tor = _int(sd, tor_df_gamma(sd, f, g1))
    return {"lhs": lhs, "rhs": rhs, "residual": abs(lhs - rhs), "tor_residual": abs(rhs + tor)}


def check_bochner_pe(sd, f, dec, delta=1e-6):
    """Residuals of the Bochner-type equality for a pseudo-Einstein pair (f, gamma).

    bochner:          int (2R - Tor)(g, g) + 2 int |g_{1,1}|^2 + (1/2) int (P0 f) f = 0
    p1_pointwise:     P1 f = i A11 g1bar + R g1 - g_{1,11bar} (pointwise)
    torsion_balance: -int Tor(d_b f, g) = int (2R - Tor)(g, g) + 2 int |g_{1,1}|^2
    by parts:         int (P0 f) f = -int ((P1 f) f_{,1bar} + conj) = 2 int Tor(d_b f, g)
    """
    from .hodge import pe_equation_residual
    r_pe = pe_equation_residual(sd, dec, f)
    if r_pe > delta:
        raise PreconditionViolated(f"pseudo-Einstein residual {r_pe:.2e} exceeds {delta:.1e}")
    g1 = dec.gamma.g1
    g1b = dec.gamma.g1bar
    pf = p1(f, sd).value
    g11 = cov(W(g1, 1), "1", sd).value
    g11b = cov(W(g1, 1), "1b", sd).value
    rhs_p1 = 1j * sd.A11 * g1b + sd.R * g1 - g11b
    tf = torsion_forms(sd, g1)
    i_2rt = tf.integrals["2R-tor"]
    i_g11 = _int(sd, g11 * g11.conj()).real
    i_p0 = _int(sd, p0(f, sd) * f).real
    f1b = cov(W(f, 0), "b", sd).value
    i_pf = (-_int(sd, pf * f1b + pf.conj() * f1b.conj())).real
    i_tor = _int(sd, tor_df_gamma(sd, f, g1)).real
    return {
        "pe_equation": r_pe,
        "p1_pointwise": sup_norm(pf - rhs_p1),
        "torsion_balance": abs(-i_tor - (i_2rt + 2 * i_g11)),
        "p0_by_parts": abs(i_p0 - i_pf),
        "p1_to_torsion": abs(i_pf - 2 * i_tor),
        "bochner": abs(i_2rt + 2 * i_g11 + 0.5 * i_p0),
        "terms": {"2R-Tor": i_2rt, "|g11|^2": i_g11, "P0f.f": i_p0, "Tor(dbf,g)": i_tor},
    }


def check_bochner_q(sd, dec, u_perp=None):
    """Residuals of the second Bochner-type equality and its intermediate steps.

    bochner_q:       int (R - Tor/2 - Tor'/2)(g, g) + int |g_{1,1}|^2 + int Q u + int (P0 u_perp) u_perp = 0
    bochner_torsion: int (R - Tor/2 - Tor'/2)(g, g) + int |g_{1,1}|^2 - int Tor(d_b u, g) = 0
    w1_pointwise:    W1 u_{1bar} = [2 P1 u + i(A11 g1bar - g_{1,0})] u_{1bar} (pointwise)
    t_by_parts:      int g_{1,0} u_{1bar} = int A1b1b u_{,1} g_1
    plus the relation int Q u + int (P0 u) u = -int Tor(d_b u, g).
    """
    from .structures import q_curvature, w1
    u = dec.u
    u_perp = u if u_perp is None else u_perp
    g1 = dec.gamma.g1
    g1b = dec.gamma.g1bar
    tf = torsion_forms(sd, g1)
    i_r = _int(sd, sd.R * g1 * g1.conj()).real
    i_form = i_r - 0.5 * tf.integrals["tor"] - 0.5 * tf.integrals["tor_prime"]
    g11 = cov(W(g1, 1), "1", sd).value
    i_g11 = _int(sd, g11 * g11.conj()).real
    q = q_curvature(sd)
    i_qu = _int(sd, q * u).real
    i_p0perp = _int(sd, p0(u_perp, sd) * u_perp).real
    i_p0u = _int(sd, p0(u, sd) * u).real
    i_tor = _int(sd, tor_df_gamma(sd, u, g1)).real

    u1b = cov(W(u, 0), "b", sd).value
    u1 = cov(W(u, 0), "1", sd).value
    g10 = cov(W(g1, 1), "0", sd).value
    lhs_w1 = w1(sd).value * u1b
    rhs_w1 = (2.0 * p1(u, sd).value + 1j * (sd.A11 * g1b - g10)) * u1b
    lhs_t = _int(sd, g10 * u1b)
    rhs_t = _int(sd, sd.A1b1b * u1 * g1)
    # the displayed first step writes int g_1 u_{1bar0}; integrating by parts in T gives the opposite sign
    step_t = _int(sd, g1 * cov(W(u, 0), "b0", sd).value)
    return {
        "bochner_q": abs(i_form + i_g11 + i_qu + i_p0perp),
        "bochner_torsion": abs(i_form + i_g11 - i_tor),
        "w1_pointwise": sup_norm(lhs_w1 - rhs_w1),
        "t_by_parts": abs(lhs_t - rhs_t),
        "t_step_unsigned": abs(lhs_t - step_t),
        "t_step_signed": abs(lhs_t + step_t),
        "Qu+P0u": abs(i_qu + i_p0u + i_tor),
        "P0u_vs_P0uperp": abs(i_p0u - i_p0perp),
        "terms": {"form": i_form, "|g11|^2": i_g11, "Qu": i_qu, "P0uperp": i_p0perp, "P0u": i_p0u,
                  "Tor(dbu,g)": i_tor},
    }
