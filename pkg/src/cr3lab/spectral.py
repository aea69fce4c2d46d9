"""Galerkin discretisation of the CR Paneitz operator P0.

Trial space: real and imaginary parts of canonical monomials of degree <= N.
K[i, j] = int (P0 e_i) e_j dmu and G[i, j] = int e_i e_j dmu, both against the
volume of the structure; the spectrum solves K v = mu G v.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.linalg

from . import fields as F
from .errors import CapExceeded, EigenFailure, HypothesisUnmet
from .fields import Field
from .operators import WeightedTensorCoefficient as W, cov, p0, p1

logger = logging.getLogger(__name__)


@dataclass
class OperatorMatrix:
    G: np.ndarray
    K: np.ndarray
    n: int
    basis: list
    asymmetry: float = 0.0
    form_residual: float = 0.0

    @property
    def dimension(self):
        return self.G.shape[0]


@dataclass
class SpectralReport:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    threshold: float
    kernel_dim: int
    Lambda: float
    gap: float
    n: int
    matrix: OperatorMatrix = None
    crph_dim: int = 0
    verdicts: dict = dc_field(default_factory=dict)

    @property
    def kernel(self):
        return self.eigenvectors[:, np.abs(self.eigenvalues) <= self.threshold]

    def to_dict(self):
        return {
            "n": self.n, "dimension": int(self.eigenvalues.size), "kernel_dim": self.kernel_dim,
            "Lambda": self.Lambda, "gap": self.gap, "threshold": self.threshold,
            "min_eigenvalue": float(self.eigenvalues[0]), "max_eigenvalue": float(self.eigenvalues[-1]),
            "crph_dim": self.crph_dim, "verdicts": self.verdicts,
        }


def assemble(sd, n, cross_check=True, cap=None):
    """Gram and operator matrices of P0 over the real trial space of degree <= n."""
    cap = F.workspace().cap if cap is None else cap
    if 2 * n + 4 > cap:
        raise CapExceeded(f"assembly at degree {n} needs cap >= {2 * n + 4}")
    basis = F.real_basis(n)
    dens = sd.density
    pf = [p1(e, sd) for e in basis]
    p0e = [cov(p, "b", sd).value + cov(p.conj(), "1", sd).value for p in pf]
    G = F.pairing_matrix([e * dens for e in basis], basis).real
    K_raw = F.pairing_matrix([x * dens for x in p0e], basis)
    K = K_raw.real
    scale = max(1.0, float(np.abs(K).max()))
    asym = float(np.abs(K - K.T).max()) / scale
    resid_form = 0.0
    if cross_check:
        e1b = [cov(W(e, 0), "b", sd).value for e in basis]
        e1 = [cov(W(e, 0), "1", sd).value for e in basis]
        form = -(F.pairing_matrix([p.value * dens for p in pf], e1b)
                 + F.pairing_matrix([p.value.conj() * dens for p in pf], e1))
        resid_form = float(np.abs(form - K_raw).max()) / scale
    imag = float(np.abs(K_raw.imag).max()) / scale
    logger.info("assembled n=%d dim=%d asym=%.2e cross_check=%.2e imag=%.2e", n, len(basis), asym, resid_form, imag)
    return OperatorMatrix(G, K, n, basis, asym, resid_form)


def eigensolve(m, threshold=None, rel_threshold=1e-6):
    """Dense generalized eigenproblem K v = mu G v (K symmetrised)."""
    K = 0.5 * (m.K + m.K.T)
    try:
        evals, evecs = scipy.linalg.eigh(K, m.G)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenFailure(str(exc)) from exc
    if not np.all(np.isfinite(evals)):
        raise EigenFailure("non-finite eigenvalues")
    if threshold is None:
        threshold = rel_threshold * float(np.abs(evals).max())
    ker = np.abs(evals) <= threshold
    above = evals[evals > threshold]
    lam = float(above[0]) if above.size else math.inf
    below_max = float(np.abs(evals[ker]).max()) if ker.any() else 0.0
    gap = lam / below_max if below_max > 0 else math.inf
    logger.info("spectrum n=%d: kernel %d, Lambda %.6g, gap ratio %.3e", m.n, int(ker.sum()), lam, gap)
    return SpectralReport(evals, evecs, threshold, int(ker.sum()), lam, gap, m.n, m)


def crph_dimension(n):
    return 1 + sum(2 * (d + 1) for d in range(1, n + 1))


def crph_coordinates(m):
    """Columns spanning Re/Im(z^a w^b), a + b <= n, in trial-space coordinates."""
    cols = []
    for j, e in enumerate(m.basis):
        terms = e.terms()
        if all(idx.c == 0 and idx.d == 0 or idx.a == 0 and idx.b == 0 for idx in terms):
            cols.append(j)
    mat = np.zeros((len(m.basis), len(cols)))
    for k, j in enumerate(cols):
        mat[j, k] = 1.0
    return mat


def crph_basis(n):
    """G0-orthonormalised span of Re/Im(z^a w^b), a + b <= n (fields on the reference volume)."""
    out = [Field.const(1.0)]
    for d in range(1, n + 1):
        for a in range(d + 1):
            m = Field.monomial(a, d - a)
            out.extend([m.real, m.imag])
    gram = F.pairing_matrix(out, out).real
    L = np.linalg.cholesky(gram)
    Linv = np.linalg.inv(L)
    ortho = []
    for i in range(len(out)):
        acc = Field()
        for j in range(i + 1):
            if Linv[i, j] != 0:
                acc = acc + Linv[i, j] * out[j]
        ortho.append(acc)
    return ortho


def principal_angles(report, subspace=None):
    """Principal angles (radians) between the numerical kernel and the CR-pluriharmonic span."""
    m = report.matrix
    sub = crph_coordinates(m) if subspace is None else subspace
    L = np.linalg.cholesky(m.G)
    a = L.T @ report.kernel
    b = L.T @ sub
    return scipy.linalg.subspace_angles(a, b)


def _field_from_coords(m, coords):
    acc = Field()
    for c, e in zip(coords, m.basis):
        if abs(c) > 1e-15:
            acc = acc + float(c) * e
    return acc


def decompose_perp(x, report, sd):
    """L^2(dmu) projection of x onto the numerical kernel and the remainder."""
    m = report.matrix
    V = report.kernel                     # G-orthonormal columns
    b = F.pairing_matrix([x * sd.density], m.basis)[0].real
    coords = V @ (V.T @ b)
    x_ker = _field_from_coords(m, coords)
    x_perp = x - x_ker
    return x_ker, x_perp


def rayleigh_residuals(report, sd, count=None):
    """|<P0 v, v>/<v, v> - mu| for the computed eigenpairs (recomputed from fields)."""
    m = report.matrix
    idx = range(report.eigenvalues.size) if count is None else range(min(count, report.eigenvalues.size))
    out = []
    for i in idx:
        v = _field_from_coords(m, report.eigenvectors[:, i])
        num = sd.integrate(p0(v, sd) * v).real
        den = sd.integrate(v * v).real
        out.append(abs(num / den - report.eigenvalues[i]))
    return np.array(out)


def check_perp_bound(sd, u, Q, report, strict=False, points=None):
    """Lambda^2 int (u_perp)^2 <= int (Q_perp)^2 with the proof chain reproduced."""
    from .analysis import structure_is_convex
    pts = F.sample_points() if points is None else points
    convex, margin_c = structure_is_convex(sd, pts, 0.5, 0.5)
    if not convex and strict:
        raise HypothesisUnmet(f"(1/2,1/2)-pinching fails (margin {margin_c:.3e})")
    _, u_perp = decompose_perp(u, report, sd)
    _, q_perp = decompose_perp(Q, report, sd)
    lam = report.Lambda
    int_u2 = sd.integrate(u_perp * u_perp).real
    int_q2 = sd.integrate(q_perp * q_perp).real
    lhs = lam * lam * int_u2
    chain = sd.integrate(q_perp * u_perp).real + sd.integrate(p0(u_perp, sd) * u_perp).real
    p0uu = sd.integrate(p0(u_perp, sd) * u_perp).real
    cs = abs(sd.integrate(q_perp * u_perp).real) - math.sqrt(max(int_q2, 0) * max(int_u2, 0))
    return {
        "hypothesis": bool(convex), "pinching_margin": margin_c,
        "lhs": lhs, "rhs": int_q2, "margin": int_q2 - lhs, "holds": bool(int_q2 - lhs >= -1e-12),
        "chain_Qperp_uperp_plus_P0": chain,
        "essential_positivity": p0uu - lam * int_u2,
        "cauchy_schwarz": cs,
    }


def lambda_table(sd, ns=(4, 6, 8)):
    rows = []
    for n in ns:
        rep = eigensolve(assemble(sd, n, cross_check=False))
        rows.append({"n": n, "dimension": int(rep.eigenvalues.size), "kernel_dim": rep.kernel_dim,
                     "Lambda": rep.Lambda, "gap": rep.gap})
    return rows
