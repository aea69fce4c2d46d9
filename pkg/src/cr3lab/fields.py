"""Exact polynomial function algebra on S^3 = {|z|^2 + |w|^2 = 1} in C^2.

A :class:`Field` is a finite sum of monomials z^a w^b zbar^c wbar^d kept in
canonical form min(a, c) = 0 (the relation z zbar = 1 - w wbar is applied until
this holds).  Monomials are packed into one int64 key, 8 bits per exponent, so
that the key of a product is the sum of the keys.

A field may also carry a conformal log-factor lambda (itself a real polynomial
field): the part stored under integer weight k then means exp(k*lambda) * p_k.
This keeps every quantity of a conformally rescaled structure exact: frame
derivatives, products and conjugation never leave the class.  Only integrals of
weighted parts need an approximation (a truncated exponential series).

The reference frame on S^3 (left-invariant on SU(2)):

    Z1    = wbar d/dz - zbar d/dw
    Z1bar = w d/dzbar - z d/dwbar
    T     = i (z d/dz + w d/dw - zbar d/dzbar - wbar d/dwbar)

with [Z1, Z1bar] = -i T and [T, Z1] = -2i Z1.  Its dual coframe
theta0 = Im(zbar dz + wbar dw), theta0^1 = w dz - z dw satisfies
d theta0 = i theta0^1 ^ theta0^1bar, and d mu0 = theta0 ^ d theta0 has total
volume 4 pi^2 (twice the Euclidean volume of the unit 3-sphere).
"""

from __future__ import annotations

import json
import logging
import math
from typing import NamedTuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import comb, gammaln

from .errors import CapExceeded, IllConditioned, MixedWeights

logger = logging.getLogger(__name__)

MASK = 0xFF
KA, KB, KC, KD = 1, 1 << 8, 1 << 16, 1 << 24
MAX_CAP = 120
VOLUME = 4.0 * math.pi**2

Z1, Z1BAR, T = "Z1", "Z1bar", "T"
DIRECTIONS = (T, Z1, Z1BAR)

# coefficients below PRUNE * (largest coefficient) are dropped after every operation
PRUNE = 1e-17
SERIES_ORDER = 12

_EMPTY_K = np.zeros(0, dtype=np.int64)
_EMPTY_C = np.zeros(0, dtype=np.complex128)


class MonomialIndex(NamedTuple):
    """Exponents of z, w, zbar, wbar."""

    a: int
    b: int
    c: int
    d: int

    @property
    def degree(self):
        return self.a + self.b + self.c + self.d

    @property
    def key(self):
        return encode(self.a, self.b, self.c, self.d)

    def is_canonical(self):
        return min(self.a, self.c) == 0

    def conj(self):
        return MonomialIndex(self.c, self.d, self.a, self.b)


def encode(a, b, c, d):
    return int(a) + (int(b) << 8) + (int(c) << 16) + (int(d) << 24)


def decode(keys):
    keys = np.asarray(keys, dtype=np.int64)
    return keys & MASK, (keys >> 8) & MASK, (keys >> 16) & MASK, (keys >> 24) & MASK


def key_degree(keys):
    a, b, c, d = decode(keys)
    return a + b + c + d


def conj_keys(keys):
    keys = np.asarray(keys, dtype=np.int64)
    return (keys >> 16) | ((keys & 0xFFFF) << 16)


# --------------------------------------------------------------------------
# raw polynomial kernels on (keys, coefs) pairs


def _combine(keys, coefs):
    if keys.size == 0:
        return _EMPTY_K, _EMPTY_C
    uk, inv = np.unique(keys, return_inverse=True)
    re = np.bincount(inv, weights=coefs.real, minlength=uk.size)
    im = np.bincount(inv, weights=coefs.imag, minlength=uk.size)
    c = re + 1j * im
    mag = np.abs(c)
    top = mag.max()
    if top == 0.0:
        return _EMPTY_K, _EMPTY_C
    keep = mag > PRUNE * top
    return uk[keep], c[keep]


def _reduce(keys, coefs):
    """Apply z zbar = 1 - w wbar until min(a, c) = 0, then combine."""
    a = keys & MASK
    c = (keys >> 16) & MASK
    m = np.minimum(a, c)
    if not m.any():
        return _combine(keys, coefs)
    base = keys - m * (KA + KC)
    out_k = [base]
    out_c = [coefs]
    for j in range(1, int(m.max()) + 1):
        sel = m >= j
        factor = comb(m[sel], j) * (-1.0) ** j
        out_k.append(base[sel] + j * (KB + KD))
        out_c.append(coefs[sel] * factor)
    return _combine(np.concatenate(out_k), np.concatenate(out_c))


def _mul_poly(k1, c1, k2, c2):
    if k1.size == 0 or k2.size == 0:
        return _EMPTY_K, _EMPTY_C
    keys = (k1[:, None] + k2[None, :]).ravel()
    coefs = (c1[:, None] * c2[None, :]).ravel()
    return _reduce(keys, coefs)


def _derive_poly(keys, coefs, direction):
    if keys.size == 0:
        return _EMPTY_K, _EMPTY_C
    a, b, c, d = decode(keys)
    if direction == T:
        return _combine(keys, coefs * (1j * (a + b - c - d)))
    if direction == Z1:
        # Z1 z = wbar, Z1 w = -zbar
        s1 = a > 0
        s2 = b > 0
        nk = np.concatenate([keys[s1] - KA + KD, keys[s2] - KB + KC])
        nc = np.concatenate([coefs[s1] * a[s1], -coefs[s2] * b[s2]])
    elif direction == Z1BAR:
        # Z1bar zbar = w, Z1bar wbar = -z
        s1 = c > 0
        s2 = d > 0
        nk = np.concatenate([keys[s1] - KC + KB, keys[s2] - KD + KA])
        nc = np.concatenate([coefs[s1] * c[s1], -coefs[s2] * d[s2]])
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return _reduce(nk, nc.astype(np.complex128))


def _integrate_poly(keys, coefs):
    if keys.size == 0:
        return 0j
    a, b, c, d = decode(keys)
    sel = (a == c) & (b == d)
    if not sel.any():
        return 0j
    aa, bb = a[sel], b[sel]
    vals = VOLUME * np.exp(gammaln(aa + 1) + gammaln(bb + 1) - gammaln(aa + bb + 2))
    return complex(np.sum(coefs[sel] * vals))


def _power_tables(x, deg):
    tab = np.empty((deg + 1, x.size), dtype=np.complex128)
    tab[0] = 1.0
    for j in range(1, deg + 1):
        tab[j] = tab[j - 1] * x
    return tab


def _eval_poly(keys, coefs, z, w, chunk=4096):
    out = np.zeros(z.shape, dtype=np.complex128)
    if keys.size == 0:
        return out
    a, b, c, d = decode(keys)
    deg = int(max(a.max(), b.max(), c.max(), d.max()))
    pz, pw = _power_tables(z, deg), _power_tables(w, deg)
    pzc, pwc = np.conj(pz), np.conj(pw)
    for s in range(0, keys.size, chunk):
        sl = slice(s, s + chunk)
        out += coefs[sl] @ (pz[a[sl]] * pw[b[sl]] * pzc[c[sl]] * pwc[d[sl]])
    return out


# --------------------------------------------------------------------------


class Field:
    """A complex function on S^3: sum over weights k of exp(k*log) * poly_k.

    Plain polynomial fields have a single weight-0 part and ``log is None``.
    Fields are immutable by convention.
    """

    __slots__ = ("parts", "log", "_cache")

    def __init__(self, parts=None, log=None):
        clean = {}
        for k, (keys, coefs) in (parts or {}).items():
            if keys.size:
                clean[int(k)] = (keys, coefs)
        self.parts = clean
        if log is not None and (not clean or set(clean) == {0}):
            log = None
        self.log = log
        self._cache = {}

    # construction -------------------------------------------------------
    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def const(cls, value):
        value = complex(value)
        if value == 0:
            return cls()
        return cls({0: (np.array([0], dtype=np.int64), np.array([value]))})

    @classmethod
    def monomial(cls, a, b=0, c=0, d=0, coef=1.0):
        if min(a, b, c, d) < 0:
            raise ValueError("negative exponent")
        keys = np.array([encode(a, b, c, d)], dtype=np.int64)
        return cls({0: _reduce(keys, np.array([complex(coef)]))})

    @classmethod
    def from_terms(cls, terms):
        """Build from a mapping or iterable of ((a, b, c, d), coefficient)."""
        items = terms.items() if isinstance(terms, dict) else terms
        keys, coefs = [], []
        for (a, b, c, d), v in items:
            keys.append(encode(a, b, c, d))
            coefs.append(complex(v))
        if not keys:
            return cls()
        return cls({0: _reduce(np.array(keys, dtype=np.int64), np.array(coefs, dtype=np.complex128))})

    @classmethod
    def from_vector(cls, keys, vec):
        keys = np.asarray(keys, dtype=np.int64)
        vec = np.asarray(vec, dtype=np.complex128)
        return cls({0: _reduce(keys, vec)})

    def with_weight(self, log, k):
        """Return exp(k*log) * self for a weight-0 field ``self``."""
        if not self.is_polynomial:
            raise MixedWeights("with_weight expects a plain polynomial field")
        if k == 0 or not self.parts:
            return self
        return Field({k: self.parts[0]}, log=log)

    # inspection ---------------------------------------------------------
    @property
    def is_polynomial(self):
        return set(self.parts) <= {0}

    @property
    def weights(self):
        return sorted(self.parts)

    @property
    def degree(self):
        if not self.parts:
            return 0
        return int(max(key_degree(k).max() for k, _ in self.parts.values()))

    @property
    def nterms(self):
        return sum(k.size for k, _ in self.parts.values())

    def poly(self, k=0):
        """The polynomial multiplying exp(k*log), as a plain field."""
        if k not in self.parts:
            return Field()
        return Field({0: self.parts[k]})

    def terms(self, k=0):
        if k not in self.parts:
            return {}
        keys, coefs = self.parts[k]
        a, b, c, d = decode(keys)
        return {MonomialIndex(int(a[i]), int(b[i]), int(c[i]), int(d[i])): complex(coefs[i])
                for i in range(keys.size)}

    def coefficient(self, a, b=0, c=0, d=0, k=0):
        if k not in self.parts:
            return 0j
        keys, coefs = self.parts[k]
        i = np.searchsorted(keys, encode(a, b, c, d))
        if i < keys.size and keys[i] == encode(a, b, c, d):
            return complex(coefs[i])
        return 0j

    def max_coef(self):
        if not self.parts:
            return 0.0
        return float(max(np.abs(c).max() for _, c in self.parts.values()))

    def sup_bound(self):
        """Upper bound for sup |poly part| on S^3 (every monomial has modulus <= 1)."""
        return float(sum(np.abs(c).sum() for _, c in self.parts.values()))

    def is_zero(self, tol=0.0):
        return self.max_coef() <= tol

    def chop(self, tol=1e-12):
        """Drop coefficients below ``tol`` times the largest one."""
        top = self.max_coef()
        parts = {}
        for k, (keys, coefs) in self.parts.items():
            keep = np.abs(coefs) > tol * top
            parts[k] = (keys[keep], coefs[keep])
        return Field(parts, self.log)

    # algebra ------------------------------------------------------------
    def _log_with(self, other):
        if self.log is None:
            return other.log
        if other.log is None or other.log is self.log:
            return self.log
        if same_field(self.log, other.log):
            return self.log
        raise MixedWeights("fields carry different conformal log-factors")

    def __add__(self, other):
        if not isinstance(other, Field):
            other = Field.const(other)
        log = self._log_with(other)
        parts = dict(self.parts)
        for k, (keys, coefs) in other.parts.items():
            if k in parts:
                k0, c0 = parts[k]
                parts[k] = _combine(np.concatenate([k0, keys]), np.concatenate([c0, coefs]))
            else:
                parts[k] = (keys, coefs)
        return Field(parts, log)

    __radd__ = __add__

    def __neg__(self):
        return Field({k: (keys, -coefs) for k, (keys, coefs) in self.parts.items()}, self.log)

    def __sub__(self, other):
        if not isinstance(other, Field):
            other = Field.const(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Field):
            return multiply(self, other)
        other = complex(other)
        if other == 0:
            return Field()
        return Field({k: (keys, coefs * other) for k, (keys, coefs) in self.parts.items()}, self.log)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Field):
            return divide(self, other)
        return self * (1.0 / complex(other))

    def conj(self):
        parts = {}
        for k, (keys, coefs) in self.parts.items():
            ck = conj_keys(keys)
            order = np.argsort(ck)
            parts[k] = (ck[order], np.conj(coefs[order]))
        return Field(parts, self.log)

    @property
    def real(self):
        return (self + self.conj()) * 0.5

    @property
    def imag(self):
        return (self - self.conj()) * (-0.5j)

    def is_real(self, tol=1e-12):
        return (self - self.conj()).max_coef() <= tol * max(1.0, self.max_coef())

    def derive(self, direction):
        return frame_derive(self, direction)

    # evaluation ---------------------------------------------------------
    def __call__(self, points):
        return self.evaluate(points)

    def evaluate(self, points):
        z, w = _split_points(points)
        out = np.zeros(z.shape, dtype=np.complex128)
        lam = None
        for k, (keys, coefs) in self.parts.items():
            val = _eval_poly(keys, coefs, z, w)
            if k:
                if lam is None:
                    lam = self.log.evaluate((z, w)).real
                val = val * np.exp(k * lam)
            out += val
        return out

    # serialization ------------------------------------------------------
    def to_dict(self):
        parts = []
        for k in sorted(self.parts):
            keys, coefs = self.parts[k]
            a, b, c, d = decode(keys)
            parts.append({
                "weight": k,
                "terms": [[int(a[i]), int(b[i]), int(c[i]), int(d[i]), float(coefs[i].real), float(coefs[i].imag)]
                          for i in range(keys.size)],
            })
        return {"schema": "cr3lab.field/1",
                "log": None if self.log is None else self.log.to_dict(),
                "parts": parts}

    @classmethod
    def from_dict(cls, data):
        log = None if data.get("log") is None else cls.from_dict(data["log"])
        parts = {}
        for part in data["parts"]:
            rows = part["terms"]
            keys = np.array([encode(*r[:4]) for r in rows], dtype=np.int64)
            coefs = np.array([complex(r[4], r[5]) for r in rows], dtype=np.complex128)
            parts[int(part["weight"])] = _reduce(keys, coefs)
        return cls(parts, log)

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        if not self.parts:
            return "Field(0)"
        return f"Field(weights={self.weights}, terms={self.nterms}, degree={self.degree})"


def _split_points(points):
    if isinstance(points, tuple):
        z, w = points
        return np.asarray(z, dtype=np.complex128), np.asarray(w, dtype=np.complex128)
    pts = np.asarray(points, dtype=np.complex128)
    if pts.ndim == 1:
        pts = pts[None, :]
    return pts[:, 0], pts[:, 1]


def same_field(x, y, tol=1e-14):
    """Coefficientwise comparison (entries below tol on one side only are ignored)."""
    if x is y:
        return True
    try:
        diff = x - y
    except MixedWeights:
        return False
    return diff.max_coef() <= tol


def coordinate(name):
    """One of 'z', 'w', 'zbar', 'wbar' as a field."""
    exps = {"z": (1, 0, 0, 0), "w": (0, 1, 0, 0), "zbar": (0, 0, 1, 0), "wbar": (0, 0, 0, 1)}
    return Field.monomial(*exps[name])


def conj(x):
    return x.conj()


# --------------------------------------------------------------------------
# workspace


class Workspace:
    """Degree cap, canonical basis enumeration, Gram cache and quadrature."""

    def __init__(self, cap=48, series_order=SERIES_ORDER):
        if not 0 <= cap <= MAX_CAP:
            raise ValueError(f"cap must lie in [0, {MAX_CAP}]")
        self.cap = int(cap)
        self.series_order = int(series_order)
        self._gram = {}

    def basis_keys(self, n):
        """Canonical monomial keys of total degree <= n, in canonical index order."""
        return canonical_keys(n)

    def gram(self, n):
        """Hermitian Gram matrix inner(e_i, e_j) over the canonical basis of degree <= n."""
        if n not in self._gram:
            keys = canonical_keys(n)
            g = bilinear_integrals(keys, conj_keys(keys))
            evals = np.linalg.eigvalsh(g)
            if evals[0] <= 0:
                raise IllConditioned(f"Gram matrix at degree {n} is not positive definite")
            logger.info("Gram(n=%d): dim=%d, condition number %.3e", n, keys.size, evals[-1] / evals[0])
            self._gram[n] = g
        return self._gram[n]

    @staticmethod
    def quadrature(n_t=24, n_xi=48):
        return quadrature(n_t, n_xi)


_WORKSPACE = Workspace()


def workspace():
    return _WORKSPACE


def set_workspace(ws):
    global _WORKSPACE
    previous = _WORKSPACE
    _WORKSPACE = ws
    return previous


def canonical_keys(n):
    out = []
    for deg in range(n + 1):
        for a in range(deg + 1):
            for c in range(deg + 1 - a):
                if a and c:
                    continue
                for b in range(deg + 1 - a - c):
                    out.append(encode(a, b, c, deg - a - b - c))
    return np.sort(np.array(out, dtype=np.int64))


def canonical_dimension(n):
    return sum((k + 1) ** 2 for k in range(n + 1))


_INT_TABLE = {}


def _integral_table():
    """table[a, b] = integral of |z|^{2a} |w|^{2b} d mu0 = 4 pi^2 a! b! / (a+b+1)!."""
    if "t" not in _INT_TABLE:
        n = np.arange(256)
        aa, bb = np.meshgrid(n, n, indexing="ij")
        _INT_TABLE["t"] = VOLUME * np.exp(gammaln(aa + 1) + gammaln(bb + 1) - gammaln(aa + bb + 2))
    return _INT_TABLE["t"]


def _monomial_integrals(ks):
    a, b, c, d = decode(ks)
    sel = (a == c) & (b == d)
    return np.where(sel, _integral_table()[a, b], 0.0)


def bilinear_integrals(keys_x, keys_y, chunk=512):
    """Matrix of int m_s * m_t dmu0 (no conjugation) for monomial keys."""
    keys_x = np.asarray(keys_x, dtype=np.int64)
    keys_y = np.asarray(keys_y, dtype=np.int64)
    out = np.zeros((keys_x.size, keys_y.size))
    for s in range(0, keys_x.size, chunk):
        out[s:s + chunk] = _monomial_integrals(keys_x[s:s + chunk, None] + keys_y[None, :])
    return out


def exp_series(log, k, order=None):
    """exp(k*log) = factor * S with S the truncated series of the non-constant part.

    Returns (factor, keys, coefs) of the polynomial S.
    """
    order = workspace().series_order if order is None else order
    order = max(order, series_order_for(log, k, order))
    const, lk, lc = _split_constant(log)
    acc_k = [np.array([0], dtype=np.int64)]
    acc_c = [np.array([1.0 + 0j])]
    q_k, q_c = acc_k[0], acc_c[0]
    for j in range(1, order + 1):
        q_k, q_c = _mul_poly(q_k, q_c * (k / j), lk, lc)
        keep = np.abs(q_c) > 1e-19
        q_k, q_c = q_k[keep], q_c[keep]
        if q_k.size == 0:
            break
        acc_k.append(q_k)
        acc_c.append(q_c)
    sk, sc = _combine(np.concatenate(acc_k), np.concatenate(acc_c))
    return math.exp(k * const), sk, sc


def weighted_bilinear(keys_x, keys_y, log=None, k=0):
    """Matrix of int exp(k*log) m_s m_t dmu0 via the exponential series."""
    keys_x = np.asarray(keys_x, dtype=np.int64)
    keys_y = np.asarray(keys_y, dtype=np.int64)
    if k == 0 or log is None:
        return bilinear_integrals(keys_x, keys_y).astype(np.complex128)
    factor, sk, sc = exp_series(log, k)
    base = keys_x[:, None] + keys_y[None, :]
    out = np.zeros(base.shape, dtype=np.complex128)
    for tau, c in zip(sk, sc):
        out += c * _monomial_integrals(base + tau)
    return out * factor


def _stack_parts(fields_):
    """Per weight: (keys, coefficient matrix with one column per field)."""
    out = {}
    weights = sorted({k for f in fields_ for k in f.parts})
    for k in weights:
        allk = np.unique(np.concatenate([f.parts[k][0] for f in fields_ if k in f.parts]))
        mat = np.zeros((allk.size, len(fields_)), dtype=np.complex128)
        for j, f in enumerate(fields_):
            if k in f.parts:
                fk, fc = f.parts[k]
                mat[np.searchsorted(allk, fk), j] = fc
        out[k] = (allk, mat)
    return out


def pairing_matrix(us, vs):
    """M[i, j] = integrate(us[i] * vs[j]) for lists of fields sharing one log-factor."""
    log = None
    for f in list(us) + list(vs):
        if f.log is not None:
            if log is not None and not same_field(log, f.log):
                raise MixedWeights("pairing_matrix over different log-factors")
            log = f.log
    su, sv = _stack_parts(us), _stack_parts(vs)
    out = np.zeros((len(us), len(vs)), dtype=np.complex128)
    for k1, (keys1, x) in su.items():
        for k2, (keys2, y) in sv.items():
            b = weighted_bilinear(keys1, keys2, log, k1 + k2)
            out += x.T @ b @ y
    return out


def real_basis(n):
    """Re and Im of canonical monomials of degree <= n (dimension equal to the complex one)."""
    keys = canonical_keys(n)
    ck = conj_keys(keys)
    out = []
    for key, kc in zip(keys, ck):
        m = Field.from_vector(np.array([key]), np.array([1.0]))
        if key == kc:
            out.append(m)
        elif key < kc:
            out.append(m.real)
            out.append(m.imag)
    return out


def coefficient_matrix(fields, keys=None):
    """Stack weight-0 parts of ``fields`` as columns over a common key list."""
    if keys is None:
        allk = [f.parts[0][0] for f in fields if 0 in f.parts]
        keys = np.unique(np.concatenate(allk)) if allk else _EMPTY_K
    mat = np.zeros((keys.size, len(fields)), dtype=np.complex128)
    for j, f in enumerate(fields):
        if not f.is_polynomial:
            raise MixedWeights("coefficient_matrix expects polynomial fields")
        if 0 in f.parts:
            fk, fc = f.parts[0]
            idx = np.searchsorted(keys, fk)
            if np.any(idx >= keys.size) or np.any(keys[np.minimum(idx, keys.size - 1)] != fk):
                raise ValueError("field has monomials outside the supplied key list")
            mat[idx, j] = fc
    return keys, mat


# --------------------------------------------------------------------------
# core operations


def multiply(x, y, cap=None):
    """Pointwise product on S^3, re-reduced to canonical form."""
    cap = workspace().cap if cap is None else cap
    if x.degree + y.degree > cap:
        raise CapExceeded(f"product degree {x.degree} + {y.degree} exceeds cap {cap}")
    log = x._log_with(y)
    parts = {}
    for kx, (k1, c1) in x.parts.items():
        for ky, (k2, c2) in y.parts.items():
            pk, pc = _mul_poly(k1, c1, k2, c2)
            w = kx + ky
            if w in parts:
                pk = np.concatenate([parts[w][0], pk])
                pc = np.concatenate([parts[w][1], pc])
                pk, pc = _combine(pk, pc)
            parts[w] = (pk, pc)
    return Field(parts, log)


def divide(x, y, tol=1e-12):
    """x / y for y = const * exp(k*log) (roundoff-level extra terms are ignored)."""
    y = y.chop(tol)
    if len(y.parts) != 1:
        raise IllConditioned("division by a field with several conformal weights")
    (ky, (keys, coefs)), = y.parts.items()
    if keys.size != 1 or keys[0] != 0:
        raise IllConditioned("division by a non-constant polynomial; use project()")
    inv = Field({-ky: (np.array([0], dtype=np.int64), np.array([1.0 / coefs[0]]))}, y.log)
    return multiply(x, inv)


def exp_weight(log, k=1):
    """The field exp(k*log) with exact representation."""
    return Field.const(1.0).with_weight(log, k)


def _log_derivative(log, direction):
    cache = log._cache
    if ("d", direction) not in cache:
        cache[("d", direction)] = frame_derive(log, direction)
    return cache[("d", direction)]


def frame_derive(x, direction):
    """Action of the reference frame field Z1, Z1bar or T."""
    parts = {}
    for k, (keys, coefs) in x.parts.items():
        dk, dc = _derive_poly(keys, coefs, direction)
        if k:
            dlog = _log_derivative(x.log, direction)
            if 0 in dlog.parts:
                ek, ec = _mul_poly(dlog.parts[0][0], dlog.parts[0][1] * k, keys, coefs)
                dk, dc = _combine(np.concatenate([dk, ek]), np.concatenate([dc, ec]))
        parts[k] = (dk, dc)
    return Field(parts, x.log)


def _log_powers(log, j):
    pw = log._cache.setdefault("pow", [(np.array([0], dtype=np.int64), np.array([1.0 + 0j]))])
    lk, lc = log.parts[0]
    while len(pw) <= j:
        pk, pc = pw[-1]
        pw.append(_mul_poly(pk, pc, lk, lc))
    return pw[j]


def series_tail_bound(log, k, order):
    """Bound on sup|exp(k*l) - sum_{j<=order} (k*l)^j / j!| for l = log minus its constant term."""
    _, _, lc = _split_constant(log)
    x = abs(k) * float(np.abs(lc).sum())
    return x ** (order + 1) / math.factorial(order + 1) * math.exp(x)


def _split_constant(log):
    lk, lc = log.parts[0]
    if lk.size and lk[0] == 0:
        return float(lc[0].real), lk[1:], lc[1:]
    return 0.0, lk, lc


def series_order_for(log, k, base=SERIES_ORDER, budget=1e-16, max_order=40):
    """Smallest order >= base whose tail bound is below ``budget``."""
    _, lk, lc = _split_constant(log)
    x = abs(k) * float(np.abs(lc).sum())
    order = base
    while order < max_order and x ** (order + 1) / math.factorial(order + 1) * math.exp(x) > budget:
        order += 1
    return order


def _integrate_weighted(keys, coefs, k, log, order):
    const, lk, lc = _split_constant(log)
    order = max(order, series_order_for(log, k, order))
    if lk.size == 0:
        return _integrate_poly(keys, coefs) * math.exp(k * const)
    total = 0j
    q_k, q_c = keys, coefs
    scale = float(np.abs(coefs).sum())
    for j in range(order + 1):
        total += _integrate_poly(q_k, q_c) * (k**j / math.factorial(j))
        if j == order:
            break
        q_k, q_c = _mul_poly(q_k, q_c, lk, lc)
        # drop monomials whose remaining contribution is negligible
        weight = abs(k) ** (j + 1) / math.factorial(j + 1)
        keep = np.abs(q_c) * weight > 1e-19 * scale
        q_k, q_c = q_k[keep], q_c[keep]
        if q_k.size == 0:
            break
        if key_degree(q_k).max() > 2 * MAX_CAP:
            raise CapExceeded("exponential series degree overflow")
    x = abs(k) * float(np.abs(lc).sum())
    bound = x ** (order + 1) / math.factorial(order + 1) * math.exp(x)
    if bound > 1e-12:
        logger.warning("exp-series tail bound %.2e at weight %d", bound, k)
    return total * math.exp(k * const)


def integrate(x, order=None):
    """Integral over S^3 against the reference volume d mu0 = theta0 ^ d theta0."""
    order = workspace().series_order if order is None else order
    total = 0j
    for k in sorted(x.parts):
        keys, coefs = x.parts[k]
        if k == 0:
            total += _integrate_poly(keys, coefs)
        else:
            total += _integrate_weighted(keys, coefs, k, x.log, order)
    return total


def inner(x, y):
    """L^2 pairing integrate(x * conj(y)) against d mu0."""
    return integrate(multiply(x, y.conj(), cap=MAX_CAP))


def rms(x, density=None):
    """Volume-normalised L^2 norm (integral of |x|^2 over total volume, square-rooted)."""
    sq = multiply(x, x.conj(), cap=MAX_CAP)
    if density is None:
        return math.sqrt(max(integrate(sq).real, 0.0) / VOLUME)
    sq = multiply(sq, density, cap=MAX_CAP)
    vol = integrate(density).real
    return math.sqrt(max(integrate(sq).real, 0.0) / vol)


_SAMPLE_CACHE = {}


def sample_points(n=200, seed=20240611):
    """Fixed pseudo-random sample set used for pointwise residual reporting."""
    if (n, seed) not in _SAMPLE_CACHE:
        _SAMPLE_CACHE[(n, seed)] = random_points(n, seed)
    return _SAMPLE_CACHE[(n, seed)]


def sup_norm(x, points=None):
    """Max modulus over the fixed sample set (or the given points)."""
    return sup_at(x, sample_points() if points is None else points)


def sup_at(x, points):
    """Maximum modulus at the given sample points."""
    if not x.parts:
        return 0.0
    return float(np.abs(x.evaluate(points)).max())


# --------------------------------------------------------------------------
# sampling


def random_points(n, seed=0):
    """Uniformly distributed points on S^3 as an (n, 2) complex array."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, 4))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return np.stack([g[:, 0] + 1j * g[:, 1], g[:, 2] + 1j * g[:, 3]], axis=1)


def quadrature(n_t=24, n_xi=48):
    """Product rule on S^3 in Hopf coordinates, weights summing to 4 pi^2.

    z = sqrt(t) e^{i xi1}, w = sqrt(1 - t) e^{i xi2}; d mu0 = dt dxi1 dxi2.
    Exact for polynomials of degree < min(2 n_t, n_xi).
    """
    x, wt = leggauss(n_t)
    t = 0.5 * (x + 1.0)
    wt = 0.5 * wt
    xi = 2 * np.pi * np.arange(n_xi) / n_xi
    tt, x1, x2 = np.meshgrid(t, xi, xi, indexing="ij")
    ww = np.broadcast_to(wt[:, None, None], tt.shape) * (2 * np.pi / n_xi) ** 2
    z = np.sqrt(tt) * np.exp(1j * x1)
    w = np.sqrt(1 - tt) * np.exp(1j * x2)
    pts = np.stack([z.ravel(), w.ravel()], axis=1)
    return pts, ww.ravel().copy()


def quadrature_integrate(x, rule=None):
    pts, wts = quadrature() if rule is None else rule
    return complex(np.sum(x.evaluate(pts) * wts))


def project(points, values, n, weights=None, cond_max=1e12):
    """Least-squares fit of sampled values in the canonical basis of degree <= n.

    With quadrature weights this is the L^2(d mu0) projection.  Returns the
    fitted field and the volume-normalised residual norm.
    """
    keys = canonical_keys(n)
    z, w = _split_points(points)
    values = np.asarray(values, dtype=np.complex128)
    if values.size < keys.size:
        raise IllConditioned(f"{values.size} samples for a basis of dimension {keys.size}")
    a, b, c, d = decode(keys)
    pz, pw = _power_tables(z, n), _power_tables(w, n)
    design = (pz[a] * pw[b] * np.conj(pz[c]) * np.conj(pw[d])).T
    sw = np.ones(values.size) if weights is None else np.asarray(weights, dtype=float)
    root = np.sqrt(sw)
    design_w = design * root[:, None]
    sv = np.linalg.svd(design_w, compute_uv=False)
    cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
    if cond > cond_max:
        raise IllConditioned(f"projection condition number {cond:.3e} exceeds {cond_max:.1e}")
    sol, *_ = np.linalg.lstsq(design_w, values * root, rcond=None)
    resid = values - design @ sol
    norm = math.sqrt(float(np.sum(sw * np.abs(resid) ** 2) / np.sum(sw)))
    return Field.from_vector(keys, sol), norm


def ambient_apply(x, components):
    """Apply an ambient vector field sum_j V^j d/dx_j (x_j = z, w, zbar, wbar).

    ``components`` holds four fields.  Only meaningful for fields tangent to
    S^3; used as an independent oracle for the frame actions.
    """
    out = Field()
    units = (KA, KB, KC, KD)
    for slot, comp in enumerate(components):
        if not comp.parts:
            continue
        keys, coefs = x.parts.get(0, (_EMPTY_K, _EMPTY_C))
        exps = decode(keys)[slot]
        sel = exps > 0
        if not sel.any():
            continue
        dk = keys[sel] - units[slot]
        dc = coefs[sel] * exps[sel]
        partial = Field({0: (dk, dc.astype(np.complex128))})
        # keys may be non-canonical after differentiation; normalise before multiplying
        partial = Field({0: _reduce(*partial.parts[0])})
        out = out + multiply(comp, partial, cap=MAX_CAP)
    return out


def random_real_field(rng, n=3, scale=1.0):
    """Real polynomial of degree <= n with standard normal coordinates in real_basis(n)."""
    basis = real_basis(n)
    coefs = rng.standard_normal(len(basis)) * scale
    acc = Field()
    for c, e in zip(coefs, basis):
        acc = acc + float(c) * e
    return acc
