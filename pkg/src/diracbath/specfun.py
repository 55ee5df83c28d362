"""Special functions for the honeycomb bath Green function.

The lattice self-energy closes in terms of complete elliptic integrals
of the first kind with a complex parameter.  Continuing the resolvent
below the real axis requires evaluating K on several Riemann sheets:
each analytic-continuation region carries an integer combination
p K(m) + q i K(1-m), selected by the signs of Im[z^2], Im[k(z)] and
Re[k(z)] at the evaluation point.  The combinations are frozen in
REGION_TABLE; `_resolve_region_table` re-derives them from scratch by
marching continuity across the band cuts, and the test suite checks
the frozen table against that derivation.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import hankel1 as _scipy_hankel1
from scipy.special import j0 as _scipy_j0
from scipy.special import j1 as _scipy_j1

TWO_OVER_PI = 2.0 / math.pi

#: absolute size below which a sign is ambiguous and the evaluation
#: point is nudged into the lower half plane before classifying
SIGN_TIE_TOL = 1e-14
SIGN_TIE_SHIFT = 1e-12

#: angular distance of the AGM iterate from the negative real axis at
#: which the iteration hands over to direct quadrature
AGM_ANGLE_TOL = 1e-6

_AGM_EPS = 1e-16
_AGM_MAX_ITER = 80


class DomainError(ValueError):
    """Argument outside the analytic domain of a special function."""


class RegionTableError(KeyError):
    """No (p, q) combination stored for the requested sheet and signs."""


# ---------------------------------------------------------------------------
# complete elliptic integral of the first kind, complex parameter
# ---------------------------------------------------------------------------

def _ellipk_quadrature(m: complex) -> complex:
    """Adaptive quadrature of the defining integral, used when the AGM
    branch choice becomes ill conditioned."""
    from scipy.integrate import quad

    def integrand(theta, part):
        v = 1.0 / cmath.sqrt(1.0 - m * math.sin(theta) ** 2)
        return v.real if part == 0 else v.imag

    re, _ = quad(integrand, 0.0, math.pi / 2.0, args=(0,),
                 epsabs=1e-14, epsrel=1e-13, limit=200)
    im, _ = quad(integrand, 0.0, math.pi / 2.0, args=(1,),
                 epsabs=1e-14, epsrel=1e-13, limit=200)
    return complex(re, im)


def ellipk(m) -> complex:
    """Complete elliptic integral of the first kind, parameter m.

    K(m) = int_0^{pi/2} (1 - m sin^2 t)^{-1/2} dt, principal branch,
    analytic off the real cut m >= 1.  Evaluated by the arithmetic-
    geometric mean generalized to complex arguments: the square-root
    branch is chosen so consecutive iterates stay in the right half
    plane, which reproduces the principal value.  If an iterate's
    product lands within 1e-6 in angle of the negative real axis the
    branch choice degenerates and evaluation falls back to adaptive
    quadrature of the defining integral.

    Relative accuracy ~1e-12 away from the cut.
    """
    m = complex(m)
    if m.imag == 0.0 and m.real >= 1.0:
        raise DomainError(f"ellipk parameter on the cut m >= 1: {m}")
    a = 1.0 + 0.0j
    b = cmath.sqrt(1.0 - m)
    for _ in range(_AGM_MAX_ITER):
        if abs(a - b) <= _AGM_EPS * abs(a):
            break
        prod = a * b
        if prod != 0 and abs(math.pi - abs(cmath.phase(prod))) < AGM_ANGLE_TOL:
            return _ellipk_quadrature(m)
        a, b = 0.5 * (a + b), cmath.sqrt(prod)
        # keep the geometric mean in the half plane of the arithmetic one
        if abs(a - b) > abs(a + b):
            b = -b
    return math.pi / (2.0 * a)


# ---------------------------------------------------------------------------
# band coefficient C(z), modulus k(z), classification signs
# ---------------------------------------------------------------------------

def band_coefficient(z: complex) -> complex:
    """C(z) = 8 / ((sqrt(z^2) - 1)^{3/2} (sqrt(z^2) + 3)^{1/2}),
    principal powers, energies in units of J."""
    z = complex(z)
    s = cmath.sqrt(z * z)
    return 8.0 / ((s - 1.0) ** 1.5 * (s + 3.0) ** 0.5)


def band_modulus(z: complex) -> complex:
    """Elliptic modulus k(z) = C(z) (z^2)^{1/4} / 2; the parameter fed
    to the sheet combinations is m = k(z)^2."""
    z = complex(z)
    return band_coefficient(z) * (z * z) ** 0.25 / 2.0


class SheetId(Enum):
    """Label of the analytic-continuation region of the self-energy.

    I is the physical sheet (upper half plane and its mirror); II-V are
    the continuations through the four band segments (-3,-1), (-1,0),
    (0,1) and (1,3) into the lower half plane, in that order.
    """

    I = 1
    II = 2
    III = 3
    IV = 4
    V = 5


#: real-axis interval through which each lower-half-plane sheet is reached
SHEET_STRIPS = {
    SheetId.II: (-3.0, -1.0),
    SheetId.III: (-1.0, 0.0),
    SheetId.IV: (0.0, 1.0),
    SheetId.V: (1.0, 3.0),
}


@dataclass(frozen=True)
class RegionSigns:
    """Sign triple (sign Im[z^2], sign Im[k(z)], sign Re[k(z)]) that
    selects the (p, q) combination within a sheet."""

    im_z2: int
    im_k: int
    re_k: int

    @classmethod
    def from_z(cls, z: complex) -> "RegionSigns":
        z = complex(z)
        for _ in range(2):
            k = band_modulus(z)
            vals = ((z * z).imag, k.imag, k.real)
            if all(abs(v) >= SIGN_TIE_TOL for v in vals):
                return cls(*(1 if v > 0 else -1 for v in vals))
            z = z - 1j * SIGN_TIE_SHIFT
        # still ambiguous after the nudge: classify by what is left
        return cls(*(1 if v >= 0 else -1 for v in vals))

    def key(self):
        return (self.im_z2, self.im_k, self.re_k)


def region_signs(z: complex) -> RegionSigns:
    """Classification signs at z, nudged to z - 1e-12 i on ties."""
    return RegionSigns.from_z(z)


def _sheet1_combination(signs: RegionSigns):
    # physical sheet: plain K when the signs of Im[k] and Im[z^2] differ,
    # K +- 2iK' when they agree
    if signs.im_k * signs.im_z2 < 0:
        return (1, 0)
    return (1, 2 * signs.im_k)


# (p, q) combinations for the continuation sheets, keyed by the sign
# triple (sign Im[z^2], sign Im[k], sign Re[k]).  Derived numerically by
# `_resolve_region_table` (continuity marching across the band cuts) and
# frozen here; a test re-derives the table and compares.  Each strip
# splits into a shallow sub-region hugging the segment and a deeper one
# past the first sign curve; the table is symmetric under reflection
# through the imaginary axis (p fixed, q negated).
REGION_TABLE: dict[SheetId, dict[tuple[int, int, int], tuple[int, int]]] = {
    SheetId.II: {(1, -1, 1): (1, 2), (1, -1, -1): (-3, 2)},
    SheetId.III: {(1, 1, -1): (3, 2), (1, -1, -1): (3, -4)},
    SheetId.IV: {(-1, -1, -1): (3, -2), (-1, 1, -1): (3, 4)},
    SheetId.V: {(-1, 1, 1): (1, -2), (-1, 1, -1): (-3, -2)},
}


def ellipk_sheet(m: complex, sheet: SheetId, signs: RegionSigns) -> complex:
    """Sheet-resolved combination p K(m) + q i K(1 - m).

    `m` must be k(z)^2 and `signs` the RegionSigns of the same z; the
    bookkeeping is the caller's (see selfenergy.sigma_e_closed).
    Raises RegionTableError if the (sheet, signs) pair has no stored
    combination.
    """
    if sheet == SheetId.I:
        p, q = _sheet1_combination(signs)
    else:
        try:
            p, q = REGION_TABLE[sheet][signs.key()]
        except KeyError:
            raise RegionTableError(
                f"no combination stored for sheet {sheet} signs {signs.key()}"
            ) from None
    out = p * ellipk(m)
    if q != 0:
        out = out + q * 1j * ellipk(1.0 - m)
    return out


# ---------------------------------------------------------------------------
# numerical derivation of the continuation table
# ---------------------------------------------------------------------------

def _combo_value(z: complex, p: int, q: int) -> complex:
    """g^2-stripped self-energy (z / 4 pi) C(z) (p K + q i K') at z."""
    m = band_modulus(z) ** 2
    val = p * ellipk(m)
    if q != 0:
        val = val + q * 1j * ellipk(1.0 - m)
    return z / (4.0 * math.pi) * band_coefficient(z) * val


def _sheet1_value(z: complex) -> complex:
    s = region_signs(z)
    p, q = _sheet1_combination(s)
    return _combo_value(z, p, q)


def sheet_sigma(z: complex, sheet: SheetId = SheetId.I) -> complex:
    """Coupling-stripped self-energy on a given sheet, z in units of J.

    Returns (z / 4 pi) C(z) K^sheet(k(z)^2); multiply by g^2 / J for the
    physical value.  Continuation sheets are only defined in their strip
    below the axis (RegionTableError otherwise).
    """
    signs = region_signs(z)
    if sheet == SheetId.I:
        p, q = _sheet1_combination(signs)
    else:
        try:
            p, q = REGION_TABLE[sheet][signs.key()]
        except KeyError:
            raise RegionTableError(
                f"no combination stored for sheet {sheet} signs {signs.key()}"
            ) from None
    return _combo_value(z, p, q)


_CANDIDATE_PQ = [(p, q) for p in range(-5, 6) for q in range(-6, 7)]


def _resolve_region_table(n_anchors: int = 3, verbose: bool = False) -> dict:
    """Re-derive REGION_TABLE by marching continuity into each strip.

    For each band segment the continuation below the axis is pinned by
    matching the physical-sheet value just above the segment, then the
    integer combination is re-fitted step by step down to depth 3 while
    the classification signs change.  Returns {SheetId: {signs: (p,q)}}.
    """
    table = {sheet: {} for sheet in SHEET_STRIPS}
    for sheet, (a, b) in SHEET_STRIPS.items():
        width = b - a
        for frac in np.linspace(0.18, 0.82, n_anchors):
            E = a + frac * width
            eta = 1e-6
            target = _sheet1_value(E + 1j * eta)
            prev = None
            for y in np.concatenate([
                np.geomspace(eta, 0.05, 60),
                np.linspace(0.05, 3.0, 240)[1:],
            ]):
                z = E - 1j * y
                signs = region_signs(z)
                ref = target if prev is None else prev
                best, second, best_pq = None, None, None
                for p, q in _CANDIDATE_PQ:
                    d = abs(_combo_value(z, p, q) - ref)
                    if best is None or d < best:
                        best, second, best_pq = d, best, (p, q)
                    elif second is None or d < second:
                        second = d
                if second is not None and best > 0.35 * second:
                    raise RuntimeError(
                        f"ambiguous continuation at z={z}: "
                        f"best {best:.3e} runner-up {second:.3e}")
                key = signs.key()
                stored = table[sheet].get(key)
                if stored is None:
                    table[sheet][key] = best_pq
                    if verbose:
                        print(f"{sheet} {key} -> {best_pq}  (z={z:.4f})")
                elif stored != best_pq:
                    raise RuntimeError(
                        f"inconsistent table for {sheet} {key}: "
                        f"{stored} vs {best_pq} at z={z}")
                prev = _combo_value(z, *best_pq)
    return table


# ---------------------------------------------------------------------------
# Bessel and Hankel functions
# ---------------------------------------------------------------------------

def bessel_j(order: int, x):
    """Bessel function of the first kind, order 0 or 1, real x >= 0."""
    if order not in (0, 1):
        raise DomainError(f"order must be 0 or 1, got {order}")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0):
        raise DomainError("bessel_j requires x >= 0")
    out = _scipy_j0(x) if order == 0 else _scipy_j1(x)
    if np.ndim(out) == 0:
        return float(out)
    return out


def hankel1_1(z) -> complex:
    """Hankel function H_1^{(1)}(z) of order one, complex argument.

    Behaves as -2i/(pi z) for small |z|; signals at z = 0 where the
    function has a pole.
    """
    z = complex(z)
    if z == 0:
        raise DomainError("hankel1_1 has a pole at z = 0")
    return complex(_scipy_hankel1(1, z))
