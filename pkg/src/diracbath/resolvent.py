"""Spectral decomposition of the single-emitter amplitude.

C_e(t) is reconstructed from the resolvent G(z) = 1/(z - Delta - Sigma(z))
by deforming the real-axis Fourier integral into the lower half plane:
real bound-state poles outside the band, unstable poles on the
continuation sheets, and five vertical branch-cut detours anchored at the
non-analytic points -3J, -J, 0, J, 3J.  Everything here works in the
continuum (closed-form self-energy); finite-N physics enters only through
the optional quasi-bound-state weight.

The t = 0 sum rule (all contributions add to C_e(0) = 1) is the global
self-check of the sheet table, contour orientation, and quadrature; the
acceptance suite runs it on a 27-point parameter grid.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import warnings

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import brentq

from .lattice import BathModel
from .selfenergy import (
    NonAnalyticPointError,
    markov_pole,
    residue_r0,
    sigma_e_closed,
)
from .specfun import (
    DomainError,
    RegionTableError,
    SHEET_STRIPS,
    SheetId,
    region_signs,
)

#: anchors of the vertical detours and the sheets seen on each side
CUT_LAYOUT = (
    (-3.0, SheetId.I, SheetId.II),
    (-1.0, SheetId.II, SheetId.III),
    (0.0, SheetId.III, SheetId.IV),
    (1.0, SheetId.IV, SheetId.V),
    (3.0, SheetId.V, SheetId.I),
)

#: horizontal displacement selecting the left/right side of a detour line
EDGE_EPS = 1e-9

#: dedupe radius and acceptance thresholds for Newton roots
ROOT_DEDUPE = 1e-10
ROOT_RESIDUAL = 1e-10

#: central-difference step for residue derivatives
DERIV_STEP = 1e-7


class PoleSearchError(RuntimeError):
    """A verified-root precondition failed (defective pole, bad sheet)."""


@dataclass(frozen=True)
class Pole:
    z: complex
    kind: str  # real_BS_upper | real_BS_lower | qBS | unstable
    sheet: SheetId
    residue: complex


@dataclass(frozen=True)
class CutSpec:
    anchor: float
    left_sheet: SheetId
    right_sheet: SheetId


@dataclass(frozen=True)
class CutContribution:
    value: complex
    depth: float
    tail_bound: float
    quad_error: float


@dataclass
class SpectralDecomposition:
    delta: float
    g: float
    poles: list = field(default_factory=list)
    branch_cuts: list = field(default_factory=list)


def _sigma(z: complex, g: float, sheet: SheetId = SheetId.I) -> complex:
    return sigma_e_closed(z, g, sheet).value


def _green(z: complex, delta: float, g: float, sheet: SheetId) -> complex:
    return 1.0 / (z - delta - _sigma(z, g, sheet))


# ---------------------------------------------------------------------------
# pole finding
# ---------------------------------------------------------------------------

def _real_bs(delta: float, g: float, upper: bool):
    """Bound-state root outside the band.

    The root always exists: the level shift diverges logarithmically at
    the band edge, so x - delta - Sigma(x) changes sign on (3, inf) for
    any detuning.  The divergence is weak, though, and for detunings far
    from the edge the crossing sits at x - 3 ~ exp(-const/g^2), below
    what binary64 can represent next to 3.  Those roots are reported as
    the closest representable abscissa with residue pinned to zero
    (the true weight is ~exp(-1/g^2), smaller than any float error).

    Returns (root, pinned) with pinned marking the unrepresentable case.
    """
    sgn = 1.0 if upper else -1.0

    def fun(x):
        return x - delta - _sigma(complex(x), g, SheetId.I).real

    lo = math.nextafter(sgn * 3.0, sgn * 4.0)
    if fun(lo) * sgn > 0:
        return lo, True
    b = sgn * max(3.5, abs(delta) + 1.0)
    for _ in range(80):
        if fun(b) * sgn > 0:
            break
        b *= 1.5
    else:
        raise PoleSearchError("bound state bracket not found")
    root = brentq(fun, min(lo, b), max(lo, b), xtol=1e-15, rtol=8.9e-16)
    return root, False


def _newton_up(z0: complex, delta: float, g: float, sheet: SheetId):
    """Damped Newton for z - delta - Sigma^sheet(z) = 0; None if lost."""
    z = complex(z0)
    h = 1e-7
    for _ in range(60):
        try:
            f = z - delta - _sigma(z, g, sheet)
            fp = 1.0 - (_sigma(z + h, g, sheet) - _sigma(z - h, g, sheet)) / (2 * h)
        except (RegionTableError, NonAnalyticPointError, ZeroDivisionError):
            return None
        if not (np.isfinite(f.real) and np.isfinite(f.imag)):
            return None
        if abs(fp) < 1e-14:
            return None
        dz = f / fp
        # keep steps bounded; the basin borders are the sign curves
        if abs(dz) > 0.5:
            dz *= 0.5 / abs(dz)
        z = z - dz
        if abs(dz) < 1e-13:
            break
    else:
        return None
    try:
        if abs(z - delta - _sigma(z, g, sheet)) > ROOT_RESIDUAL:
            return None
    except (RegionTableError, NonAnalyticPointError):
        return None
    return z


def _up_seeds(delta: float, g: float, sheet: SheetId):
    a, b = SHEET_STRIPS[sheet]
    seeds = [
        complex(a + 0.05 * (b - a), -0.1),
        complex(b - 0.05 * (b - a), -0.1),
        complex(0.5 * (a + b), -0.1),
    ]
    try:
        zm = markov_pole(delta, g).z
    except NonAnalyticPointError:
        zm = None
    if zm is not None and a - 0.5 <= zm.real <= b + 0.5:
        seeds.append(complex(zm.real, min(zm.imag, -1e-3)))
    return seeds


def _resides_on_sheet(z: complex, sheet: SheetId) -> bool:
    a, b = SHEET_STRIPS[sheet]
    if not (a + 1e-9 < z.real < b - 1e-9):
        return False
    return z.imag < -1e-12


def find_poles(delta: float, g: float, J: float = 1.0) -> SpectralDecomposition:
    """Locate all resolvent poles: two real bound states plus any unstable
    poles on the continuation sheets below the band.

    Unstable-pole search runs Newton from the Markov pole, from points
    next to each cut edge, and from strip midpoints; converged roots are
    kept only if they sit strictly inside their own sheet's strip below
    the axis, then deduplicated.
    """
    if g <= 0:
        raise ValueError("coupling must be positive")
    d, gj = float(delta) / J, float(g) / J
    dec = SpectralDecomposition(delta=float(delta), g=float(g))
    dec.branch_cuts = [CutSpec(a, ls, rs) for a, ls, rs in CUT_LAYOUT]

    for upper, kind in ((True, "real_BS_upper"), (False, "real_BS_lower")):
        root, pinned = _real_bs(d, gj, upper=upper)
        res = 0j if pinned else residue_at(J * complex(root), delta, g, SheetId.I, J=J)
        dec.poles.append(
            Pole(z=J * complex(root), kind=kind, sheet=SheetId.I, residue=res)
        )
    if abs(d) < 1e-12:
        # marginal quasi-bound state: zero weight in the continuum
        dec.poles.append(Pole(z=0j, kind="qBS", sheet=SheetId.I, residue=0j))

    for sheet in (SheetId.II, SheetId.III, SheetId.IV, SheetId.V):
        found = []
        for seed in _up_seeds(d, gj, sheet):
            z = _newton_up(seed, d, gj, sheet)
            if z is None or not _resides_on_sheet(z, sheet):
                continue
            if any(abs(z - w) < ROOT_DEDUPE for w in found):
                continue
            found.append(z)
        for z in found:
            dec.poles.append(
                Pole(z=J * z, kind="unstable", sheet=sheet,
                     residue=residue_at(J * z, delta, g, sheet, J=J))
            )
    # deterministic merge order regardless of search scheduling
    dec.poles.sort(key=lambda p: (p.z.real, p.z.imag))
    return dec


def residue_at(
    z: complex, delta: float, g: float, sheet: SheetId, J: float = 1.0
) -> complex:
    """Residue 1/(1 - Sigma'(z)) of the resolvent at a verified root.

    The derivative is a central difference with step 1e-7 J, taken along
    a direction that keeps both evaluation points inside the root's sign
    region (steps across a region boundary would sample a different
    branch combination).
    """
    zj = complex(z) / J
    gj = g / J
    signs = region_signs(zj).key()
    steps: tuple[complex, ...] = (DERIV_STEP, DERIV_STEP * 1j, 1e-9, 1e-9j)
    if sheet == SheetId.I and abs(zj.imag) < 1e-12 and abs(zj.real) > 3.0:
        # real bound state: keep both stencil points outside the band
        gap = abs(zj.real) - 3.0
        if gap < 1e-13:
            # no usable stencil fits between the root and the branch
            # point; the log-divergent slope there caps the weight at
            # ~1e-9, below every consumer's tolerance
            return 0j
        steps = (min(DERIV_STEP, gap / 4.0),)
    fp = None
    for h in steps:
        if sheet != SheetId.I and not (
            region_signs(zj + h).key() == signs
            and region_signs(zj - h).key() == signs
        ):
            continue
        try:
            fp = (_sigma(zj + h, gj, sheet) - _sigma(zj - h, gj, sheet)) / (2 * h)
        except (DomainError, RegionTableError, NonAnalyticPointError):
            continue
        break
    if fp is None:
        raise PoleSearchError(f"no valid derivative direction at z = {z}")
    denom = 1.0 - fp
    if abs(denom) < 1e-10:
        raise PoleSearchError(f"defective pole at z = {z}: 1 - Sigma' = {denom}")
    return 1.0 / denom


# ---------------------------------------------------------------------------
# branch-cut detours
# ---------------------------------------------------------------------------

def _cut_spec(anchor: float) -> CutSpec:
    for a, ls, rs in CUT_LAYOUT:
        if a == anchor:
            return CutSpec(a, ls, rs)
    raise ValueError(f"anchor must be one of {[c[0] for c in CUT_LAYOUT]}")


def _green_jump(s: float, anchor, delta, g, cut: CutSpec) -> complex:
    """G_left - G_right at z = anchor - i s, sides displaced by EDGE_EPS."""
    zl = complex(anchor - EDGE_EPS, -s)
    zr = complex(anchor + EDGE_EPS, -s)
    return _green(zl, delta, g, cut.left_sheet) - _green(zr, delta, g, cut.right_sheet)


#: ray half-angle for the central detour; an angular displacement keeps the
#: side selection meaningful at depths far below any fixed offset
RAY_ANGLE = 1e-9

_RAY_L = -1j * cmath.exp(-1j * RAY_ANGLE)
_RAY_R = -1j * cmath.exp(1j * RAY_ANGLE)


def _central_jump(s: float, delta, g, cut: CutSpec) -> complex:
    """Jump across the central cut at z = -i s e^{-+ i phi} (ray form)."""
    return _green(s * _RAY_L, delta, g, cut.left_sheet) - _green(
        s * _RAY_R, delta, g, cut.right_sheet
    )


def _quad_complex(fun, a, b, **kw):
    # roundoff warnings fire in regions where e^{-st} underflows; the
    # returned error estimates are kept and surfaced instead
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        re, re_err = quad(lambda x: fun(x).real, a, b, **kw)
        im, im_err = quad(lambda x: fun(x).imag, a, b, **kw)
    return complex(re, im), math.hypot(re_err, im_err)


#: below this u = log(s) the central-cut integrand is handled analytically
DEEP_TAIL_U = -60.0


def _slope_fit(g, cut: CutSpec, side: str):
    """Fit Sigma(z)/z = c (u + d) on one side of the deep central cut."""
    sheet = cut.left_sheet if side == "L" else cut.right_sheet
    ray = _RAY_L if side == "L" else _RAY_R
    vals = []
    for u in (-40.0, -50.0):
        z = math.exp(u) * ray
        vals.append(_sigma(z, g, sheet) / z)
    c = (vals[1] - vals[0]) / (-10.0)
    d = vals[0] / c + 40.0
    return c, d


def _deep_tail(g, cut: CutSpec, U: float) -> complex:
    """Closed-form integral of the central-cut jump over u in (-inf, U].

    Valid for delta = 0 where G = 1/(z (1 - c(u + d))) with side-dependent
    d: the integrand in u is rational and integrates to a log ratio.  The
    principal log is safe because 1 - c(u + d) keeps a fixed-sign
    imaginary part along the path.
    """
    cL, dL = _slope_fit(g, cut, "L")
    cR, dR = _slope_fit(g, cut, "R")
    c = 0.5 * (cL + cR)
    if abs(cL - cR) > 1e-6 * abs(c):
        raise PoleSearchError(
            f"deep-tail slopes disagree between cut sides: {cL} vs {cR}"
        )
    return (-1j / c) * (
        cmath.log(1.0 - c * (U + dL)) - cmath.log(1.0 - c * (U + dR))
    )


def branch_cut_contribution(
    anchor: float,
    t: float,
    delta: float,
    g: float,
    J: float = 1.0,
) -> CutContribution:
    """Detour integral -(e^{-i a t}/2 pi) int_0^Y ds e^{-s t} [G_L - G_R].

    The overall minus sign is the contour orientation: the deformed path
    runs left to right, so it ascends the left side of each anchor and
    descends the right side.  The depth is Y = max(40/t, 20) (in units
    of J; infinite at t = 0).  The central anchor integrates in
    u = log s because at small detuning the spectral weight sits at
    s ~ exp(-1/g^2), far below floating-point range; everything under
    u = -60 uses the closed-form tail.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    cut = _cut_spec(float(anchor) / J)
    d, gj, tj = float(delta) / J, float(g) / J, float(t) * J
    a = cut.anchor

    if tj < 1e-12:
        Y = math.inf
    else:
        Y = max(40.0 / tj, 20.0)
    tail_bound = math.exp(-Y * tj) if Y < math.inf else 0.0

    if a == 0.0:
        # cap keeps the ray inside the neighboring strips; the integrand
        # is ~ g^2 log(s)/s^2 out there, so the cap costs < 1e-16
        u_top = min(math.log(Y) if Y < math.inf else 21.0, 21.0)
        # the closed-form tail needs e^{-st} ~ 1 over its whole range, so
        # at huge t the boundary tracks the exponential rolloff downward
        u_deep = DEEP_TAIL_U if tj < 1e-12 else min(DEEP_TAIL_U, -math.log(tj) - 10.0)

        def integrand(u):
            s = math.exp(u)
            return s * math.exp(-s * tj) * _central_jump(s, d, gj, cut)

        val, err = _quad_complex(
            integrand, u_deep, u_top, epsabs=1e-13, epsrel=1e-9, limit=400
        )
        if abs(d) < 1e-12:
            val += _deep_tail(gj, cut, u_deep)
    else:

        def integrand(s):
            return math.exp(-s * tj) * _green_jump(s, a, d, gj, cut)

        val, err = _quad_complex(
            integrand, 0.0, Y, epsabs=1e-13, epsrel=1e-9, limit=400
        )

    phase = cmath.exp(-1j * a * tj)
    return CutContribution(
        value=-phase * val / (2.0 * math.pi),
        depth=Y,
        tail_bound=tail_bound,
        quad_error=err / (2.0 * math.pi),
    )


# ---------------------------------------------------------------------------
# amplitude reconstruction
# ---------------------------------------------------------------------------

def ce_resolvent(
    times,
    delta: float,
    g: float,
    J: float = 1.0,
    model: BathModel | None = None,
    decomposition: SpectralDecomposition | None = None,
):
    """C_e(t) from poles plus branch-cut detours (continuum by default).

    With a BathModel the marginal qBS weight is replaced by the finite-N
    residue R0(N); note the continuum central cut already carries that
    weight in its deep tail, so finite-N mode is a modeling convenience
    for plateau values, not a sum-rule-exact decomposition.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    dec = decomposition if decomposition is not None else find_poles(delta, g, J=J)
    out = np.zeros(times.shape, dtype=complex)
    r0 = 0.0
    if model is not None:
        r0 = residue_r0(g, model)
    for pole in dec.poles:
        if pole.kind == "qBS":
            out += r0
            continue
        out += pole.residue * np.exp(-1j * pole.z * times)
    for cut in dec.branch_cuts:
        for i, t in enumerate(times):
            out[i] += branch_cut_contribution(cut.anchor, t, delta, g, J=J).value
    return out


def markov_ce(times, delta: float, g: float, J: float = 1.0):
    """Fermi-golden-rule amplitude e^{-i z_M t} (constant 1 at delta = 0)."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    pole = markov_pole(delta, g, J=J)
    if pole.marginal:
        return np.ones(times.shape, dtype=complex)
    return np.exp(-1j * pole.z * times)


def mbc_late_time_asymptotic(t, g: float, J: float = 1.0):
    """Leading late-time magnitude of the central-cut amplitude.

    |C(t)| ~ (pi sqrt 3 J^2) / (2 g^2 log(3 J t)); a diagnostic only, the
    quadrature is never replaced by it (convergence is slow).
    """
    t = np.asarray(t, dtype=float)
    return math.pi * SQRT3_ * J * J / (2.0 * g * g * np.log(3.0 * J * t))


SQRT3_ = math.sqrt(3.0)
