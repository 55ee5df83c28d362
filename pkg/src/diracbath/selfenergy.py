"""Emitter self-energies for the honeycomb bath.

Two routes are kept deliberately independent.  The exact momentum sums
over the finite N x N grid are the ground truth at finite size; the
continuum closed form in elliptic integrals is what pole finding and
branch-cut quadrature consume.  They cross-validate each other in the
test suite.

All public functions return values in absolute energy units.  The grid
arrays inside BathModel are stored in units of J, so internally each
routine rescales z -> z/J once and multiplies the result by g^2/J at the
end (every sum below carries exactly one inverse power of energy).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import DENSE_GRID_LIMIT, BathModel, DegenerateGridError, momentum_values
from .specfun import SheetId, sheet_sigma

SQRT3 = math.sqrt(3.0)

#: tolerance for "z collides with a grid eigenvalue" (units of J)
RESONANCE_TOL = 1e-14

#: non-analytic points of the closed form, units of J
NON_ANALYTIC_POINTS = (-3.0, -1.0, 0.0, 1.0, 3.0)
#: tolerance used when classifying a real detuning against those points
NON_ANALYTIC_TOL = 1e-12
#: smallest usable distance from the real axis near the van Hove points;
#: below this the sign of Im k(z) is rounding noise and the sheet
#: combination can come out wrong
ETA_FLOOR = 1e-15

#: boundary prescription E + i eta for sheet-I real-axis evaluation
ETA_BOUNDARY = 1e-8

VALID_BETA = ("AA", "BB", "AB", "BA")


class ResonanceError(ValueError):
    """z coincides with a grid eigenvalue; the finite sum is singular."""


class NonAnalyticPointError(ValueError):
    """Closed form evaluated at a branch point of the band structure."""


@dataclass(frozen=True)
class SelfEnergyValue:
    """A single self-energy evaluation, tagged with how it was obtained."""

    z: complex
    value: complex
    sheet: SheetId
    source: str


@dataclass(frozen=True)
class CollectiveIndex:
    """Which matrix element of the collective self-energy, and where.

    beta names the sublattices the two emitters couple to; n12 is their
    separation in lattice-vector coordinates.
    """

    beta: str
    n12: tuple[int, int]

    def __post_init__(self):
        if self.beta not in VALID_BETA:
            raise ValueError(f"beta must be one of {VALID_BETA}, got {self.beta!r}")
        object.__setattr__(self, "n12", (int(self.n12[0]), int(self.n12[1])))


# ---------------------------------------------------------------------------
# compensated accumulation
# ---------------------------------------------------------------------------

class _Neumaier:
    """Compensated scalar accumulator (real)."""

    __slots__ = ("total", "comp")

    def __init__(self):
        self.total = 0.0
        self.comp = 0.0

    def add(self, x: float) -> None:
        t = self.total + x
        if abs(self.total) >= abs(x):
            self.comp += (self.total - t) + x
        else:
            self.comp += (x - t) + self.total
        self.total = t

    def value(self) -> float:
        return self.total + self.comp


class _NeumaierC:
    """Compensated complex accumulator: independent real and imag parts."""

    __slots__ = ("re", "im")

    def __init__(self):
        self.re = _Neumaier()
        self.im = _Neumaier()

    def add(self, x: complex) -> None:
        self.re.add(x.real)
        self.im.add(x.imag)

    def value(self) -> complex:
        return complex(self.re.value(), self.im.value())


# ---------------------------------------------------------------------------
# row streaming over the momentum grid
# ---------------------------------------------------------------------------

def _iter_f_rows(model: BathModel):
    """Yield (k1, k2_vector, f_row) with f in units of J, row-major.

    Grids up to DENSE_GRID_LIMIT reuse the cached dense array so repeated
    sums on the same model stay cheap; larger grids are never materialized
    whole and stream one row at a time.
    """
    kv = momentum_values(model.N)
    if model.N <= DENSE_GRID_LIMIT:
        f = model.f_grid()
        for i, k1 in enumerate(kv):
            yield k1, kv, f[i]
    else:
        phase2 = np.exp(1j * kv)
        for k1 in kv:
            yield k1, kv, (1.0 + np.exp(1j * k1)) + phase2


def _check_resonance(zj: complex, w2: np.ndarray) -> None:
    # only near-real z can collide with the (real) band; w2 is |f/J|^2
    if abs(zj.imag) > RESONANCE_TOL or abs(zj.real) > 3.0 + 1e-12:
        return
    w = np.sqrt(w2)
    d = min(np.min(np.abs(zj.real - w)), np.min(np.abs(zj.real + w)))
    if d < RESONANCE_TOL:
        raise ResonanceError(
            f"z = {zj}J lies within {RESONANCE_TOL} of a grid eigenvalue"
        )


def _grid_mean(model: BathModel, zj: complex, numerator) -> complex:
    """(1/N^2) sum numerator(k1, k2, f) / (zj^2 - |f|^2), compensated.

    numerator returns a row vector (or scalar broadcast); per-row sums use
    numpy pairwise reduction, rows combine with Neumaier compensation, so
    the reduction order is fixed and the result reproducible.
    """
    z2 = zj * zj
    acc = _NeumaierC()
    for k1, k2, frow in _iter_f_rows(model):
        w2 = frow.real * frow.real + frow.imag * frow.imag
        _check_resonance(zj, w2)
        acc.add(complex(np.sum(numerator(k1, k2, frow) / (z2 - w2))))
    return acc.value() / (model.N * model.N)


# ---------------------------------------------------------------------------
# single-emitter self-energy
# ---------------------------------------------------------------------------

def sigma_e_finite(z: complex, g: float, model: BathModel) -> SelfEnergyValue:
    """Exact single-emitter self-energy on the finite N x N grid.

    Evaluates (g^2/N^2) sum_k z / (z^2 - |f(k)|^2).  Raises
    ResonanceError when z collides with a grid eigenvalue and
    DegenerateGridError for z = 0 on a grid that contains a band zero.
    """
    zj = complex(z) / model.J
    src = f"finite_sum(N={model.N})"
    if zj == 0:
        if model.has_dirac_point:
            raise DegenerateGridError(
                f"z = 0 is singular on an N = {model.N} grid (N divisible by 3)"
            )
        return SelfEnergyValue(z=complex(z), value=0j, sheet=SheetId.I, source=src)
    val = _grid_mean(model, zj, lambda k1, k2, f: zj)
    return SelfEnergyValue(
        z=complex(z), value=val * g * g / model.J, sheet=SheetId.I, source=src
    )


def sigma_e_closed(
    z: complex, g: float, sheet: SheetId = SheetId.I, J: float = 1.0
) -> SelfEnergyValue:
    """Continuum self-energy (g^2 z / 4 pi) C(z) K^sheet(k(z)^2).

    Sheet I is the physical sheet; sheets II..V continue the function
    below the in-band branch cuts for pole finding and cut quadrature.
    """
    zj = complex(z) / J
    # exact hits only: points arbitrarily close to a branch point are legal
    # (rates near +-J are probed down to |z -+ J| ~ 1e-18), so closeness is
    # policed by the finiteness check below instead of a distance cutoff
    if any(zj == a for a in NON_ANALYTIC_POINTS):
        raise NonAnalyticPointError(
            f"closed form is non-analytic at z/J = {zj}"
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        val = g * g / J * sheet_sigma(zj, sheet)
    if not (math.isfinite(val.real) and math.isfinite(val.imag)):
        raise NonAnalyticPointError(
            f"closed form overflowed next to a branch point, z/J = {zj}"
        )
    return SelfEnergyValue(
        z=complex(z), value=val, sheet=sheet, source="closed_form"
    )


def sigma_e_near_zero(E: complex, g: float, J: float = 1.0) -> SelfEnergyValue:
    """Near-Dirac expansion, valid for |E| <= 0.1 J (about 5% at the edge).

    On the real axis (approached from above) this is
    (g^2 / (pi sqrt(3) J^2)) [E log(E^2/9J^2) - i pi |E|]; off the axis
    the same analytic germ is evaluated as 2 E log(-i E / 3J) with the
    principal log.  For Im E < 0 this continues straight through the
    in-band cut (what a pole search below the axis needs), not the
    physical sheet, which is the Schwarz mirror of the upper half plane.
    """
    ej = complex(E) / J
    if abs(ej) > 0.1:
        raise ValueError(f"expansion window is |E| <= 0.1J, got |E|/J = {abs(ej)}")
    if ej == 0:
        val = 0j
    else:
        val = 2.0 * ej * np.log(-1j * ej / 3.0) * g * g / (math.pi * SQRT3 * J)
    if ej.imag >= 0:
        sheet = SheetId.I
    else:
        sheet = SheetId.III if ej.real < 0 else SheetId.IV
    return SelfEnergyValue(
        z=complex(E), value=complex(val), sheet=sheet, source="near_dirac_expansion"
    )


@dataclass(frozen=True)
class MarkovPole:
    """Fermi-golden-rule pole z_M = Delta + Sigma_e(Delta + i0+)."""

    z: complex
    marginal: bool = False
    divergent: bool = False

    @property
    def rate(self) -> float:
        return -2.0 * self.z.imag

    @property
    def shift(self) -> float:
        return self.z.real


def markov_pole(delta: float, g: float, J: float = 1.0) -> MarkovPole:
    """Markov (pole) approximation for a single emitter at detuning delta.

    delta = 0 returns z_M = 0 flagged marginal (no decay at this order);
    the band edges +-3J raise, the sided limit does not exist there.

    Near +-J the rate grows without bound; the boundary value is taken
    at an offset eta = dist/1000 (dist = distance to the nearest log
    point) clipped to [1e-14, 1e-8].  Detunings within 1e-12 of +-J
    are flagged divergent and evaluated at the log point itself with
    eta = 1e-15: there z -+ 1 is exactly imaginary, so the region
    classification rests on true sign values rather than rounding
    noise and the returned rate is the deepest resolvable boundary
    value (it saturates; the true limit is infinite).
    """
    d = float(delta) / J
    if abs(d) < NON_ANALYTIC_TOL:
        return MarkovPole(z=0j, marginal=True)
    if abs(abs(d) - 3.0) < NON_ANALYTIC_TOL:
        raise NonAnalyticPointError("Markov pole undefined at the band edge +-3J")
    dist = abs(abs(d) - 1.0)
    divergent = dist < NON_ANALYTIC_TOL
    if divergent:
        d = math.copysign(1.0, d)
        eta = ETA_FLOOR
    else:
        eta = min(ETA_BOUNDARY, max(10.0 * ETA_FLOOR, 1e-3 * dist))
    sig = sigma_e_closed(complex(d, eta) * J, g, SheetId.I, J=J)
    return MarkovPole(z=delta + sig.value, divergent=divergent)


# ---------------------------------------------------------------------------
# collective (two-emitter) sums
# ---------------------------------------------------------------------------

def _numerator_factory(idx: CollectiveIndex, zj: complex):
    n1, n2 = idx.n12

    def numerator(k1, k2, f):
        phase = np.exp(1j * (k1 * n1 + k2 * n2))
        if idx.beta in ("AA", "BB"):
            return zj * phase
        if idx.beta == "AB":
            return np.conj(f) * phase
        return f * phase

    return numerator


def sigma12_finite(
    z: complex, g: float, model: BathModel, idx: CollectiveIndex
) -> SelfEnergyValue:
    """Collective self-energy matrix element on the finite grid.

    (g^2/N^2) sum_k D_beta e^{i k . n12} / (z^2 - |f|^2) with D_AA = D_BB
    = z, D_AB = conj f, D_BA = f.
    """
    zj = complex(z) / model.J
    src = f"finite_sum(N={model.N})"
    if model.has_dirac_point and abs(zj) < RESONANCE_TOL:
        raise DegenerateGridError(
            f"z = 0 is singular on an N = {model.N} grid (N divisible by 3)"
        )
    if zj == 0 and idx.beta in ("AA", "BB"):
        return SelfEnergyValue(z=complex(z), value=0j, sheet=SheetId.I, source=src)
    val = _grid_mean(model, zj, _numerator_factory(idx, zj))
    return SelfEnergyValue(
        z=complex(z), value=val * g * g / model.J, sheet=SheetId.I, source=src
    )


def jab_markov_asymptotic(n12: tuple[int, int], g: float, J: float = 1.0) -> float:
    """Far-field Markov coupling between emitters on opposite sublattices.

    Power-law envelope 1/|m12| with a valley-interference factor; m12 is
    the separation in the rescaled (Cartesian) coordinates.
    """
    n1, n2 = int(n12[0]), int(n12[1])
    if n1 == 0 and n2 == 0:
        raise ValueError("asymptotic coupling needs a nonzero separation")
    from .lattice import rescaled_separation

    m12 = rescaled_separation((n1, n2))
    r = math.hypot(m12[0], m12[1])
    ang = 2.0 * math.pi / 3.0 * (n1 - n2)
    return (
        g * g / J * SQRT3 / (math.pi * r) * (m12[0] * math.cos(ang) - m12[1] * math.sin(ang)) / r
    )


# ---------------------------------------------------------------------------
# overlap sums g(N), g_pm and the residue formulas built on them
# ---------------------------------------------------------------------------

def _require_no_dirac(model: BathModel) -> None:
    if model.has_dirac_point:
        raise DegenerateGridError(
            f"sum is singular on an N = {model.N} grid (N divisible by 3)"
        )


def g_of_n(model: BathModel) -> float:
    """Exact overlap sum (J^2/N^2) sum_k 1/|f(k)|^2 (dimensionless)."""
    _require_no_dirac(model)
    acc = _Neumaier()
    for _, _, frow in _iter_f_rows(model):
        w2 = frow.real * frow.real + frow.imag * frow.imag
        acc.add(float(np.sum(1.0 / w2)))
    return acc.value() / (model.N * model.N)


def g_of_n_approx(N: int) -> float:
    """Logarithmic approximation to g_of_n; the 0.2 is the fitted offset."""
    return 0.2 + 2.0 / (math.pi * SQRT3) * math.log(N)


def g_pm(model: BathModel, n12: tuple[int, int], sign: int) -> float:
    """Symmetric/antisymmetric channel overlap sum.

    (J^2/N^2) sum_k (1 +- e^{i k . n12}) / |f|^2.  The imaginary part
    cancels under k -> -k and is checked to vanish.
    """
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    _require_no_dirac(model)
    n1, n2 = int(n12[0]), int(n12[1])
    acc = _NeumaierC()
    for k1, k2, frow in _iter_f_rows(model):
        w2 = frow.real * frow.real + frow.imag * frow.imag
        phase = np.exp(1j * (k1 * n1 + k2 * n2))
        acc.add(complex(np.sum((1.0 + sign * phase) / w2)))
    val = acc.value() / (model.N * model.N)
    if abs(val.imag) > 1e-12 * max(1.0, abs(val.real)):
        raise AssertionError(f"g_pm imaginary part failed to cancel: {val}")
    return val.real


def residue_r0(g: float, model: BathModel) -> float:
    """Quasi-bound-state residue 1 / (1 + (g/J)^2 g(N)) from the exact sum."""
    x = g / model.J
    return 1.0 / (1.0 + x * x * g_of_n(model))


def residue_subradiant_aa(n: int, g: float, J: float = 1.0) -> float:
    """Residue of the antisymmetric collective state at separation n(a1+a2)."""
    if n < 1:
        raise ValueError(f"separation index must be >= 1, got {n}")
    x = g / J
    return 1.0 / (1.0 + x * x * (0.6 + 2.0 / (SQRT3 * math.pi) * math.log(n)))


# ---------------------------------------------------------------------------
# small-z fast path for very large grids
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class SmallZExpansion:
    """Evaluates one collective matrix element near z = 0 in O(soft modes).

    Exact terms are kept for every grid point with |f/J|^2 below
    omega2_cut (the Dirac-cone neighborhood where the denominator is
    small); the rest of the zone is compressed into moments
    M_j = (1/N^2) sum c(k)/omega^{2j+2}, giving
    sum c/(z^2 - w^2) = near-sum - sum_j z^{2j} M_j with truncation error
    below (|z|^2/omega2_cut)^{order+1}.  Built once per (grid, index) and
    then evaluated at any |z|^2 < omega2_cut/4.
    """

    model: BathModel
    idx: CollectiveIndex
    omega2_cut: float = 1e-2
    order: int = 4
    _near_w2: np.ndarray = field(init=False, repr=False)
    _near_c: np.ndarray = field(init=False, repr=False)
    _moments: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        built = build_small_z_expansions(
            self.model, [self.idx], omega2_cut=self.omega2_cut, order=self.order
        )
        src = built[self.idx]
        self._near_w2 = src._near_w2
        self._near_c = src._near_c
        self._moments = src._moments

    def sigma(self, z: complex, g: float) -> complex:
        """Self-energy matrix element at z, absolute units."""
        zj = complex(z) / self.model.J
        z2 = zj * zj
        if abs(z2) > 0.25 * self.omega2_cut:
            raise ValueError(
                f"|z/J|^2 = {abs(z2):.3e} outside expansion radius "
                f"{0.25 * self.omega2_cut:.3e}"
            )
        near = complex(np.sum(self._near_c / (z2 - self._near_w2)))
        far = complex(np.polyval(self._moments[::-1], z2))
        total = (near / (self.model.N * self.model.N)) - far
        if self.idx.beta in ("AA", "BB"):
            total = total * zj
        return total * g * g / self.model.J


def build_small_z_expansions(
    model: BathModel,
    indices: list[CollectiveIndex],
    omega2_cut: float = 1e-2,
    order: int = 4,
) -> dict[CollectiveIndex, SmallZExpansion]:
    """Build several SmallZExpansion objects in a single grid pass.

    Sharing the pass matters at N ~ 10^4 where each full sweep costs
    O(N^2); all requested indices reuse the same row of |f|^2 and each
    adds only a phase multiply.
    """
    _require_no_dirac(model)
    state = {
        idx: {
            "w2": [],
            "c": [],
            "mom": [[_Neumaier(), _Neumaier()] for _ in range(order + 1)],
        }
        for idx in indices
    }
    for k1, k2, frow in _iter_f_rows(model):
        w2 = frow.real * frow.real + frow.imag * frow.imag
        mask = w2 < omega2_cut
        far = ~mask
        w2_far = w2[far]
        inv = 1.0 / w2_far
        for idx, st in state.items():
            n1, n2 = idx.n12
            phase = np.exp(1j * (k1 * n1 + k2 * n2))
            if idx.beta in ("AA", "BB"):
                c = np.asarray(phase, dtype=complex)
            elif idx.beta == "AB":
                c = np.conj(frow) * phase
            else:
                c = frow * phase
            if mask.any():
                st["w2"].append(w2[mask].copy())
                st["c"].append(c[mask].copy())
            cf = c[far]
            term = cf * inv
            for j in range(order + 1):
                s = complex(np.sum(term))
                st["mom"][j][0].add(s.real)
                st["mom"][j][1].add(s.imag)
                if j < order:
                    term = term * inv
    out = {}
    for idx, st in state.items():
        obj = object.__new__(SmallZExpansion)
        obj.model = model
        obj.idx = idx
        obj.omega2_cut = omega2_cut
        obj.order = order
        obj._near_w2 = (
            np.concatenate(st["w2"]) if st["w2"] else np.empty(0)
        )
        obj._near_c = (
            np.concatenate(st["c"]) if st["c"] else np.empty(0, dtype=complex)
        )
        n2tot = model.N * model.N
        obj._moments = np.array(
            [complex(re.value(), im.value()) / n2tot for re, im in st["mom"]]
        )
        out[idx] = obj
    return out
