"""Honeycomb lattice geometry and single-particle band structure.

Two-site unit cell (sublattices A and B), primitive vectors
a1 = (3/2, +sqrt(3)/2) and a2 = (3/2, -sqrt(3)/2) in units of the
nearest-neighbour distance.  Momenta are handled in reduced
coordinates k = (k1, k2) with ki = k . ai, so the Brillouin zone is
the square [-pi, pi)^2 and plane waves on the Bravais lattice read
exp(i k . n) = exp(i(k1 n1 + k2 n2)) for integer n = (n1, n2).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
import cmath
import math

import numpy as np

SQRT3 = math.sqrt(3.0)

#: modulus below which a grid momentum counts as sitting on a Dirac point
DIRAC_TOL = 1e-12


class DegenerateGridError(ValueError):
    """Raised when a momentum grid contains a Dirac point and the
    requested quantity is singular there (zero-energy denominators)."""


def f_k(k1, k2, J: float = 1.0):
    """Off-diagonal band function f(k) = J (1 + e^{i k1} + e^{i k2}).

    Accepts scalars or arrays (broadcast).  The band energies are
    +-|f(k)|, so the full band spans [-3J, 3J] with conical zeros at
    the two Dirac momenta.
    """
    k1 = np.asarray(k1)
    k2 = np.asarray(k2)
    out = J * (1.0 + np.exp(1j * k1) + np.exp(1j * k2))
    if out.ndim == 0:
        return complex(out)
    return out


@dataclass(frozen=True)
class DiracData:
    """Dirac point locations and the linearization data around them.

    h_plus/h_minus are the complex 2-vectors in the expansion
    f(K_pm + q) ~= J (h_pm . q); h_p_plus/h_p_minus are the constant
    vectors (-1, +-i) that appear after rotating q to the isotropic
    coordinates p with q1,2 = (3/2)(p1 +- p2/sqrt(3)).
    """

    K_plus: tuple = (2.0 * math.pi / 3.0, -2.0 * math.pi / 3.0)
    K_minus: tuple = (-2.0 * math.pi / 3.0, 2.0 * math.pi / 3.0)
    h_plus: tuple = (1j * cmath.exp(2j * math.pi / 3), 1j * cmath.exp(-2j * math.pi / 3))
    h_minus: tuple = (1j * cmath.exp(-2j * math.pi / 3), 1j * cmath.exp(2j * math.pi / 3))
    h_p_plus: tuple = (-1.0, 1j)
    h_p_minus: tuple = (-1.0, -1j)


def dirac_points() -> DiracData:
    """Return the Dirac momenta K_pm = (2 pi / 3)(+-1, -+1) and the
    associated linearization vectors."""
    return DiracData()


def linearized_f(dq, which: str = "+", J: float = 1.0) -> complex:
    """Linearized band function J (h_pm . dq) for small dq around K_pm.

    `which` selects the valley: "+" for K_plus, "-" for K_minus.
    """
    d = dirac_points()
    if which == "+":
        h = d.h_plus
    elif which == "-":
        h = d.h_minus
    else:
        raise ValueError(f"valley must be '+' or '-', got {which!r}")
    return J * (h[0] * dq[0] + h[1] * dq[1])


def momentum_values(N: int) -> np.ndarray:
    """1D grid of reduced momenta (2 pi / N) m with m = -N//2 .. N - N//2 - 1.

    The set is closed under k -> -k modulo 2 pi.
    """
    if N < 2:
        raise ValueError(f"grid size must be at least 2, got N={N}")
    m = np.arange(N) - N // 2
    return 2.0 * math.pi * m / N


def momentum_grid(N: int):
    """Return (k1, k2) meshgrid arrays of shape (N, N), row-major in
    (m1, m2): k1 varies along axis 0, k2 along axis 1."""
    kv = momentum_values(N)
    return np.meshgrid(kv, kv, indexing="ij")


def rescaled_separation(n12) -> np.ndarray:
    """Cartesian separation m12 = ((3/2)(n1 + n2), (sqrt(3)/2)(n1 - n2))
    for an integer cell separation n12 = (n1, n2)."""
    n1, n2 = n12
    return np.array([1.5 * (n1 + n2), 0.5 * SQRT3 * (n1 - n2)])


@dataclass(frozen=True)
class BathModel:
    """Finite honeycomb bath on an N x N cell torus with hopping J.

    All energies produced by this package are reported in units of J;
    the stored J only rescales input/output at the interface layer.
    The |f(k)|^2 grid is cached after first use and marked read-only.
    """

    N: int
    J: float = 1.0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.N < 2:
            raise ValueError(f"grid size must be at least 2, got N={self.N}")
        if self.J <= 0:
            raise ValueError(f"hopping must be positive, got J={self.J}")

    @cached_property
    def k_values(self) -> np.ndarray:
        kv = momentum_values(self.N)
        kv.flags.writeable = False
        return kv

    def f_grid(self) -> np.ndarray:
        """f(k)/J on the full (N, N) grid, row-major in (m1, m2)."""
        if "f" not in self._cache:
            k1, k2 = np.meshgrid(self.k_values, self.k_values, indexing="ij")
            f = 1.0 + np.exp(1j * k1) + np.exp(1j * k2)
            f.flags.writeable = False
            self._cache["f"] = f
        return self._cache["f"]

    def omega2_grid(self) -> np.ndarray:
        """|f(k)/J|^2 on the full (N, N) grid."""
        if "omega2" not in self._cache:
            f = self.f_grid()
            w2 = (f.real * f.real + f.imag * f.imag)
            w2.flags.writeable = False
            self._cache["omega2"] = w2
        return self._cache["omega2"]

    @property
    def has_dirac_point(self) -> bool:
        return contains_dirac_point(self)


#: grids larger than this are never materialized whole; sums stream by row
DENSE_GRID_LIMIT = 2048


def contains_dirac_point(model: BathModel) -> bool:
    """True when the N x N momentum grid hits a band zero.

    The Dirac momenta (2 pi / 3)(+-1, -+1) lie on the grid exactly when
    N is a multiple of 3.  For grids small enough to materialize, the
    numerical criterion min|f| < 1e-12 J is checked as well; the two
    must agree (min|f| stays above 2 pi J / (3N) off the special case).
    """
    on_grid = model.N % 3 == 0
    if model.N <= DENSE_GRID_LIMIT:
        scanned = math.sqrt(float(model.omega2_grid().min())) < DIRAC_TOL
        if scanned != on_grid:
            raise AssertionError(
                f"grid scan and mod-3 rule disagree for N={model.N}")
    return on_grid
