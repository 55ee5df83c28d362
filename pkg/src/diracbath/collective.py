"""Paired-emitter spectral analysis on the finite lattice.

In the parity basis (|1> +- |2>)/sqrt(2) the two-emitter resolvent is
diagonal, and each channel carries one real bound state solving

    z = Sigma_e(z) + sign * Sigma_12(z; n12)

with the finite-lattice momentum sums on the right.  The splitting
z_+ - z_- sets the excitation-exchange frequency, and the channel
residues set the oscillation contrast.  Everything here runs on those
finite sums: the N-dependence of the splitting is the point, and the
infinite-lattice limit collapses to zero coupling (flagged explicitly
rather than silently returned).

Large grids (N of order 10^4) evaluate the sums through the soft-mode
expansion built in selfenergy, which costs one grid pass per batch of
separations instead of one per Newton step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import BathModel, DegenerateGridError
from .selfenergy import (
    CollectiveIndex,
    SmallZExpansion,
    build_small_z_expansions,
    g_pm,
    residue_r0,
    sigma12_finite,
    sigma_e_finite,
)

__all__ = [
    "CollectivePoleResult",
    "CollectiveSolveError",
    "effective_coupling_matrix",
    "markov_populations",
    "residues_pm",
    "solve_collective_pole",
]

# Sigma_e is the diagonal matrix element: beta = AA at zero separation.
_SELF_IDX = CollectiveIndex("AA", (0, 0))

# grids at or above this size switch to the soft-mode expansion; below
# it the exact sum per Newton step is cheap enough
SMALL_Z_MIN_N = 2048

# centered-difference step for d(Sigma)/dz; the sums are smooth on the
# scale of the smallest grid eigenvalue (~2/N), far above this
DERIV_STEP = 1e-7

MAX_NEWTON = 80

_PAIR_BETAS = ("AA", "AB", "BA", "BB")
_DIAGONAL_BETAS = ("AA", "BB")


class CollectiveSolveError(RuntimeError):
    """Newton iteration on the pair pole equation failed to converge."""


@dataclass(frozen=True)
class CollectivePoleResult:
    """Both parity-channel poles of one emitter pair.

    flag is None for a finite-lattice solve; the thermodynamic-limit
    shortcut labels its zero result instead of pretending it converged.
    """

    z_plus: complex
    z_minus: complex
    r_plus: complex
    r_minus: complex
    n12: tuple[int, int]
    beta: str
    N: int | None
    flag: str | None = None


class _ChannelSums:
    """Evaluates Sigma_e(z) + sign * Sigma_12(z) on one lattice.

    engine "exact" re-sums the full grid at every z; "small-z" uses the
    prebuilt soft-mode expansions (mandatory route at very large N).
    Callers may hand in a dict from build_small_z_expansions to share
    one grid pass across many separations.
    """

    def __init__(self, model, idx, g, engine="auto", expansions=None):
        self.model = model
        self.idx = idx
        self.g = g
        if expansions is not None:
            engine = "small-z"
        elif engine == "auto":
            engine = "small-z" if model.N >= SMALL_Z_MIN_N else "exact"
        if engine not in ("exact", "small-z"):
            raise ValueError(f"unknown engine {engine!r}")
        self.engine = engine
        if engine == "small-z":
            if expansions is None:
                expansions = build_small_z_expansions(model, [_SELF_IDX, idx])
            self._exp_e = expansions[_SELF_IDX]
            self._exp_12 = expansions[idx]

    def total(self, z: float, sign: int) -> float:
        if self.engine == "exact":
            val = sigma_e_finite(z, self.g, self.model).value
            val += sign * sigma12_finite(z, self.g, self.model, self.idx).value
        else:
            val = self._exp_e.sigma(z, self.g) + sign * self._exp_12.sigma(
                z, self.g
            )
        # real z between grid eigenvalues: the sums are real up to the
        # phase cancellation noise of the k sum
        return float(val.real)

    def derivative(self, z: float, sign: int) -> float:
        h = DERIV_STEP
        return (self.total(z + h, sign) - self.total(z - h, sign)) / (2.0 * h)

    def sigma12_at_zero(self) -> float:
        if self.engine == "exact":
            return float(
                sigma12_finite(0.0, self.g, self.model, self.idx).value.real
            )
        return float(self._exp_12.sigma(0.0, self.g).real)


def _validated_beta(beta: str) -> str:
    if beta not in _PAIR_BETAS:
        raise ValueError(f"beta must be one of {_PAIR_BETAS}, got {beta!r}")
    return beta


def _newton_channel(sums: _ChannelSums, seed: float, sign: int, scale: float):
    """Real Newton iteration for z = Sigma_e + sign * Sigma_12."""
    z = seed
    for _ in range(MAX_NEWTON):
        f = z - sums.total(z, sign)
        d = 1.0 - sums.derivative(z, sign)
        if d == 0.0:
            raise CollectiveSolveError("stationary pole equation (defective)")
        step = f / d
        z -= step
        if abs(step) <= 1e-14 * max(abs(z), scale):
            break
    else:
        raise CollectiveSolveError(
            f"no convergence after {MAX_NEWTON} iterations (sign {sign:+d})"
        )
    resid = z - sums.total(z, sign)
    if abs(resid) > 1e-9 * max(abs(z), scale):
        raise CollectiveSolveError(
            f"root residual {resid:.3e} too large for z = {z:.6e}"
        )
    return z


def _residue_from_derivative(sums: _ChannelSums, z: float, sign: int) -> float:
    d = 1.0 - sums.derivative(z, sign)
    if abs(d) < 1e-10:
        raise CollectiveSolveError(f"defective pole at z = {z:.6e}")
    return 1.0 / d


def solve_collective_pole(
    model: BathModel | None,
    n12,
    beta: str,
    g: float,
    engine: str = "auto",
    expansions=None,
) -> CollectivePoleResult:
    """Both parity poles for a pair of emitters at zero detuning.

    model=None asks for the thermodynamic limit, where the mediated
    coupling vanishes along with the state's weight; the result carries
    flag="thermodynamic limit" instead of a Newton solution.
    """
    beta = _validated_beta(beta)
    n12 = (int(n12[0]), int(n12[1]))
    if g < 0:
        raise ValueError("coupling g must be nonnegative")
    if model is None:
        return CollectivePoleResult(
            z_plus=0j,
            z_minus=0j,
            r_plus=0j,
            r_minus=0j,
            n12=n12,
            beta=beta,
            N=None,
            flag="thermodynamic limit",
        )
    if model.has_dirac_point:
        raise DegenerateGridError(
            f"N = {model.N} grid carries band zeros (N divisible by 3); "
            "the pair pole equation is singular at z = 0"
        )
    idx = CollectiveIndex(beta, n12)
    sums = _ChannelSums(model, idx, g, engine=engine, expansions=expansions)

    if g == 0.0:
        return CollectivePoleResult(
            z_plus=0j,
            z_minus=0j,
            r_plus=1.0 + 0j,
            r_minus=1.0 + 0j,
            n12=n12,
            beta=beta,
            N=model.N,
        )

    if beta in _DIAGONAL_BETAS:
        # both channel sums carry an overall factor z, so z = 0 solves
        # the equation in either parity exactly
        zp = zm = 0.0
    else:
        j_markov = sums.sigma12_at_zero()
        r0 = residue_r0(g, model)
        scale = max(abs(j_markov), 1e-300)
        zp = _newton_channel(sums, r0 * j_markov, +1, scale)
        zm = _newton_channel(sums, -r0 * j_markov, -1, scale)
    rp = _residue_from_derivative(sums, zp, +1)
    rm = _residue_from_derivative(sums, zm, -1)
    return CollectivePoleResult(
        z_plus=complex(zp),
        z_minus=complex(zm),
        r_plus=complex(rp),
        r_minus=complex(rm),
        n12=n12,
        beta=beta,
        N=model.N,
    )


def residues_pm(
    model: BathModel,
    n12,
    beta: str,
    g: float,
    z_pm,
    engine: str = "auto",
    expansions=None,
):
    """Residues 1/(1 - d(Sigma_e +- Sigma_12)/dz) at verified roots z_pm."""
    beta = _validated_beta(beta)
    idx = CollectiveIndex(beta, (int(n12[0]), int(n12[1])))
    if g == 0.0:
        return 1.0 + 0j, 1.0 + 0j
    sums = _ChannelSums(model, idx, g, engine=engine, expansions=expansions)
    zp, zm = z_pm
    rp = _residue_from_derivative(sums, float(np.real(zp)), +1)
    rm = _residue_from_derivative(sums, float(np.real(zm)), -1)
    return complex(rp), complex(rm)


def markov_populations(times, j_pm, gamma_pm):
    """Emitter populations from the parity-channel pole parameters.

    Each parity amplitude decays as e^{(-i J_pm - Gamma_pm/2) t}; the
    site populations are the coherent half-sum and half-difference,
    |C_1|^2, |C_2|^2 = (e^{-G+ t} + e^{-G- t} +- 2 e^{-(G+ + G-) t / 2}
    cos((J+ - J-) t)) / 4.
    """
    t = np.asarray(times, dtype=float)
    jp, jm = float(j_pm[0]), float(j_pm[1])
    gp, gm = float(gamma_pm[0]), float(gamma_pm[1])
    env_p = np.exp(-gp * t)
    env_m = np.exp(-gm * t)
    cross = 2.0 * np.exp(-0.5 * (gp + gm) * t) * np.cos((jp - jm) * t)
    pop1 = 0.25 * (env_p + env_m + cross)
    pop2 = 0.25 * (env_p + env_m - cross)
    return pop1, pop2


def effective_coupling_matrix(
    model: BathModel,
    positions_a,
    positions_b,
    g: float,
    fast: bool | None = None,
):
    """Pairwise exchange couplings for emitters on both sublattices.

    Returns the square matrix over the concatenated emitter list
    [A..., B...]: entry (i, j) is the bound-state coupling between
    A-emitter i and B-emitter j, and the AA / BB blocks are zero (the
    qBS mediates only across sublattices).  fast=None solves the pole
    equation per pair up to 50 pairs and switches to the one-step
    self-consistent value R0(N) * Sigma_12(0) beyond; pass True or
    False to force a route.
    """
    if model.has_dirac_point:
        raise DegenerateGridError(
            f"N = {model.N} grid carries band zeros (N divisible by 3)"
        )
    pos_a = [(int(p[0]), int(p[1])) for p in positions_a]
    pos_b = [(int(p[0]), int(p[1])) for p in positions_b]
    for p in pos_a + pos_b:
        if not (0 <= p[0] < model.N and 0 <= p[1] < model.N):
            raise ValueError(f"position {p} outside [0, {model.N})^2")
    n_pairs = len(pos_a) * len(pos_b)
    if fast is None:
        fast = n_pairs > 50
    r0 = residue_r0(g, model) if fast else None

    couplings: dict[tuple[int, int], float] = {}

    def pair_coupling(n12: tuple[int, int]) -> float:
        if n12 not in couplings:
            if fast:
                sig = sigma12_finite(
                    0.0, g, model, CollectiveIndex("AB", n12)
                ).value.real
                couplings[n12] = r0 * sig
            else:
                res = solve_collective_pole(model, n12, "AB", g)
                couplings[n12] = res.z_plus.real
        return couplings[n12]

    n_a, n_b = len(pos_a), len(pos_b)
    mat = np.zeros((n_a + n_b, n_a + n_b), dtype=float)
    for i, pa in enumerate(pos_a):
        for j, pb in enumerate(pos_b):
            n12 = (pa[0] - pb[0], pa[1] - pb[1])
            val = pair_coupling(n12)
            mat[i, n_a + j] = val
            mat[n_a + j, i] = val
    return mat
