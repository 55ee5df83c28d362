"""Pole finding, residues, branch-cut detours, and the t = 0 sum rule.

Frozen complex values were produced by this implementation and pinned
after validating the global decomposition: every (detuning, coupling)
pair tested reconstructs C_e(0) = 1 through two real bound states, any
unstable poles, and five detour integrals, which checks the sheet
table, contour orientation, residues, and quadrature in one number.
"""
import math

import numpy as np
import pytest

from diracbath.resolvent import (
    CUT_LAYOUT,
    Pole,
    PoleSearchError,
    branch_cut_contribution,
    ce_resolvent,
    find_poles,
    markov_ce,
    mbc_late_time_asymptotic,
    residue_at,
)
from diracbath.selfenergy import markov_pole, sigma_e_closed
from diracbath.specfun import RegionTableError, SheetId


def _sigma(z, g, sheet):
    return sigma_e_closed(z, g, sheet).value


def _kinds(dec):
    return [p.kind for p in dec.poles]


# ---------------------------------------------------------------------------
# bound states
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("delta,g", [(0.0, 0.1), (2.5, 0.1), (-1.0, 0.6), (3.5, 0.1)])
def test_bound_states_always_exist(delta, g):
    dec = find_poles(delta, g)
    kinds = _kinds(dec)
    assert kinds.count("real_BS_upper") == 1
    assert kinds.count("real_BS_lower") == 1
    for p in dec.poles:
        if p.kind == "real_BS_upper":
            assert p.z.real >= 3.0 and abs(p.z.imag) <= 1e-12
        if p.kind == "real_BS_lower":
            assert p.z.real <= -3.0 and abs(p.z.imag) <= 1e-12


def test_edge_pinned_bound_states_carry_no_weight():
    # detuning far below the upper edge: the crossing sits closer to 3
    # than one ulp, so the root is reported at the edge with zero residue
    dec = find_poles(2.5, 0.1)
    ubs = next(p for p in dec.poles if p.kind == "real_BS_upper")
    lbs = next(p for p in dec.poles if p.kind == "real_BS_lower")
    assert ubs.z.real == math.nextafter(3.0, 4.0)
    assert ubs.residue == 0
    assert lbs.z.real == math.nextafter(-3.0, -4.0)
    assert lbs.residue == 0


def test_representable_bound_state_oracle():
    dec = find_poles(3.5, 0.1)
    ubs = next(p for p in dec.poles if p.kind == "real_BS_upper")
    assert ubs.z.real == pytest.approx(3.50418933087699, rel=1e-12)
    assert abs(ubs.residue - 0.997147278659069) < 1e-9
    # the detuned level keeps almost all its weight outside the band
    assert 0.9 < ubs.residue.real < 1.0


def test_bound_state_residue_identity_and_cross_check():
    dec = find_poles(3.5, 0.1)
    ubs = next(p for p in dec.poles if p.kind == "real_BS_upper")
    z = ubs.z
    h = 1e-7
    central = (_sigma(z + h, 0.1, SheetId.I) - _sigma(z - h, 0.1, SheetId.I)) / (2 * h)
    orthogonal = (
        _sigma(z + 1j * h, 0.1, SheetId.I) - _sigma(z - 1j * h, 0.1, SheetId.I)
    ) / (2j * h)
    assert abs(central - orthogonal) < 1e-8
    assert abs((1.0 - central) * ubs.residue - 1.0) < 1e-8


# ---------------------------------------------------------------------------
# unstable poles
# ---------------------------------------------------------------------------

def test_single_up_weak_coupling_oracle():
    dec = find_poles(2.5, 0.1)
    ups = [p for p in dec.poles if p.kind == "unstable"]
    assert len(ups) == 1
    up = ups[0]
    assert up.sheet == SheetId.V
    assert up.z == pytest.approx(2.5046082824501004 - 0.004753295751415537j, rel=1e-9)
    assert up.residue == pytest.approx(1.002578061806929 + 0.000940879172390636j, rel=1e-8)
    # weak coupling: the pole tracks the golden-rule estimate
    zm = markov_pole(2.5, 0.1).z
    assert abs(up.z - zm) < 5e-3


def test_two_up_coexistence_strong_coupling():
    dec = find_poles(-1.0, 0.6)
    ups = [p for p in dec.poles if p.kind == "unstable"]
    assert len(ups) == 2
    assert {p.sheet for p in ups} == {SheetId.II, SheetId.III}
    by_sheet = {p.sheet: p for p in ups}
    assert by_sheet[SheetId.II].z == pytest.approx(
        -1.1604401269246343 - 0.26364677476057335j, rel=1e-9
    )
    assert by_sheet[SheetId.III].z == pytest.approx(
        -0.7672068902412261 - 0.17098213658170974j, rel=1e-9
    )


@pytest.mark.parametrize("delta,g", [(2.5, 0.1), (-1.0, 0.6), (0.5, 0.05)])
def test_up_root_residence(delta, g):
    # a root reported on one sheet must fail the pole equation when its
    # self-energy is re-evaluated on the neighboring sheets
    order = [SheetId.II, SheetId.III, SheetId.IV, SheetId.V]
    for p in find_poles(delta, g).poles:
        if p.kind != "unstable":
            continue
        own = abs(p.z - delta - _sigma(p.z, g, p.sheet))
        assert own < 1e-9
        i = order.index(p.sheet)
        for j in (i - 1, i + 1):
            if 0 <= j < len(order):
                # either the pole equation misses by a wide margin or the
                # neighbor sheet has no branch combination there at all
                try:
                    other = abs(p.z - delta - _sigma(p.z, g, order[j]))
                except RegionTableError:
                    continue
                assert other > 1e-4


def test_up_derivative_identity():
    for p in find_poles(-1.0, 0.6).poles:
        if p.kind != "unstable":
            continue
        h = 1e-7
        fp = (_sigma(p.z + h, 0.6, p.sheet) - _sigma(p.z - h, 0.6, p.sheet)) / (2 * h)
        assert abs((1.0 - fp) * p.residue - 1.0) < 1e-8


def test_qbs_present_only_at_zero_detuning():
    kinds0 = _kinds(find_poles(0.0, 0.1))
    assert kinds0.count("qBS") == 1
    q = next(p for p in find_poles(0.0, 0.1).poles if p.kind == "qBS")
    assert q.z == 0 and q.residue == 0
    assert "qBS" not in _kinds(find_poles(0.5, 0.1))


def test_poles_sorted_deterministically():
    dec = find_poles(-1.0, 0.6)
    keys = [(p.z.real, p.z.imag) for p in dec.poles]
    assert keys == sorted(keys)


def test_residue_at_rejects_bad_coupling():
    with pytest.raises(ValueError):
        find_poles(0.0, 0.0)


# ---------------------------------------------------------------------------
# branch-cut detours
# ---------------------------------------------------------------------------

def test_cut_layout_covers_all_anchors():
    anchors = [c[0] for c in CUT_LAYOUT]
    assert anchors == [-3.0, -1.0, 0.0, 1.0, 3.0]
    # outermost detours border the physical sheet
    assert CUT_LAYOUT[0][1] == SheetId.I
    assert CUT_LAYOUT[-1][2] == SheetId.I


def test_cut_contribution_frozen_t0():
    c = branch_cut_contribution(3.0, 0.0, 2.5, 0.1)
    assert c.value == pytest.approx(
        -0.0023903309373901997 + 2.1857289482478767e-05j, rel=1e-6
    )
    assert c.depth == math.inf
    assert c.tail_bound == 0.0
    assert c.quad_error < 1e-10


def test_cut_contribution_frozen_finite_t():
    c = branch_cut_contribution(3.0, 2.0, 2.5, 0.1)
    assert c.value == pytest.approx(
        -0.0012737049548494947 + 0.0005791268063235468j, rel=1e-6
    )
    assert c.depth == 20.0
    assert c.tail_bound == pytest.approx(math.exp(-40.0))


def test_central_cut_carries_marginal_weight():
    # at zero detuning the surviving amplitude lives in the central cut
    c = branch_cut_contribution(0.0, 10.0, 0.0, 0.1)
    assert c.value.real == pytest.approx(0.9855551815674652, rel=1e-8)
    assert abs(c.value.imag) < 1e-10


def test_cut_depth_rule():
    assert branch_cut_contribution(1.0, 100.0, 0.5, 0.1).depth == pytest.approx(20.0)
    assert branch_cut_contribution(1.0, 0.5, 0.5, 0.1).depth == pytest.approx(80.0)


def test_cut_rejects_bad_anchor_and_negative_time():
    with pytest.raises(ValueError):
        branch_cut_contribution(2.0, 0.0, 0.0, 0.1)
    with pytest.raises(ValueError):
        branch_cut_contribution(1.0, -1.0, 0.0, 0.1)


# ---------------------------------------------------------------------------
# amplitude reconstruction
# ---------------------------------------------------------------------------

@pytest.mark.parametrize(
    "delta,g",
    [(0.0, 0.1), (2.5, 0.1), (-1.0, 0.6), (-3.5, 0.05), (0.0, 0.6), (1.0, 0.05)],
)
def test_sum_rule_spot_checks(delta, g):
    assert abs(ce_resolvent(0.0, delta, g)[0] - 1.0) <= 1e-6


def test_amplitude_real_at_zero_detuning():
    # particle-hole symmetric spectrum: C_e(t) stays real for delta = 0
    c = ce_resolvent([5.0, 50.0], 0.0, 0.2)
    assert np.all(np.abs(c.imag) < 1e-10)
    assert c[0].real == pytest.approx(0.953973277779723, rel=1e-8)
    assert c[1].real == pytest.approx(0.9241483802339059, rel=1e-8)


def test_amplitude_never_exceeds_unity():
    ts = np.linspace(0.0, 30.0, 7)
    for delta, g in [(0.0, 0.2), (2.5, 0.1)]:
        c = ce_resolvent(ts, delta, g)
        assert np.all(np.abs(c) <= 1.0 + 1e-6)


def test_markov_limit_matches_resolvent():
    ts = np.linspace(0.0, 100.0, 11)
    cm = markov_ce(ts, 2.5, 0.05)
    cr = ce_resolvent(ts, 2.5, 0.05)
    assert np.max(np.abs(cm - cr)) < 0.02


def test_markov_marginal_is_unity():
    ts = np.linspace(0.0, 50.0, 6)
    assert np.allclose(markov_ce(ts, 0.0, 0.3), 1.0)


def test_log_relaxation_slope():
    ts = np.logspace(2, 4, 9)
    c = ce_resolvent(ts, 0.0, 0.2)
    x, y = np.log(ts), 1.0 / np.abs(c)
    slope, intercept = np.polyfit(x, y, 1)
    fit = slope * x + intercept
    r2 = 1.0 - np.sum((y - fit) ** 2) / np.sum((y - np.mean(y)) ** 2)
    expected = 2.0 * 0.2**2 / (math.pi * math.sqrt(3.0))
    assert r2 > 0.99
    assert abs(slope / expected - 1.0) < 0.30


def test_mbc_asymptote_scaling():
    # pure formula check: magnitude scales as 1/log(3t) with the
    # documented prefactor
    g = 0.2
    v1 = mbc_late_time_asymptotic(1e6, g)
    assert v1 == pytest.approx(
        math.pi * math.sqrt(3.0) / (2 * g * g * math.log(3e6)), rel=1e-12
    )


def test_decomposition_reuse_matches_fresh_call():
    dec = find_poles(2.5, 0.1)
    ts = [0.0, 3.0]
    a = ce_resolvent(ts, 2.5, 0.1, decomposition=dec)
    b = ce_resolvent(ts, 2.5, 0.1)
    assert np.allclose(a, b, rtol=0, atol=1e-14)
