"""Whole-package acceptance gate.

Each check prints exactly one PASS/FAIL line with its measured numbers
and the pinned tolerance, so a full run reads as a one-screen report.
Checks 11a-11c (and check 4 at the strongest coupling) compare lattice
results against far-field closed forms outside their validity range;
they print the measured deviations and fail honestly rather than
hiding the gap behind a loosened gate.  The README's acceptance section
carries the analysis.

Budget for the whole module is set by the four long evolutions in
check 4 plus the N = 10^4 grid pass in check 11, about 15 minutes.
"""
import numpy as np
import pytest
from scipy.linalg import expm

from diracbath import (
    BathModel,
    CollectiveIndex,
    EmitterSpec,
    apply_losses,
    build_hamiltonian_action,
    build_small_z_expansions,
    ce_resolvent,
    evolve,
    evolve_two_emitters,
    find_poles,
    g_of_n,
    g_of_n_approx,
    initial_state,
    jab_markov_asymptotic,
    markov_pole,
    markov_populations,
    residue_r0,
    residue_subradiant_aa,
    sigma_e_closed,
    sigma_e_finite,
    sigma_e_near_zero,
    solve_collective_pole,
)
from diracbath.lattice import f_k
from oracles import dense_real_space_hamiltonian, state_to_real_space


@pytest.fixture
def report(capsys):
    """Print one verdict line per check, bypassing output capture."""

    def _report(tag: str, label: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            verdict = "PASS" if ok else "FAIL"
            print(f"[check {tag}] {label}: {verdict} ({detail})", flush=True)

    return _report


@pytest.fixture(scope="module")
def model512():
    return BathModel(N=512, J=1.0)


# ---------------------------------------------------------------------------
# 1. band extremes
# ---------------------------------------------------------------------------

def test_01_band_extremes(report):
    """Top of the band at 3J on the grid; nodes at the zone corners."""
    model = BathModel(N=1024, J=1.0)
    dev_top = abs(float(np.abs(model.f_grid()).max()) - 3.0)
    kc = 2.0 * np.pi / 3.0
    dev_node = max(abs(f_k(kc, -kc)), abs(f_k(-kc, kc)))
    ok = dev_top <= 1e-12 and dev_node <= 1e-12
    report("01", "band extremes", ok,
           f"max dev {dev_top:.1e}, node dev {dev_node:.1e}, tol 1e-12")
    assert ok


# ---------------------------------------------------------------------------
# 2. grid sum vs closed form off the real axis
# ---------------------------------------------------------------------------

def test_02_self_energy_cross_validation(report):
    """50 deterministic points with |Im z| >= 0.05J, N = 1024 grid."""
    rng = np.random.default_rng(20260817)
    model = BathModel(N=1024, J=1.0)
    g = 0.7
    worst = 0.0
    for _ in range(50):
        z = complex(rng.uniform(-4.0, 4.0),
                    rng.uniform(0.05, 2.0) * rng.choice([-1.0, 1.0]))
        fin = sigma_e_finite(z, g, model).value
        clo = sigma_e_closed(z, g).value
        worst = max(worst, abs(fin - clo))
    tol = 5e-3 * g * g
    ok = worst <= tol
    report("02", "self-energy cross-validation", ok,
           f"worst |finite-closed| {worst:.2e}, tol {tol:.2e}")
    assert ok


# ---------------------------------------------------------------------------
# 3. near-node expansion
# ---------------------------------------------------------------------------

def test_03_near_node_expansion(report):
    """Closed form vs low-energy expansion, 5% relative over |E| in
    [1e-3, 5e-2]J, both signs, just above the real axis."""
    g = 0.3
    grid = np.geomspace(1e-3, 5e-2, 12)
    worst = 0.0
    for e in np.concatenate([grid, -grid]):
        z = complex(e, 1e-9)
        clo = sigma_e_closed(z, g).value
        exp_ = sigma_e_near_zero(z, g).value
        worst = max(worst, abs(clo - exp_) / abs(exp_))
    ok = worst <= 0.05
    report("03", "near-node expansion", ok,
           f"worst rel dev {worst:.4f}, tol 0.05")
    assert ok


# ---------------------------------------------------------------------------
# 4. fractional decay plateau
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("g", [0.05, 0.1, 0.2, 0.5])
def test_04_fractional_decay(report, model512, g):
    """Late-time emitter population vs squared pole weight at z = 0.

    The residue formula drops the part of the population that the
    middle branch cut still carries at tJ ~ 2e3; that remnant grows
    with coupling and pushes the strongest-coupling case just past
    the 0.02 gate (measured ~0.027).  Reported as is.
    """
    c = model512.N // 2
    em = EmitterSpec((c, c), "A", 0.0, g)
    records = np.concatenate([[0.0], np.arange(1500.0, 2000.0 + 1e-9, 5.0)])
    h = build_hamiltonian_action(model512, [em])
    res = evolve(initial_state(model512, [em]), h, 2000.0, records)
    tail = float(np.mean(np.abs(res.emitter_amps[1:, 0]) ** 2))
    r0sq = residue_r0(g, model512) ** 2
    diff = abs(tail - r0sq)
    ok = diff <= 0.02
    report("04", f"fractional decay g={g}", ok,
           f"tail mean {tail:.4f} vs R0^2 {r0sq:.4f}, |diff| {diff:.4f}, "
           f"tol 0.02")
    assert ok


# ---------------------------------------------------------------------------
# 5. logarithmic relaxation
# ---------------------------------------------------------------------------

def test_05_log_relaxation(report):
    """1/|C_e| grows linearly in log t at zero detuning."""
    g = 0.2
    times = np.geomspace(1e2, 1e4, 30)
    y = 1.0 / np.abs(ce_resolvent(times, 0.0, g))
    A = np.vstack([np.log(times), np.ones_like(times)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    r2 = 1.0 - float(np.sum(resid**2) / np.sum((y - y.mean()) ** 2))
    slope_pred = 2.0 * g * g / (np.pi * np.sqrt(3.0))
    rel = abs(coef[0] / slope_pred - 1.0)
    ok = r2 > 0.99 and rel <= 0.30
    report("05", "logarithmic relaxation", ok,
           f"R^2 {r2:.5f} (>0.99), slope rel dev {rel:.4f}, tol 0.30")
    assert ok


# ---------------------------------------------------------------------------
# 6. exponential regime
# ---------------------------------------------------------------------------

def test_06_markov_regime(report, model512):
    """Detuned emitter decays exponentially at the golden-rule rate."""
    g, delta = 0.1, 2.5
    c = model512.N // 2
    em = EmitterSpec((c, c), "A", delta, g)
    times = np.arange(0.0, 100.0 + 1e-9, 0.5)
    h = build_hamiltonian_action(model512, [em])
    res = evolve(initial_state(model512, [em]), h, 100.0, times)
    pop = np.abs(res.emitter_amps[:, 0]) ** 2
    envelope = np.exp(-markov_pole(delta, g).rate * times)
    dev = float(np.max(np.abs(pop - envelope)))
    ok = dev <= 0.03
    report("06", "exponential regime", ok,
           f"max |pop - exp| {dev:.4f}, tol 0.03")
    assert ok


# ---------------------------------------------------------------------------
# 7. twin unstable poles while the golden-rule rate blows up
# ---------------------------------------------------------------------------

def test_07_twin_unstable_poles(report):
    """Around +-J two unstable poles coexist with bounded imaginary
    parts although the golden-rule rate crosses 10x its value one
    tenth of J away from the log point."""
    g = 0.6
    max_im = 0.0
    window_ok = True
    for side in (1.0, -1.0):
        for d in (0.85, 0.9, 0.95, 1.0, 1.05, 1.1, 1.15):
            ups = [p for p in find_poles(side * d, g).poles
                   if p.kind == "unstable"]
            window_ok = window_ok and len(ups) >= 2
            max_im = max(max_im, max(abs(p.z.imag) for p in ups))
    ratios = []
    for side in (1.0, -1.0):
        ref = markov_pole(side * 0.9, g).rate
        rungs = [side * (1.0 - 10.0**-k) for k in range(1, 13)] + [side * 1.0]
        ratios.append(max(markov_pole(d, g).rate for d in rungs) / ref)
    ok = window_ok and max_im <= 1.0 and min(ratios) > 10.0
    report("07", "twin unstable poles", ok,
           f"2 poles across the window {window_ok}, max |Im z| {max_im:.3f} "
           f"(<=1.0), rate ladder ratios {ratios[0]:.2f}/{ratios[1]:.2f} "
           f"(>10)")
    assert ok


# ---------------------------------------------------------------------------
# 8. t = 0 sum rule
# ---------------------------------------------------------------------------

def test_08_sum_rule(report):
    """Poles plus cut detours reassemble unity at t = 0 on the full
    detuning/coupling grid."""
    worst = 0.0
    for delta in (-3.5, -2.5, -1.0, -0.5, 0.0, 0.5, 1.0, 2.5, 3.5):
        for g in (0.05, 0.1, 0.6):
            c0 = ce_resolvent(np.array([0.0]), delta, g)[0]
            worst = max(worst, abs(c0 - 1.0))
    ok = worst <= 1e-6
    report("08", "t=0 sum rule", ok,
           f"worst |C(0)-1| {worst:.2e} over 27 points, tol 1e-6")
    assert ok


# ---------------------------------------------------------------------------
# 9. overlap-sum growth law
# ---------------------------------------------------------------------------

def test_09_overlap_sum_growth(report):
    """Exact overlap sum tracks 0.2 + (2/(pi sqrt3)) log N."""
    worst = 0.0
    for size in (128, 256, 512, 1024):
        worst = max(worst, abs(g_of_n(BathModel(N=size, J=1.0))
                               - g_of_n_approx(size)))
    ok = worst <= 0.05
    report("09", "overlap-sum growth law", ok,
           f"worst |exact - approx| {worst:.4f}, tol 0.05")
    assert ok


# ---------------------------------------------------------------------------
# 10. pair exchange frequency and its size dependence
# ---------------------------------------------------------------------------

def test_10_pair_exchange(report):
    """Population swap frequency equals twice the pole splitting, and
    the splitting scales with the z = 0 weight across sizes."""
    g = 0.1
    jab = {}
    freq_dev = {}
    for size in (64, 1024):
        model = BathModel(N=size, J=1.0)
        jab[size] = solve_collective_pole(model, (1, 1), "AB", g).z_plus.real
        t_half = np.pi / (2.0 * jab[size])
        # dt = 5 resolves the swap minimum: the curvature scale is
        # 1/jab ~ 4e2, two orders above the step
        times = np.arange(0.0, 1.3 * t_half, 5.0)
        c = size // 2
        c1, _ = evolve_two_emitters(
            model,
            EmitterSpec((c, c), "A", 0.0, g),
            EmitterSpec((c + 1, c + 1), "B", 0.0, g),
            times,
        )
        p1 = np.abs(c1) ** 2
        k = int(np.argmin(p1))
        lo, mid, hi = p1[k - 1], p1[k], p1[k + 1]
        t_min = times[k] + 0.5 * (times[1] - times[0]) * (lo - hi) / (
            lo - 2.0 * mid + hi)
        freq_dev[size] = abs((np.pi / t_min) / (2.0 * jab[size]) - 1.0)
    r0 = lambda size: 1.0 / (1.0 + g * g * g_of_n_approx(size))
    ratio_dev = abs((jab[1024] / jab[64]) / (r0(1024) / r0(64)) - 1.0)
    ok = max(freq_dev.values()) <= 0.05 and ratio_dev <= 0.05
    report("10", "pair exchange", ok,
           f"freq rel dev N=64 {freq_dev[64]:.4f}, N=1024 "
           f"{freq_dev[1024]:.4f}, size-ratio rel dev {ratio_dev:.4f}, "
           f"tol 0.05")
    assert ok


# ---------------------------------------------------------------------------
# 11. far-field renormalization law
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("size", [100, 1000, 10000])
def test_11_renormalization_law(report, size):
    """Pole splitting over the far-field coupling vs the z = 0 weight.

    The far-field 1/n law undershoots the lattice sum at short range
    (ratio 1.50 at n = 1 falling to ~1.09 by n = 8 for any size), and
    at N = 100 separations beyond n ~ 17 wrap far enough around the
    torus that the images interfere.  The gate still covers every
    n in [1, 20]; the short-range points fail and are reported with
    their measured ratios.
    """
    g = 0.01
    model = BathModel(N=size, J=1.0)
    seps = list(range(1, 21))
    indices = [CollectiveIndex("AB", (n, n)) for n in seps]
    exps = build_small_z_expansions(
        model, [CollectiveIndex("AA", (0, 0))] + indices)
    r0 = residue_r0(g, model)
    devs = {}
    for n in seps:
        res = solve_collective_pole(model, (n, n), "AB", g, expansions=exps)
        ratio = res.z_plus.real / jab_markov_asymptotic((n, n), g)
        devs[n] = ratio / r0 - 1.0
    bad = [n for n in seps if abs(devs[n]) > 0.10]
    worst = max(devs.values(), key=abs)
    ok = not bad
    report("11", f"far-field renormalization N={size}", ok,
           f"worst ratio/R0-1 {worst:+.3f}, outside 10%: n={bad or 'none'}")
    assert ok, f"ratio/R0 outside 10% at n={bad}"


# ---------------------------------------------------------------------------
# 12. subradiant plateau
# ---------------------------------------------------------------------------

def test_12_subradiant_plateau(report, model512):
    """Antisymmetric same-sublattice pair keeps its population."""
    g, n = 0.1, 2
    c = model512.N // 2
    s = 1.0 / np.sqrt(2.0)
    times = np.arange(0.0, 500.0 + 1e-9, 5.0)
    c1, c2 = evolve_two_emitters(
        model512,
        EmitterSpec((c, c), "A", 0.0, g),
        EmitterSpec((c + n, c + n), "A", 0.0, g),
        times,
        initial_amps=(s, -s),
    )
    pop = np.abs(c1) ** 2 + np.abs(c2) ** 2
    plateau = float(np.mean(pop[times >= 400.0]))
    target = residue_subradiant_aa(n, g) ** 2
    diff = abs(plateau - target)
    ok = diff <= 0.03
    report("12", "subradiant plateau", ok,
           f"plateau {plateau:.4f} vs R_sb^2 {target:.4f}, |diff| "
           f"{diff:.4f}, tol 0.03")
    assert ok


# ---------------------------------------------------------------------------
# 13. small-lattice oracle equivalence
# ---------------------------------------------------------------------------

def test_13_oracle_equivalence(report):
    """Momentum-space propagation vs dense real-space expm, N <= 8."""
    rng = np.random.default_rng(7)
    cases = [
        (4, [((1, 2), "A")]),
        (5, [((0, 3), "A"), ((2, 1), "B")]),
        (8, [((3, 3), "A"), ((6, 1), "A")]),
    ]
    worst = 0.0
    for size, placements in cases:
        model = BathModel(N=size, J=1.0)
        ems = [EmitterSpec(site, subl, rng.uniform(-1.0, 1.0),
                           rng.uniform(0.2, 1.0))
               for site, subl in placements]
        amps = rng.normal(size=len(ems)) + 1j * rng.normal(size=len(ems))
        amps /= np.linalg.norm(amps)
        t = float(rng.uniform(5.0, 15.0))
        h = build_hamiltonian_action(model, ems)
        res = evolve(initial_state(model, ems, amplitudes=amps), h, t, [t])
        psi = state_to_real_space(model, res.final_state, len(ems))
        dense = dense_real_space_hamiltonian(model, ems)
        psi0 = np.zeros(dense.shape[0], dtype=complex)
        psi0[: len(ems)] = amps
        ref = expm(-1j * dense * t) @ psi0
        worst = max(worst, float(np.max(np.abs(psi - ref))))
    ok = worst <= 1e-8
    report("13", "oracle equivalence", ok,
           f"worst amplitude dev {worst:.2e}, tol 1e-8")
    assert ok


# ---------------------------------------------------------------------------
# 14. loss weighting
# ---------------------------------------------------------------------------

def test_14_loss_weighting(report):
    """Unit trace survives weighting bit-for-bit, and losses faster
    than the exchange wash out the population swap."""
    times = np.linspace(0.0, 60.0, 1200)
    weighted, ground = apply_losses(times, np.ones_like(times), 0.3)
    trace_exact = bool(np.all(weighted + ground == 1.0))

    jab = 0.1
    _, swap = markov_populations(times, (jab, -jab), (0.0, 0.0))
    fast_loss, _ = apply_losses(times, swap, 1.2 * jab)   # J/Gamma < 1
    slow_loss, _ = apply_losses(times, swap, 0.1 * jab)   # J/Gamma = 10
    suppressed = float(np.max(fast_loss))
    visible = float(np.max(slow_loss))
    ok = trace_exact and suppressed < 0.5 and visible > 0.5
    report("14", "loss weighting", ok,
           f"trace exact {trace_exact}, peak swap {suppressed:.3f} "
           f"(<0.5 at J/Gamma<1), control {visible:.3f} (>0.5)")
    assert ok
