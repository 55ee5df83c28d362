"""Batch front-end: config parsing, run orchestration, deterministic output.

Every command writes tables whose metadata echoes the full effective
configuration, so a file can be regenerated bit-identically from its own
header.  CSV floats use 17 significant digits (round-trip exact); files
are written to a temp name and renamed, so a failed run leaves nothing
behind.

Exit codes: 0 success, 2 configuration/validation error, 3 numerical
failure inside a solver.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from multiprocessing import Pool, cpu_count
from pathlib import Path

import numpy as np

from . import __version__
from .collective import solve_collective_pole
from .dynamics import (
    EmitterSpec,
    apply_losses,
    bath_population_map,
    build_hamiltonian_action,
    evolve,
    initial_state,
)
from .lattice import BathModel
from .resolvent import find_poles
from .selfenergy import (
    CollectiveIndex,
    build_small_z_expansions,
    g_of_n,
    g_of_n_approx,
    residue_r0,
    sigma_e_closed,
)

# defaults per command; None marks required flags
_DEFAULTS: dict[str, dict] = {
    "dynamics": {
        "N": 128, "J": 1.0, "g": 0.1, "delta": 0.0,
        "tmax": 200.0, "dt_record": 1.0, "snapshots": "",
        "out": "dynamics.csv", "format": "csv",
    },
    "self-energy": {
        "scan": "-3.5:3.5:0.001", "J": 1.0, "g": 1.0, "eta": 1e-9,
        "out": "self_energy.csv", "format": "csv",
    },
    "poles": {
        "J": 1.0, "g": 0.1, "delta": 0.0,
        "out": "poles.csv", "format": "csv",
    },
    "two-emitter": {
        "N": 64, "J": 1.0, "g": 0.1, "delta": 0.0, "n12": "1,1",
        "sublattices": "AB", "init": "site1",
        "tmax": 2000.0, "dt_record": 1.0,
        "out": "two_emitter.csv", "format": "csv",
    },
    "losses": {
        "N": 64, "J": 1.0, "g": 0.1, "delta": 0.0, "n12": "1,1",
        "sublattices": "AB", "init": "site1",
        "tmax": 2000.0, "dt_record": 1.0, "gamma_loss": None,
        "out": "losses.csv", "format": "csv",
    },
    "sweep": {
        "N": 128, "J": 1.0, "g": 0.1, "delta": 0.0,
        "tmax": 200.0, "dt_record": 1.0, "snapshots": "",
        "param": None, "values": None, "workers": 0,
        "out": "sweep.csv", "format": "csv",
    },
    "preset": {"out": ".", "format": "csv"},
}

_CASTS = {
    "N": int, "workers": int,
    "J": float, "g": float, "delta": float, "eta": float,
    "tmax": float, "dt_record": float, "gamma_loss": float,
    "n12": str, "sublattices": str, "init": str, "scan": str,
    "snapshots": str, "param": str, "values": str,
    "out": str, "format": str,
}

# budget constants echoed into metadata so a table documents the run
_TOLERANCES = {
    "dynamics": {"norm_drift_budget": 1e-8, "record_time_match": 1e-12},
    "two-emitter": {"norm_drift_budget": 1e-8, "record_time_match": 1e-12},
    "losses": {"norm_drift_budget": 1e-8, "record_time_match": 1e-12},
    "sweep": {"norm_drift_budget": 1e-8, "record_time_match": 1e-12},
    "poles": {"root_residual": 1e-10, "root_dedupe": 1e-10},
    "self-energy": {},
    "preset": {},
}


# ---------------------------------------------------------------------------
# configuration plumbing
# ---------------------------------------------------------------------------

def _read_config_file(path: str) -> dict:
    conf = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line without '=': {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CASTS:
            raise ValueError(f"unknown config key {key!r}")
        conf[key] = _CASTS[key](val)
    return conf


def _merge(command: str, args: argparse.Namespace) -> dict:
    conf = dict(_DEFAULTS[command])
    if getattr(args, "config", None):
        file_conf = _read_config_file(args.config)
        for key, val in file_conf.items():
            if key in conf:
                conf[key] = val
    for key in conf:
        cli_val = getattr(args, key.replace("-", "_"), None)
        if cli_val is not None:
            conf[key] = cli_val
    missing = [k for k, v in conf.items() if v is None]
    if missing:
        raise ValueError(f"missing required option(s): {', '.join(missing)}")
    return conf


def _validate_common(conf: dict) -> None:
    if "N" in conf and conf["N"] < 2:
        raise ValueError("N must be at least 2")
    if "J" in conf and conf["J"] <= 0:
        raise ValueError("J must be positive")
    if "g" in conf and conf["g"] < 0:
        raise ValueError("g must be nonnegative")
    if "tmax" in conf and conf["tmax"] <= 0:
        raise ValueError("tmax must be positive")
    if "dt_record" in conf and conf["dt_record"] <= 0:
        raise ValueError("dt-record must be positive")
    if conf.get("format") not in ("csv", "json"):
        raise ValueError("format must be csv or json")


def _parse_pair(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"expected 'a,b', got {text!r}")
    return int(parts[0]), int(parts[1])


def _parse_scan(text: str):
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"expected 'lo:hi:step', got {text!r}")
    lo, hi, step = (float(p) for p in parts)
    if step <= 0 or hi <= lo:
        raise ValueError("scan needs hi > lo and step > 0")
    n = int(round((hi - lo) / step))
    return lo + np.arange(n + 1) * step


def _parse_times(text: str):
    return [float(tok) for tok in text.split(",") if tok.strip()] if text else []


def _record_grid(tmax: float, dt: float) -> np.ndarray:
    n = int(math.floor(tmax / dt + 1e-9))
    return np.arange(n + 1) * dt


# ---------------------------------------------------------------------------
# deterministic table output
# ---------------------------------------------------------------------------

def _fmt_float(x) -> str:
    return "%.17g" % float(x)


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_table(path, metadata: dict, columns: list, fmt: str) -> Path:
    """columns is a list of (name, sequence); order is preserved."""
    path = Path(path)
    if fmt == "csv":
        lines = [f"# {k} = {v}" for k, v in metadata.items()]
        names = [name for name, _ in columns]
        lines.append(",".join(names))
        series = [np.asarray(vals) for _, vals in columns]
        n_rows = len(series[0]) if series else 0
        for i in range(n_rows):
            cells = []
            for s in series:
                v = s[i]
                cells.append(_fmt_float(v) if isinstance(v, (float, np.floating)) else str(v))
            lines.append(",".join(cells))
        _atomic_write(path, "\n".join(lines) + "\n")
    else:
        import json

        def _plain(v):
            if isinstance(v, str):
                return v
            if isinstance(v, (int, np.integer)):
                return int(v)
            return float(v)

        payload = {
            "metadata": metadata,
            "columns": {name: [_plain(v) for v in vals] for name, vals in columns},
        }
        _atomic_write(path, json.dumps(payload, indent=2) + "\n")
    return path


def _metadata(command: str, conf: dict) -> dict:
    meta = {"generator": f"diracbath {__version__}", "command": command}
    for key in sorted(conf):
        meta[key] = conf[key]
    for key, val in _TOLERANCES[command].items():
        meta[key] = val
    return meta


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _dynamics_series(conf: dict):
    _validate_common(conf)
    model = BathModel(N=conf["N"], J=conf["J"])
    n0 = conf["N"] // 2
    em = EmitterSpec((n0, n0), "A", conf["delta"], conf["g"])
    h = build_hamiltonian_action(model, [em])
    state = initial_state(model, [em])
    records = _record_grid(conf["tmax"], conf["dt_record"])
    snap_times = _parse_times(conf["snapshots"])
    for t in snap_times:
        if not (0.0 <= t <= conf["tmax"]):
            raise ValueError(f"snapshot time {t} outside [0, tmax]")
    result = evolve(state, h, conf["tmax"], records, snapshot_times=snap_times)
    return records, snap_times, result


def _run_dynamics(conf: dict) -> list[Path]:
    records, snap_times, result = _dynamics_series(conf)
    ce = result.emitter_amps[:, 0]
    meta = _metadata("dynamics", conf)
    meta["norm_drift"] = _fmt_float(result.norm_drift)
    out = Path(conf["out"])
    paths = [
        write_table(
            out,
            meta,
            [
                ("t", records),
                ("re_Ce", ce.real),
                ("im_Ce", ce.imag),
                ("pop_e", np.abs(ce) ** 2),
            ],
            conf["format"],
        )
    ]
    for t in snap_times:
        pop_a, pop_b = bath_population_map(result.snapshots[t])
        n1 = np.repeat(np.arange(conf["N"]), conf["N"])
        n2 = np.tile(np.arange(conf["N"]), conf["N"])
        snap_path = out.with_name(f"{out.stem}_bath_t{t:g}{out.suffix}")
        snap_meta = dict(meta)
        snap_meta["snapshot_time"] = _fmt_float(t)
        paths.append(
            write_table(
                snap_path,
                snap_meta,
                [
                    ("n1", n1),
                    ("n2", n2),
                    ("pop_A", pop_a.ravel()),
                    ("pop_B", pop_b.ravel()),
                ],
                conf["format"],
            )
        )
    return paths


def _run_self_energy(conf: dict) -> list[Path]:
    _validate_common(conf)
    if conf["eta"] < 0:
        raise ValueError("eta must be nonnegative")
    energies = _parse_scan(conf["scan"])
    shift = np.empty_like(energies)
    rate = np.empty_like(energies)
    for i, e in enumerate(energies):
        val = sigma_e_closed(
            complex(e, conf["eta"] * conf["J"]), conf["g"], J=conf["J"]
        ).value
        shift[i] = val.real
        rate[i] = -2.0 * val.imag
    meta = _metadata("self-energy", conf)
    return [
        write_table(
            Path(conf["out"]),
            meta,
            [("E", energies), ("delta_omega", shift), ("gamma", rate)],
            conf["format"],
        )
    ]


def _run_poles(conf: dict) -> list[Path]:
    _validate_common(conf)
    dec = find_poles(conf["delta"], conf["g"], J=conf["J"])
    kinds = [p.kind for p in dec.poles]
    sheets = [p.sheet.name for p in dec.poles]
    meta = _metadata("poles", conf)
    return [
        write_table(
            Path(conf["out"]),
            meta,
            [
                ("kind", kinds),
                ("sheet", sheets),
                ("re_z", [p.z.real for p in dec.poles]),
                ("im_z", [p.z.imag for p in dec.poles]),
                ("re_residue", [p.residue.real for p in dec.poles]),
                ("im_residue", [p.residue.imag for p in dec.poles]),
            ],
            conf["format"],
        )
    ]


def _two_emitter_series(conf: dict):
    model = BathModel(N=conf["N"], J=conf["J"])
    n12 = _parse_pair(conf["n12"])
    subl = conf["sublattices"]
    if subl not in ("AA", "AB", "BA", "BB"):
        raise ValueError("sublattices must be AA, AB, BA or BB")
    N = conf["N"]
    n0 = N // 2
    e1 = EmitterSpec((n0, n0), subl[0], conf["delta"], conf["g"])
    e2 = EmitterSpec(
        ((n0 + n12[0]) % N, (n0 + n12[1]) % N), subl[1], conf["delta"], conf["g"]
    )
    inits = {
        "site1": None,
        "sym": (1 / math.sqrt(2), 1 / math.sqrt(2)),
        "antisym": (1 / math.sqrt(2), -1 / math.sqrt(2)),
    }
    if conf["init"] not in inits:
        raise ValueError("init must be site1, sym or antisym")
    h = build_hamiltonian_action(model, [e1, e2])
    state = initial_state(model, [e1, e2], amplitudes=inits[conf["init"]])
    records = _record_grid(conf["tmax"], conf["dt_record"])
    result = evolve(state, h, conf["tmax"], records)
    return records, result.emitter_amps[:, 0], result.emitter_amps[:, 1]


def _run_two_emitter(conf: dict) -> list[Path]:
    _validate_common(conf)
    ts, c1, c2 = _two_emitter_series(conf)
    meta = _metadata("two-emitter", conf)
    return [
        write_table(
            Path(conf["out"]),
            meta,
            [
                ("t", ts),
                ("re_C1", c1.real),
                ("im_C1", c1.imag),
                ("re_C2", c2.real),
                ("im_C2", c2.imag),
                ("pop_1", np.abs(c1) ** 2),
                ("pop_2", np.abs(c2) ** 2),
            ],
            conf["format"],
        )
    ]


def _run_losses(conf: dict) -> list[Path]:
    _validate_common(conf)
    if conf["gamma_loss"] < 0:
        raise ValueError("gamma-loss must be nonnegative")
    ts, c1, c2 = _two_emitter_series(conf)
    pops = np.vstack([np.abs(c1) ** 2, np.abs(c2) ** 2])
    weighted, ground = apply_losses(ts, pops, conf["gamma_loss"])
    meta = _metadata("losses", conf)
    return [
        write_table(
            Path(conf["out"]),
            meta,
            [
                ("t", ts),
                ("pop_1", pops[0]),
                ("pop_2", pops[1]),
                ("pop_1_lossy", weighted[0]),
                ("pop_2_lossy", weighted[1]),
                ("ground_weight", ground),
            ],
            conf["format"],
        )
    ]


# ---------------------------------------------------------------------------
# parameter sweeps
# ---------------------------------------------------------------------------

def _sweep_task(task):
    conf, label = task
    try:
        paths = _run_dynamics(conf)
        return 0, str(paths[0]), ""
    except ValueError as exc:
        return 2, "", str(exc)
    except RuntimeError as exc:
        return 3, "", str(exc)


def _run_sweep(conf: dict) -> list[Path]:
    _validate_common(conf)
    param = conf["param"]
    if param not in ("g", "delta", "N"):
        raise ValueError("sweep param must be g, delta or N")
    tokens = [tok.strip() for tok in conf["values"].split(",") if tok.strip()]
    if not tokens:
        raise ValueError("sweep needs at least one value")
    out = Path(conf["out"])
    tasks = []
    for tok in tokens:
        sub = {k: conf[k] for k in _DEFAULTS["dynamics"]}
        sub[param] = _CASTS[param](tok)
        sub["out"] = str(out.with_name(f"{out.stem}_{param}{tok}{out.suffix}"))
        tasks.append((sub, tok))
    workers = conf["workers"] or cpu_count()
    if workers > 1 and len(tasks) > 1:
        with Pool(processes=min(workers, len(tasks))) as pool:
            outcomes = pool.map(_sweep_task, tasks)
    else:
        outcomes = [_sweep_task(t) for t in tasks]
    failures = [(tok, code, msg) for (code, _, msg), tok in zip(outcomes, tokens) if code]
    if failures:
        detail = "; ".join(f"{param}={tok}: {msg}" for tok, code, msg in failures)
        worst = max(code for _, code, _ in failures)
        exc = ValueError if worst == 2 else RuntimeError
        raise exc(f"sweep member(s) failed: {detail}")
    manifest = out.with_name(f"{out.stem}_manifest{out.suffix}")
    meta = _metadata("sweep", conf)
    write_table(
        manifest,
        meta,
        [
            ("param", [param] * len(tokens)),
            ("value", tokens),
            ("file", [fname for _, fname, _ in outcomes]),
        ],
        conf["format"],
    )
    return [manifest] + [Path(fname) for _, fname, _ in outcomes]


# ---------------------------------------------------------------------------
# figure-reproduction presets
# ---------------------------------------------------------------------------

def _preset_fig1b(outdir: Path, fmt: str) -> list[Path]:
    conf = dict(_DEFAULTS["self-energy"])
    conf["out"] = str(outdir / f"fig1b_self_energy.{fmt}")
    conf["format"] = fmt
    return _run_self_energy(conf)


def _preset_fig2a(outdir: Path, fmt: str) -> list[Path]:
    paths = []
    for delta in (0.0, 1.0, 2.5):
        conf = dict(_DEFAULTS["dynamics"])
        conf.update(
            N=512, g=0.1, delta=delta, tmax=200.0, dt_record=0.5,
            snapshots="200", format=fmt,
            out=str(outdir / f"fig2a_delta{delta:g}.{fmt}"),
        )
        paths.extend(_run_dynamics(conf))
    return paths


def _preset_fig3(outdir: Path, fmt: str) -> list[Path]:
    couplings = (0.05, 0.1, 0.2, 0.5)
    paths = []
    model = BathModel(N=512, J=1.0)
    # residuals table: tail average of each curve against the qBS weight
    rows_g, rows_ref, rows_mean, rows_diff = [], [], [], []
    for g in couplings:
        conf = dict(_DEFAULTS["dynamics"])
        conf.update(
            N=512, g=g, delta=0.0, tmax=2000.0, dt_record=1.0, format=fmt,
            out=str(outdir / f"fig3_g{g:g}.{fmt}"),
        )
        records, _, result = _dynamics_series(conf)
        ce = result.emitter_amps[:, 0]
        meta = _metadata("dynamics", conf)
        meta["preset"] = "fig3"
        meta["norm_drift"] = _fmt_float(result.norm_drift)
        paths.append(
            write_table(
                Path(conf["out"]),
                meta,
                [
                    ("t", records),
                    ("re_Ce", ce.real),
                    ("im_Ce", ce.imag),
                    ("pop_e", np.abs(ce) ** 2),
                ],
                fmt,
            )
        )
        pops = np.abs(ce) ** 2
        mean_pop = float(np.mean(pops[records >= 1500.0]))
        ref = residue_r0(g, model) ** 2
        rows_g.append(g)
        rows_ref.append(ref)
        rows_mean.append(mean_pop)
        rows_diff.append(abs(mean_pop - ref))
    meta = {"generator": f"diracbath {__version__}", "command": "preset",
            "preset": "fig3", "tail_window": "1500:2000"}
    paths.append(
        write_table(
            outdir / f"fig3_residuals.{fmt}",
            meta,
            [
                ("g", rows_g),
                ("r0_squared", rows_ref),
                ("mean_tail_pop", rows_mean),
                ("abs_diff", rows_diff),
            ],
            fmt,
        )
    )
    return paths


def _preset_fig4a(outdir: Path, fmt: str) -> list[Path]:
    paths = []
    for n in (64, 1024):
        conf = dict(_DEFAULTS["two-emitter"])
        conf.update(
            N=n, g=0.1, delta=0.0, n12="1,1", sublattices="AB", init="site1",
            tmax=2500.0, dt_record=1.0, format=fmt,
            out=str(outdir / f"fig4a_N{n}.{fmt}"),
        )
        paths.extend(_run_two_emitter(conf))
    return paths


def _preset_fig4bc(outdir: Path, fmt: str) -> list[Path]:
    g = 0.01
    seps = list(range(1, 21))
    cols_n, cols_size, cols_j, cols_rp, cols_markov = [], [], [], [], []
    for size in (100, 1000, 10000):
        model = BathModel(N=size, J=1.0)
        indices = [CollectiveIndex("AB", (n, n)) for n in seps]
        exps = build_small_z_expansions(model, [CollectiveIndex("AA", (0, 0))] + indices)
        for n, idx in zip(seps, indices):
            res = solve_collective_pole(model, (n, n), "AB", g, expansions=exps)
            cols_n.append(n)
            cols_size.append(size)
            cols_j.append(res.z_plus.real)
            cols_rp.append(res.r_plus.real)
            cols_markov.append(exps[idx].sigma(0.0, g).real)
    meta = {"generator": f"diracbath {__version__}", "command": "preset",
            "preset": "fig4bc", "g": g}
    return [
        write_table(
            outdir / f"fig4bc.{fmt}",
            meta,
            [
                ("n", cols_n),
                ("N", cols_size),
                ("j_ab", cols_j),
                ("r_plus", cols_rp),
                ("markov_j", cols_markov),
            ],
            fmt,
        )
    ]


def _preset_figA2b(outdir: Path, fmt: str) -> list[Path]:
    sizes = [16, 32, 64, 128, 256, 512, 1024, 2048, 4096]
    exact = [g_of_n(BathModel(N=n, J=1.0)) for n in sizes]
    approx = [g_of_n_approx(n) for n in sizes]
    meta = {"generator": f"diracbath {__version__}", "command": "preset",
            "preset": "figA2b"}
    return [
        write_table(
            outdir / f"figA2b.{fmt}",
            meta,
            [("N", sizes), ("g_exact", exact), ("g_approx", approx)],
            fmt,
        )
    ]


_PRESETS = {
    "fig1b": _preset_fig1b,
    "fig2a": _preset_fig2a,
    "fig3": _preset_fig3,
    "fig4a": _preset_fig4a,
    "fig4bc": _preset_fig4bc,
    "figA2b": _preset_figA2b,
}

_PRESET_BLURBS = {
    "fig1b": "self-energy scan across the band (closed form, fixed eta)",
    "fig2a": "single-emitter relaxation at detunings 0, 1 and 2.5",
    "fig3": "fractional decay at four couplings with a late-time plateau summary",
    "fig4a": "two-emitter exchange series at lattice sizes 64 and 1024",
    "fig4bc": "pair coupling and collective pole residues against separation",
    "figA2b": "overlap sum versus lattice size next to its log approximation",
}


def _run_preset(conf: dict, preset_id: str) -> list[Path]:
    if preset_id not in _PRESETS:
        raise ValueError(
            f"unknown preset {preset_id!r}; choose from {sorted(_PRESETS)}"
        )
    if conf.get("format") not in ("csv", "json"):
        raise ValueError("format must be csv or json")
    outdir = Path(conf["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    return _PRESETS[preset_id](outdir, conf["format"])


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diracbath",
        description="Emitters coupled to a honeycomb bath: batch computations.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="key = value file; flags override it")
        p.add_argument("--out", help="output file path")
        p.add_argument("--format", choices=["csv", "json"])

    p = sub.add_parser("dynamics", help="single-emitter relaxation series")
    add_common(p)
    p.add_argument("--N", type=int)
    p.add_argument("--J", type=float)
    p.add_argument("--g", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--tmax", type=float)
    p.add_argument("--dt-record", dest="dt_record", type=float)
    p.add_argument("--snapshots", help="comma list of bath-map times")

    p = sub.add_parser("self-energy", help="level shift and decay rate scan")
    add_common(p)
    p.add_argument("--scan", help="lo:hi:step energy grid")
    p.add_argument("--J", type=float)
    p.add_argument("--g", type=float)
    p.add_argument("--eta", type=float, help="offset above the real axis")

    p = sub.add_parser("poles", help="bound states and unstable poles")
    add_common(p)
    p.add_argument("--J", type=float)
    p.add_argument("--g", type=float)
    p.add_argument("--delta", type=float)

    for name in ("two-emitter", "losses"):
        p = sub.add_parser(
            name,
            help="pair amplitude series" if name == "two-emitter"
            else "pair series with uniform loss weighting",
        )
        add_common(p)
        p.add_argument("--N", type=int)
        p.add_argument("--J", type=float)
        p.add_argument("--g", type=float)
        p.add_argument("--delta", type=float)
        p.add_argument("--n12", help="separation 'a,b' in lattice vectors")
        p.add_argument("--sublattices", choices=["AA", "AB", "BA", "BB"])
        p.add_argument("--init", choices=["site1", "sym", "antisym"])
        p.add_argument("--tmax", type=float)
        p.add_argument("--dt-record", dest="dt_record", type=float)
        if name == "losses":
            p.add_argument("--gamma-loss", dest="gamma_loss", type=float)

    p = sub.add_parser("sweep", help="fan a dynamics run over parameter values")
    add_common(p)
    p.add_argument("--N", type=int)
    p.add_argument("--J", type=float)
    p.add_argument("--g", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--tmax", type=float)
    p.add_argument("--dt-record", dest="dt_record", type=float)
    p.add_argument("--snapshots")
    p.add_argument("--param", choices=["g", "delta", "N"])
    p.add_argument("--values", help="comma list of values for --param")
    p.add_argument("--workers", type=int, help="0 means all processors")

    p = sub.add_parser("preset", help="bundled parameter sets for the reference curves")
    p.add_argument("id", nargs="?", choices=sorted(_PRESETS))
    p.add_argument("--list", action="store_true", help="describe the available presets")
    p.add_argument("--config", help=argparse.SUPPRESS)
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=["csv", "json"])
    return parser


_RUNNERS = {
    "dynamics": _run_dynamics,
    "self-energy": _run_self_energy,
    "poles": _run_poles,
    "two-emitter": _run_two_emitter,
    "losses": _run_losses,
    "sweep": _run_sweep,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # a scan value usually starts with '-'; fold it into --scan= form so
    # argparse does not mistake it for an option
    for i, tok in enumerate(argv[:-1]):
        if tok == "--scan":
            argv[i : i + 2] = [f"--scan={argv[i + 1]}"]
            break
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "preset" and args.list:
        for pid in sorted(_PRESETS):
            print(f"{pid:8s}{_PRESET_BLURBS[pid]}")
        return 0
    try:
        conf = _merge(args.command, args)
        if args.command == "preset":
            if args.id is None:
                parser.error("preset: an id is required (or use --list)")
            paths = _run_preset(conf, args.id)
        else:
            paths = _RUNNERS[args.command](conf)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
