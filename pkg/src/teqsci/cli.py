"""Command-line front end.

    teqsci run --workflow fci --fixture h6
    teqsci run --workflow te-single --fixture h6 --t 1.4 --top-r 90
    teqsci sweep --workflow te-single --fixture h6 --axis t --values 0.25,0.5,1.0

Settings resolve as defaults < ``--config`` file < flags. A config file is
either flat ``key = value`` text or the JSON written by a previous run, whose
``metadata.config`` block is read back. Times are in atomic units
(hbar/Hartree), energies in Hartree; human-facing errors are in mHa.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources as ir
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__, kernels
from .errors import CapacityError, ConvergenceError, ParseError, TEQSCIError

SCHEMA_VERSION = 1
FIXTURE_ENV = "TEQSCI_FIXTURES"
UNITS = {"time": "hbar/Hartree", "energy": "Hartree", "energy_error_display": "mHa"}
WORKFLOWS = ("fci", "gs-qsci", "te-single", "te-average", "pmu-scan", "trotter-diag", "resources", "threshold-scan")
AXES = ("t", "R", "n_shots", "dt")
EXIT_CODES = {ParseError: 3, ConvergenceError: 4, CapacityError: 5}

ALIASES = {f"h{n}": f"h{n}_sto3g_1.0A.fcidump" for n in range(2, 19, 2)}
ALIASES.update(n2="n2_sto3g_8o10e.fcidump", nh3="nh3_sto3g.fcidump")


def _floats(s) -> list[float]:
    if isinstance(s, (list, tuple)):
        return [float(v) for v in s]
    return [float(v) for v in str(s).split(",") if v.strip()]


def _opt_bool(s):
    if s is None or isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("auto", "none", ""):
        return None
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt(conv):
    return lambda s: None if s is None or str(s).lower() == "none" else conv(s)


# key: (converter, default)
SETTINGS: dict[str, tuple[Callable, Any]] = {
    "workflow": (str, None),
    "fixture": (str, None),
    "evolution": (str, "exact"),
    "t": (float, 1.0),
    "dt": (float, 0.1),
    "t_start": (_opt(float), None),
    "t_end": (_opt(float), None),
    "t_spacing": (_opt(float), None),
    "top_r": (_opt(int), None),
    "all_distinct": (_opt_bool, False),
    "shots": (_opt(int), None),
    "seed": (int, 0),
    "tolerance": (float, 1e-3),
    "post_select": (_opt_bool, None),
    "r_i": (_opt(int), None),
    "times": (_floats, [0.1, 0.2, 0.3, 0.4, 0.5]),
    "dts": (_floats, [0.4, 0.2, 0.1, 0.05]),
    "r_rank": (int, 850),
    "t_rank": (float, 1.0),
    "n_repeats": (int, 10),
    "workers": (int, 1),
    "axis": (_opt(str), None),
    "values": (_opt(_floats), None),
}


class UsageError(Exception):
    pass


def read_config(path: str) -> dict[str, Any]:
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        return dict(json.loads(text)["metadata"]["config"])
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def resolve(file_cfg: dict[str, Any], flags: dict[str, Any]) -> dict[str, Any]:
    cfg = {k: d for k, (_, d) in SETTINGS.items()}
    for source in (file_cfg, flags):
        for k, v in source.items():
            if v is None:
                continue
            if k not in SETTINGS:
                raise UsageError(f"unknown setting {k!r}")
            try:
                cfg[k] = SETTINGS[k][0](v)
            except (TypeError, ValueError) as exc:
                raise UsageError(f"bad value for {k}: {exc}") from None
    if cfg["workflow"] not in WORKFLOWS:
        raise UsageError(f"workflow must be one of {', '.join(WORKFLOWS)}")
    if cfg["fixture"] is None:
        raise UsageError("no fixture given")
    if cfg["evolution"] not in ("exact", "trotter"):
        raise UsageError("evolution must be exact or trotter")
    if cfg["axis"] is not None and cfg["axis"] not in AXES:
        raise UsageError(f"axis must be one of {', '.join(AXES)}")
    return cfg


def fixture_path(name: str) -> Path:
    p = Path(name)
    if p.is_file():
        return p
    fname = ALIASES.get(name.lower(), name)
    root = os.environ.get(FIXTURE_ENV)
    if root and (Path(root) / fname).is_file():
        return Path(root) / fname
    packaged = ir.files("teqsci") / "fixtures" / fname
    if packaged.is_file():
        return Path(str(packaged))
    raise FileNotFoundError(f"fixture {name!r} not found")


@dataclass
class Problem:
    mh: Any
    h: Any
    basis: Any
    psi_i: Any
    e_hf: float

    _fci: tuple | None = None

    @property
    def fci(self):
        from .statevec import fci_ground_state

        if self._fci is None:
            self._fci = fci_ground_state(self.h, self.basis)
        return self._fci


def load_problem(cfg) -> Problem:
    from .integrals import load_fcidump
    from .pauli import expectation, jordan_wigner
    from .statevec import SectorBasis, hartree_fock_state

    mh = load_fcidump(fixture_path(cfg["fixture"]))
    h = jordan_wigner(mh)
    basis = SectorBasis.build(h.n_qubits, mh.n_alpha, mh.n_beta)
    psi = hartree_fock_state(h.n_qubits, mh.n_alpha, mh.n_beta)
    p = Problem(mh, h, basis, psi, expectation(h, psi))
    if cfg["r_i"] is not None:
        from .qsci import truncated_gs_initial_state

        e, gs = p.fci
        p.psi_i, _ = truncated_gs_initial_state(h, basis, gs, cfg["r_i"])
    return p


def _plan(cfg, t):
    from .statevec import EvolutionPlan

    return EvolutionPlan.exact(t) if cfg["evolution"] == "exact" else EvolutionPlan.trotter(t, cfg["dt"])


def _policy(cfg):
    from .sampler import SelectionPolicy

    if cfg["all_distinct"]:
        return SelectionPolicy.all_distinct()
    if cfg["top_r"] is None:
        raise UsageError("this workflow needs --top-r or --all-distinct")
    if cfg["shots"] is None:
        return SelectionPolicy.top_amplitude(cfg["top_r"])
    return SelectionPolicy.top_r(cfg["top_r"])


def _grid(cfg):
    from .qsci import TimeGrid

    if None in (cfg["t_start"], cfg["t_end"], cfg["t_spacing"]):
        raise UsageError("te-average needs --t-start, --t-end and --t-spacing")
    return TimeGrid(cfg["t_start"], cfg["t_end"], cfg["t_spacing"])


def _subspace_summary(res) -> dict:
    d = res.to_dict()
    d.pop("eigenvector")
    d.pop("metadata")
    return d


def _repeat(cfg, fn) -> dict:
    """Run ``fn(seed)`` once, or ``n_repeats`` times with consecutive seeds in shot mode."""
    if cfg["shots"] is None:
        return fn(cfg["seed"])
    runs = [fn(cfg["seed"] + k) for k in range(cfg["n_repeats"])]
    out = dict(runs[0])
    errs = np.array([r["energy_error_hartree"] for r in runs])
    out.update(
        seeds=[cfg["seed"] + k for k in range(cfg["n_repeats"])],
        energy_error_mha_all=(errs * 1e3).tolist(),
        energy_error_mha_mean=float(errs.mean() * 1e3),
        energy_error_mha_std=float(errs.std(ddof=1) * 1e3) if errs.size > 1 else 0.0,
        r_all=[r["r"] for r in runs],
    )
    return out


def wf_fci(cfg, p: Problem) -> dict:
    from .analysis import hf_fidelity

    e, gs = p.fci
    return {
        "energy_hartree": e,
        "dimension": p.basis.dimension,
        "n_qubits": p.h.n_qubits,
        "n_pauli_terms": len(p.h),
        "hf_energy_hartree": p.e_hf,
        "hf_fidelity": hf_fidelity(gs, p.basis),
    }


def wf_gs_qsci(cfg, p: Problem) -> dict:
    from .qsci import r_gs, run_gs_qsci

    e, gs = p.fci
    if cfg["top_r"] is None:
        return {"r_gs": r_gs(p.h, p.basis, gs, e, cfg["tolerance"]), "fci_energy_hartree": e}
    out = _subspace_summary(run_gs_qsci(p.h, p.basis, gs, cfg["top_r"], e))
    out["fci_energy_hartree"] = e
    return out


def wf_te_single(cfg, p: Problem) -> dict:
    from .qsci import run_single_time

    e, _ = p.fci
    policy, plan = _policy(cfg), _plan(cfg, cfg["t"])

    def one(seed):
        shots = None if cfg["shots"] is None else (cfg["shots"], seed)
        res = run_single_time(p.h, p.psi_i, plan, policy, shots, e, cfg["post_select"])
        return dict(_subspace_summary(res), fci_energy_hartree=e)

    return _repeat(cfg, one)


def wf_te_average(cfg, p: Problem) -> dict:
    from .qsci import run_time_average, shots_per_time

    if cfg["shots"] is None:
        raise UsageError("te-average needs --shots (total over the grid)")
    e, _ = p.fci
    grid = _grid(cfg)
    dt = None if cfg["evolution"] == "exact" else cfg["dt"]
    per_t = shots_per_time(cfg["shots"], grid)

    def one(seed):
        res = run_time_average(p.h, p.psi_i, grid, dt, _policy(cfg), per_t, seed, e, cfg["post_select"])
        return dict(_subspace_summary(res), fci_energy_hartree=e, shots_per_time=per_t, m=grid.m)

    return _repeat(cfg, one)


def wf_pmu_scan(cfg, p: Problem) -> dict:
    from .analysis import class_averaged_curves, scaling_exponent
    from .errors import InsufficientData

    cc = class_averaged_curves(p.h, p.psi_i, cfg["times"], cfg["r_rank"], cfg["t_rank"])
    slopes = {}
    for g, curve in cc.mean_p.items():
        try:
            slopes[g] = scaling_exponent(cc.times, curve)
        except InsufficientData:
            slopes[g] = None
    return {
        "times": list(cc.times),
        "class_sizes": {g: len(m) for g, m in cc.groups.items()},
        "mean_p": {g: [float(v) for v in c] for g, c in cc.mean_p.items()},
        "slopes": slopes,
        "_csv": ("t,class,mean_p", [(t, g, v) for t, g, v in cc.rows()]),
    }


def wf_trotter_diag(cfg, p: Problem) -> dict:
    from .analysis import trotter_diagnostics

    rows = []
    for dt in cfg["dts"]:
        d = trotter_diagnostics(p.h, p.psi_i, cfg["t"], dt)
        rows.append({"dt": dt, **d._asdict()})
    return {"t": cfg["t"], "e_initial_hartree": p.e_hf, "rows": rows,
            "_csv": ("dt,infidelity,energy_violation,leaked_weight",
                     [(r["dt"], r["infidelity"], r["energy_violation"], r["leaked_weight"]) for r in rows])}


def wf_resources(cfg, p: Problem | None) -> dict:
    from .integrals import load_fcidump
    from .pauli import jordan_wigner
    from .resources import count_gates, fit_power_law

    names = [s.strip() for s in cfg["fixture"].split(",") if s.strip()]
    counts = [count_gates(jordan_wigner(load_fcidump(fixture_path(n)))) for n in names]
    out = {"counts": [dict(fixture=n, **c.__dict__) for n, c in zip(names, counts)]}
    if len(counts) >= 4:
        nq = [c.n_qubits for c in counts]
        out["fit_cnot"] = fit_power_law(nq, [c.n_cnot for c in counts]).__dict__
        out["fit_rz"] = fit_power_law(nq, [c.n_rz for c in counts]).__dict__
    out["_csv"] = ("n_q,n_pauli_terms,n_cnot,n_rz", [(c.n_qubits, c.n_pauli_terms, c.n_cnot, c.n_rz) for c in counts])
    return out


def wf_threshold_scan(cfg, p: Problem) -> dict:
    from .qsci import r_gs, r_te
    from .statevec import evolve

    e, gs = p.fci
    times = _grid(cfg).times if cfg["t_start"] is not None else [cfg["t"]]
    per_t = {}
    for t in times:
        per_t[t] = r_te(p.h, evolve(p.h, p.psi_i, _plan(cfg, t), p.basis if cfg["evolution"] == "exact" else None),
                        p.basis, e, cfg["tolerance"])
    t_opt = min(per_t, key=lambda t: (per_t[t], t))
    rgs = r_gs(p.h, p.basis, gs, e, cfg["tolerance"])
    return {"r_gs": rgs, "r_te": per_t[t_opt], "t_opt": t_opt, "ratio": per_t[t_opt] / rgs,
            "r_te_by_t": [[t, r] for t, r in per_t.items()], "n_qubits": p.h.n_qubits}


RUNNERS = {
    "fci": wf_fci,
    "gs-qsci": wf_gs_qsci,
    "te-single": wf_te_single,
    "te-average": wf_te_average,
    "pmu-scan": wf_pmu_scan,
    "trotter-diag": wf_trotter_diag,
    "resources": wf_resources,
    "threshold-scan": wf_threshold_scan,
}


def execute(cfg) -> dict:
    p = None if cfg["workflow"] == "resources" else load_problem(cfg)
    return RUNNERS[cfg["workflow"]](cfg, p)


def metadata(cfg) -> dict:
    from .sampler import RNG_ALGORITHM

    return {
        "config": cfg,
        "units": UNITS,
        "schema_version": SCHEMA_VERSION,
        "teqsci_version": __version__,
        "backend": kernels.BACKEND_NAME,
        "rng": RNG_ALGORITHM,
    }


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, default=_json_default) + "\n"


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _write_csv(path, header: str, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["schema_version", *header.split(",")])
    for r in rows:
        w.writerow([SCHEMA_VERSION, *(repr(v) if isinstance(v, float) else v for v in r)])
    _write(path, buf.getvalue())


def cmd_run(cfg, out, csv_path) -> None:
    result = execute(cfg)
    table = result.pop("_csv", None)
    _write(out, dumps({"metadata": metadata(cfg), "result": result}))
    if csv_path and table:
        _write_csv(csv_path, *table)


SWEEP_COLUMNS = ("axis", "value", "status", "r", "n_repeats", "energy_error_mha_mean",
                 "energy_error_mha_std", "error_tag")
_AXIS_KEY = {"t": "t", "R": "top_r", "n_shots": "shots", "dt": "dt"}


def _sweep_row(args) -> tuple:
    cfg, axis, value = args
    cfg = dict(cfg)
    cfg[_AXIS_KEY[axis]] = int(value) if axis in ("R", "n_shots") else float(value)
    if axis == "dt":
        cfg["evolution"] = "trotter"
    try:
        res = execute(cfg)
    except (TEQSCIError, ValueError, UsageError) as exc:
        return (axis, value, "failed", "", "", "", "", f"{type(exc).__name__}: {exc}")
    if "energy_error_mha_mean" in res:
        mean, std, n = res["energy_error_mha_mean"], res["energy_error_mha_std"], cfg["n_repeats"]
    else:
        mean, std, n = res.get("energy_error_mha"), 0.0, 1
    return (axis, value, "ok", res.get("r", res.get("r_te", "")), n, mean, std, "")


def sweep(cfg) -> list[tuple]:
    if cfg["axis"] is None or not cfg["values"]:
        raise UsageError("sweep needs --axis and --values")
    vals = cfg["values"]
    if any(not math.isfinite(v) for v in vals) or vals != sorted(vals):
        raise UsageError("sweep values must be finite and sorted")
    jobs = [(cfg, cfg["axis"], v) for v in vals]
    if cfg["workers"] <= 1:
        return [_sweep_row(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=cfg["workers"]) as pool:
        return list(pool.map(_sweep_row, jobs))


def cmd_sweep(cfg, out, csv_path) -> None:
    rows = sweep(cfg)
    _write_csv(csv_path or out, ",".join(SWEEP_COLUMNS), rows)
    if csv_path and out not in (None, "-"):
        _write(out, dumps({"metadata": metadata(cfg), "rows": [dict(zip(SWEEP_COLUMNS, r)) for r in rows]}))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="teqsci", description="Time-evolved selected CI toolkit")
    ap.add_argument("--version", action="version", version=f"teqsci {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key = value file, or JSON from a previous run")
        sp.add_argument("--workflow", choices=WORKFLOWS)
        sp.add_argument("--fixture", help="alias (h2..h18, n2, nh3) or FCIDUMP path; comma list for resources")
        sp.add_argument("--evolution", choices=("exact", "trotter"))
        sp.add_argument("--t", type=float, help="evolution time")
        sp.add_argument("--dt", type=float, help="Trotter step")
        sp.add_argument("--t-start", type=float)
        sp.add_argument("--t-end", type=float)
        sp.add_argument("--t-spacing", type=float)
        sp.add_argument("--top-r", type=int)
        sp.add_argument("--all-distinct", action="store_const", const=True)
        sp.add_argument("--shots", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--tolerance", type=float, help="energy tolerance, Hartree")
        sp.add_argument("--post-select", choices=("auto", "on", "off"))
        sp.add_argument("--r-i", type=int, help="initial state from the R_I largest ground-state configurations")
        sp.add_argument("--times", help="comma list for pmu-scan")
        sp.add_argument("--dts", help="comma list for trotter-diag")
        sp.add_argument("--r-rank", type=int)
        sp.add_argument("--t-rank", type=float)
        sp.add_argument("--n-repeats", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--output", "-o", help="JSON output path (default stdout)")
        sp.add_argument("--csv", help="CSV output path")
        if name == "sweep":
            sp.add_argument("--axis", choices=AXES)
            sp.add_argument("--values", help="comma list of sorted axis values")
    return ap


_NOT_SETTINGS = {"command", "config", "output", "csv"}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in _NOT_SETTINGS}
    try:
        file_cfg = read_config(args.config) if args.config else {}
        cfg = resolve(file_cfg, flags)
        (cmd_run if args.command == "run" else cmd_sweep)(cfg, args.output, args.csv)
    except UsageError as exc:
        ap.print_usage(sys.stderr)
        print(f"teqsci: error: {exc}", file=sys.stderr)
        return 2
    except (TEQSCIError, FileNotFoundError) as exc:
        print(f"teqsci: {type(exc).__name__}: {exc}", file=sys.stderr)
        for cls, code in EXIT_CODES.items():
            if isinstance(exc, cls):
                return code
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
