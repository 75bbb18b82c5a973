"""Command-line front end: ``magtorus {deform,verify,simulate,classify-check,export-plots}``.

Every run validates its configuration first, then writes into a fresh
run-stamped directory under ``--out`` with a ``manifest.json`` listing the
configuration, library versions and a SHA-256 checksum of each artifact.

Exit codes: 0 success, 2 configuration error, 3 numerical precondition
violation, 4 verification threshold not met.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .assembly import (
    assemble_integral,
    magnetic_field,
    magnetic_system,
    verify_report,
)
from .classifier import (
    ExampleOneData,
    classify,
    deformed_candidate,
    energy_drift_table,
    example_one_candidate,
    example_one_system,
    liouville_candidate,
)
from .config import PRESETS, resolve_config
from .deformation import (
    LiouvilleData,
    ck_jet,
    evaluate_jet,
    evaluate_trusted,
    jet_convergence_report,
    liouville_initial_state,
    trust_diagnostics,
)
from .dynamics import (
    IntegratorSettings,
    conservation_report,
    cotangent_from_angle,
    hamiltonian_monitor,
    integrate,
    level_integral_monitor,
    start_lattice,
)
from .errors import ConfigError, NumericalError, VerificationFailure
from .fields import spectrum_to_list, write_grid_csv
from .kernels import get_kernels

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VERIFY = 4

WORKERS_ENV = "MAGTORUS_WORKERS"
OMEGA_MEAN_TOL = 1e-13
FLAT_WARNING = "flat/stationary case: the deformation is trivial and the magnetic field vanishes"

log = logging.getLogger("magtorus")


# -- run directory ------------------------------------------------------------

def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _versions():
    out = {"magtorus": __version__, "python": platform.python_version(),
           "numpy": np.__version__, "scipy": scipy.__version__}
    try:
        import numba
        out["numba"] = numba.__version__
    except ImportError:  # pragma: no cover
        out["numba"] = None
    return out


class RunDir:
    """A run-stamped output directory that records what it writes."""

    def __init__(self, base, verb, config):
        self.verb = verb
        self.config = config
        self.config_json = config.to_json()
        digest = hashlib.sha256(self.config_json.encode()).hexdigest()
        self.created = datetime.now(timezone.utc)
        stamp = f"{verb}-{self.created:%Y%m%dT%H%M%S%fZ}-{digest[:8]}"
        base = Path(base)
        base.mkdir(parents=True, exist_ok=True)
        path = base / stamp
        n = 1
        while path.exists():
            n += 1
            path = base / f"{stamp}-{n}"
        path.mkdir()
        self.path = path
        self.files = []
        self.warnings = []
        self.inputs = {}
        self.write_text("config.json", self.config_json + "\n")

    def file(self, name):
        p = self.path / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.files.append(name)
        return p

    def write_text(self, name, text):
        p = self.file(name)
        p.write_text(text)
        return p

    def write_json(self, name, obj):
        return self.write_text(name, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")

    def write_table(self, name, header, rows):
        p = self.file(name)
        with open(p, "w") as fh:
            np.savetxt(fh, np.asarray(rows, dtype=float).reshape(-1, len(header)),
                       delimiter=",", fmt="%.17g", header=",".join(header), comments="")
        return p

    def warn(self, message):
        log.warning(message)
        self.warnings.append(message)

    def finish(self, status, exit_code):
        manifest = {
            "verb": self.verb,
            "created_utc": self.created.isoformat(),
            "status": status,
            "exit_code": exit_code,
            "config_sha256": hashlib.sha256(self.config_json.encode()).hexdigest(),
            "inputs": self.inputs,
            "versions": _versions(),
            "backend": get_kernels().name,
            "warnings": self.warnings,
            "files": [{"path": name, "sha256": _sha256(self.path / name),
                       "bytes": (self.path / name).stat().st_size}
                      for name in sorted(set(self.files))],
        }
        (self.path / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
        return manifest


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _workers():
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1")
    return n


def _map(func, items):
    items = list(items)
    n = _workers()
    if n == 1 or len(items) < 2:
        return [func(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(func, items))


# -- system construction ------------------------------------------------------

def liouville_data(cfg):
    return LiouvilleData(cfg.lam1_coeffs, cfg.lam2_coeffs)


def example_data(cfg):
    return ExampleOneData(cfg.example1_lam, cfg.example1_u_cos, cfg.example1_u_sin)


def build_jet(cfg, K=None):
    data = liouville_data(cfg)
    return ck_jet(liouville_initial_state(data, cfg.N_work), cfg.K if K is None else K, cfg.N_work)


def is_stationary(jet):
    return all(U.coefficient_max() == 0.0 for U in jet.coeffs[1:])


def settings_of(cfg):
    return IntegratorSettings(step=cfg.step, tol=cfg.tol, scheme=cfg.scheme,
                              sample_dt=cfg.sample_dt)


def lattice(cfg):
    return start_lattice(cfg.n_x, cfg.n_phi, cfg.y_start, cfg.seed)


def _lattice_record(cfg):
    return {"n_x": cfg.n_x, "n_phi": cfg.n_phi, "y": cfg.y_start, "seed": cfg.seed}


# -- commands -----------------------------------------------------------------

def cmd_deform(cfg, run, args):
    M = cfg.M_verify
    if cfg.preset == "example1":
        sys_, _ = example_one_system(example_data(cfg))
        write_grid_csv(run.file("lam_grid.csv"), sys_.lam, M)
        write_grid_csv(run.file("omega_grid.csv"), sys_.omega, M)
        run.write_json("system.json", {"lam": spectrum_to_list(sys_.lam),
                                       "omega": spectrum_to_list(sys_.omega)})
        return EXIT_OK
    jet = build_jet(cfg)
    if is_stationary(jet):
        run.warn(FLAT_WARNING)
    jet.save(run.file("jet.json"))
    run.write_json("convergence.json", {"trust": trust_diagnostics(jet, cfg.t, M),
                                        "jet": jet_convergence_report(jet, cfg.t, M),
                                        "bands": jet.bands})
    U = evaluate_trusted(jet, cfg.t, M)
    omega = magnetic_field(U)
    write_grid_csv(run.file("lam_grid.csv"), U.lam, M)
    write_grid_csv(run.file("omega_grid.csv"), omega, M)
    run.write_json("verify.json", verify_report(U, cfg.t, cfg.K, M))
    return EXIT_OK


def cmd_verify(cfg, run, args):
    M = cfg.M_verify
    if cfg.preset == "example1":
        d = example_data(cfg)
        sys_, _ = example_one_system(d)
        rep = classify(sys_, example_one_candidate(d))
        rep["residual_tol"] = cfg.residual_tol
        rep["passed"] = bool(rep["residual_max"] < cfg.residual_tol)
        run.write_json("verify.json", rep)
        if not rep["passed"]:
            raise VerificationFailure(f"all-levels residual {rep['residual_max']:.3e} "
                                      f">= {cfg.residual_tol:.1e}")
        return EXIT_OK
    jet = build_jet(cfg)
    if is_stationary(jet):
        run.warn(FLAT_WARNING)
    U = evaluate_trusted(jet, cfg.t, M)
    rep = verify_report(U, cfg.t, cfg.K, M)
    worst = max(v[0] for v in rep["residual_norms"].values())
    failures = []
    if worst >= cfg.residual_tol:
        failures.append(f"max residual {worst:.3e} >= {cfg.residual_tol:.1e}")
    if abs(rep["omega_mean"]) >= OMEGA_MEAN_TOL:
        failures.append(f"|mean omega| {abs(rep['omega_mean']):.3e} >= {OMEGA_MEAN_TOL:.0e}")
    rep["residual_tol"] = cfg.residual_tol
    rep["passed"] = not failures
    rep["failures"] = failures
    run.write_json("verify.json", rep)
    if failures:
        raise VerificationFailure("; ".join(failures))
    return EXIT_OK


def _run_start(sys_, start, T, settings, monitors):
    try:
        traj = integrate(sys_, start, T, settings)
    except NumericalError as exc:
        return None, {"error": type(exc).__name__, "message": str(exc)}
    return traj, conservation_report(traj, monitors)


def _simulate_jet(cfg, run):
    M = cfg.M_verify
    jet = build_jet(cfg, max(cfg.K, *cfg.K_sweep))
    if is_stationary(jet):
        run.warn(FLAT_WARNING)
    U = evaluate_trusted(jet.truncated(cfg.K), cfg.t, M)
    sys_ = magnetic_system(U)
    F = assemble_integral(U)
    monitors = {"F": level_integral_monitor(F), "H": hamiltonian_monitor(sys_)}
    settings = settings_of(cfg)
    starts = lattice(cfg)

    results = _map(lambda p: _run_start(sys_, p, cfg.T, settings, monitors), starts)
    records = []
    for i, (p, (traj, rep)) in enumerate(zip(starts, results)):
        rec = {"index": i, "start": {"x": p.x, "y": p.y, "phi": p.phi}}
        if traj is None:
            rec.update(rep)
        else:
            rec["drift"] = rep
            rec["stats"] = traj.stats
            s = traj.states
            run.write_table(f"trajectories/traj_{i:03d}.csv", ["t", "x", "y", "phi", "F", "H"],
                            np.column_stack([traj.times, s[:, 0], s[:, 1], s[:, 2],
                                             traj.invariant_samples["F"],
                                             traj.invariant_samples["H"]]))
        records.append(rec)

    sweep = []
    for K in cfg.K_sweep:
        Uk = evaluate_jet(jet.truncated(K), cfg.t, M=M)
        sk = magnetic_system(Uk)
        mon = {"F": level_integral_monitor(assemble_integral(Uk))}
        out = _map(lambda p: _run_start(sk, p, cfg.T, settings, mon), starts)
        errs = [r for tr, r in out if tr is None]
        drifts = [r["F"]["rel_drift"] for tr, r in out if tr is not None]
        sweep.append({"K": K, "max_rel_drift": max(drifts) if drifts else None,
                      "failed_starts": len(errs)})
    run.write_json("drift_vs_K.json", {"t": cfg.t, "T": cfg.T, "tol": cfg.tol, "rows": sweep})
    return records, "F"


def _simulate_example1(cfg, run):
    d = example_data(cfg)
    sys_, F1 = example_one_system(d)
    monitors = {"F": F1.monitor(), "H": hamiltonian_monitor(sys_)}
    settings = settings_of(cfg)
    starts = lattice(cfg)
    jobs = [(E, i, p) for E in cfg.energies for i, p in enumerate(starts)]

    def job(item):
        E, _, p = item
        return _run_start(sys_, cotangent_from_angle(sys_, p, E), cfg.T, settings, monitors)

    results = _map(job, jobs)
    records = []
    for (E, i, p), (traj, rep) in zip(jobs, results):
        rec = {"index": i, "energy": E, "start": {"x": p.x, "y": p.y, "phi": p.phi}}
        if traj is None:
            rec.update(rep)
        else:
            rec["drift"] = rep
            rec["stats"] = traj.stats
            s = traj.states
            run.write_table(f"trajectories/traj_E{E:g}_{i:03d}.csv",
                            ["t", "x", "y", "p1", "p2", "F", "H"],
                            np.column_stack([traj.times, s, traj.invariant_samples["F"],
                                             traj.invariant_samples["H"]]))
        records.append(rec)
    return records, "F"


def cmd_simulate(cfg, run, args):
    if cfg.preset == "example1":
        records, key = _simulate_example1(cfg, run)
    else:
        records, key = _simulate_jet(cfg, run)
    ok = [r for r in records if "drift" in r]
    failed = [r for r in records if "drift" not in r]
    worst = max((r["drift"][key]["rel_drift"] for r in ok), default=None)
    summary = {
        "preset": cfg.preset,
        "lattice": _lattice_record(cfg),
        "settings": {"T": cfg.T, "tol": cfg.tol, "scheme": cfg.scheme, "step": cfg.step,
                     "sample_dt": cfg.sample_dt},
        "starts": records,
        "max_rel_drift": worst,
        "drift_tol": cfg.drift_tol,
        "failed_starts": len(failed),
    }
    run.write_json("drift.json", summary)
    if failed:
        raise NumericalError(f"{len(failed)} of {len(records)} trajectories aborted; see drift.json")
    if worst is not None and worst >= cfg.drift_tol:
        raise VerificationFailure(f"max relative drift {worst:.3e} >= {cfg.drift_tol:.1e}")
    return EXIT_OK


# -- classify-check -----------------------------------------------------------

BUNDLED = ("liouville", "example1", "deformed")


def load_candidate(ref):
    """Candidate description from a bundled name or a JSON file path."""
    if ref in BUNDLED:
        text = resources.files("magtorus").joinpath("candidates", f"{ref}.json").read_text()
        source = f"bundled:{ref}"
    else:
        try:
            text = Path(ref).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read candidate {ref}: {exc}") from exc
        source = str(ref)
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"candidate {ref} is not valid JSON: {exc}") from exc
    if not isinstance(d, dict) or d.get("kind") not in ("liouville", "example1", "deformed"):
        raise ConfigError(f"candidate {ref}: 'kind' must be liouville, example1 or deformed")
    d.setdefault("name", Path(ref).stem)
    d["source"] = source
    return d


def build_candidate(d):
    kind = d["kind"]
    try:
        if kind == "liouville":
            return liouville_candidate(LiouvilleData(d["lam1"], d["lam2"]))
        if kind == "example1":
            e = ExampleOneData(d["lam"], d.get("u_cos", (0.0,)), d.get("u_sin", (0.0,)))
            sys_, _ = example_one_system(e)
            return sys_, example_one_candidate(e, float(d.get("scale", 1.0)))
        data = LiouvilleData(d["lam1"], d["lam2"])
        jet = ck_jet(liouville_initial_state(data, int(d["N_work"])), int(d["K"]), int(d["N_work"]))
        U = evaluate_trusted(jet, float(d["t"]))
        return magnetic_system(U), deformed_candidate(U)
    except KeyError as exc:
        raise ConfigError(f"candidate {d['name']}: missing key {exc}") from exc


def cmd_classify_check(cfg, run, args):
    refs = list(cfg.candidates) + list(args.candidate or [])
    cands = [load_candidate(r) for r in refs]
    run.inputs["candidates"] = {c["name"]: c["source"] for c in cands}
    starts = start_lattice(2, 2, cfg.y_start, cfg.seed)
    rows = []
    for c in cands:
        sys_, q = build_candidate(c)
        rep = classify(sys_, q)
        rep["name"] = c["name"]
        rep["kind"] = c["kind"]
        rep["expect"] = c.get("expect")
        rep["energy_drift"] = energy_drift_table(sys_, q, cfg.energies, starts, cfg.classify_T,
                                                 cfg.tol, cfg.sample_dt)
        rep["as_expected"] = rep["expect"] is None or rep["expect"] == rep["verdict"]
        rows.append(rep)
        log.info("%s: %s (max residual %.3e)", c["name"], rep["verdict"], rep["residual_max"])
    report = {"candidates": rows, "all_as_expected": all(r["as_expected"] for r in rows),
              "energies": list(cfg.energies), "T": cfg.classify_T, "lattice": "2x2"}
    run.write_json("classify.json", report)
    bad = [r["name"] for r in rows if not r["as_expected"]]
    if bad:
        raise VerificationFailure(f"unexpected verdict for: {', '.join(bad)}")
    return EXIT_OK


# -- export-plots -------------------------------------------------------------

def _runs(base, config_sha=None):
    base = Path(base)
    if not base.is_dir():
        return []
    found = []
    for p in base.iterdir():
        m = p / "manifest.json"
        if not m.is_file():
            continue
        man = json.loads(m.read_text())
        if config_sha is None or man.get("config_sha256") == config_sha:
            found.append((man["created_utc"], p))
    return [p for _, p in sorted(found)]


def find_artifacts(base, source=None, config_sha=None):
    """Latest run directory holding each artifact kind.

    Only runs made with the configuration hashed as ``config_sha`` are
    considered.  With ``source`` given only that run directory is searched.
    """
    runs = [Path(source)] if source else _runs(base, config_sha)
    found = {}
    for r in runs:
        if (r / "omega_grid.csv").is_file():
            found["omega"] = r
        if (r / "trajectories").is_dir() and any((r / "trajectories").glob("*.csv")):
            found["trajectories"] = r
        if (r / "drift_vs_K.json").is_file():
            found["drift_vs_K"] = r
    return found


def check_export_inputs(args, cfg):
    sha = hashlib.sha256(cfg.to_json().encode()).hexdigest()
    found = find_artifacts(args.out, args.source, sha)
    if not found:
        where = args.source or args.out
        raise ConfigError(f"no artifacts for this configuration under {where}: "
                          "run 'deform' or 'simulate' first "
                          "(need omega_grid.csv, trajectories/*.csv or drift_vs_K.json)")
    return found


def cmd_export_plots(cfg, run, args):
    found = args.found
    run.inputs = {k: str(v) for k, v in found.items()}
    if "omega" in found:
        src = found["omega"] / "omega_grid.csv"
        data = np.loadtxt(src, delimiter=",", skiprows=1, ndmin=2)
        run.write_table("omega_heatmap.csv", ["x", "y", "omega"], data)
    else:
        run.warn("no omega grid found; heatmap skipped")
    if "trajectories" in found:
        for path in sorted((found["trajectories"] / "trajectories").glob("*.csv")):
            with open(path) as fh:
                header = fh.readline().strip().split(",")
            data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
            xy = np.unwrap(data[:, 1:3], period=1.0, axis=0)
            rest = data[:, 3:]
            run.write_table(f"unfolded/{path.name}", ["t", "X", "Y"] + header[3:],
                            np.column_stack([data[:, 0], xy, rest]))
    else:
        run.warn("no trajectories found; unfolded paths skipped")
    if "drift_vs_K" in found:
        table = json.loads((found["drift_vs_K"] / "drift_vs_K.json").read_text())
        rows = [(r["K"], np.nan if r["max_rel_drift"] is None else r["max_rel_drift"])
                for r in table["rows"]]
        run.write_table("drift_vs_K.csv", ["K", "max_rel_drift"], rows)
        d = [r[1] for r in rows]
        run.write_json("drift_vs_K_summary.json",
                       {"strictly_decreasing": bool(all(a > b for a, b in zip(d, d[1:]))),
                        "rows": [{"K": k, "max_rel_drift": v} for k, v in rows]})
    else:
        run.warn("no drift-vs-K table found; skipped")
    return EXIT_OK


COMMANDS = {
    "deform": cmd_deform,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "classify-check": cmd_classify_check,
    "export-plots": cmd_export_plots,
}


# -- entry point --------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--out", metavar="DIR", default="runs",
                        help="base directory for run-stamped outputs (default: runs)")
    common.add_argument("--preset", choices=PRESETS, default=None,
                        help="built-in configuration (default: default)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="magtorus", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)
    sub.add_parser("deform", parents=[common], help="build the jet and write fields")
    sub.add_parser("verify", parents=[common], help="residual report with thresholds")
    sub.add_parser("simulate", parents=[common], help="integrate the start lattice")
    p = sub.add_parser("classify-check", parents=[common], help="all-levels checks on candidates")
    p.add_argument("--candidate", action="append", metavar="PATH",
                   help="extra candidate JSON file (repeatable)")
    p = sub.add_parser("export-plots", parents=[common], help="plot-ready CSVs from earlier runs")
    p.add_argument("--from", dest="source", metavar="RUN_DIR",
                   help="read artifacts from this run directory only")
    return parser


def _error_payload(exc):
    if hasattr(exc, "to_dict"):
        return exc.to_dict()
    return {"error": type(exc).__name__, "message": str(exc)}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args.preset, args.config)
        _workers()
        if args.verb == "export-plots":
            args.found = check_export_inputs(args, cfg)
    except ConfigError as exc:
        print(json.dumps({"exit_code": EXIT_CONFIG, **_error_payload(exc)}), file=sys.stderr)
        return EXIT_CONFIG

    run = RunDir(args.out, args.verb, cfg)
    if args.config:
        run.inputs["config_file"] = {"path": str(args.config), "sha256": _sha256(args.config)}
    try:
        code = COMMANDS[args.verb](cfg, run, args)
        status = "ok"
    except ConfigError as exc:
        code, status = EXIT_CONFIG, "config_error"
        run.write_json("error.json", _error_payload(exc))
    except NumericalError as exc:
        code, status = EXIT_NUMERICAL, "numerical_error"
        run.write_json("error.json", _error_payload(exc))
    except VerificationFailure as exc:
        code, status = EXIT_VERIFY, "verification_failed"
        run.write_json("error.json", _error_payload(exc))
    if code != EXIT_OK:
        err = json.loads((run.path / "error.json").read_text())
        print(json.dumps({"exit_code": code, "run_dir": str(run.path), **err}), file=sys.stderr)
    run.finish(status, code)
    print(run.path)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
