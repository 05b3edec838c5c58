"""Batch command-line front end.

Every command prints a short summary.  With ``--out DIR`` it also writes
CSV/JSON data files plus ``<command>.meta.json`` holding the tool version,
the effective configuration and hashes of the coefficient files in use.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import reproduce as rp
from ._io import csv_text, write_csv, write_json
from .dispersion import MODEL_DIR_ENV, default_catalog
from .interference import MODES, four_fold_trace, two_fold_trace
from .nonlinearity import CrystalAngles, DMatrix, d_eff_eoe, d_eff_eoe_terms, d_eff_ooe, d_eff_ooe_terms
from .phasematch import (
    CrystalSpec,
    GvmCondition,
    PmType,
    scan_doping,
    scan_pump_signal,
    scan_temperature,
    solve_gvm,
)
from .spectrum import schmidt

COMMANDS = ("gvm", "scan-doping", "scan-map", "scan-temp", "jsa", "hom2", "hom4", "deff", "reproduce")
TARGETS = ("table1", "table2", "fig7", "fig8", "fig9", "windows")


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------- parsing

def _common(p: argparse.ArgumentParser, crystal: bool = True):
    p.add_argument("--config", help="TOML or JSON file whose keys override command-line flags")
    p.add_argument("--out", help="output directory; nothing is written without it")
    p.add_argument("--models-dir", help=f"coefficient-file directory (default: ${MODEL_DIR_ENV} or built-in)")
    p.add_argument("--threads", type=int, default=1, help="parallelism degree for scans")
    if crystal:
        p.add_argument("--model", default="MgLN", help="model id, e.g. MgLN, ZnLN, InZnLN")
        p.add_argument("--x", type=float, default=5.0, help="doping ratio in mol%%")
        p.add_argument("--temp", type=float, default=rp.ROOM_TEMPERATURE_C, help="temperature in C")
        p.add_argument("--type", default="II", choices=("0", "I", "II"), help="phase-matching type")
        p.add_argument("--allow-extrapolation", action="store_true",
                       help="evaluate outside validity ranges and flag the results")


def _source_args(p):
    p.add_argument("--condition", type=int, default=1, choices=(1, 2, 3))
    p.add_argument("--length", type=float, default=rp.LONG_LENGTH_MM, help="crystal length in mm")
    p.add_argument("--bandwidth", type=float, help="pump bandwidth in nm (optimised if omitted)")
    p.add_argument("--span", type=float, help="JSA window in nm")
    p.add_argument("--n", type=int, default=200, help="JSA grid size")
    p.add_argument("--expansion", default="exact", choices=("exact", "linear"))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dopedppln", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gvm", help="degenerate GVM roots")
    _common(p)
    p.add_argument("--condition", type=int, choices=(1, 2, 3), help="GVM condition (all if omitted)")
    p.add_argument("--grid", default="lam=2000:4800:2", help="search window, lam=start:stop:pitch")

    p = sub.add_parser("scan-doping", help="degenerate wavelength x doping grid")
    _common(p)
    p.add_argument("--grid", default="lam=2000:4800:2,x=0:7:0.1")

    p = sub.add_parser("scan-map", help="pump x signal grid at fixed doping")
    _common(p)
    p.add_argument("--grid", help="pump=start:stop:step,signal=start:stop:step (type window if omitted)")

    p = sub.add_parser("scan-temp", help="GVM wavelength versus temperature")
    _common(p)
    p.add_argument("--condition", type=int, choices=(1, 2, 3))
    p.add_argument("--grid", default="T=20:120:1")

    for name, help_ in (("jsa", "joint spectrum and Schmidt purity"),
                        ("hom2", "signal-idler two-fold interference"),
                        ("hom4", "two-source four-fold interference")):
        p = sub.add_parser(name, help=help_)
        _common(p)
        _source_args(p)
        p.add_argument("--grid", help="tau=start:stop:step in ps (automatic if omitted)")
        if name == "hom2":
            p.add_argument("--detune-x", type=float, help="doping of the crystal at fixed period")
            p.add_argument("--detune-temp", type=float, help="temperature of the crystal at fixed period")
        if name == "hom4":
            p.add_argument("--mode", default="two_signals", choices=MODES)

    p = sub.add_parser("deff", help="effective nonlinear coefficients")
    _common(p, crystal=False)
    p.add_argument("--theta", type=float, default=90.0)
    p.add_argument("--phi", type=float, default=90.0)
    p.add_argument("--rho", type=float, default=0.0)

    p = sub.add_parser("reproduce", help="regenerate a reference table or figure data set")
    _common(p, crystal=False)
    p.add_argument("target", choices=TARGETS)
    return ap


def parse_grid(spec: str | None, defaults: dict[str, tuple[float, float, float]]) -> dict[str, np.ndarray]:
    axes = dict(defaults)
    if spec:
        for part in spec.split(","):
            try:
                name, rng = part.split("=")
                lo, hi, step = (float(v) for v in rng.split(":"))
            except ValueError:
                raise UsageError(f"--grid: cannot parse {part!r}; expected name=start:stop:step") from None
            name = name.strip()
            if name not in defaults:
                raise UsageError(f"--grid: unknown axis {name!r}; expected one of {sorted(defaults)}")
            if step <= 0 or hi < lo:
                raise UsageError(f"--grid: axis {name!r} needs start <= stop and step > 0")
            axes[name] = (lo, hi, step)
    return {k: np.round(np.arange(lo, hi + step * 1e-6, step), 10) for k, (lo, hi, step) in axes.items()}


def apply_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> argparse.Namespace:
    if not args.config:
        return args
    path = Path(args.config)
    text = path.read_text()
    if path.suffix == ".json":
        data = json.loads(text)
    else:
        from .dispersion import tomllib
        data = tomllib.loads(text)
    for key, value in data.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest) or dest in ("command", "config"):
            raise UsageError(f"config {path}: unknown field {key!r} for command {args.command}")
        setattr(args, dest, value)
    return args


# ---------------------------------------------------------------- helpers

class Run:
    """Collects outputs of one invocation and writes the metadata record."""

    def __init__(self, args, catalog):
        self.args = args
        self.catalog = catalog
        self.out = Path(args.out) if args.out else None
        self.files: list[str] = []
        self.models: set[str] = set()

    def use(self, model_id: str):
        self.models.add(model_id)
        return self.catalog[model_id]

    def csv(self, name: str, header, rows):
        rows = list(rows)
        if self.out is None:
            return
        write_csv(self.out / name, header, rows)
        self.files.append(name)

    def json(self, name: str, obj):
        if self.out is None:
            return
        write_json(self.out / name, obj)
        self.files.append(name)

    def path(self, name: str) -> Path | None:
        if self.out is None:
            return None
        self.files.append(name)
        return self.out / name

    def finish(self):
        if self.out is None:
            return
        config = {k: v for k, v in vars(self.args).items() if k not in ("out",)}
        models = {m.id: {"path": str(m.path), "sha256": m.sha256} for m in self.catalog
                  if m.id in self.models}
        write_json(self.out / f"{self.args.command}.meta.json", {
            "tool": "dopedppln",
            "version": __version__,
            "command": self.args.command,
            "config": config,
            "model_files": models,
            "outputs": sorted(set(self.files)),
            "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        })


def _crystal(run: Run, length_mm: float = rp.LONG_LENGTH_MM) -> CrystalSpec:
    a = run.args
    return CrystalSpec(run.use(a.model), a.x, a.temp, length_mm, allow_extrapolation=a.allow_extrapolation)


def _print_rows(header, rows):
    sys.stdout.write(csv_text(header, rows))


def _conditions(value):
    return list(GvmCondition) if value is None else [GvmCondition.parse(value)]


# ---------------------------------------------------------------- commands

GVM_COLUMNS = ("model_id", "pm_type", "condition", "x_mol_percent", "T_C", "lambda_nm", "pump_nm",
               "period_um", "theta_deg", "note")


def cmd_gvm(run: Run):
    a = run.args
    cr = _crystal(run)
    lam = parse_grid(a.grid, {"lam": (2000.0, 4800.0, 2.0)})["lam"]
    rows = []
    for cond in _conditions(a.condition):
        for s in solve_gvm(cr, a.type, cond, (lam[0], lam[-1]), float(lam[1] - lam[0])):
            rows.append((a.model, a.type, cond.name, a.x, a.temp, s.wavelength_nm, s.pump_nm, s.period_um,
                         s.theta_deg, s.multiplicity_note))
    _print_rows(GVM_COLUMNS, rows)
    run.csv("gvm.csv", GVM_COLUMNS, rows)


def cmd_scan_doping(run: Run):
    a = run.args
    ax = parse_grid(a.grid, {"lam": (2000.0, 4800.0, 2.0), "x": (0.0, 7.0, 0.1)})
    scan = scan_doping(run.use(a.model), a.type, ax["lam"], ax["x"], a.temp, threads=a.threads,
                       allow_extrapolation=a.allow_extrapolation)
    header = ("x_mol_percent", "GVM1_nm", "GVM2_nm", "GVM3_nm")
    curves = [scan.curve(c, rp.GVM_REFERENCE_NM[c]) for c in GvmCondition]
    rows = [(x, *vals) for x, *vals in zip(scan.dopings, *curves)]
    _print_rows(header, rows)
    run.csv("gvm_vs_doping.csv", header, rows)
    if run.out is not None:
        scan.grid.to_csv(run.path("scan_doping.csv"))
        run.files.append("scan_doping.csv.json")


def cmd_scan_map(run: Run):
    a = run.args
    (plo, phi), (slo, shi) = rp.SCAN_WINDOWS_NM[a.type]
    ax = parse_grid(a.grid, {"pump": (plo, phi, 2.0), "signal": (slo, shi, 2.0)})
    grid = scan_pump_signal(_crystal(run), a.type, ax["pump"], ax["signal"], threads=a.threads)
    lo, hi = grid.period_range(theta_branch=True)
    print(f"{a.model} type-{a.type}: {int(grid.valid.sum())} of {grid.valid.size} points valid; "
          f"period {lo:.3f} to {hi:.3f} um on the 0-90 deg branch")
    if run.out is not None:
        grid.to_csv(run.path("scan_map.csv"))
        run.files.append("scan_map.csv.json")


def cmd_scan_temp(run: Run):
    a = run.args
    ts_axis = parse_grid(a.grid, {"T": (20.0, 120.0, 1.0)})["T"]
    header = ("condition", "T_C", "lambda_nm", "period_um")
    rows, summary = [], []
    for cond in _conditions(a.condition):
        ts = scan_temperature(run.use(a.model), a.type, cond, a.x, ts_axis, rp.GVM_REFERENCE_NM[cond],
                              threads=a.threads, allow_extrapolation=a.allow_extrapolation)
        rows += [(cond.name, t, lam, per) for t, lam, per in zip(ts.temperatures_c, ts.wavelengths_nm,
                                                                  ts.periods_um)]
        summary.append({"condition": cond.name, "delta_nm": ts.delta_nm, "slope_nm_per_C": ts.slope_nm_per_c,
                        "max_linear_deviation_nm": ts.max_linear_deviation_nm})
        print(f"{cond.name}: delta {ts.delta_nm:+.2f} nm, slope {ts.slope_nm_per_c:+.4f} nm/C, "
              f"max deviation from linear {ts.max_linear_deviation_nm:.3f} nm")
    run.csv("scan_temp.csv", header, rows)
    run.json("scan_temp_summary.json", summary)


def _source(run: Run):
    a = run.args
    if PmType.parse(a.type).kind != "type2":
        raise UsageError("--type: joint spectra are built for the degenerate type-II sources only")
    run.use(a.model)
    return rp.gvm_source(run.catalog, a.condition, a.model, a.x, a.temp, a.length, a.bandwidth, a.span, a.n,
                         a.expansion)


def _write_trace(run: Run, stem: str, tr):
    print(f"{stem}: visibility {tr.visibility:.6f}, FWHM {tr.width_fwhm_ps:.4f} ps, baseline {tr.baseline:.6f}")
    if run.out is not None:
        tr.to_csv(run.path(f"{stem}.csv"))
        tr.to_json(run.path(f"{stem}.json"))


def _delays(run: Run):
    if run.args.grid is None:
        return None
    return parse_grid(run.args.grid, {"tau": (-5.0, 5.0, 0.05)})["tau"]


def cmd_jsa(run: Run):
    src = _source(run)
    js = src.jsa()
    sr = schmidt(js)
    print(json.dumps({**src.describe(), "purity": sr.purity, "K": sr.schmidt_number}, indent=2))
    if run.out is not None:
        js.to_csv(run.path("jsa.csv"))
        js.to_json(run.path("jsa.json"), **src.describe())
        sr.to_json(run.path("schmidt.json"))


def cmd_hom2(run: Run):
    a = run.args
    src = _source(run)
    cr = src.crystal
    if a.detune_x is not None:
        cr = cr.replace(x=a.detune_x)
    if a.detune_temp is not None:
        cr = cr.replace(temperature_c=a.detune_temp)
    _write_trace(run, "hom2", two_fold_trace(src.jsa(cr), _delays(run)))


def cmd_hom4(run: Run):
    src = _source(run)
    js = src.jsa()
    print(f"purity {schmidt(js).purity:.6f}")
    _write_trace(run, f"hom4_{run.args.mode}", four_fold_trace(js, js, _delays(run), run.args.mode))


def cmd_deff(run: Run):
    a = run.args
    d = DMatrix.lithium_niobate()
    ang = CrystalAngles(a.theta, a.phi, a.rho)
    ooe, eoe = d_eff_ooe(d, ang), d_eff_eoe(d, ang)
    print(f"d_eff(ooe) = {ooe:.6g} pm/V")
    for name, v in d_eff_ooe_terms(d, ang):
        print(f"  d_{name}: {v:+.6g}")
    print(f"d_eff(eoe) = {eoe:.6g} pm/V")
    for name, v in d_eff_eoe_terms(d, ang):
        print(f"  d_{name}: {v:+.6g}")
    run.json("deff.json", {"angles_deg": {"theta": a.theta, "phi": a.phi, "rho": a.rho}, "ooe_pm_per_V": ooe,
                           "eoe_pm_per_V": eoe, "ooe_terms": dict(d_eff_ooe_terms(d, ang)),
                           "eoe_terms": dict(d_eff_eoe_terms(d, ang))})


def _dict_rows(run: Run, name: str, rows: list[dict]):
    header = list(rows[0])
    body = [[r[k] for k in header] for r in rows]
    _print_rows(header, body)
    run.csv(name, header, body)


def cmd_reproduce(run: Run):
    a = run.args
    cat = run.catalog
    for m in rp.CRYSTALS:
        run.use(m)
    if a.target == "table1":
        _dict_rows(run, "table1.csv", rp.table1(cat, threads=a.threads))
    elif a.target == "table2":
        _dict_rows(run, "table2.csv", rp.table2(cat, threads=a.threads))
    elif a.target == "windows":
        _dict_rows(run, "poling_windows.csv", rp.poling_windows(cat, threads=a.threads))
    elif a.target == "fig7":
        rows = []
        for src, sr in rp.fig7(cat):
            rows.append({**src.describe(), "purity": sr.purity, "K": sr.schmidt_number})
            if run.out is not None:
                src.jsa().to_json(run.path(f"fig7_{src.solution.condition.name}.json"), **src.describe())
        _dict_rows(run, "fig7.csv", rows)
    elif a.target == "fig8":
        _trace_set(run, "fig8", {k: (s.describe() | {"purity": s.schmidt().purity}, tr)
                                 for k, (s, tr) in rp.fig8(cat).items()})
    elif a.target == "fig9":
        _trace_set(run, "fig9", rp.fig9(cat))


def _trace_set(run: Run, stem: str, traces: dict):
    rows = []
    for key, (info, tr) in traces.items():
        rows.append({"trace": key, **{k: info.get(k) for k in ("condition", "length_mm", "bandwidth_nm",
                                                                 "purity", "x", "T_C", "expansion")},
                     "mode": tr.mode, "visibility": tr.visibility, "fwhm_ps": tr.width_fwhm_ps,
                     "extrema": tr.interior_extrema()})
    _dict_rows(run, f"{stem}.csv", rows)
    body = [(key, t, p) for key, (_, tr) in traces.items() for t, p in zip(tr.delays_ps, tr.probabilities)]
    run.csv(f"{stem}_traces.csv", ("trace", "tau_ps", "P"), body)


HANDLERS = {"gvm": cmd_gvm, "scan-doping": cmd_scan_doping, "scan-map": cmd_scan_map, "scan-temp": cmd_scan_temp,
            "jsa": cmd_jsa, "hom2": cmd_hom2, "hom4": cmd_hom4, "deff": cmd_deff, "reproduce": cmd_reproduce}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = apply_config(args, parser)
        catalog = default_catalog(args.models_dir)
        run = Run(args, catalog)
        HANDLERS[args.command](run)
        run.finish()
    except UsageError as exc:
        parser.error(str(exc))
    except (ValueError, ArithmeticError, KeyError, OSError) as exc:
        print(f"dopedppln {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
