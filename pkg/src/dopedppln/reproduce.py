"""Recipes that regenerate the reference tables and figure data sets.

Each recipe returns plain rows (lists of dicts) or result objects; the CLI
turns them into CSV/JSON files and the acceptance tests read them directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dispersion import Catalog
from .interference import HomTrace, four_fold_trace, two_fold_trace
from .phasematch import (
    TYPE2,
    CrystalSpec,
    GvmCondition,
    GvmSolution,
    pick_root,
    scan_doping,
    scan_pump_signal,
    scan_temperature,
    solve_gvm,
)
from .spectrum import (
    JointSpectrum,
    PumpSpec,
    SchmidtResult,
    bandwidth_for_purity,
    build_jsa,
    degenerate_center,
    optimize_pump_bandwidth,
    schmidt,
)

CRYSTALS = ("MgLN", "ZnLN", "InZnLN")
GVM_REFERENCE_NM = {GvmCondition.GVM1: 2480.0, GvmCondition.GVM2: 4000.0, GvmCondition.GVM3: 3200.0}
JSA_SPANS_NM = {GvmCondition.GVM1: 60.0, GvmCondition.GVM2: 130.0, GvmCondition.GVM3: 40.0}
ROOM_TEMPERATURE_C = 24.5
SCAN_WINDOWS_NM = {
    "II": ((1000.0, 2400.0), (2000.0, 5000.0)),
    "I": ((300.0, 900.0), (500.0, 5000.0)),
    "0": ((600.0, 1500.0), (700.0, 5000.0)),
}
HERALD_PURITY = 0.968
HERALD_LENGTH_MM = 30.0
LONG_LENGTH_MM = 50.0
DETUNED_DOPINGS = (4.90, 4.95, 5.05, 5.10)
DETUNED_TEMPERATURES = (22.5, 23.5, 25.5, 26.5)


def table1(catalog: Catalog, crystals=CRYSTALS, dopings=None, temperature_c: float = ROOM_TEMPERATURE_C,
           threads: int = 1) -> list[dict]:
    """GVM wavelengths versus doping: ends of the axis, maximum, span."""
    xs = np.round(np.arange(0.0, 7.0 + 1e-9, 0.1), 10) if dopings is None else np.asarray(dopings, float)
    rows = []
    for name in crystals:
        scan = scan_doping(catalog[name], TYPE2, np.array([3000.0]), xs, temperature_c, threads=threads)
        for cond in GvmCondition:
            s = scan.summary(cond, GVM_REFERENCE_NM[cond])
            rows.append({"crystal": name, "condition": cond.name, "x_first": float(xs[0]),
                         "x_last": float(xs[-1]), "lambda_first_nm": s["first"], "lambda_last_nm": s["last"],
                         "lambda_max_nm": s["max"], "x_at_max": s["x_at_max"], "span_nm": s["span"]})
    return rows


def table2(catalog: Catalog, crystals=CRYSTALS, x: float = 5.0, t_low: float = 20.0, t_high: float = 120.0,
           threads: int = 1) -> list[dict]:
    """GVM wavelength and period at ``t_low`` plus the change up to ``t_high``."""
    rows = []
    for name in crystals:
        for cond in GvmCondition:
            ts = scan_temperature(catalog[name], TYPE2, cond, x, [t_low, t_high], GVM_REFERENCE_NM[cond],
                                  threads=threads)
            rows.append({"crystal": name, "condition": cond.name, "x": x, "T_C": t_low,
                         "lambda_nm": float(ts.wavelengths_nm[0]), "period_um": float(ts.periods_um[0]),
                         "delta_lambda_nm": ts.delta_nm, "T_high_C": t_high})
    return rows


def poling_windows(catalog: Catalog, crystals=CRYSTALS, x: float = 5.0, temperature_c: float = ROOM_TEMPERATURE_C,
                   pitch_nm: float = 2.0, theta_branch: bool = True, threads: int = 1) -> list[dict]:
    """Poling-period range of each non-degenerate map and their union per type."""
    rows = []
    for label, (pw, sw) in SCAN_WINDOWS_NM.items():
        lows, highs = [], []
        for name in crystals:
            cr = CrystalSpec(catalog[name], x, temperature_c)
            grid = scan_pump_signal(cr, label, np.arange(pw[0], pw[1] + 1e-9, pitch_nm),
                                    np.arange(sw[0], sw[1] + 1e-9, pitch_nm), threads=threads)
            lo, hi = grid.period_range(theta_branch)
            lows.append(lo)
            highs.append(hi)
            rows.append({"type": label, "crystal": name, "period_min_um": lo, "period_max_um": hi})
        rows.append({"type": label, "crystal": "all", "period_min_um": min(lows), "period_max_um": max(highs)})
    return rows


@dataclass(frozen=True)
class Source:
    """A degenerate type-II GVM source with its pump and JSA grid."""

    solution: GvmSolution
    crystal: CrystalSpec
    pump: PumpSpec
    span_nm: float
    n: int = 200
    expansion: str = "exact"

    @property
    def center(self) -> tuple[float, float]:
        return degenerate_center(self.solution)

    def jsa(self, crystal: CrystalSpec | None = None, expansion: str | None = None) -> JointSpectrum:
        return build_jsa(crystal or self.crystal, TYPE2, self.pump, self.center, self.span_nm, self.n,
                         expansion or self.expansion)

    def schmidt(self) -> SchmidtResult:
        return schmidt(self.jsa())

    def describe(self) -> dict:
        return {"condition": self.solution.condition.name, "lambda_nm": self.solution.wavelength_nm,
                "period_um": self.crystal.period_um, "length_mm": self.crystal.length_mm,
                "bandwidth_nm": self.pump.bandwidth_nm, "pump_fwhm_nm": self.pump.fwhm_nm,
                "span_nm": self.span_nm, "n": self.n, "expansion": self.expansion}


def gvm_source(catalog: Catalog, condition, model: str = "MgLN", x: float = 5.0,
               temperature_c: float = ROOM_TEMPERATURE_C, length_mm: float = LONG_LENGTH_MM,
               bandwidth_nm: float | None = None, span_nm: float | None = None, n: int = 200,
               expansion: str = "exact") -> Source:
    """Source at a GVM point; the pump bandwidth is optimised when not given."""
    cond = GvmCondition.parse(condition)
    base = CrystalSpec(catalog[model], x, temperature_c, length_mm)
    sol = pick_root(solve_gvm(base, TYPE2, cond), GVM_REFERENCE_NM[cond])
    if sol is None:
        raise ValueError(f"no {cond.name} root for {model} at x={x}, T={temperature_c}")
    crystal = base.replace(period_um=sol.period_um)
    span = JSA_SPANS_NM[cond] if span_nm is None else span_nm
    center = degenerate_center(sol)
    if bandwidth_nm is None:
        bandwidth_nm, _ = optimize_pump_bandwidth(crystal, TYPE2, center, span, n, expansion=expansion)
    return Source(sol, crystal, PumpSpec(sol.pump_nm, bandwidth_nm), span, n, expansion)


def herald_source(catalog: Catalog, purity: float = HERALD_PURITY, length_mm: float = HERALD_LENGTH_MM,
                  window=(0.05, 10.0), **kw) -> Source:
    """GVM1 source whose pump bandwidth gives the requested purity.

    Purity rises monotonically with bandwidth over ``window`` on the
    default 60 nm grid, so the root is unique there.
    """
    probe = gvm_source(catalog, GvmCondition.GVM1, length_mm=length_mm, bandwidth_nm=1.0, **kw)
    d = bandwidth_for_purity(probe.crystal, TYPE2, probe.center, probe.span_nm, purity, probe.n,
                             window=window)
    return Source(probe.solution, probe.crystal, PumpSpec(probe.pump.center_nm, d), probe.span_nm, probe.n)


def fig7(catalog: Catalog, length_mm: float = LONG_LENGTH_MM, n: int = 200) -> list[tuple[Source, SchmidtResult]]:
    """Purity-optimised JSAs at the three GVM points of 5 mol% MgLN."""
    return [(src, src.schmidt()) for src in
            (gvm_source(catalog, c, length_mm=length_mm, n=n) for c in GvmCondition)]


def fig8(catalog: Catalog, n: int = 200) -> dict[str, tuple[Source, HomTrace]]:
    """Heralded two-source interference.

    ``herald_*`` traces use the GVM1 source of purity 0.968 (30 mm);
    ``long_*`` traces use the same pump with the crystal lengthened to 50 mm.
    """
    src = herald_source(catalog, n=n)
    js = src.jsa()
    long_src = Source(src.solution, src.crystal.replace(length_mm=LONG_LENGTH_MM), src.pump, src.span_nm, n)
    ljs = long_src.jsa()
    return {
        "herald_two_signals": (src, four_fold_trace(js, js, mode="two_signals")),
        "herald_two_idlers": (src, four_fold_trace(js, js, mode="two_idlers")),
        "long_two_signals": (long_src, four_fold_trace(ljs, ljs, mode="two_signals")),
        "long_two_idlers": (long_src, four_fold_trace(ljs, ljs, mode="two_idlers")),
    }


def fig9(catalog: Catalog, n: int = 200, expansion: str = "linear") -> dict[str, tuple[dict, HomTrace]]:
    """Signal-idler interference of the GVM3 source, matched and detuned.

    The poling period and pump stay at the matched design while the doping
    or the temperature of the crystal changes.
    """
    src = gvm_source(catalog, GvmCondition.GVM3, n=n, expansion=expansion)
    out = {"matched": (src.describe(), two_fold_trace(src.jsa()))}
    for x in DETUNED_DOPINGS:
        out[f"x={x:.2f}"] = ({**src.describe(), "x": x}, two_fold_trace(src.jsa(src.crystal.replace(x=x))))
    for t in DETUNED_TEMPERATURES:
        out[f"T={t:.1f}"] = ({**src.describe(), "T_C": t},
                             two_fold_trace(src.jsa(src.crystal.replace(temperature_c=t))))
    return out
