"""Scenario presets, config parsing, batch execution, and structured output.

Configs are flat ``key = value`` text files.  A run produces a trajectory
CSV (fixed column order), a summary JSON with per-check pass/fail results
and the full dissipation-residual history, and an integer exit status.
Sweeps expand a parameter grid over a template config and aggregate
end-state classifications into one CSV.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field, asdict
from itertools import product
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import modulation
from .bubble import BubbleProfile, eval_h, eval_Q, sample_Q
from .energy import (classify as classify_sector, energy as energy_breakdown,
                     exterior_energy, x2_norm)
from .errors import ConfigurationError, HmflowError, NoBubbleError
from .evolve import (StepperConfig, TrajectoryRecord, evolve,
                     dissipation_audit, STATUS_ABORTED, STATUS_BLOWUP,
                     STATUS_GLOBAL)
from .grid import RadialField, RadialGrid, build_grid

CSV_COLUMNS = ["t", "E_total", "E_dirichlet", "E_potential", "X2_norm",
               "sup_abs_u", "s", "sdot", "orth_residual",
               "dissipation_residual", "l4_accum",
               "exterior_energy_R1", "exterior_energy_R10"]

SCENARIOS = ("free", "q_stationarity", "below_threshold_decay",
             "above_threshold_stability", "m1_blowup")

IC_FAMILIES = ("e0_bump", "e1_excited", "q_exact", "custom_samples")

_FLOAT_KEYS = ("r_min", "r_max", "dt", "dt_floor", "t_end", "sample_every",
               "scale_floor", "ic_A", "ic_sigma", "ic_s0", "ic_target_energy")
_INT_KEYS = ("m", "n")
_STR_KEYS = ("scheme", "scenario", "ic_family", "ic_file", "label")
_KNOWN_KEYS = set(_FLOAT_KEYS) | set(_INT_KEYS) | set(_STR_KEYS)

# Presets supply every knob a scenario needs; explicit config keys override.
_SCENARIO_DEFAULTS: Dict[str, Dict[str, object]] = {
    "q_stationarity": dict(m=2, r_min=1e-4, r_max=1e3, n=2048,
                           dt=1e-3, scheme="IMEX1", dt_floor=1e-9,
                           t_end=1.0, sample_every=0.05,
                           ic_family="q_exact", ic_s0=1.0),
    "below_threshold_decay": dict(m=2, r_min=1e-4, r_max=1e3, n=2048,
                                  dt=1e-3, scheme="IMEX1", dt_floor=1e-9,
                                  t_end=20.0, sample_every=0.5,
                                  ic_family="e0_bump", ic_sigma=1.0,
                                  ic_A=1.0, ic_target_energy=0.9 * 2 * (2 * 2)),
    "above_threshold_stability": dict(m=4, r_min=1e-4, r_max=1e3, n=2048,
                                      dt=2e-3, scheme="IMEX1", dt_floor=1e-9,
                                      t_end=20.0, sample_every=0.25,
                                      ic_family="e1_excited", ic_s0=1.0,
                                      ic_sigma=3.0, ic_A=1.0,
                                      ic_target_energy=2.5 * (2 * 4)),
    "m1_blowup": dict(m=1, r_min=1e-6, r_max=1e2, n=3072,
                      dt=2e-3, scheme="IMEX1", dt_floor=1e-9,
                      t_end=25.0, sample_every=0.05, scale_floor=1e-3,
                      ic_family="e1_excited", ic_s0=1.0,
                      ic_sigma=4.0, ic_A=-1.5),
}


@dataclass
class RunConfig:
    m: int = 2
    r_min: float = 1e-4
    r_max: float = 1e3
    n: int = 2048
    dt: float = 1e-3
    scheme: str = "IMEX1"
    dt_floor: float = 1e-9
    t_end: float = 1.0
    sample_every: float = 0.05
    scenario: str = "free"
    scale_floor: Optional[float] = None
    ic_family: str = "q_exact"
    ic_A: Optional[float] = None
    ic_sigma: Optional[float] = None
    ic_s0: Optional[float] = None
    ic_target_energy: Optional[float] = None
    ic_file: Optional[str] = None
    label: str = "run"
    out_dir: str = "."


@dataclass
class RunResult:
    config: RunConfig
    status: str
    checks: Dict[str, bool]
    classification: str
    summary: dict
    record: Optional[TrajectoryRecord] = None
    track: Optional[modulation.ScaleTrack] = None


def parse_config_text(text: str) -> Dict[str, str]:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    out: Dict[str, str] = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {ln}: expected 'key = value', got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if not key or not val:
            raise ConfigurationError(f"line {ln}: empty key or value in {raw!r}")
        if key in out:
            raise ConfigurationError(f"line {ln}: duplicate key {key!r}")
        out[key] = val
    return out


def _coerce(key: str, val: str):
    if key in _INT_KEYS:
        try:
            return int(val)
        except ValueError:
            raise ConfigurationError(f"key {key!r}: expected integer, got {val!r}")
    if key in _FLOAT_KEYS:
        try:
            return float(val)
        except ValueError:
            raise ConfigurationError(f"key {key!r}: expected number, got {val!r}")
    return val


def build_run_config(raw: Dict[str, str], out_dir: Optional[str] = None) -> RunConfig:
    """Validate raw key/value pairs into a RunConfig.

    Scenario presets fill in unspecified keys; every rejection names the
    violated invariant.
    """
    unknown = sorted(set(raw) - _KNOWN_KEYS)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
    merged: Dict[str, object] = {}
    scenario = raw.get("scenario", "free")
    if scenario not in SCENARIOS:
        raise ConfigurationError(
            f"scenario {scenario!r} not in known set {SCENARIOS}")
    merged.update(_SCENARIO_DEFAULTS.get(scenario, {}))
    for key, val in raw.items():
        merged[key] = _coerce(key, val)
    merged["scenario"] = scenario
    if out_dir is not None:
        merged["out_dir"] = out_dir
    cfg = RunConfig(**merged)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.m < 1:
        raise ConfigurationError(f"m must be a positive degree, got {cfg.m}")
    if not 0 < cfg.r_min < cfg.r_max:
        raise ConfigurationError(
            f"need 0 < r_min < r_max, got r_min={cfg.r_min}, r_max={cfg.r_max}")
    if cfg.n < 16:
        raise ConfigurationError(f"n must be at least 16, got {cfg.n}")
    if cfg.dt <= 0 or cfg.dt_floor <= 0 or cfg.dt_floor > cfg.dt:
        raise ConfigurationError(
            f"need 0 < dt_floor <= dt, got dt={cfg.dt}, dt_floor={cfg.dt_floor}")
    if cfg.scheme not in ("IMEX1", "IMEX2"):
        raise ConfigurationError(f"scheme must be IMEX1 or IMEX2, got {cfg.scheme!r}")
    if cfg.t_end <= 0:
        raise ConfigurationError(f"t_end must be positive, got {cfg.t_end}")
    if cfg.sample_every <= 0:
        raise ConfigurationError(
            f"sample_every must be positive, got {cfg.sample_every}")
    if cfg.scale_floor is not None and cfg.scale_floor <= 0:
        raise ConfigurationError(
            f"scale_floor must be positive, got {cfg.scale_floor}")
    if cfg.ic_family not in IC_FAMILIES:
        raise ConfigurationError(
            f"ic_family {cfg.ic_family!r} not in known set {IC_FAMILIES}")
    if cfg.ic_family == "e0_bump":
        if cfg.ic_sigma is None or cfg.ic_sigma <= 0:
            raise ConfigurationError("e0_bump requires ic_sigma > 0")
        if cfg.ic_A is None and cfg.ic_target_energy is None:
            raise ConfigurationError("e0_bump requires ic_A or ic_target_energy")
    elif cfg.ic_family == "e1_excited":
        if cfg.ic_s0 is None or cfg.ic_s0 <= 0:
            raise ConfigurationError("e1_excited requires ic_s0 > 0")
        if cfg.ic_sigma is None or cfg.ic_sigma <= 0:
            raise ConfigurationError("e1_excited requires ic_sigma > 0")
        if cfg.ic_A is None:
            raise ConfigurationError("e1_excited requires ic_A")
    elif cfg.ic_family == "q_exact":
        if cfg.ic_s0 is None or cfg.ic_s0 <= 0:
            raise ConfigurationError("q_exact requires ic_s0 > 0")
    elif cfg.ic_family == "custom_samples":
        if not cfg.ic_file:
            raise ConfigurationError("custom_samples requires ic_file")


def _solve_amplitude(grid: RadialGrid, m: int, shape: np.ndarray,
                     base: np.ndarray, inner: float, target: float,
                     sign: float) -> float:
    """Bisect |A| so that E(base + A*shape) hits the target energy.

    The energy is evaluated by quadrature at every trial; the bracket is
    grown geometrically first, so non-monotone saturation past the bracket
    cannot mislead the bisection.
    """
    def e_of(a):
        fld = RadialField(grid, base + sign * a * shape, inner_limit=inner)
        return energy_breakdown(fld, m).total

    lo, hi = 0.0, 1.0
    e_lo = e_of(lo)
    if e_lo > target:
        raise ConfigurationError(
            f"target energy {target:g} below the A=0 energy {e_lo:g}")
    e_hi = e_of(hi)
    grows = 0
    while e_hi < target:
        hi *= 1.5
        e_hi = e_of(hi)
        grows += 1
        if grows > 60:
            raise ConfigurationError(
                f"target energy {target:g} unreachable by amplitude growth")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if e_of(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13 * max(1.0, hi):
            break
    return sign * 0.5 * (lo + hi)


def build_initial_condition(cfg: RunConfig, grid: RadialGrid) -> RadialField:
    """Construct the configured initial data and enforce its sector window."""
    m = cfg.m
    if cfg.ic_family == "e0_bump":
        shape = eval_h(BubbleProfile(m, cfg.ic_sigma), grid.nodes)
        if cfg.ic_target_energy is not None:
            sign = 1.0 if cfg.ic_A is None or cfg.ic_A >= 0 else -1.0
            A = _solve_amplitude(grid, m, shape, np.zeros_like(shape), 0.0,
                                 cfg.ic_target_energy, sign)
        else:
            A = cfg.ic_A
        fld = RadialField(grid, A * shape, inner_limit=0.0)
        e_tot = energy_breakdown(fld, m).total
        if not e_tot < 2 * (2.0 * m):
            raise ConfigurationError(
                f"e0_bump energy {e_tot:g} not below the 2E(Q) = {4.0 * m:g} window")
    elif cfg.ic_family == "e1_excited":
        base = eval_Q(BubbleProfile(m, cfg.ic_s0), grid.nodes)
        shape = eval_h(BubbleProfile(m, cfg.ic_sigma), grid.nodes)
        if cfg.ic_target_energy is not None:
            sign = 1.0 if cfg.ic_A >= 0 else -1.0
            A = _solve_amplitude(grid, m, shape, base, np.pi,
                                 cfg.ic_target_energy, sign)
        else:
            A = cfg.ic_A
        fld = RadialField(grid, base + A * shape, inner_limit=np.pi)
        e_tot = energy_breakdown(fld, m).total
        if not (2.0 * m) * (1 - 1e-9) <= e_tot <= 3 * (2.0 * m):
            raise ConfigurationError(
                f"e1_excited energy {e_tot:g} outside the "
                f"[E(Q), 3E(Q)] = [{2.0 * m:g}, {6.0 * m:g}] window")
    elif cfg.ic_family == "q_exact":
        fld = sample_Q(BubbleProfile(m, cfg.ic_s0), grid)
    else:  # custom_samples
        try:
            data = np.loadtxt(cfg.ic_file)
        except (OSError, ValueError) as exc:
            raise ConfigurationError(
                f"cannot read custom_samples file {cfg.ic_file!r}: {exc}")
        if data.ndim != 2 or data.shape[1] != 2:
            raise ConfigurationError(
                f"custom_samples file {cfg.ic_file!r} must have two columns (r, u)")
        r_in, u_in = data[:, 0], data[:, 1]
        if np.any(r_in <= 0) or np.any(np.diff(r_in) <= 0):
            raise ConfigurationError(
                "custom_samples radii must be positive and strictly increasing")
        vals = np.interp(np.log(grid.nodes), np.log(r_in), u_in)
        inner = np.pi if abs(u_in[0] - np.pi) < abs(u_in[0]) else 0.0
        fld = RadialField(grid, vals, inner_limit=inner)
        sector = classify_sector(fld, m)
        if sector.label not in ("E0", "E1"):
            raise ConfigurationError(
                "custom_samples data does not classify into sector E0 or E1")
    return fld


# ---- single run ----------------------------------------------------------

def _fmt(x: float) -> str:
    return "%.12g" % x


def _json_default(obj):
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _trajectory_rows(cfg: RunConfig, rec: TrajectoryRecord,
                     track: Optional[modulation.ScaleTrack],
                     diss_resid: List[float]) -> List[List[str]]:
    rows = []
    n_track = 0 if track is None else len(track.times)
    for k, t in enumerate(rec.times):
        fld = rec.fields[k]
        br = energy_breakdown(fld, cfg.m)
        # the X^2 norm is taken on the offset so it stays finite in
        # the degree-m sector
        x2 = x2_norm(RadialField(fld.grid, fld.offset()), cfg.m)
        in_track = track is not None and k < n_track
        row = [t, br.total, br.dirichlet, br.potential, x2,
               float(np.max(np.abs(fld.values))),
               track.scales[k] if in_track else float("nan"),
               track.sdots[k] if in_track else float("nan"),
               track.orth_residuals[k] if in_track else float("nan"),
               diss_resid[k], rec.l4_accum[k],
               exterior_energy(fld, cfg.m, 1.0),
               exterior_energy(fld, cfg.m, 10.0)]
        rows.append([_fmt(v) for v in row])
    return rows


def _scenario_checks(cfg: RunConfig, rec: TrajectoryRecord,
                     track: Optional[modulation.ScaleTrack]) -> Dict[str, bool]:
    checks: Dict[str, bool] = {}
    e0 = rec.energies[0].total
    tag = cfg.scenario
    if tag == "q_stationarity":
        drift = max(
            x2_norm(RadialField(rec.grid, f.values - rec.fields[0].values),
                           cfg.m)
            for f in rec.fields)
        checks["x2_drift_small"] = drift <= 1e-3 * np.sqrt(2 * e0)
    elif tag == "below_threshold_decay":
        checks["status_global"] = rec.status == STATUS_GLOBAL
        checks["energy_decayed"] = rec.energies[-1].total < 0.05 * e0
    elif tag == "above_threshold_stability":
        checks["status_global"] = rec.status == STATUS_GLOBAL
        ok_scale = ok_resid = ok_orth = False
        if track is not None and len(track.times) == len(rec.times):
            s_inf = track.scales[-1]
            half = track.scales[len(track.scales) // 2:]
            ok_scale = bool(np.max(np.abs(half - s_inf)) < 0.05 * s_inf)
            diff = RadialField(
                rec.grid,
                rec.fields[-1].values
                - eval_Q(BubbleProfile(cfg.m, s_inf), rec.grid.nodes))
            ok_resid = energy_breakdown(diff, cfg.m).total < 0.05 * (2.0 * cfg.m)
            ok_orth = not bool(track.flagged.any())
        checks["scale_stabilized"] = ok_scale
        checks["bubble_residual_small"] = ok_resid
        checks["orthogonality_clean"] = ok_orth
    elif tag == "m1_blowup":
        checks["status_blowup"] = rec.status == STATUS_BLOWUP
        ok_decades = ok_ratio = ok_rate = False
        # the m=1 orthogonality pairing is tail-dominated (sin Q decays like
        # 1/r, borderline square-integrable), so the concentration-scale
        # history drives the rate analysis here
        mon = concentration_scale_track(rec)
        if len(mon.times) >= 4:
            s, t = mon.scales, mon.times
            ok_decades = bool(np.log10(np.max(s) / s[-1]) >= 1.5)
            try:
                fit = modulation.fit_blowup_rate(_collapse_window(mon))
                ok_rate = fit.L_fit == 1
                tau = fit.T_est - t
                if np.all(tau > 0):
                    ratio = s / np.sqrt(tau)
                    in_last = s <= 10 * s[-1]
                    last_dec = ratio[in_last]
                    ok_ratio = bool(len(last_dec) >= 2
                                    and last_dec[-1] < last_dec[0])
            except HmflowError:
                pass
        checks["scale_fell_1p5_decades"] = ok_decades
        checks["ratio_to_sqrt_decreasing"] = ok_ratio
        checks["rate_exponent_is_1"] = ok_rate
    return checks


def concentration_scale_track(rec: TrajectoryRecord) -> modulation.ScaleTrack:
    """ScaleTrack built from the blow-up monitor's concentration estimates."""
    t = np.asarray(rec.times)
    s = np.asarray(rec.scale_estimates)
    ok = np.isfinite(s)
    t, s = t[ok], s[ok]
    sdot = np.gradient(s, t) if len(t) >= 2 else np.zeros_like(s)
    return modulation.ScaleTrack(t, s, sdot, np.zeros(len(t), dtype=bool),
                                 np.full(len(t), np.nan))


def _collapse_window(track: modulation.ScaleTrack) -> modulation.ScaleTrack:
    """Strictly-decreasing suffix, with the departure transient (scales
    above a third of the suffix maximum) discarded."""
    tail = _shrinking_tail(track)
    if len(tail.scales) == 0:
        return tail
    keep = tail.scales <= tail.scales.max() / 3.0
    if keep.sum() < 4:
        return tail
    sl = np.flatnonzero(keep)
    lo = sl[0]
    return modulation.ScaleTrack(tail.times[lo:], tail.scales[lo:],
                                 tail.sdots[lo:], tail.flagged[lo:],
                                 tail.orth_residuals[lo:],
                                 tail.truncated_reason)


def _shrinking_tail(track: modulation.ScaleTrack) -> modulation.ScaleTrack:
    """Longest strictly-decreasing suffix of a scale track."""
    s = track.scales
    k = len(s) - 1
    while k > 0 and s[k - 1] > s[k]:
        k -= 1
    sl = slice(k, len(s))
    return modulation.ScaleTrack(track.times[sl], s[sl], track.sdots[sl],
                                 track.flagged[sl], track.orth_residuals[sl],
                                 track.truncated_reason)


def _classify_end_state(cfg: RunConfig, rec: TrajectoryRecord,
                        track: Optional[modulation.ScaleTrack]) -> str:
    if rec.status == STATUS_BLOWUP:
        return "Blowup"
    if rec.status != STATUS_GLOBAL:
        return "Undetermined"
    if rec.energies[-1].total < 0.05 * rec.energies[0].total:
        return "Decayed"
    if track is not None and len(track.times) == len(rec.times):
        s_inf = track.scales[-1]
        half = track.scales[len(track.scales) // 2:]
        diff = RadialField(
            rec.grid,
            rec.fields[-1].values
            - eval_Q(BubbleProfile(cfg.m, s_inf), rec.grid.nodes))
        if (np.max(np.abs(half - s_inf)) < 0.05 * s_inf
                and energy_breakdown(diff, cfg.m).total < 0.05 * (2.0 * cfg.m)):
            return "ConvergedToQ"
    return "Undetermined"


def execute(cfg: RunConfig) -> RunResult:
    """Run the configured scenario and gather diagnostics (no file I/O)."""
    grid = build_grid(cfg.r_min, cfg.r_max, cfg.n)
    u0 = build_initial_condition(cfg, grid)
    stepper = StepperConfig(dt=cfg.dt, scheme=cfg.scheme, dt_floor=cfg.dt_floor)
    rec = evolve(u0, cfg.m, cfg.t_end, stepper,
                 sample_every=cfg.sample_every, scale_floor=cfg.scale_floor)
    track = None
    if u0.inner_limit == np.pi:
        track = modulation.track_modulation(rec, s_init=cfg.ic_s0 or 1.0)
    diss = dissipation_audit(rec)
    checks = _scenario_checks(cfg, rec, track)
    classification = _classify_end_state(cfg, rec, track)
    summary = {
        "scenario": cfg.scenario,
        "label": cfg.label,
        "status": rec.status,
        "classification": classification,
        "checks": checks,
        "final_metrics": {
            "t_end": rec.times[-1],
            "E_initial": rec.energies[0].total,
            "E_final": rec.energies[-1].total,
            "sup_abs_u_final": float(np.max(np.abs(rec.fields[-1].values))),
            "s_final": (float(track.scales[-1])
                        if track is not None and len(track.times) else None),
            "l4_accum_final": rec.l4_accum[-1],
            "max_dissipation_residual": max(diss),
        },
        "dissipation_residual_history": list(diss),
        "provenance": {
            "grid": {"r_min": cfg.r_min, "r_max": cfg.r_max, "n": cfg.n},
            "stepper": {"dt": cfg.dt, "scheme": cfg.scheme,
                        "dt_floor": cfg.dt_floor,
                        "scale_floor": cfg.scale_floor},
            "initial_condition": {
                "family": cfg.ic_family,
                "A": cfg.ic_A, "sigma": cfg.ic_sigma, "s0": cfg.ic_s0,
                "target_energy": cfg.ic_target_energy, "file": cfg.ic_file},
        },
    }
    if track is not None and track.truncated_reason:
        summary["scale_track_truncated"] = track.truncated_reason
    return RunResult(cfg, rec.status, checks, classification, summary, rec, track)


def run(cfg: RunConfig) -> int:
    """Execute one scenario, write trajectory.csv and summary.json.

    Exit status: 0 all checks passed, 2 solver aborted, 3 checks failed.
    """
    os.makedirs(cfg.out_dir, exist_ok=True)
    result = execute(cfg)
    rec = result.record
    diss = result.summary["dissipation_residual_history"]
    rows = _trajectory_rows(cfg, rec, result.track, diss)
    csv_path = os.path.join(cfg.out_dir, f"{cfg.label}_trajectory.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        writer.writerows(rows)
    json_path = os.path.join(cfg.out_dir, f"{cfg.label}_summary.json")
    with open(json_path, "w") as fh:
        json.dump(result.summary, fh, indent=2, sort_keys=True,
                  default=_json_default)
        fh.write("\n")
    if result.status == STATUS_ABORTED:
        return 2
    if result.checks and not all(result.checks.values()):
        return 3
    return 0


# ---- sweeps --------------------------------------------------------------

def parse_grid_file(text: str) -> List[Tuple[str, List[str]]]:
    """Parameter grid: ``key = v1, v2, ...`` lines, Cartesian product."""
    axes: List[Tuple[str, List[str]]] = []
    seen = set()
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(
                f"grid line {ln}: expected 'key = v1, v2, ...', got {raw!r}")
        key, vals = (part.strip() for part in line.split("=", 1))
        if key in seen:
            raise ConfigurationError(f"grid line {ln}: duplicate key {key!r}")
        if key not in _KNOWN_KEYS:
            raise ConfigurationError(f"grid line {ln}: unknown config key {key!r}")
        values = [v.strip() for v in vals.replace(",", " ").split()]
        if not values:
            raise ConfigurationError(f"grid line {ln}: no values for {key!r}")
        seen.add(key)
        axes.append((key, values))
    return axes


def _sweep_point(args):
    idx, base_raw, overrides, out_dir = args
    raw = dict(base_raw)
    raw.update(overrides)
    row = {"run_id": "%04d" % idx}
    row.update(overrides)
    try:
        cfg = build_run_config(raw, out_dir=out_dir)
        cfg.label = "run_%04d" % idx
        result = execute(cfg)
        row["status"] = result.status
        row["classification"] = result.classification
        row["E_initial"] = _fmt(result.summary["final_metrics"]["E_initial"])
        row["E_final"] = _fmt(result.summary["final_metrics"]["E_final"])
        s_fin = result.summary["final_metrics"]["s_final"]
        row["s_final"] = "" if s_fin is None else _fmt(s_fin)
        row["error"] = ""
    except HmflowError as exc:
        row["status"] = "Failed"
        row["classification"] = "Undetermined"
        row["E_initial"] = row["E_final"] = row["s_final"] = ""
        row["error"] = str(exc)
    return idx, row


def sweep(base_raw: Dict[str, str], axes: List[Tuple[str, List[str]]],
          out_dir: str, threads: int = 1) -> List[dict]:
    """Run the Cartesian product of the grid over the template config.

    Individual failures are recorded in their row; the sweep continues.
    Returns the rows and writes ``sweep.csv`` in out_dir.
    """
    os.makedirs(out_dir, exist_ok=True)
    keys = [k for k, _ in axes]
    points = list(product(*(vals for _, vals in axes))) if axes else []
    jobs = [(i, base_raw, dict(zip(keys, combo)), out_dir)
            for i, combo in enumerate(points)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = [row for _, row in sorted(pool.map(_sweep_point, jobs))]
    else:
        rows = [_sweep_point(job)[1] for job in jobs]
    header = ["run_id"] + keys + ["status", "classification",
                                  "E_initial", "E_final", "s_final", "error"]
    path = os.path.join(out_dir, "sweep.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return rows
