"""Verification modes A-D and their reports.

Every row records the grid point, the closed-form policy and value quantities,
the growth exponent ``alpha`` and the verdicts that apply to its mode. Grid points
run in parallel; rows are emitted in grid order. ``lam == 0`` rows are the
analytic limit: a Dirac policy with no sampling and no normality tests.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .config import VerificationConfig
from .exceptions import ConfigError, InvalidParameterError, KnightLQError, NotAdmissibleError
from .lq import (
    non_exploratory_control,
    non_exploratory_value,
    exploratory_value,
    optimal_policy,
    solve_hjb,
    well_posedness_margin,
)
from .model import AgentParams
from .normality import ad_test, ks_test
from .simulation import n_workers, sample_action
from .stability import check_admissibility, stability_coefficients, value_gap

logger = logging.getLogger(__name__)

MODES = ("A", "B", "C", "D")
COLUMNS = (
    "mode", "index", "sigma_upper", "sigma_upper_sq", "lam", "rho", "x", "status",
    "k2", "k1", "k0", "margin", "mu", "sigma_pol", "variance", "alpha", "admissible",
    "stability_pass", "ks_stat", "ks_p", "ks_pass", "ad_stat", "ad_crit", "ad_pass",
    "V", "V_ne", "gap", "gap_reference", "gap_check", "error",
)
DENSITY_COLUMNS = ("series", "sigma_upper", "lam", "rho", "u", "pdf")
DENSITY_POINTS = 201
DENSITY_WIDTH = 4.0
# stand-in temperature when lam == 0; only k0 depends on it and V_ne does not
_REFERENCE_LAM = 1.0


@dataclass
class VerificationReport:
    mode: str
    rows: List[Dict[str, object]]
    summary: Dict[str, bool]
    details: Dict[str, str] = field(default_factory=dict)
    densities: List[Dict[str, float]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.summary) and all(self.summary.values())

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def summary_lines(self) -> List[str]:
        lines = [f"mode {self.mode}"]
        for name, ok in self.summary.items():
            extra = self.details.get(name, "")
            lines.append(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({extra})" if extra else ""))
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return lines

    def write(self, out_dir) -> Dict[str, str]:
        os.makedirs(out_dir, exist_ok=True)
        paths = {
            "rows": os.path.join(out_dir, f"mode_{self.mode}.csv"),
            "summary": os.path.join(out_dir, "summary.txt"),
        }
        with open(paths["rows"], "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n")
            w.writeheader()
            for row in self.rows:
                w.writerow({k: _fmt(row.get(k, "")) for k in COLUMNS})
        if self.densities:
            paths["densities"] = os.path.join(out_dir, f"mode_{self.mode}_densities.csv")
            with open(paths["densities"], "w", newline="", encoding="utf-8") as fh:
                w = csv.DictWriter(fh, fieldnames=DENSITY_COLUMNS, lineterminator="\n")
                w.writeheader()
                for rec in self.densities:
                    w.writerow({k: _fmt(rec[k]) for k in DENSITY_COLUMNS})
        with open(paths["summary"], "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.summary_lines()) + "\n")
        return paths


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _row_rng(seed, mode, index):
    ss = np.random.SeedSequence(int(seed), spawn_key=(ord(mode), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def _evaluate(cfg: VerificationConfig, mode, index, su2, lam, rho, seed, form, normality):
    """One grid point. Failures become a row with ``status`` set, never an exception."""
    row = {"mode": mode, "index": index, "sigma_upper": math.sqrt(su2), "sigma_upper_sq": su2,
           "lam": lam, "rho": rho, "x": cfg.x_test, "status": "ok", "error": ""}
    try:
        m = cfg.model_params()
    except InvalidParameterError as exc:
        row.update(status="invalid-parameters", error=str(exc), stability_pass=False)
        return row, None
    try:
        b = cfg.bounds(su2)
        agent = AgentParams(lam if lam > 0 else _REFERENCE_LAM, rho)
        coeffs = solve_hjb(m, b, agent, form=form)
        pol = optimal_policy(cfg.x_test, coeffs, m, b, lam)
        sc = stability_coefficients(coeffs, m, b, lam, exploratory=True)
        adm = check_admissibility(rho, sc)
        margin = well_posedness_margin(coeffs.k2, m, b)
        v_ne = non_exploratory_value(cfg.x_test, coeffs, m, b, agent)
        if lam > 0:
            v = exploratory_value(cfg.x_test, coeffs)
            gap_ref = value_gap(coeffs, m, b, agent)
        else:
            v, gap_ref = v_ne, 0.0
        gap = v - v_ne
        row.update(
            k2=coeffs.k2, k1=coeffs.k1, k0=coeffs.k0 if lam > 0 else float("nan"),
            margin=margin, mu=pol.mean, sigma_pol=pol.std, variance=pol.variance,
            alpha=sc.alpha, admissible=adm.admissible,
            stability_pass=bool(adm.admissible and coeffs.k2 < 0 and margin > 0),
            V=v, V_ne=v_ne, gap=gap, gap_reference=gap_ref,
            gap_check=abs(gap - gap_ref) <= cfg.epsilon * max(1.0, abs(gap_ref)),
        )
        if lam == 0:
            row["status"] = "dirac-limit"
            # the mean of the limiting policy is the classical feedback
            row["mu"] = non_exploratory_control(cfg.x_test, coeffs, m, b)
    except KnightLQError as exc:
        row.update(status="ill-posed", error=str(exc), stability_pass=False)
        return row, None

    density = None
    if normality and lam > 0:
        samples = sample_action(pol, _row_rng(seed, mode, index), cfg.N)
        ks = ks_test(samples, pol.mean, pol.std)
        ad = ad_test(samples, pol.mean, pol.std)
        row.update(ks_stat=ks.statistic, ks_p=ks.p_value, ks_pass=ks.p_value > 0.05,
                   ad_stat=ad.statistic, ad_crit=ad.critical_value, ad_pass=ad.passed)
    if lam > 0:
        u = np.linspace(pol.mean - DENSITY_WIDTH * pol.std, pol.mean + DENSITY_WIDTH * pol.std,
                        DENSITY_POINTS)
        density = [{"series": f"{mode}{index}", "sigma_upper": math.sqrt(su2), "lam": lam,
                    "rho": rho, "u": float(ui), "pdf": float(p)} for ui, p in zip(u, pol.pdf(u))]
    return row, density


def _run_grid(cfg, mode, points, seed, form, normality):
    def work(item):
        idx, (su2, lam, rho) = item
        return _evaluate(cfg, mode, idx, su2, lam, rho, seed, form, normality)

    items = list(enumerate(points))
    workers = min(n_workers(), max(1, len(items)))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(work, items))
    else:
        results = [work(it) for it in items]
    rows = [r for r, _ in results]
    densities = [rec for _, d in results if d for rec in d]
    return rows, densities


def _ok(row):
    return row["status"] in ("ok", "dirac-limit")


def _strictly_decreasing(values: Sequence[float]) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def _stability_summary(rows, summary, details):
    good = [r for r in rows if r.get("stability_pass")]
    summary["stability: rho > alpha, k2 < 0, K - k2 D^2 su^2 > 0"] = len(good) == len(rows)
    details["stability: rho > alpha, k2 < 0, K - k2 D^2 su^2 > 0"] = f"{len(good)}/{len(rows)} rows"


def _normality_summary(rows, summary, details):
    tested = [r for r in rows if "ks_pass" in r]
    ks = sum(bool(r["ks_pass"]) for r in tested)
    ad = sum(bool(r["ad_pass"]) for r in tested)
    invalid = sum(not _ok(r) for r in rows)
    summary["normality: K-S p-value > 0.05"] = invalid == 0 and ks == len(tested)
    summary["normality: A-D statistic < critical value"] = invalid == 0 and ad == len(tested)
    details["normality: K-S p-value > 0.05"] = f"{ks}/{len(tested)} rows"
    details["normality: A-D statistic < critical value"] = f"{ad}/{len(tested)} rows"


def run_mode_a(cfg: VerificationConfig, seed: int = 0, form: str = "printed") -> VerificationReport:
    """Policy shape, stability and normality for each ``sigma_upper`` at fixed ``(lam, rho)``."""
    lam, rho = cfg.lam, cfg.rho
    grid = sorted(cfg.sigma_upper_sq_grid)
    rows, dens = _run_grid(cfg, "A", [(s, lam, rho) for s in grid], seed, form, normality=True)
    summary, details = {}, {}
    _stability_summary(rows, summary, details)
    _normality_summary(rows, summary, details)
    if len(rows) >= 2:
        ok = all(_ok(r) for r in rows) and _strictly_decreasing([r["variance"] for r in rows])
        summary["sensitivity: dVar/dsigma_upper < 0"] = ok
        details["sensitivity: dVar/dsigma_upper < 0"] = "pairwise over sorted sigma_upper grid"
    return VerificationReport("A", rows, summary, details, dens)


def run_mode_b(cfg: VerificationConfig, seed: int = 0, form: str = "printed") -> VerificationReport:
    """Policy parameters and stability along the ``rho`` grid; variance must fall with ``rho``."""
    grid = sorted(cfg.rho_grid)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError(f"rho grid is not strictly sorted (duplicates in {cfg.rho_grid})")
    lam = cfg.lam
    points = [(s, lam, r) for s in sorted(cfg.sigma_upper_sq_grid) for r in grid]
    rows, dens = _run_grid(cfg, "B", points, seed, form, normality=False)
    summary, details = {}, {}
    _stability_summary(rows, summary, details)
    if all(r["status"] == "invalid-parameters" for r in rows):
        summary["sensitivity: dVar/drho < 0"] = False
        details["sensitivity: dVar/drho < 0"] = "invalid parameters"
        return VerificationReport("B", rows, summary, details, dens)
    ok_all = True
    for s in sorted(cfg.sigma_upper_sq_grid):
        sub = [r for r in rows if r["sigma_upper_sq"] == s]
        admissible = [r for r in sub if r.get("admissible")]
        if len(admissible) < 2:
            raise NotAdmissibleError(
                f"sigma_upper^2={s}: only {len(admissible)} admissible rho values; need >= 2"
            )
        ok_all &= all(_ok(r) for r in sub) and _strictly_decreasing([r["variance"] for r in sub])
    summary["sensitivity: dVar/drho < 0"] = ok_all
    details["sensitivity: dVar/drho < 0"] = "pairwise over sorted rho grid"
    return VerificationReport("B", rows, summary, details, dens)


def _lambda_grid(cfg):
    grid = list(cfg.lambda_grid)
    pos = [v for v in grid if v > 0]
    if not pos:
        raise ConfigError("lambda grid needs at least one positive value")
    if grid[: len(pos)] != pos or any(v != 0 for v in grid[len(pos):]) or len(grid) - len(pos) > 1:
        raise ConfigError("lambda grid must list positive values first, optionally ending in one 0")
    if any(b >= a for a, b in zip(pos, pos[1:])):
        raise ConfigError("lambda grid must be strictly descending")
    return grid


def run_mode_c(cfg: VerificationConfig, seed: int = 0, form: str = "printed") -> VerificationReport:
    """Policy spread along a descending ``lam`` grid for each ``sigma_upper``."""
    lgrid = _lambda_grid(cfg)
    rho = cfg.rho
    sgrid = sorted(cfg.sigma_upper_sq_grid)
    points = [(s, lam, rho) for s in sgrid for lam in lgrid]
    rows, dens = _run_grid(cfg, "C", points, seed, form, normality=False)
    summary, details = {}, {}
    _stability_summary(rows, summary, details)
    dec = scale = mean = True
    for s in sgrid:
        sub = [r for r in rows if r["sigma_upper_sq"] == s]
        if not all(_ok(r) for r in sub):
            dec = scale = mean = False
            continue
        dec &= _strictly_decreasing([r["sigma_pol"] for r in sub])
        ratios = [r["variance"] / r["lam"] for r in sub if r["lam"] > 0]
        scale &= max(ratios) - min(ratios) <= cfg.epsilon * abs(ratios[0])
        mus = [r["mu"] for r in sub]
        mean &= max(mus) - min(mus) <= cfg.epsilon * max(1.0, abs(mus[0]))
    summary["convergence: sigma_pol decreases to 0 as lam -> 0"] = dec
    summary["scaling: sigma_pol^2 / lam constant"] = scale
    summary["invariance: policy mean independent of lam"] = mean
    return VerificationReport("C", rows, summary, details, dens)


def run_mode_d(cfg: VerificationConfig, seed: int = 0, form: str = "printed") -> VerificationReport:
    """``V`` against ``V_ne`` along a descending ``lam`` grid for each ``sigma_upper``."""
    lgrid = _lambda_grid(cfg)
    rho = cfg.rho
    sgrid = sorted(cfg.sigma_upper_sq_grid)
    points = [(s, lam, rho) for s in sgrid for lam in lgrid]
    rows, _ = _run_grid(cfg, "D", points, seed, form, normality=False)
    summary, details = {}, {}
    _stability_summary(rows, summary, details)
    conv = check = True
    for s in sgrid:
        sub = [r for r in rows if r["sigma_upper_sq"] == s]
        if not all(_ok(r) for r in sub):
            conv = check = False
            continue
        conv &= _strictly_decreasing([abs(r["gap"]) for r in sub])
        check &= all(bool(r["gap_check"]) for r in sub)
    summary["convergence: V -> V_ne as lam -> 0"] = conv
    summary["cross-check: gap equals value_gap"] = check
    details["cross-check: gap equals value_gap"] = f"tolerance {cfg.epsilon:g}"
    return VerificationReport("D", rows, summary, details)


RUNNERS = {"A": run_mode_a, "B": run_mode_b, "C": run_mode_c, "D": run_mode_d}


def run_mode(mode: str, cfg: VerificationConfig, seed: int = 0, form: str = "printed",
             out_dir: Optional[str] = None) -> VerificationReport:
    mode = mode.upper()
    if mode not in RUNNERS:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")
    report = RUNNERS[mode](cfg, seed=seed, form=form)
    if out_dir is not None:
        report.write(out_dir)
    return report
