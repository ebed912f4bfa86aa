"""Config-driven batch front end.

    foldtail simulate <config.json> --out DIR [--seed N] [--samples N] [--workers N]
    foldtail equilibria <config.json> --alpha-grid lo:hi:n
    foldtail fit <losses.csv> --u-quantile q

Exit status: 0 success, 1 a verification invariant failed, 2 error.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .errors import (ArtifactIOError, ConfigParseError, ConfigValidationError, FoldTailError,
                     NoBranchOnSide, PwmDegenerate)
from .evt import (ExceedanceSet, GpdFit, extract_exceedances, fit_gpd_mle, fit_gpd_pwm,
                  hill_curve, hill_estimator, mean_excess_curve)
from .jumpmap import BranchSpec, LossMap
from .potentials import (PotentialModel, Side, branch_exponent_estimate, equilibrium_branches,
                         find_critical_threshold)
from .sampling import _PARAMS, AlphaDistribution, Family, sample_losses
from .verify import EquivalenceReport, TailMatchReport, check_event_equivalence, check_tail_match

TOP_KEYS = ("potential", "branch", "loss", "alpha_dist", "run")
M_AGREEMENT = 0.05
BRANCH_GRID = 201
MEAN_EXCESS_POINTS = 40
HILL_POINTS = 40

SURVIVAL_COLUMNS = ("y", "empirical_survival", "analytic_survival", "gpd_survival")


@dataclass(frozen=True)
class RunSettings:
    n_samples: int
    seed: int
    u_quantile: float = 0.99
    y_grid_size: int = 20


@dataclass(frozen=True)
class ScenarioConfig:
    potential: PotentialModel | None
    branch: BranchSpec
    loss: LossMap
    alpha_dist: AlphaDistribution
    run: RunSettings
    side: Side = Side.ABOVE
    m_estimate: float | None = None
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


@dataclass
class RunArtifacts:
    provenance: dict[str, str]
    survival_rows: list[tuple[float, ...]]
    exceedances: ExceedanceSet
    exceedance_alphas: np.ndarray
    fit_summary: list[tuple[str, Any]]
    equivalence: EquivalenceReport | None = None
    tail: TailMatchReport | None = None
    branch_rows: list[tuple] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        ok = True
        if self.equivalence is not None:
            ok = ok and self.equivalence.passed
        if self.tail is not None:
            ok = ok and self.tail.analytic_valid
        return ok


# ---------------------------------------------------------------- formatting

def fmt(v) -> str:
    """Locale-independent, lossless text for a table cell."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if hasattr(v, "value"):
        return str(v.value)
    return str(v)


def _parse_cell(s: str):
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def write_table(path: Path, columns, rows, provenance: dict[str, str] | None = None) -> Path:
    buf = io.StringIO()
    for k, v in (provenance or {}).items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    try:
        with open(path, "w", encoding="ascii", newline="") as fh:
            fh.write(buf.getvalue())
    except OSError as exc:
        raise ArtifactIOError(f"cannot write {path}: {exc}") from exc
    return Path(path)


def read_table(path) -> tuple[dict[str, str], list[str], list[list]]:
    """Inverse of ``write_table``: (provenance, header, parsed rows)."""
    prov: dict[str, str] = {}
    body = []
    with open(path, encoding="ascii") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition(": ")
                prov[key] = val
            else:
                body.append(line)
    rows = list(csv.reader(body))
    if not rows:
        return prov, [], []
    return prov, rows[0], [[_parse_cell(c) for c in r] for r in rows[1:]]


# ---------------------------------------------------------------- config

def _need(section: dict, key: str, where: str, errors: list[str]):
    if key not in section:
        errors.append(f"{where}.{key}: missing required field")
        return None
    return section[key]


def _section(raw: dict, key: str, errors: list[str]) -> dict | None:
    val = raw.get(key)
    if val is None:
        return None
    if not isinstance(val, dict):
        errors.append(f"{key}: expected an object")
        return None
    return val


def _build_potential(sec, errors):
    if sec is None:
        return None
    form = _need(sec, "form", "potential", errors)
    rng = sec.get("alpha_range")
    try:
        if rng is not None and len(rng) != 2:
            raise ValueError("alpha_range must be [lo, hi]")
        return PotentialModel(form, tuple(sec.get("coefficients", ())), tuple(rng) if rng else None)
    except (ValueError, TypeError, FoldTailError) as exc:
        if form is not None:
            errors.append(f"potential: {exc}")
    return None


def _build_alpha_dist(sec, errors):
    if sec is None:
        errors.append("alpha_dist: missing required section")
        return None
    fam = _need(sec, "family", "alpha_dist", errors)
    params = _need(sec, "parameters", "alpha_dist", errors)
    if fam is None or params is None:
        return None
    try:
        family = Family(fam)
        if isinstance(params, dict):
            names = _PARAMS[family]
            if "shift" in names:
                params = {"shift": 0.0, **params}
            missing = [n for n in names if n not in params]
            if missing:
                raise ValueError(f"missing parameters {missing}")
            params = [params[n] for n in names]
        return AlphaDistribution(family, tuple(params))
    except (ValueError, TypeError) as exc:
        errors.append(f"alpha_dist: {exc}")
    return None


def _build_run(sec, errors):
    if sec is None:
        errors.append("run: missing required section")
        return None
    n = _need(sec, "n_samples", "run", errors)
    seed = _need(sec, "seed", "run", errors)
    u_q = sec.get("u_quantile", 0.99)
    grid = sec.get("y_grid_size", 20)
    bad = len(errors)
    if n is not None and (not isinstance(n, int) or isinstance(n, bool) or n < 1):
        errors.append(f"run.n_samples: must be a positive integer, got {n!r}")
    if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2 ** 64):
        errors.append(f"run.seed: must be a 64-bit unsigned integer, got {seed!r}")
    if not isinstance(u_q, (int, float)) or not 0 < u_q < 1:
        errors.append(f"run.u_quantile: must lie in (0, 1), got {u_q!r}")
    if not isinstance(grid, int) or grid < 2:
        errors.append(f"run.y_grid_size: must be an integer >= 2, got {grid!r}")
    if len(errors) > bad or n is None or seed is None:
        return None
    return RunSettings(n, seed, float(u_q), grid)


def config_from_dict(raw: dict) -> ScenarioConfig:
    errors: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigValidationError(["config: top level must be a JSON object"])
    for k in TOP_KEYS:
        if k not in raw:
            errors.append(f"{k}: missing top-level key")
    for k in raw:
        if k not in TOP_KEYS:
            errors.append(f"{k}: unknown top-level key")

    potential = _build_potential(_section(raw, "potential", errors), errors)
    alpha_dist = _build_alpha_dist(_section(raw, "alpha_dist", errors), errors)
    run = _build_run(_section(raw, "run", errors), errors)

    loss = None
    lsec = _section(raw, "loss", errors)
    if lsec is None:
        errors.append("loss: missing required section")
    else:
        p = _need(lsec, "p", "loss", errors)
        if p is not None:
            try:
                loss = LossMap(p, lsec.get("baseline", 0.0))
            except (ValueError, TypeError) as exc:
                errors.append(f"loss: {exc}")

    branch, side, m_est = None, Side.ABOVE, None
    bsec = _section(raw, "branch", errors)
    if bsec is None:
        errors.append("branch: missing required section")
    else:
        try:
            side = Side(bsec.get("side", "Above"))
        except ValueError:
            errors.append(f"branch.side: must be Above or Below, got {bsec.get('side')!r}")
        mode = _need(bsec, "mode", "branch", errors)
        m = _need(bsec, "m", "branch", errors)
        alpha_c = _need(bsec, "alpha_c", "branch", errors)
        if alpha_c == "auto":
            if potential is None:
                errors.append("branch.alpha_c: 'auto' requires a potential with an alpha_range")
                alpha_c = None
            else:
                try:
                    alpha_c = find_critical_threshold(potential).alpha_c
                except (FoldTailError, ValueError) as exc:
                    errors.append(f"branch.alpha_c: auto detection failed: {exc}")
                    alpha_c = None
        if potential is not None and alpha_c is not None:
            try:
                m_est = branch_exponent_estimate(potential, float(alpha_c), side)
            except (NoBranchOnSide, FoldTailError, ValueError) as exc:
                if m == "auto" or m is not None:
                    errors.append(f"branch.m: cannot estimate branch exponent: {exc}")
        if m == "auto":
            if m_est is None:
                errors.append("branch.m: 'auto' requires a potential")
            m = m_est
        elif m is not None and m_est is not None and isinstance(m, (int, float)):
            if abs(m - m_est) > M_AGREEMENT:
                errors.append(
                    f"branch.m: declared {m} disagrees with the potential's estimated exponent "
                    f"{m_est:.6g} (tolerance {M_AGREEMENT})")
        if mode is not None and m is not None and alpha_c is not None:
            try:
                branch = BranchSpec(mode, m, bsec.get("C", 1.0), alpha_c)
            except (ValueError, TypeError) as exc:
                errors.append(f"branch: {exc}")

    if errors:
        raise ConfigValidationError(errors)
    return ScenarioConfig(potential, branch, loss, alpha_dist, run, side, m_est, copy.deepcopy(raw))


def load_config(path, overrides: dict[str, Any] | None = None) -> ScenarioConfig:
    """Parse and validate a scenario file; ``overrides`` patch the ``run`` section first."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{path}: invalid JSON: {exc}") from exc
    if overrides and isinstance(raw, dict) and isinstance(raw.get("run"), dict):
        raw["run"].update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(raw)


# ---------------------------------------------------------------- pipeline

def _fit_rows(prefix: str, fit: GpdFit) -> list[tuple[str, Any]]:
    return [(f"{prefix}_xi", fit.xi), (f"{prefix}_beta", fit.beta),
            (f"{prefix}_log_likelihood", fit.log_likelihood), (f"{prefix}_n_exceedances", fit.n_exceedances)]


def run_scenario(config: ScenarioConfig, workers: int = 1) -> RunArtifacts:
    spec, lm, dist, run = config.branch, config.loss, config.alpha_dist, config.run
    batch = sample_losses(dist, spec, lm, run.n_samples, run.seed, workers=workers)
    tail = check_tail_match(batch, spec, lm, dist, run.u_quantile, run.y_grid_size)
    equiv = check_event_equivalence(batch, spec, lm, tail.y_grid)

    mask = batch.losses > tail.u
    exc = extract_exceedances(batch.losses, tail.u)
    summary: list[tuple[str, Any]] = [
        ("u", tail.u), ("u_quantile", run.u_quantile), ("n_samples", batch.n),
        ("regime", tail.prediction.regime.value), ("exponent_product", tail.prediction.exponent_product),
        ("xi_predicted", tail.xi_predicted), ("xi_fitted", tail.xi_fitted),
        ("relative_gap", tail.relative_gap),
    ]
    summary += _fit_rows("mle", tail.fit)
    summary += [("mle_xi_se", tail.fit.xi_se), ("mle_beta_se", tail.fit.beta_se)]
    try:
        summary += _fit_rows("pwm", fit_gpd_pwm(exc))
    except PwmDegenerate:
        summary.append(("pwm_xi", math.nan))
    hill = hill_estimator(batch.losses, exc.count)
    summary += [("hill_k", hill.k), ("hill", hill.hill), ("hill_tail_index", hill.tail_index)]
    if config.m_estimate is not None:
        summary.append(("m_estimate", config.m_estimate))
    summary += [("equivalence_mismatches", int(equiv.mismatches_per_y.sum())),
                ("subset_violations", int(equiv.subset_violations_per_y.sum())),
                ("survival_points_within_band", int(tail.within_band.sum())),
                ("survival_points", int(tail.y_grid.size))]

    gpd = tail.gpd_survival()
    survival_rows = list(zip(tail.y_grid, tail.empirical_survival, tail.analytic_survival, gpd))

    branch_rows = []
    pot = config.potential
    if pot is not None and pot.alpha_range is not None:
        branch_rows = equilibrium_branches(pot, np.linspace(*pot.alpha_range, BRANCH_GRID))

    provenance = {
        "tool": "foldtail",
        "version": __version__,
        "config_sha256": config.config_hash,
        "seed": str(run.seed),
        "n_samples": str(run.n_samples),
    }
    return RunArtifacts(provenance, survival_rows, exc, batch.alphas[mask], summary,
                        equiv, tail, branch_rows)


def write_artifacts(artifacts: RunArtifacts, out_dir) -> list[Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ArtifactIOError(f"cannot create {out}: {exc}") from exc
    prov = artifacts.provenance
    exc = artifacts.exceedances
    paths = [
        write_table(out / "survival.csv", SURVIVAL_COLUMNS, artifacts.survival_rows, prov),
        write_table(out / "exceedances.csv", ("alpha", "loss", "excess"),
                    zip(artifacts.exceedance_alphas, exc.excesses + exc.u, exc.excesses), prov),
        write_table(out / "fit_summary.csv", ("quantity", "value"), artifacts.fit_summary, prov),
    ]
    if artifacts.equivalence is not None:
        e = artifacts.equivalence
        paths.append(write_table(
            out / "equivalence.csv", ("y", "mismatches", "boundary_excluded", "subset_violations"),
            zip(e.y_grid, e.mismatches_per_y, e.boundary_excluded_per_y, e.subset_violations_per_y), prov))
    return paths


def emit_plot_data(artifacts: RunArtifacts, out_dir) -> list[Path]:
    """Survival, mean-excess, Hill and branch-diagram tables for plotting."""
    out = Path(out_dir)
    if not out.is_dir():
        raise ArtifactIOError(f"{out} is not a directory")
    prov = artifacts.provenance
    exc = artifacts.exceedances
    tail_values = exc.excesses + exc.u

    me_rows, hill_rows = [], []
    if exc.count:
        top = float(np.max(tail_values))
        thresholds = exc.u + np.linspace(0.0, 1.0, MEAN_EXCESS_POINTS, endpoint=False) * (top - exc.u)
        me_rows = [(p.u, p.mean_excess, p.count, p.flagged) for p in mean_excess_curve(tail_values, thresholds)]
        if exc.count > 11:
            ks = np.unique(np.geomspace(10, exc.count - 1, HILL_POINTS).astype(int))
            hill_rows = [(h.k, h.hill, h.tail_index) for h in hill_curve(tail_values, ks)]

    return [
        write_table(out / "plot_survival.csv", SURVIVAL_COLUMNS, artifacts.survival_rows, prov),
        write_table(out / "plot_mean_excess.csv", ("u", "mean_excess", "count", "flagged"), me_rows, prov),
        write_table(out / "plot_hill.csv", ("k", "hill", "tail_index"), hill_rows, prov),
        write_table(out / "plot_branch.csv", ("alpha", "x", "kind"), artifacts.branch_rows, prov),
    ]


# ---------------------------------------------------------------- commands

def _parse_grid(text: str) -> np.ndarray:
    try:
        lo, hi, n = text.split(":")
        return np.linspace(float(lo), float(hi), int(n))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected lo:hi:n, got {text!r}") from exc


def _cmd_simulate(args) -> int:
    config = load_config(args.config, {"seed": args.seed, "n_samples": args.samples})
    artifacts = run_scenario(config, workers=args.workers)
    write_artifacts(artifacts, args.out)
    emit_plot_data(artifacts, args.out)
    for key, val in artifacts.fit_summary:
        print(f"{key}: {fmt(val)}")
    if not artifacts.passed:
        print("verification FAILED", file=sys.stderr)
        return 1
    return 0


def _cmd_equilibria(args) -> int:
    config = load_config(args.config)
    if config.potential is None:
        raise ConfigValidationError(["potential: required for the equilibria command"])
    rows = equilibrium_branches(config.potential, args.alpha_grid)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("alpha", "x", "kind"))
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return 0


def _read_losses(path) -> np.ndarray:
    _, header, rows = read_table(path)
    if not header:
        raise ConfigParseError(f"{path}: empty table")
    col = header.index("loss") if "loss" in header else 0
    try:
        return np.array([float(r[col]) for r in rows if r], dtype=np.float64)
    except (ValueError, IndexError) as exc:
        raise ConfigParseError(f"{path}: bad numeric column: {exc}") from exc


def _cmd_fit(args) -> int:
    losses = _read_losses(args.losses)
    u = float(np.quantile(losses, args.u_quantile))
    exc = extract_exceedances(losses, u)
    rows: list[tuple[str, Any]] = [("u", u), ("n_total", exc.n_total)]
    rows += _fit_rows("mle", fit_gpd_mle(exc))
    try:
        rows += _fit_rows("pwm", fit_gpd_pwm(exc))
    except PwmDegenerate:
        rows.append(("pwm_xi", math.nan))
    if exc.count >= 10:
        h = hill_estimator(losses, exc.count)
        rows += [("hill_k", h.k), ("hill_tail_index", h.tail_index)]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("quantity", "value"))
    for k, v in rows:
        w.writerow((k, fmt(v)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="foldtail", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario and write tables")
    sim.add_argument("config")
    sim.add_argument("--out", required=True)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--samples", type=int)
    sim.add_argument("--workers", type=int, default=1)
    sim.set_defaults(func=_cmd_simulate)

    eq = sub.add_parser("equilibria", help="tabulate equilibria over an alpha grid")
    eq.add_argument("config")
    eq.add_argument("--alpha-grid", type=_parse_grid, required=True)
    eq.set_defaults(func=_cmd_equilibria)

    fit = sub.add_parser("fit", help="GPD and Hill fits of a loss column")
    fit.add_argument("losses")
    fit.add_argument("--u-quantile", type=float, default=0.95)
    fit.set_defaults(func=_cmd_fit)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigValidationError as exc:
        for err in exc.errors:
            print(f"error: {err}", file=sys.stderr)
        return 2
    except FoldTailError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
