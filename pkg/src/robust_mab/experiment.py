"""Experiment specs, output files and summaries.

An output directory holds::

    config.json    resolved experiment spec
    arms.csv       trial, arm, mean (sorted arm means, shared by all variants)
    curves.csv     variant, trial, agent, t, cumulative_regret
    tau.csv        variant, trial, tau_stab, tau, stab_censored, tau_censored, j_max
    events.jsonl   one record per line (contact / block / election / active-change)
    summary.json   per-variant statistics, recomputable from the files above
    bounds.csv     (with bound overlay) t, theorem-2 upper bound, lower-bound reference
"""

from __future__ import annotations

import csv
import importlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Iterator

import numpy as np

from .adversary import HONEST_MIMIC, get_strategy
from .bandit import ArmSet, ConfigError, load_means_file
from .engine import VARIANTS, EventLog, SimConfig, TrialResult, log_grid, run_trial
from .theory import BoundInputs, InvalidParameters, theorem1_lower_coefficient, theorem2_upper_bound


@dataclass(frozen=True)
class ExperimentSpec:
    n: int = 25
    m: int = 10
    K: int | None = 100
    T: int = 100_000
    alpha: float = 4.0
    beta: float = 2.0
    eta: float = 2.0
    S: int | None = None  # None -> ceil(K / n)
    strategy: str = "uniform"
    trials: int = 50
    seed: int = 0
    arms: str = "synthetic"  # "synthetic" or a means-file path
    variants: tuple = ("blocking", "no-blocking", "no-communication", "oracle")
    baseline: str | None = "no-blocking"
    bound: bool = False
    checkpoints: int = 200
    events: bool = True
    workers: int = 1
    out: str = "results"
    plugins: tuple = ()

    def validate(self) -> "ExperimentSpec":
        for v in self.variants:
            if v not in VARIANTS:
                raise ConfigError(f"unknown variant {v!r}; expected one of {', '.join(VARIANTS)}")
        if not self.variants:
            raise ConfigError("variants must not be empty")
        if self.baseline is not None and self.baseline not in self.variants:
            raise ConfigError(f"baseline {self.baseline!r} is not among the variants")
        if self.arms == "synthetic" and self.K is None:
            raise ConfigError("synthetic arms need K")
        if self.checkpoints < 1:
            raise ConfigError("checkpoints must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        load_plugins(self.plugins)
        if self.strategy != HONEST_MIMIC:
            get_strategy(self.strategy)
        return self

    def resolved(self) -> "ExperimentSpec":
        """Spec with K filled in from the means file when arms come from a file."""
        if self.arms == "synthetic":
            return self
        return replace(self, K=load_means_file(self.arms).K)

    def sim_config(self, variant: str) -> SimConfig:
        spec = self.resolved()
        means = None if spec.arms == "synthetic" else tuple(load_means_file(spec.arms).means.tolist())
        return SimConfig(
            n=spec.n, m=spec.m, K=spec.K, T=spec.T, alpha=spec.alpha, beta=spec.beta, eta=spec.eta,
            S=spec.S, variant=variant, strategy=spec.strategy, trials=spec.trials,
            master_seed=spec.seed, means=means, n_checkpoints=spec.checkpoints,
            record_events=spec.events,
        ).validate()


FIELD_TYPES = {
    "n": int, "m": int, "K": "optional-int", "T": int, "alpha": float, "beta": float, "eta": float,
    "S": "optional-int", "strategy": str, "trials": int, "seed": int, "arms": str, "variants": "list",
    "baseline": "optional-str", "bound": bool, "checkpoints": int, "events": bool, "workers": int,
    "out": str, "plugins": "list",
}
assert set(FIELD_TYPES) == {f.name for f in fields(ExperimentSpec)}


def parse_value(key: str, text: str):
    kind = FIELD_TYPES.get(key)
    if kind is None:
        raise ConfigError(f"unknown key {key!r}")
    text = text.strip()
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind == "list":
            return tuple(item.strip() for item in text.split(",") if item.strip())
        if kind in ("optional-int", "optional-str"):
            if text.lower() in ("", "none", "auto"):
                return None
            return int(float(text)) if kind == "optional-int" else text
        if kind is int:
            value = float(text)
            if value != int(value):
                raise ValueError(text)
            return int(value)
        return kind(text)
    except ValueError:
        raise ConfigError(f"bad value for {key!r}: {text!r}") from None


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse flat ``key = value`` lines; '#' starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        try:
            values[key] = parse_value(key, value)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    return values


def load_spec(path=None, overrides: dict | None = None) -> ExperimentSpec:
    values = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        values.update(parse_config_text(text, str(path)))
    values.update(overrides or {})
    return ExperimentSpec(**values).validate()


def load_plugins(modules) -> None:
    for name in modules:
        try:
            importlib.import_module(name)
        except ImportError as exc:
            raise ConfigError(f"cannot import plugin {name!r}: {exc}") from exc


# --- running ---------------------------------------------------------------


def _worker_init(plugins) -> None:
    load_plugins(plugins)


def iter_trials(config: SimConfig, workers: int = 1, plugins=()) -> Iterator[TrialResult]:
    """Yield trial results in trial order, optionally computed in worker processes."""
    indices = range(config.trials)
    if workers <= 1 or config.trials <= 1:
        for t in indices:
            yield run_trial(config, t)
        return
    with ProcessPoolExecutor(max_workers=workers, initializer=_worker_init, initargs=(tuple(plugins),)) as pool:
        yield from pool.map(run_trial, [config] * config.trials, indices)


def _fmt(x: float) -> str:
    return repr(float(x))


CURVE_HEADER = ["variant", "trial", "agent", "t", "cumulative_regret"]
TAU_HEADER = ["variant", "trial", "tau_stab", "tau", "stab_censored", "tau_censored", "j_max"]


def run_experiment(spec: ExperimentSpec) -> dict:
    """Run every variant of ``spec`` and write the output files; returns the summary."""
    spec = spec.validate().resolved()
    out = Path(spec.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    configs = {v: spec.sim_config(v) for v in spec.variants}

    finals: dict = {}
    taus: list = []
    arms_by_trial: dict = {}
    try:
        with open(out / "curves.csv", "w", newline="") as curves_fh, \
                open(out / "tau.csv", "w", newline="") as tau_fh, \
                open(out / "events.jsonl", "w") as events_fh:
            curves = csv.writer(curves_fh, lineterminator="\n")
            curves.writerow(CURVE_HEADER)
            tau_rows = csv.writer(tau_fh, lineterminator="\n")
            tau_rows.writerow(TAU_HEADER)
            for variant, config in configs.items():
                finals[variant] = []
                for result in iter_trials(config, spec.workers, spec.plugins):
                    _check_paired(arms_by_trial, result)
                    finals[variant].append([float(x) for x in result.final_regret])
                    for agent in range(result.regret.shape[0]):
                        for t, r in zip(result.checkpoints.tolist(), result.regret[agent].tolist()):
                            curves.writerow([variant, result.trial, agent, t, _fmt(r)])
                    tau = result.tau
                    row = [variant, result.trial, tau.tau_stab, tau.tau, int(tau.stab_censored),
                           int(tau.tau_censored), tau.j_max]
                    tau_rows.writerow(row)
                    taus.append(row)
                    if result.events is not None:
                        for record in result.events.records:
                            events_fh.write(json.dumps({"variant": variant, **EventLog.to_dict(record)}) + "\n")
        with open(out / "arms.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["trial", "arm", "mean"])
            for trial in sorted(arms_by_trial):
                for arm, mu in enumerate(arms_by_trial[trial]):
                    writer.writerow([trial, arm, _fmt(mu)])
        (out / "config.json").write_text(json.dumps(spec_to_dict(spec), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise ConfigError(f"cannot write to {out}: {exc}") from exc

    arms_lists = {t: list(v) for t, v in arms_by_trial.items()}
    summary = summarize(spec, finals, taus, arms_lists)
    write_summary(out, summary)
    if spec.bound:
        write_bounds(out, spec, arms_lists)
    return summary


def _check_paired(arms_by_trial: dict, result: TrialResult) -> None:
    means = [float(x) for x in result.arms.means]
    known = arms_by_trial.setdefault(result.trial, means)
    if known != means:
        raise RuntimeError(f"trial {result.trial}: variants saw different arm sets")


def spec_to_dict(spec: ExperimentSpec) -> dict:
    data = asdict(spec)
    data["variants"] = list(spec.variants)
    data["plugins"] = list(spec.plugins)
    return data


def spec_from_dict(data: dict) -> ExperimentSpec:
    data = dict(data)
    data["variants"] = tuple(data["variants"])
    data["plugins"] = tuple(data.get("plugins", ()))
    return ExperimentSpec(**data)


# --- summaries -------------------------------------------------------------


def _mean_std(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
    return float(np.mean(arr)), std


def trial_bound(spec: ExperimentSpec, means, T: float | None = None) -> float:
    arm_set = ArmSet.from_means(means)
    sim = spec.sim_config(spec.variants[0])
    inputs = BoundInputs.from_config(sim, arm_set.gaps[1:].tolist(), T=T)
    return theorem2_upper_bound(inputs)


def summarize(spec: ExperimentSpec, finals: dict, taus: list, arms_by_trial: dict) -> dict:
    """Summary statistics from per-agent final regrets, tau rows and per-trial arm means."""
    per_trial = {v: [float(np.mean(agents)) for agents in rows] for v, rows in finals.items()}
    variants = {}
    for variant, values in per_trial.items():
        mean, std = _mean_std(values)
        entry = {"trials": len(values), "mean_regret": mean, "std_regret": std}
        rows = [r for r in taus if r[0] == variant]
        if rows:
            tau = np.array([int(r[3]) for r in rows])
            censored = np.array([bool(int(r[5])) for r in rows])
            stab = np.array([int(r[2]) for r in rows])
            entry["tau"] = {
                "median_tau": float(np.median(tau)),
                "median_tau_stab": float(np.median(stab)),
                "uncensored_fraction": float(np.mean(~censored)),
            }
        if spec.baseline is not None and variant != spec.baseline and spec.baseline in per_trial:
            base = per_trial[spec.baseline]
            ratios = [v / b for v, b in zip(values, base)]
            r_mean, r_std = _mean_std(ratios)
            entry["relative_to"] = spec.baseline
            entry["relative_regret"] = mean / float(np.mean(base))
            entry["paired_ratio_mean"] = r_mean
            entry["paired_ratio_std"] = r_std
        variants[variant] = entry
    # out and workers do not affect results; leaving them out keeps summaries comparable across runs
    recorded = {k: v for k, v in spec_to_dict(spec).items() if k not in ("out", "workers")}
    summary = {"spec": recorded, "variants": variants}
    if spec.bound:
        try:
            bounds = [trial_bound(spec, arms_by_trial[t]) for t in sorted(arms_by_trial)]
            summary["theorem2_bound"] = float(np.mean(bounds))
        except InvalidParameters as exc:
            summary["theorem2_bound"] = f"invalid parameters: {exc}"
        lower = []
        for t in sorted(arms_by_trial):
            gaps = ArmSet.from_means(arms_by_trial[t]).gaps[1:]
            try:
                lower.append(theorem1_lower_coefficient(spec.alpha, gaps.tolist()) * math.log(spec.T))
            except InvalidParameters:
                lower = None
                break
        summary["theorem1_lower_reference"] = None if lower is None else float(np.mean(lower))
    return summary


def write_summary(out: Path, summary: dict) -> None:
    (Path(out) / "summary.json").write_text(render_summary(summary))


def render_summary(summary: dict) -> str:
    return json.dumps(summary, indent=2, sort_keys=True) + "\n"


def write_bounds(out: Path, spec: ExperimentSpec, arms_by_trial: dict) -> None:
    grid = log_grid(spec.T, spec.checkpoints)
    trials = sorted(arms_by_trial)
    with open(Path(out) / "bounds.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "theorem2_upper_bound", "theorem1_lower_reference"])
        for t in grid.tolist():
            try:
                upper = _fmt(np.mean([trial_bound(spec, arms_by_trial[k], T=t) for k in trials]))
            except InvalidParameters:
                upper = "nan"
            try:
                lower = _fmt(np.mean([
                    theorem1_lower_coefficient(spec.alpha, ArmSet.from_means(arms_by_trial[k]).gaps[1:].tolist())
                    for k in trials
                ]) * math.log(t))
            except InvalidParameters:
                lower = "nan"
            writer.writerow([t, upper, lower])


def read_spec_and_arms(out) -> tuple:
    """Experiment spec and per-trial arm means of an output directory."""
    out = Path(out)
    try:
        spec = spec_from_dict(json.loads((out / "config.json").read_text()))
        arms_by_trial: dict = {}
        with open(out / "arms.csv", newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for trial, _, mean in reader:
                arms_by_trial.setdefault(int(trial), []).append(float(mean))
    except (OSError, KeyError, TypeError, ValueError, StopIteration) as exc:
        raise ConfigError(f"cannot read results in {out}: {exc}") from exc
    return spec, arms_by_trial


def recompute_summary(out) -> dict:
    """Rebuild the summary from config.json, curves.csv, tau.csv and arms.csv."""
    out = Path(out)
    spec, arms_by_trial = read_spec_and_arms(out)
    try:
        finals: dict = {}
        with open(out / "curves.csv", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != CURVE_HEADER:
                raise ConfigError(f"{out / 'curves.csv'}: unexpected header {header}")
            for variant, trial, agent, t, regret in reader:
                if int(t) != spec.T:
                    continue
                rows = finals.setdefault(variant, {})
                rows.setdefault(int(trial), {})[int(agent)] = float(regret)
        finals_lists = {
            v: [[agents[a] for a in sorted(agents)] for _, agents in sorted(finals[v].items())]
            for v in spec.variants if v in finals
        }
        with open(out / "tau.csv", newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            taus = [row for row in reader]
    except (OSError, ValueError, StopIteration) as exc:
        raise ConfigError(f"cannot read results in {out}: {exc}") from exc
    return summarize(spec, finals_lists, taus, arms_by_trial)


def read_events(path) -> list:
    """Parse an events file into (variant, record) pairs."""
    out = []
    with open(path) as fh:
        for line in fh:
            data = json.loads(line)
            out.append((data["variant"], EventLog.from_dict(data)))
    return out
