"""Experiment orchestration: seeded sweeps, drop averaging, report emission.

A sweep point is one (sweep_value, drop) pair; Monte Carlo rows for all
requested schemes and covariance modes share trial streams derived as
(master_seed, sweep_index, trial_index), so reports are bit-identical for a
given seed regardless of worker count or scheduling. wall_time is provenance
only and is excluded from determinism comparisons (the CSV never contains it).
"""

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ._mc import backend_name
from ._mc.driver import run_uatf
from .errors import CfmimoError, ConfigError
from .linkproc import achievable_rate
from .pilots import assign_pilots
from .scenario import SystemConfig, build_profile, rho_for_median_snr
from .streams import PROFILE_DOMAIN, derive_rng
from .theory import mrc_sinr_closed, zf_sinr_closed

SWEEP_VARIABLES = ("n_lambda", "n_sigma", "num_pilots", "snr_db")
CSV_HEADER = "sweep_value,scheme,cov_mode,source,user,gamma,rate,sum_rate,stderr,seed"


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment grid: a base config plus the axes to vary."""

    base: SystemConfig
    sweep_variable: str = "n_lambda"
    sweep_values: tuple = (100,)
    schemes: tuple = ("MRC",)
    cov_modes: tuple = ("estimated",)
    include_theory: bool = False
    trials: int = 1000
    num_drops: int = 1
    median_snr_db: float = None  # when set, tx_power is re-derived per drop

    def validate(self):
        self.base.validate()
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ConfigError(f"sweep_variable must be one of {SWEEP_VARIABLES}")
        values = list(self.sweep_values)
        if not values:
            raise ConfigError("sweep_values must be nonempty")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ConfigError("sweep_values must be strictly increasing")
        if not self.schemes or any(s not in ("MRC", "ZF") for s in self.schemes):
            raise ConfigError("schemes must be a nonempty subset of {MRC, ZF}")
        if not self.cov_modes or any(m not in ("perfect", "estimated") for m in self.cov_modes):
            raise ConfigError("cov_modes must be a nonempty subset of {perfect, estimated}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.num_drops < 1:
            raise ConfigError("num_drops must be >= 1")
        return self

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown ExperimentSpec fields: {', '.join(unknown)}")
        if "base" not in data:
            raise ConfigError("ExperimentSpec needs a 'base' SystemConfig")
        data["base"] = SystemConfig.from_dict(data["base"])
        for name in ("sweep_values", "schemes", "cov_modes"):
            if name in data:
                data[name] = tuple(data[name])
        return cls(**data)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def to_dict(self):
        out = asdict(self)
        out["base"] = self.base.to_dict()
        for name in ("sweep_values", "schemes", "cov_modes"):
            out[name] = list(out[name])
        return out


@dataclass
class ReportRow:
    sweep_value: float
    scheme: str
    cov_mode: str
    source: str            # "simulated" | "theoretical"
    per_user_gamma: list
    per_user_rate: list
    sum_rate: float
    mc_std_error: list
    seed: int
    wall_time: float

    def sort_key(self):
        return (self.sweep_value, self.scheme, self.cov_mode, self.source)


@dataclass
class SinrReport:
    rows: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)


def _point_config(spec, profile, value):
    """Base config with the sweep variable applied for one point."""
    config = spec.base
    if spec.sweep_variable == "snr_db":
        config = config.replace(tx_power=rho_for_median_snr(profile, config.noise_power, value))
    else:
        config = config.replace(**{spec.sweep_variable: int(value)})
    if spec.median_snr_db is not None and spec.sweep_variable != "snr_db":
        config = config.replace(
            tx_power=rho_for_median_snr(profile, config.noise_power, spec.median_snr_db))
    return config


def _run_point(spec, drop, sweep_index):
    """All rows for one (drop, sweep point); returns (partial rows, skipped)."""
    value = spec.sweep_values[sweep_index]
    seed = spec.base.master_seed
    profile = build_profile(spec.base, derive_rng(seed, PROFILE_DOMAIN, drop))
    config = _point_config(spec, profile, value)
    plan = assign_pilots(config.num_users, config.num_pilots,
                         "orthogonal" if config.num_pilots >= config.num_users else "round_robin")
    partial, skipped = {}, []

    start = time.perf_counter()
    try:
        mc = run_uatf(config, profile, plan, schemes=spec.schemes, cov_modes=spec.cov_modes,
                      trials=spec.trials, master_seed=seed, stream_key=(sweep_index,))
    except ConfigError as exc:
        for scheme in spec.schemes:
            for mode in spec.cov_modes:
                skipped.append({"sweep_value": float(value), "scheme": scheme,
                                "cov_mode": mode, "source": "simulated", "reason": str(exc)})
        mc = {}
    mc_time = time.perf_counter() - start
    for (scheme, mode), estimates in mc.items():
        gammas = np.array([e.gamma for e in estimates])
        rates = achievable_rate(gammas, config.pilot_len, config.coherence_len)
        partial[(float(value), scheme, mode, "simulated")] = {
            "gamma": gammas,
            "rate": np.asarray(rates),
            "stderr": np.array([e.std_error for e in estimates]),
            "wall_time": mc_time / len(mc),
        }

    if spec.include_theory:
        for scheme in spec.schemes:
            start = time.perf_counter()
            try:
                if scheme == "MRC":
                    gammas = mrc_sinr_closed(profile, plan, config).gamma
                else:
                    gammas = zf_sinr_closed(profile, plan, config).gamma
            except CfmimoError as exc:
                skipped.append({"sweep_value": float(value), "scheme": scheme,
                                "cov_mode": "estimated", "source": "theoretical",
                                "reason": str(exc)})
                continue
            rates = achievable_rate(gammas, config.pilot_len, config.coherence_len)
            partial[(float(value), scheme, "estimated", "theoretical")] = {
                "gamma": np.asarray(gammas),
                "rate": np.asarray(rates),
                "stderr": np.zeros(len(gammas)),
                "wall_time": time.perf_counter() - start,
            }
    return partial, skipped


def run_sweep(spec, threads=1):
    """Execute the full experiment grid; deterministic given the master seed."""
    spec.validate()
    tasks = [(drop, sidx) for drop in range(spec.num_drops)
             for sidx in range(len(spec.sweep_values))]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outputs = list(pool.map(lambda t: _run_point(spec, *t), tasks))
    else:
        outputs = [_run_point(spec, *t) for t in tasks]

    # Average drops in fixed order; merge skip notes once per sweep point.
    merged, skipped = {}, []
    seen_skips = set()
    for (_, _), (partial, skips) in zip(tasks, outputs):
        for key, data in partial.items():
            merged.setdefault(key, []).append(data)
        for note in skips:
            mark = tuple(sorted(note.items()))
            if mark not in seen_skips:
                seen_skips.add(mark)
                skipped.append(note)

    rows = []
    for key in sorted(merged):
        value, scheme, mode, source = key
        parts = merged[key]
        gamma = np.mean([p["gamma"] for p in parts], axis=0)
        rate = np.mean([p["rate"] for p in parts], axis=0)
        stderr = np.sqrt(np.sum([p["stderr"] ** 2 for p in parts], axis=0)) / len(parts)
        per_user_rate = [float(r) for r in rate]
        rows.append(ReportRow(
            sweep_value=value, scheme=scheme, cov_mode=mode, source=source,
            per_user_gamma=[float(g) for g in gamma],
            per_user_rate=per_user_rate,
            sum_rate=sum(per_user_rate),
            mc_std_error=[float(s) for s in stderr],
            seed=spec.base.master_seed,
            wall_time=float(sum(p["wall_time"] for p in parts)),
        ))
    rows.sort(key=ReportRow.sort_key)
    return SinrReport(rows=rows, skipped=skipped,
                      meta={"backend": backend_name(), "spec": spec.to_dict()})


def emit_report(report, path, fmt="csv"):
    """Write the report; returns the written paths.

    CSV: fixed header, one row per user per configuration, rows totally
    ordered by (sweep_value, scheme, cov_mode, source, user). JSON mirrors the
    report structure losslessly (exact float round-trip).
    """
    path = Path(path)
    if path.suffix:
        targets = {fmt: path}
    else:
        path.mkdir(parents=True, exist_ok=True)
        targets = {fmt: path / f"report.{fmt}"}
    written = []
    try:
        for kind, target in targets.items():
            if kind == "csv":
                lines = [CSV_HEADER]
                for row in sorted(report.rows, key=ReportRow.sort_key):
                    for user, (g, r, se) in enumerate(zip(row.per_user_gamma,
                                                          row.per_user_rate,
                                                          row.mc_std_error)):
                        lines.append(f"{row.sweep_value!r},{row.scheme},{row.cov_mode},"
                                     f"{row.source},{user},{g!r},{r!r},{row.sum_rate!r},"
                                     f"{se!r},{row.seed}")
                target.write_text("\n".join(lines) + "\n")
            else:
                payload = {"meta": report.meta, "skipped": report.skipped,
                           "rows": [asdict(r) for r in report.rows]}
                target.write_text(json.dumps(payload, indent=1))
            written.append(target)
    except OSError as exc:
        raise CfmimoError(f"failed to write report to {target}: {exc}") from exc
    return written


def load_report(path):
    """Parse a JSON report back into a SinrReport (exact round-trip)."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except OSError as exc:
        raise CfmimoError(f"failed to read report from {path}: {exc}") from exc
    rows = [ReportRow(**row) for row in payload["rows"]]
    return SinrReport(rows=rows, skipped=payload["skipped"], meta=payload["meta"])
