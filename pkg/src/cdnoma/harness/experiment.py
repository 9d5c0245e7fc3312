"""Experiment specification, validation and execution.

An experiment sweeps one parameter and, for every sweep value, averages
per-UE spectral efficiency over independent UE drops. Each drop runs a
fixed number of channel realizations shared by all compared arms.
"""

from __future__ import annotations

import copy
import csv
import json
import math
import os
import platform
import subprocess
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__, channel, grouping, kernels, se, signatures
from ..netconfig import (ConfigError, NetworkConfig, Scenario, drop_ues, load_config,
                         network_from_dict, scenario_from_dict)
from .montecarlo import Arm, DropSimulator, arm_signatures, cyclic_pilots

CSV_COLUMNS = ("scenario_id", "cell", "ue", "scheme", "N", "M", "K", "se_bits",
               "sinr_mean", "ci_halfwidth", "trials", "seed")
SWEEP_PARAMS = ("N", "M", "K", "tau_p", "angle", "signature", "none")
KINDS = ("montecarlo", "case-study", "grouping")
LINKS = ("UL", "DL")
COMBINERS = ("MR", "MMSE")
Z95 = se.Z95


@dataclass
class ExperimentSpec:
    """Declarative description of one experiment.

    ``network`` and ``scenario`` are mappings accepted by
    :func:`~cdnoma.netconfig.network_from_dict` and
    :func:`~cdnoma.netconfig.scenario_from_dict` (angles in degrees).
    ``network["tau_p"]`` may be ``"K"``. ``tau_rule`` chooses how the data
    part of the coherence block is split: ``"split"`` gives UL and DL half
    each, ``"fixed-ul"`` keeps ``tau_u`` and lets ``tau_d`` absorb the
    rest. Arm ``N`` may be an integer, ``"sweep"`` or ``"K/<d>"``; arm
    ``kind`` may be ``"sweep"`` for signature-kind sweeps.
    """

    scenario_id: str
    kind: str = "montecarlo"
    description: str = ""
    network: dict = field(default_factory=dict)
    scenario: dict = field(default_factory=dict)
    model: str = "3d"
    delta_deg: float = 2.0
    elevation_spread_deg: float | None = None
    sweep_param: str = "none"
    sweep_values: list = field(default_factory=lambda: [None])
    arms: list = field(default_factory=lambda: [{"name": "mMIMO"}])
    links: list = field(default_factory=lambda: ["UL"])
    combiners: list = field(default_factory=lambda: ["MR", "MMSE"])
    trials: int = 200
    drops: int = 10
    seed: int = 1
    p_dim: int = 6
    groups: int = 8
    phi1_deg: float = 30.0
    tau_rule: str = "split"
    budget_s: float | None = None
    full_scale: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
        return cls(**copy.deepcopy(d))

    def scaled(self, full_scale: bool) -> "ExperimentSpec":
        if not full_scale or not self.full_scale:
            return self
        d = self.to_dict()
        d.update(copy.deepcopy(self.full_scale))
        return ExperimentSpec.from_dict(d)


@dataclass
class Point:
    """One resolved sweep value."""

    index: int
    value: object
    config: NetworkConfig
    scenario: Scenario
    arms: list


def _resolve_N(expr, K, value):
    if expr == "sweep":
        return int(value)
    if isinstance(expr, str):
        if not expr.startswith("K/"):
            raise ConfigError(f"cannot interpret arm N={expr!r}")
        d = int(expr[2:])
        if K % d:
            raise ConfigError(f"N=K/{d} needs K divisible by {d}, got K={K}")
        return K // d
    return int(expr)


def _arm_from(d, K, spec, value):
    d = dict(d)
    name = d.pop("name")
    N = _resolve_N(d.pop("N", 1), K, value)
    kind = d.pop("kind", "orthogonal")
    if kind == "sweep":
        kind = value
    assign = d.pop("assign", "none" if N == 1 and name.startswith("mMIMO") else "random")
    if d:
        raise ConfigError(f"unknown arm keys for {name!r}: {sorted(d)}")
    if kind not in signatures.KINDS:
        raise ConfigError(f"arm {name!r}: unknown signature kind {kind!r}")
    return Arm(name, N, kind, assign)


def resolve(spec: ExperimentSpec) -> list[Point]:
    """Expand the sweep into concrete configs; raises ConfigError listing every problem."""
    problems = []
    if spec.kind not in KINDS:
        problems.append(f"kind must be one of {KINDS}")
    if spec.sweep_param not in SWEEP_PARAMS:
        problems.append(f"sweep_param must be one of {SWEEP_PARAMS}")
    if not spec.sweep_values:
        problems.append("sweep_values must be non-empty")
    if not spec.arms:
        problems.append("at least one arm is required")
    for link in spec.links:
        if link not in LINKS:
            problems.append(f"unknown link {link!r}")
    for comb in spec.combiners:
        if comb not in COMBINERS:
            problems.append(f"unknown combiner {comb!r}")
    if spec.model not in ("2d", "3d", "los", "iid"):
        problems.append(f"unknown channel model {spec.model!r}")
    if spec.tau_rule not in ("split", "fixed-ul"):
        problems.append("tau_rule must be 'split' or 'fixed-ul'")
    if spec.trials < 1 or spec.drops < 1:
        problems.append("trials and drops must be >= 1")
    if spec.kind == "montecarlo" and "DL" in spec.links and spec.trials < se.DL_MIN_TRIALS:
        problems.append(f"DL evaluation needs trials >= {se.DL_MIN_TRIALS} per drop")
    names = [a.get("name") for a in spec.arms]
    if None in names or len(set(names)) != len(names):
        problems.append("every arm needs a unique name")
    if problems:
        raise ConfigError(problems)

    points = []
    for i, value in enumerate(spec.sweep_values):
        net = dict(spec.network)
        if spec.sweep_param in ("M", "K", "tau_p"):
            net[spec.sweep_param] = int(value)
        try:
            K = int(net.get("K", NetworkConfig.K))
            tau_c = int(net.get("tau_c", NetworkConfig.tau_c))
            if net.get("tau_p", "K") == "K":
                net["tau_p"] = K
            tau_p = int(net["tau_p"])
            if spec.tau_rule == "split":
                net["tau_u"] = (tau_c - tau_p) // 2
                net["tau_d"] = tau_c - tau_p - net["tau_u"]
            else:
                tau_u = int(net.get("tau_u", (tau_c - K) // 2))
                net["tau_u"] = tau_u
                net["tau_d"] = tau_c - tau_p - tau_u
            cfg = network_from_dict(net)
            scen_d = dict(spec.scenario)
            if spec.sweep_param == "angle" and spec.kind == "montecarlo":
                # two UEs on a circle of the scenario radius around the BS
                r = float(scen_d.get("radius", Scenario.radius))
                phis = (math.radians(spec.phi1_deg), math.radians(float(value)))
                scen_d["positions"] = [[r * complex(math.cos(f), math.sin(f)) for f in phis]]
            scen = scenario_from_dict(scen_d)
            if spec.kind != "case-study":
                problems += [f"[{spec.sweep_param}={value}] {p}"
                             for p in scen.problems(cfg.K, cfg.cell_side)]
            if spec.model == "3d" and not cfg.is_square_array:
                problems.append(f"[{spec.sweep_param}={value}] 3d model needs square M, got {cfg.M}")
            arms = [_arm_from(a, cfg.K, spec, value) for a in spec.arms]
            for arm in arms:
                if arm.assign == "grouped" and cfg.K % arm.N:
                    problems.append(f"[{spec.sweep_param}={value}] arm {arm.name}: "
                                    f"K={cfg.K} not divisible by N={arm.N}")
            points.append(Point(i, value, cfg, scen, arms))
        except (ConfigError, ValueError, TypeError) as exc:
            msgs = exc.problems if isinstance(exc, ConfigError) else [str(exc)]
            problems += [f"[{spec.sweep_param}={value}] {m}" for m in msgs]
    if problems:
        raise ConfigError(problems)
    return points


def validate(spec) -> list[str]:
    """Problems with a spec (empty list when valid)."""
    try:
        if isinstance(spec, dict):
            spec = ExperimentSpec.from_dict(spec)
        resolve(spec)
    except ConfigError as exc:
        return list(exc.problems)
    return []


def load_spec(path) -> ExperimentSpec:
    """Read an experiment spec file; ``base: <preset>`` extends a preset."""
    from .presets import get_preset

    data = load_config(path)
    base = data.pop("base", None)
    if base is not None:
        d = get_preset(base).to_dict()
        for key in ("network", "scenario"):
            merged = dict(d.get(key, {}))
            merged.update(data.pop(key, {}))
            d[key] = merged
        d.update(data)
        data = d
    return ExperimentSpec.from_dict(data)


# --------------------------------------------------------------- execution

def _scheme(arm_name, comb, link):
    return f"{arm_name}-{comb}-{link}"


def simulate_point_drop(spec: ExperimentSpec, point: Point, drop: int):
    """Run one drop of one sweep point. Returns ``(se, sinr, sets)``."""
    cfg = point.config
    geo_rng = np.random.default_rng([spec.seed, drop, 0])
    sig_rng = np.random.default_rng([spec.seed, drop, 1])
    mc_rng = np.random.default_rng([spec.seed, drop, 2])
    d = drop_ues(cfg, point.scenario, geo_rng, delta=math.radians(spec.delta_deg))
    el = None if spec.elevation_spread_deg is None else math.radians(spec.elevation_spread_deg)
    R = channel.correlation_tensor(d, cfg.M, spec.model, elevation_spread=el)
    sets = {a.name: arm_signatures(a, R, sig_rng, p_dim=spec.p_dim) for a in point.arms}
    sim = DropSimulator(R, cyclic_pilots(cfg.L, cfg.K, cfg.tau_p), cfg, point.arms, sets,
                        dl="DL" in spec.links)
    res = sim.run(spec.trials, mc_rng)
    return res.se, res.sinr, sets


def _task(args):
    spec, point, drop = args
    return simulate_point_drop(spec, point, drop)


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])


def _sid(spec, point):
    if spec.sweep_param == "none":
        return spec.scenario_id
    v = point.value
    if isinstance(v, float):
        v = repr(v)
    return f"{spec.scenario_id}[{spec.sweep_param}={v}]"


def _ci(x, axis=0):
    n = x.shape[axis]
    if n < 2:
        return np.full(np.delete(x.shape, axis), np.nan)
    return Z95 * x.std(axis=axis, ddof=1) / np.sqrt(n)


def _montecarlo(spec, points, threads):
    tasks = [(spec, pt, d) for pt in points for d in range(spec.drops)]
    if threads and threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outs = list(pool.map(_task, tasks))
    else:
        outs = [_task(t) for t in tasks]
    rows, summary, sets_out = [], [], {}
    for pt in points:
        chunk = outs[pt.index * spec.drops:(pt.index + 1) * spec.drops]
        sets_out[pt.index] = chunk[0][2]
        cfg = pt.config
        for arm in pt.arms:
            for link in spec.links:
                for comb in spec.combiners:
                    key = (arm.name, link, comb)
                    se_d = np.stack([c[0][key] for c in chunk])  # (drops, L, K)
                    sinr_d = np.stack([c[1][key] for c in chunk])
                    base = dict(scenario_id=_sid(spec, pt), scheme=_scheme(arm.name, comb, link),
                                N=arm.N, M=cfg.M, K=cfg.K, trials=spec.trials * spec.drops,
                                seed=spec.seed)
                    mean, sm, ci = se_d.mean(0), sinr_d.mean(0), _ci(se_d)
                    for l in range(cfg.L):
                        for k in range(cfg.K):
                            rows.append(dict(base, cell=l, ue=k, se_bits=mean[l, k],
                                             sinr_mean=sm[l, k], ci_halfwidth=ci[l, k]))
                    per_cell = se_d.sum(axis=2).mean(axis=1)  # (drops,)
                    summary.append(dict(base, cell=-1, ue=-1, se_bits=per_cell.mean(),
                                        sinr_mean=sinr_d.mean(), ci_halfwidth=_ci(per_cell)))
    return rows, summary, sets_out


CASE_STUDY_SCHEMES = (("mMIMO", 1, "mr"), ("mMIMO", 1, "mmse"),
                      ("NOMA", 2, "mr"), ("NOMA", 2, "mmse"))


def _case_study(spec, points):
    rows = []
    phi1 = math.radians(spec.phi1_deg)
    for pt in points:
        cfg = pt.config
        snr_v = float(cfg.p_ul[0, 0] / cfg.sigma2_ul)
        phi2 = math.radians(float(pt.value))
        for arm in pt.arms:
            u = signatures.orthogonal_set(arm.N).vectors[:2] if arm.N > 1 else np.ones((2, 1))
            for comb in spec.combiners:
                scheme = comb.lower()
                sinr = se.case_study_sinr(cfg.M, arm.N, snr_v, phi1, phi2,
                                          abs(np.vdot(u[0], u[1]) / arm.N) ** 2, scheme)
                val = se.case_study_se(cfg.M, arm.N, snr_v, phi1, phi2, u, scheme)
                rows.append(dict(scenario_id=_sid(spec, pt), cell=0, ue=0,
                                 scheme=_scheme(arm.name, comb, "UL"), N=arm.N, M=cfg.M, K=2,
                                 se_bits=val, sinr_mean=sinr, ci_halfwidth=0.0, trials=0,
                                 seed=spec.seed))
    return rows


def _grouping_run(spec, points, out_dir):
    pt = points[0]
    cfg = pt.config
    rng = np.random.default_rng([spec.seed, 0, 0])
    d = drop_ues(cfg, pt.scenario, rng, delta=math.radians(spec.delta_deg))
    el = None if spec.elevation_spread_deg is None else math.radians(spec.elevation_spread_deg)
    R = channel.correlation_tensor(d, cfg.M, spec.model, elevation_spread=el)[0, 0]
    ga = grouping.kmeans_group(R, spec.groups, spec.p_dim, np.random.default_rng([spec.seed, 0, 1]))
    grouping.write_csv(out_dir / "groups.csv", ga)
    with open(out_dir / "positions.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ue_id", "x_m", "y_m", "azimuth_deg", "distance_m", "group_id"])
        for k in range(cfg.K):
            w.writerow([k, repr(float(d.positions[0, k].real)), repr(float(d.positions[0, k].imag)),
                        repr(math.degrees(float(d.azimuth[0, 0, k]))),
                        repr(float(d.distance[0, 0, k])), int(ga.labels[k])])
    return ga


def git_version() -> str:
    """Package version plus ``git describe`` of the source tree when available."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


@dataclass
class RunOutput:
    directory: Path
    rows: list
    summary: list
    manifest: dict


def run_experiment(spec: ExperimentSpec, out_root="results", *, threads=1, preset=None) -> RunOutput:
    """Run ``spec`` and write ``<out_root>/<id>/<seed>/``.

    Files: ``results.csv`` (per UE), ``summary.csv`` (per-cell sum SE,
    ``cell = ue = -1``), ``manifest.json`` and, for Monte Carlo runs, the
    signature sets of the first drop under ``signatures/``.
    """
    t0 = time.perf_counter()
    points = resolve(spec)
    out_dir = Path(out_root) / (preset or spec.scenario_id) / str(spec.seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows, summary = [], []
    extra = {}
    if spec.kind == "montecarlo":
        rows, summary, sets = _montecarlo(spec, points, threads)
        sig_dir = out_dir / "signatures"
        sig_dir.mkdir(exist_ok=True)
        for idx, arm_sets in sets.items():
            for name, sset in arm_sets.items():
                signatures.write_csv(sig_dir / f"point{idx}_{name}.csv", sset)
        _write_csv(out_dir / "results.csv", rows)
        _write_csv(out_dir / "summary.csv", summary)
    elif spec.kind == "case-study":
        rows = _case_study(spec, points)
        _write_csv(out_dir / "results.csv", rows)
    else:
        ga = _grouping_run(spec, points, out_dir)
        extra = {"group_sizes": ga.sizes(), "total_cost": ga.total_cost}
    wall = time.perf_counter() - t0
    manifest = {
        "scenario_id": spec.scenario_id,
        "preset": preset,
        "version": git_version(),
        "kernel_backend": kernels.BACKEND,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "argv": sys.argv,
        "threads": threads,
        "wall_time_s": round(wall, 3),
        "budget_s": spec.budget_s,
        "config": spec.to_dict(),
        "resolved_points": [{"value": p.value, "tau_p": p.config.tau_p, "tau_u": p.config.tau_u,
                             "tau_d": p.config.tau_d, "M": p.config.M, "K": p.config.K,
                             "arms": [asdict(a) for a in p.arms]} for p in points],
        **extra,
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, default=_json_default)
        fh.write("\n")
    return RunOutput(out_dir, rows, summary, manifest)


def _json_default(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.integer, np.floating)):
        return x.item()
    return str(x)


def default_threads() -> int:
    return max(1, os.cpu_count() or 1)
