"""Trial runner: simulate agents to feature exhaustion, segment, and score."""

from __future__ import annotations

import copy
import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .agent import AgentRngs, AgentState, MotionConfig, SensorConfig, step_agent
from .control import ControlAgent, MergeConfig, dispersion_incentives
from .metrics import (
    TrialReport,
    area_coverage,
    avg_center_offset_error,
    dispersion,
    explored_accuracy,
    macro_iou,
    precision_recall_ap,
    reports_to_csv,
    topology_match,
)
from .ontology import Ontology, builtin_ontology, load_ontology
from .scenario import (
    PRESETS,
    ScenarioSpec,
    default_agent_starts,
    generate_scenario,
    ground_truth_grid,
    load_scenario,
    scenario_from_dict,
)
from .segmentation import (
    Fragment,
    GridSegment,
    branch_segment,
    grid_leaves,
    grid_segment,
    rasterize_fragments,
    rasterize_grid,
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class OracleConfig:
    enabled: bool = True
    theta: float = 0.05


@dataclass(frozen=True)
class NNNConfig:
    seed_position: tuple[float, float] = (0.0, 0.0)
    momentum: int = 0


@dataclass(frozen=True)
class TrialConfig:
    """Everything a trial depends on. ``scenario`` is a path or a ``{preset, density, seed}`` dict."""

    scenario: Any = None
    ontology: str | None = None
    agents: int = 3
    sensor: SensorConfig = field(default_factory=SensorConfig)
    motion: MotionConfig = field(default_factory=MotionConfig)
    sigma_drift: float = 0.0
    oracle: OracleConfig = field(default_factory=OracleConfig)
    merge: MergeConfig = field(default_factory=MergeConfig)
    alpha: float = 0.5
    threshold: float = 0.6
    sparsity_floor: int = 4
    nnn: NNNConfig = field(default_factory=NNNConfig)
    sync_interval: int = 10
    step_cap: int = 1_000_000
    match_radius: float = 0.05
    dispersion_cap: float = 0.1
    seed: int = 0
    base_dir: str = "."

    def __post_init__(self):
        if self.scenario is None:
            raise ConfigError("a scenario path or preset is required")
        if self.agents < 1:
            raise ConfigError("agent count must be at least 1")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if min(self.sigma_drift, self.sensor.sigma_range, self.sensor.sigma_bearing) < 0:
            raise ConfigError("noise levels must be non-negative")
        if not 0.0 <= self.sensor.p_detect <= 1.0:
            raise ConfigError("p_detect must lie in [0, 1]")
        if self.sync_interval < 1 or self.step_cap < 1:
            raise ConfigError("sync interval and step cap must be positive")
        if self.oracle.theta <= 0:
            raise ConfigError("oracle theta must be positive")
        if self.dispersion_cap <= 0:
            raise ConfigError("dispersion cap must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        d["nnn"]["seed_position"] = list(self.nnn.seed_position)
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


_SECTIONS = {"sensor": SensorConfig, "motion": MotionConfig, "oracle": OracleConfig,
             "merge": MergeConfig, "nnn": NNNConfig}


def _build(kind, data: Mapping, where: str):
    names = {f.name for f in fields(kind)}
    extra = set(data) - names
    if extra:
        raise ConfigError(f"unknown {where} keys: {sorted(extra)}")
    try:
        return kind(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where}: {exc}") from exc


def config_from_dict(data: Mapping, base_dir: str | Path = ".") -> TrialConfig:
    data = dict(data)
    for key, kind in _SECTIONS.items():
        if key in data:
            sub = dict(data[key])
            if key == "nnn" and "seed_position" in sub:
                sub["seed_position"] = tuple(float(v) for v in sub["seed_position"])
            data[key] = _build(kind, sub, key)
    data["base_dir"] = str(base_dir)
    return _build(TrialConfig, data, "config")


def load_config(path) -> TrialConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data, path.parent)


def _resolve(cfg: TrialConfig, p: str) -> Path:
    q = Path(p)
    return q if q.is_absolute() else Path(cfg.base_dir) / q


def resolve_ontology(cfg: TrialConfig) -> Ontology:
    name = cfg.ontology
    if name is None and isinstance(cfg.scenario, Mapping):
        preset = cfg.scenario.get("preset")
        if preset in PRESETS:
            name = PRESETS[preset].ontology
    if name is None:
        name = "canberra"
    try:
        return builtin_ontology(name)
    except FileNotFoundError:
        return load_ontology(_resolve(cfg, name))


def resolve_scenario(cfg: TrialConfig, ontology: Ontology) -> ScenarioSpec:
    sc = cfg.scenario
    if isinstance(sc, Mapping):
        if "preset" in sc:
            extra = set(sc) - {"preset", "density", "seed"}
            if extra:
                raise ConfigError(f"unknown scenario keys: {sorted(extra)}")
            if sc["preset"] not in PRESETS:
                raise ConfigError(f"unknown preset {sc['preset']!r}")
            spec = generate_scenario(sc["preset"], sc.get("density"), int(sc.get("seed", cfg.seed)),
                                     ontology, cfg.agents)
        else:
            spec = scenario_from_dict(sc, ontology)
    else:
        spec = load_scenario(_resolve(cfg, str(sc)), ontology)
    if len(spec.agent_starts) != cfg.agents:
        spec = replace(spec, agent_starts=default_agent_starts(spec.bounds, cfg.agents))
    return spec


@dataclass
class TrialResult:
    config: TrialConfig
    spec: ScenarioSpec
    ontology: Ontology
    report: TrialReport
    control: ControlAgent
    agents: list[AgentState]
    grid_roots: list[GridSegment]
    fragments: list[Fragment]
    truth: np.ndarray
    pred_grid: tuple[np.ndarray, np.ndarray]
    pred_branch: tuple[np.ndarray, np.ndarray]
    trajectories: np.ndarray = field(repr=False, default=None)


def _sync(control: ControlAgent, agents: Sequence[AgentState], t: int) -> None:
    for a in agents:
        control.receive(a.id, a.local_map, a.observations, float(t))


def simulate(cfg: TrialConfig, spec: ScenarioSpec, ontology: Ontology):
    """Run the agent loop only. Returns ``(control, agents, steps, terminated, er_series, trajectories)``."""
    agents = [AgentState.at(i, s, cfg.sensor, cfg.motion) for i, s in enumerate(spec.agent_starts)]
    rngs = [AgentRngs.derive(cfg.seed, a.id) for a in agents]
    control = ControlAgent(ontology, {a.id: a.start_pose for a in agents}, cfg.merge)
    theta = cfg.oracle.theta if cfg.oracle.enabled else None
    all_ids = {f.id for f in spec.features}
    found: set[int] = set()
    sizes = [0] * len(agents)
    er_series: list[tuple[int, float]] = []
    traj = [np.array([a.pose[:2] for a in agents])]
    # agents farther than this from the centre of mass get no push outward
    cap = cfg.dispersion_cap * float(np.hypot(*spec.bounds))
    t = 0
    done = not all_ids
    while not done and t < cfg.step_cap:
        believed = np.array([a.believed[:2] for a in agents])
        incentives = dispersion_incentives(believed, cap=cap)
        for k, a in enumerate(agents):
            step_agent(a, spec, ontology, incentives[k], rngs[k], cfg.sensor, cfg.motion,
                       cfg.sigma_drift, theta)
            size = len(a.acquired) + len(a.observations)
            if size != sizes[k]:
                sizes[k] = size
                found |= a.discovered
        t += 1
        traj.append(np.array([a.pose[:2] for a in agents]))
        done = found >= all_ids
        if t % cfg.sync_interval == 0 and not done:
            _sync(control, agents, t)
            er_series.append((t, avg_center_offset_error(control.collective.landmarks)))
            for a in agents:
                # abandoned targets become eligible again after each sync
                a.given_up.clear()
    _sync(control, agents, t)
    er_series.append((t, avg_center_offset_error(control.collective.landmarks)))
    return control, agents, t, done, er_series, np.asarray(traj)


def run_trial(cfg: TrialConfig) -> TrialResult:
    ontology = resolve_ontology(cfg)
    spec = resolve_scenario(cfg, ontology)
    control, agents, steps, done, er_series, traj = simulate(cfg, spec, ontology)

    lms = control.classification_landmarks()
    roots = grid_segment(lms, spec.bounds, ontology, cfg.alpha, cfg.threshold, cfg.sparsity_floor)
    leaves = grid_leaves(roots)
    frags = branch_segment(lms, ontology, cfg.alpha, cfg.nnn.seed_position, cfg.nnn.momentum)
    truth = ground_truth_grid(spec).labels
    pg = rasterize_grid(leaves, spec.bounds)
    pb = rasterize_fragments(frags, spec.bounds)

    rep = TrialReport(scenario=spec.name, seed=cfg.seed, agents=len(agents),
                      feature_count=len(spec.features), steps=steps, terminated=done)
    found = set().union(*(a.discovered for a in agents)) if agents else set()
    rep.discovered = len(found)
    rep.total_area = spec.area
    speeds = [a.speed for a in agents]
    widths = [a.sweep_width for a in agents]
    rep.searched_area, rep.coverage, rep.tracked_coverage = area_coverage(
        speeds, widths, steps, spec.area, [traj[:, k] for k in range(len(agents))], spec.bounds)
    rep.avg_dispersion, rep.norm_dispersion = dispersion(traj[1:] if len(traj) > 1 else traj, spec.bounds)
    rep.er_series = er_series
    rep.er_final = er_series[-1][1]
    rep.er_max = max(e for _, e in er_series)
    statics = [f for f in spec.features if f.static]
    rep.topology_coverage, rep.global_accuracy = topology_match(
        control.collective.landmarks, statics, cfg.match_radius, ontology)
    per_class = {}
    for tag, (labels, conf) in (("grid", pg), ("branch", pb)):
        m_iou, per_iou = macro_iou(labels, truth)
        pr = precision_recall_ap(labels, conf, truth)
        setattr(rep, f"{tag}_iou", m_iou)
        setattr(rep, f"{tag}_ap", pr["mAP"])
        setattr(rep, f"{tag}_micro_ap", pr["micro_ap"])
        setattr(rep, f"{tag}_accuracy", explored_accuracy(labels, truth))
        per_class[tag] = {c: dict(v, iou=per_iou[c]) for c, v in pr["per_class"].items()}
    rep.per_class = per_class
    rep.landmarks = len(lms)
    rep.fragments = len(frags)
    rep.grid_leaves = len(leaves)
    return TrialResult(cfg, spec, ontology, rep, control, agents, roots, frags, truth, pg, pb, traj)


def grid_to_csv(labels, conf=None) -> str:
    """Long-format grid export: ``row,col,label,confidence`` (row 0 at the bottom)."""
    lines = ["row,col,label,confidence"]
    n_rows, n_cols = labels.shape
    for r in range(n_rows):
        for c in range(n_cols):
            v = 0.0 if conf is None else float(conf[r, c])
            lines.append(f"{r},{c},{labels[r, c]},{v!r}")
    return "\n".join(lines) + "\n"


def grid_from_csv(text: str):
    rows = list(csv.DictReader(text.splitlines()))
    if not rows:
        raise ValueError("empty grid file")
    n_rows = max(int(r["row"]) for r in rows) + 1
    n_cols = max(int(r["col"]) for r in rows) + 1
    if len(rows) != n_rows * n_cols:
        raise ValueError("grid file does not cover a full rectangle")
    labels = np.empty((n_rows, n_cols), dtype=object)
    conf = np.zeros((n_rows, n_cols))
    for r in rows:
        i, j = int(r["row"]), int(r["col"])
        labels[i, j] = r["label"]
        conf[i, j] = float(r.get("confidence") or 0.0)
    return labels, conf


OUTPUT_FILES = ("report.csv", "collective_map.json", "grid.json", "fragments.json",
                "pred_grid_grid.csv", "pred_grid_branch.csv", "truth_grid.csv")
RENDER_FILES = ("compare_grid.pgm", "compare_branch.pgm", "map.svg")


def write_outputs(result: TrialResult, out_dir, render: bool = True) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lms = result.control.classification_landmarks()
    texts = {
        "report.csv": result.report.to_csv(),
        "report.json": result.report.to_json(),
        "collective_map.json": result.control.collective.map.dumps(),
        "grid.json": json.dumps([r.to_json() for r in result.grid_roots], indent=1),
        "fragments.json": json.dumps([f.to_json(lms) for f in result.fragments], indent=1),
        "pred_grid_grid.csv": grid_to_csv(*result.pred_grid),
        "pred_grid_branch.csv": grid_to_csv(*result.pred_branch),
        "truth_grid.csv": grid_to_csv(result.truth),
    }
    written = []
    for name, text in texts.items():
        (out / name).write_text(text)
        written.append(out / name)
    if render:
        from .render import default_palette, render_pgm, render_svg

        pal = default_palette(result.ontology.environments)
        (out / "compare_grid.pgm").write_bytes(render_pgm(result.truth, result.pred_grid[0], pal))
        (out / "compare_branch.pgm").write_bytes(render_pgm(result.truth, result.pred_branch[0], pal))
        (out / "map.svg").write_text(render_svg(result.spec, lms, result.fragments,
                                                grid_leaves(result.grid_roots), pal))
        written += [out / n for n in RENDER_FILES]
    return written


def _run_one(cfg: TrialConfig) -> TrialReport:
    try:
        return run_trial(cfg).report
    except Exception as exc:  # recorded per row, the batch carries on
        name = cfg.scenario if isinstance(cfg.scenario, str) else json.dumps(cfg.scenario, sort_keys=True)
        return TrialReport(scenario=str(name), seed=cfg.seed, error=f"{type(exc).__name__}: {exc}")


def run_batch(configs: Sequence[TrialConfig], workers: int = 1) -> list[TrialReport]:
    """Run trials independently; results come back in input order."""
    if not configs:
        raise ConfigError("a batch needs at least one config")
    if workers <= 1:
        return [_run_one(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, configs))


def sweep(base: TrialConfig, values: Mapping[str, Sequence]) -> list[TrialConfig]:
    """Cartesian sweep over dotted keys, e.g. ``{"scenario.density": [5, 20], "seed": [1, 2]}``."""
    configs = [base.to_dict()]
    for key, vals in values.items():
        nxt = []
        for d in configs:
            for v in vals:
                e = copy.deepcopy(d)
                node = e
                *path, last = key.split(".")
                for p in path:
                    node = node[p]
                node[last] = v
                nxt.append(e)
        configs = nxt
    return [config_from_dict(d, base.base_dir) for d in configs]


def batch_csv(reports: Sequence[TrialReport]) -> str:
    return reports_to_csv(reports)


__all__ = [
    "ConfigError", "OracleConfig", "NNNConfig", "TrialConfig", "TrialResult", "config_from_dict",
    "load_config", "resolve_ontology", "resolve_scenario", "simulate", "run_trial", "write_outputs",
    "run_batch", "sweep", "batch_csv", "grid_to_csv", "grid_from_csv", "OUTPUT_FILES", "RENDER_FILES",
]
