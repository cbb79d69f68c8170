"""YAML run-configuration: schema, validation, and construction of the
simulation and experiment objects.

Top-level sections: p, seed, clock, network, collectives, barrier (optional),
plan, sync, sync_eval (optional), repro (optional). Every run config is
validated before any simulation starts; violations raise ConfigError with the
offending key path.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import yaml

from .benchmark import SchemeSpec
from .clocksync import SyncConfig, VALID_METHODS
from .experiment import ExperimentPlan
from .simcore import ClockSpec, ClusterSpec, CollectiveSpec, DistSpec, NetworkSpec, dist_from_config


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class WindowSweepConfig:
    win_sizes_us: tuple[float, ...]
    func: str
    msize: int
    nrep: int = 200


@dataclass(frozen=True)
class SyncEvalConfig:
    methods: tuple[str, ...]
    grid: tuple[tuple[int, int], ...]  # (n_fitpts, n_exchanges) pairs
    seeds: int = 5
    epochs: int = 20                   # number of clock offset estimations
    epoch_interval: float = 1.0
    nrounds: int = 10                  # ping-pongs per offset estimate
    pareto_epoch: float = 5.0
    window_sweep: WindowSweepConfig | None = None


@dataclass(frozen=True)
class RunConfig:
    cluster: ClusterSpec
    plan: ExperimentPlan
    seed: int
    sync_eval: SyncEvalConfig | None = None
    ntrial: int = 10
    drift_bin_size: int = 100


_REQUIRED = object()


def _need(mapping, key, path, types=None, default=_REQUIRED):
    if key not in mapping:
        if default is not _REQUIRED:
            return default
        raise ConfigError(f"missing required key '{path}{key}'")
    val = mapping[key]
    if types is not None and not isinstance(val, types):
        raise ConfigError(f"'{path}{key}' has wrong type {type(val).__name__}")
    return val


def _dist(obj, path) -> DistSpec:
    try:
        return dist_from_config(obj)
    except ValueError as err:
        raise ConfigError(f"bad distribution at '{path}': {err}") from None


def _clock_spec(obj, p) -> ClockSpec:
    obj = obj or {}
    skews = obj.get("skews")
    if skews is not None:
        if len(skews) != p:
            raise ConfigError(f"'clock.skews' must list {p} values")
        skews = tuple(float(s) for s in skews)
    return ClockSpec(
        skews=skews,
        skew_max=float(obj.get("skew_max", 0.7e-5)),
        offset_spread=float(obj.get("offset_spread", 1.0)),
        read_noise_sigma=float(obj.get("read_noise_sigma", 1e-8)),
        granularity=float(obj.get("granularity", 1e-9)),
    )


def _network_spec(obj) -> NetworkSpec:
    obj = obj or {}
    try:
        return NetworkSpec(
            base_latency=float(obj.get("base_latency", 2e-6)),
            asymmetry=float(obj.get("asymmetry", 0.0)),
            jitter=_dist(obj.get("jitter", {"kind": "exponential", "mean": 1e-7}), "network.jitter"),
            perturb_scale=float(obj.get("perturb_scale", 0.03)),
        )
    except ValueError as err:
        raise ConfigError(f"bad network section: {err}") from None


def _collective_spec(obj, path) -> CollectiveSpec:
    obj = obj or {}
    rounds = obj.get("rounds", "log2p")
    if not isinstance(rounds, int) and rounds not in ("log2p", "one"):
        raise ConfigError(f"'{path}.rounds' must be 'log2p', 'one', or an integer")
    try:
        return CollectiveSpec(
            alpha=float(obj.get("alpha", 5e-6)),
            beta=float(obj.get("beta", 0.0)),
            rounds=rounds,
            duration_noise=_dist(obj.get("duration_noise"), f"{path}.duration_noise"),
            exit_skew=_dist(obj.get("exit_skew"), f"{path}.exit_skew"),
        )
    except ValueError as err:
        raise ConfigError(f"bad collective at '{path}': {err}") from None


def _scheme_spec(obj, nrep) -> SchemeSpec:
    obj = obj or {}
    kind = _need(obj, "kind", "plan.scheme.", str, "MS4")
    sync = _need(obj, "sync", "plan.scheme.", str, "window" if kind == "MS4" else "own-barrier")
    method = obj.get("window_method", "hca")
    if sync == "window" and method.lower() not in VALID_METHODS:
        raise ConfigError(
            f"'plan.scheme.window_method' must be one of {', '.join(VALID_METHODS)}; got {method!r}"
        )
    win = obj.get("win_size", "auto")
    if win != "auto" and win is not None:
        win = float(win)
    try:
        return SchemeSpec(
            scheme=kind,
            sync=sync,
            nrep=nrep,
            window_method=method.lower() if sync == "window" else None,
            win_size=win,
            ms3_barrier=bool(obj.get("ms3_barrier", True)),
            pipelining=float(obj.get("pipelining", 0.0)),
        )
    except ValueError as err:
        raise ConfigError(f"bad plan.scheme: {err}") from None


def _sync_config(obj) -> SyncConfig:
    obj = obj or {}
    try:
        return SyncConfig(
            n_fitpts=int(obj.get("n_fitpts", 1000)),
            n_exchanges=int(obj.get("n_exchanges", 100)),
            n_pingpongs=int(obj.get("n_pingpongs", 100)),
            hierarchical_intercepts=bool(obj.get("hierarchical_intercepts", False)),
            win_size=float(obj.get("win_size", 1e-3)),
            warmup_rounds=int(obj.get("warmup_rounds", 10)),
        )
    except ValueError as err:
        raise ConfigError(f"bad sync section: {err}") from None


def _sync_eval(obj, sync_cfg: SyncConfig) -> SyncEvalConfig | None:
    if obj is None:
        return None
    methods = obj.get("methods")
    if not methods:
        raise ConfigError("'sync_eval.methods' must be a nonempty list")
    methods = tuple(str(m).lower() for m in methods)
    for m in methods:
        if m not in VALID_METHODS:
            raise ConfigError(
                f"unknown method {m!r} in 'sync_eval.methods'; valid methods: {', '.join(VALID_METHODS)}"
            )
    grid = obj.get("grid") or [[sync_cfg.n_fitpts, sync_cfg.n_exchanges]]
    try:
        grid = tuple((int(nf), int(ne)) for nf, ne in grid)
    except (TypeError, ValueError):
        raise ConfigError("'sync_eval.grid' must be a list of [n_fitpts, n_exchanges] pairs") from None
    sweep = None
    if "window_sweep" in obj and obj["window_sweep"]:
        ws = obj["window_sweep"]
        sweep = WindowSweepConfig(
            win_sizes_us=tuple(float(w) for w in _need(ws, "win_sizes_us", "sync_eval.window_sweep.", list)),
            func=str(_need(ws, "func", "sync_eval.window_sweep.", str)),
            msize=int(_need(ws, "msize", "sync_eval.window_sweep.")),
            nrep=int(ws.get("nrep", 200)),
        )
    return SyncEvalConfig(
        methods=methods,
        grid=grid,
        seeds=int(obj.get("seeds", 5)),
        epochs=int(obj.get("epochs", 20)),
        epoch_interval=float(obj.get("epoch_interval", 1.0)),
        nrounds=int(obj.get("nrounds", 10)),
        pareto_epoch=float(obj.get("pareto_epoch", 5.0)),
        window_sweep=sweep,
    )


def parse_config(doc: dict, seed_override: int | None = None) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a mapping")
    p = int(_need(doc, "p", "", int))
    if p < 1:
        raise ConfigError("'p' must be >= 1")
    seed = int(doc.get("seed", 1)) if seed_override is None else int(seed_override)

    collectives = {}
    for name, spec in (_need(doc, "collectives", "", dict, {}) or {}).items():
        collectives[str(name)] = _collective_spec(spec, f"collectives.{name}")
    if not collectives:
        raise ConfigError("'collectives' must define at least one collective model")

    barrier = _collective_spec(doc["barrier"], "barrier") if doc.get("barrier") else None
    try:
        cluster = ClusterSpec(
            p=p,
            clock=_clock_spec(doc.get("clock"), p),
            network=_network_spec(doc.get("network")),
            collectives=collectives,
            barrier=barrier,
        )
    except ValueError as err:
        raise ConfigError(str(err)) from None

    plan_obj = _need(doc, "plan", "", dict, {}) or {}
    nrep = int(plan_obj.get("nrep", 100))
    funcs = tuple(str(f) for f in plan_obj.get("funcs", sorted(collectives)))
    for f in funcs:
        if f not in collectives:
            raise ConfigError(f"plan function {f!r} has no collective model")
    msizes = tuple(int(m) for m in plan_obj.get("msizes", [1024]))
    sync_cfg = _sync_config(doc.get("sync"))
    try:
        plan = ExperimentPlan(
            n_mpiruns=int(plan_obj.get("n_mpiruns", 10)),
            msizes=msizes,
            funcs=funcs,
            nrep=nrep,
            scheme=_scheme_spec(plan_obj.get("scheme"), nrep),
            master_seed=seed,
            perturb=bool(plan_obj.get("perturb", True)),
            sync=sync_cfg,
        )
    except ValueError as err:
        raise ConfigError(f"bad plan: {err}") from None

    repro_obj = doc.get("repro") or {}
    return RunConfig(
        cluster=cluster,
        plan=plan,
        seed=seed,
        sync_eval=_sync_eval(doc.get("sync_eval"), sync_cfg),
        ntrial=int(repro_obj.get("ntrial", 10)),
        drift_bin_size=int((doc.get("output") or {}).get("drift_bin_size", 100)),
    )


def load_config(path, seed_override: int | None = None) -> RunConfig:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as err:
        raise ConfigError(f"config is not valid YAML: {err}") from None
    return parse_config(doc, seed_override)
