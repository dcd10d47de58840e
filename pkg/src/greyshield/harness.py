"""Multi-seed training/evaluation runs, metrics and CSV exports."""

from __future__ import annotations

import configparser
import csv
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .agent import RandomAgent, Td3Agent, hyperparams_for
from .commissioning import OperationLog, commission
from .env import MesEnv, RewardConfig, TrajectoryLog, control_step, episode_run
from .fallback import FallbackConfig, FallbackPolicy
from .nominal import UndefinedMetricError, save_models
from .plant import STEPS_PER_WEEK, STEPS_PER_YEAR, NoiseConfig, Plant, PlantConfig
from .profiles import generate_profiles
from .safety.shield import METHODS, SafetyConfig, SafetyLayer, shaped_tuples
from .surrogate import FitConfig, SurrogateLearner

AGENTS = ("td3", "random", "fallback")


@dataclass
class RunConfig:
    method: str = "optlayerpolicy"
    agent: str = "td3"
    seeds: tuple = (1,)
    training_steps: int = 20_000
    eval_interval: int = 2_000
    eval_horizon: int = STEPS_PER_WEEK
    eval_seed: int = 1000
    out: str = "runs/default"
    timing: bool = False
    plant: dict = field(default_factory=dict)
    noise_sigma: float = 0.015
    reward: RewardConfig = field(default_factory=RewardConfig)
    h_safe: float = 0.25
    eps_balance: float = 0.10
    surrogate_max_epochs: int = 500
    td3: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.agent not in AGENTS:
            raise ValueError(f"unknown agent {self.agent!r}")
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        if self.training_steps < 0 or self.eval_interval <= 0:
            raise ValueError("training_steps must be >= 0 and eval_interval > 0")
        if not 1 <= self.eval_horizon <= STEPS_PER_WEEK * 52:
            raise ValueError("eval_horizon out of range")

    def safety(self) -> SafetyConfig:
        return SafetyConfig(self.method, h_safe=self.h_safe, eps_balance=self.eps_balance)

    def plant_config(self) -> PlantConfig:
        return PlantConfig.from_dict(self.plant)

    # --- sectioned key-value file ------------------------------------------
    def to_ini(self) -> configparser.ConfigParser:
        cp = configparser.ConfigParser()
        cp["run"] = {
            "method": self.method, "agent": self.agent,
            "seeds": ",".join(str(s) for s in self.seeds),
            "training_steps": str(self.training_steps),
            "eval_interval": str(self.eval_interval),
            "eval_horizon": str(self.eval_horizon), "eval_seed": str(self.eval_seed),
            "out": self.out, "timing": str(self.timing).lower(),
        }
        cp["plant"] = {k: repr(float(v)) for k, v in self.plant.items()}
        cp["noise"] = {"sigma_mult": repr(self.noise_sigma)}
        cp["reward"] = {k: repr(v) for k, v in asdict(self.reward).items()}
        cp["safety"] = {"h_safe": repr(self.h_safe), "eps_balance": repr(self.eps_balance)}
        cp["surrogate"] = {"max_epochs": str(self.surrogate_max_epochs)}
        cp["td3"] = {k: str(v) for k, v in self.td3.items()}
        return cp

    def write(self, path) -> None:
        with open(path, "w") as fh:
            self.to_ini().write(fh)

    @classmethod
    def from_ini(cls, path_or_text, **overrides) -> "RunConfig":
        cp = configparser.ConfigParser()
        if isinstance(path_or_text, (str, os.PathLike)) and Path(path_or_text).exists():
            cp.read(path_or_text)
        else:
            cp.read_string(str(path_or_text))
        kw = {}
        if cp.has_section("run"):
            r = cp["run"]
            for key in ("method", "agent", "out"):
                if key in r:
                    kw[key] = r[key]
            for key in ("training_steps", "eval_interval", "eval_horizon", "eval_seed"):
                if key in r:
                    kw[key] = r.getint(key)
            if "seeds" in r:
                kw["seeds"] = parse_seeds(r["seeds"])
            if "timing" in r:
                kw["timing"] = r.getboolean("timing")
        if cp.has_section("plant"):
            kw["plant"] = {k: float(v) for k, v in cp["plant"].items()}
            PlantConfig.from_dict(kw["plant"])
        if cp.has_section("noise") and "sigma_mult" in cp["noise"]:
            kw["noise_sigma"] = cp["noise"].getfloat("sigma_mult")
        if cp.has_section("reward"):
            kw["reward"] = RewardConfig(**{k: float(v) for k, v in cp["reward"].items()})
        if cp.has_section("safety"):
            s = cp["safety"]
            if "h_safe" in s:
                kw["h_safe"] = s.getfloat("h_safe")
            if "eps_balance" in s:
                kw["eps_balance"] = s.getfloat("eps_balance")
        if cp.has_section("surrogate") and "max_epochs" in cp["surrogate"]:
            kw["surrogate_max_epochs"] = cp["surrogate"].getint("max_epochs")
        if cp.has_section("td3"):
            kw["td3"] = {k: _parse_value(v) for k, v in cp["td3"].items()}
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)


def _parse_value(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if text.startswith("(") and text.endswith(")"):
        return tuple(int(x) for x in text[1:-1].split(",") if x.strip())
    return text


def parse_seeds(text: str) -> tuple:
    return tuple(int(s) for s in str(text).split(",") if s.strip())


# --- metrics -----------------------------------------------------------------

def constraint_tolerance(traj: TrajectoryLog | dict) -> tuple[float, float]:
    """Heat-balance error as (NMAE %, NSUM %).

    NMAE normalises the mean absolute error by the range of demand over the
    trajectory; NSUM divides the summed error by the summed demand.
    """
    if isinstance(traj, TrajectoryLog):
        q_dem, q_prod = traj.column("q_demand"), traj.column("q_production")
    else:
        q_dem, q_prod = np.asarray(traj["q_demand"]), np.asarray(traj["q_production"])
    if q_dem.size == 0:
        raise UndefinedMetricError("empty trajectory")
    span = float(q_dem.max() - q_dem.min())
    if span <= 0:
        raise UndefinedMetricError("demand range is zero")
    e = np.abs(q_dem - q_prod)
    return 100.0 * float(e.mean()) / span, 100.0 * float(e.sum()) / float(q_dem.sum())


def relative_objective(objective: float, reference: float) -> float:
    """Reference over objective, in percent (both are negative reward sums)."""
    return 100.0 * reference / objective


def runtime_stats(seconds) -> dict:
    t = np.asarray(seconds, dtype=float)
    if t.size == 0:
        return {"steps": 0, "min": 0.0, "mean": 0.0, "std": 0.0, "max": 0.0, "total": 0.0}
    return {"steps": int(t.size), "min": float(t.min()), "mean": float(t.mean()),
            "std": float(t.std()), "max": float(t.max()), "total": float(t.sum())}


# --- experiment --------------------------------------------------------------

@dataclass
class SeedContext:
    seed: int
    plant_cfg: PlantConfig
    models: dict
    fallback: FallbackPolicy
    learner: SurrogateLearner | None
    layer: SafetyLayer
    agent: object


def build_context(cfg: RunConfig, seed: int) -> SeedContext:
    plant_cfg = cfg.plant_config()
    noise = NoiseConfig(sigma_mult=cfg.noise_sigma, seed=10_000 + seed)
    models, _, _ = commission(Plant(plant_cfg, noise=noise), seed)
    assets = Plant(plant_cfg).assets
    fb = FallbackPolicy(FallbackConfig.from_models(models, assets))
    learner = None
    if cfg.method == "greyoptlayerpolicy":
        learner = SurrogateLearner(models, assets,
                                   fit_cfg=FitConfig(max_epochs=cfg.surrogate_max_epochs,
                                                     seed=seed))
    layer = SafetyLayer(cfg.safety(), models, assets, fb if cfg.method != "optlayer" else None,
                        learner)
    if cfg.agent == "td3":
        agent = Td3Agent(9, 5, hyperparams_for(cfg.method, **cfg.td3), seed=seed)
    elif cfg.agent == "random":
        agent = RandomAgent(seed)
    else:
        agent = None
    return SeedContext(seed, plant_cfg, models, fb, learner, layer, agent)


def _policy(ctx: SeedContext, env: MesEnv, explore: bool, rng=None):
    if ctx.agent is None:
        return lambda obs: ctx.fallback(env.q_demand())
    if isinstance(ctx.agent, RandomAgent) and rng is not None:
        return lambda obs: rng.uniform(-1.0, 1.0, size=5)
    return lambda obs: ctx.agent.act(obs, explore)


def evaluate(cfg: RunConfig, ctx: SeedContext, step: int, timer=None) -> TrajectoryLog:
    """Greedy rollout over the fixed evaluation week."""
    profile = generate_profiles(cfg.eval_seed, cfg.eval_horizon, "eval", ctx.plant_cfg)
    plant = Plant(ctx.plant_cfg, noise=NoiseConfig(sigma_mult=cfg.noise_sigma,
                                                   seed=cfg.eval_seed))
    env = MesEnv(plant, profile, reward_cfg=cfg.reward)
    rng = np.random.default_rng([ctx.seed, step, 3])
    log = episode_run(env, _policy(ctx, env, False, rng), ctx.layer, method=cfg.method)
    if timer is not None:
        timer.extend(r.seconds for r in log.records)
    return log


def _summary(log: TrajectoryLog) -> dict:
    nmae, nsum = constraint_tolerance(log)
    return {"objective": log.total_reward(), "cost": float(log.column("l_cost").sum()),
            "comfort_mwh": float(log.column("l_comfort").sum()) * 0.25 / 1e6,
            "nmae": nmae, "nsum": nsum,
            "fallback_rate": float(log.column("used_fallback").mean())}


def run_seed(cfg: RunConfig, seed: int, out: Path) -> dict:
    ctx = build_context(cfg, seed)
    save_models(ctx.models, out / f"nominal_models_{seed}.txt")
    timer: list = []
    curve, costs = [], []
    train_profile = generate_profiles(seed, STEPS_PER_YEAR, "train", ctx.plant_cfg)
    plant = Plant(ctx.plant_cfg, noise=NoiseConfig(sigma_mult=cfg.noise_sigma, seed=seed))
    env = MesEnv(plant, train_profile, reward_cfg=cfg.reward)
    env.reset()
    oplog = OperationLog()
    policy = _policy(ctx, env, True)
    bucket = np.zeros(5)
    initial = None
    for k in range(cfg.training_steps + 1):
        if k % cfg.eval_interval == 0 or k == cfg.training_steps:
            s = _summary(evaluate(cfg, ctx, k, timer))
            initial = s if initial is None else initial
            curve.append((seed, k, s))
            if k > 0:
                costs.append((seed, k, *bucket))
                bucket[:] = 0
        if k == cfg.training_steps:
            break
        state = env.state
        rec, info = control_step(env, policy, ctx.layer, cfg.method)
        timer.append(rec.seconds)
        oplog.append(state, rec.a_exec, info["outcome"])
        if ctx.agent is not None:
            for tup in shaped_tuples(rec.obs, rec.a_pred, rec.a_exec, rec.reward,
                                     rec.next_obs, rec.done, cfg.reward.z):
                ctx.agent.observe(tup)
            ctx.agent.train_step(k)
        if ctx.learner is not None:
            ctx.learner.maybe_fit(k, oplog)
        bucket += (rec.l_cost, rec.l_comfort * 0.25 / 1e6, rec.reward, rec.corrected,
                   rec.used_fallback)
        if env.done:
            env.reset()
    final_log = evaluate(cfg, ctx, cfg.training_steps)
    final_log.to_csv(out / f"trajectory_{seed}.csv")
    final = _summary(final_log)
    if isinstance(ctx.agent, Td3Agent):
        ctx.agent.write_diagnostics(out / f"td3_diagnostics_{seed}.csv")
    return {"seed": seed, "curve": curve, "costs": costs, "initial": initial, "final": final,
            "surrogates": ctx.learner.history if ctx.learner else [],
            "runtime": runtime_stats(timer), "learner": ctx.learner, "oplog": oplog}


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    return repr(float(x))


def run_experiment(cfg: RunConfig) -> Path:
    """Train/evaluate every seed and write the run directory; returns its path."""
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc
    cfg.write(out / "config.ini")
    results = [run_seed(cfg, seed, out) for seed in cfg.seeds]

    _write_csv(out / "learning_curve.csv",
               ["seed", "step", "objective", "cost", "comfort_mwh", "nmae", "nsum",
                "fallback_rate"],
               [[seed, k, *(_fmt(s[c]) for c in ("objective", "cost", "comfort_mwh", "nmae",
                                                 "nsum", "fallback_rate"))]
                for r in results for seed, k, s in r["curve"]])
    _write_csv(out / "cost_curve.csv",
               ["seed", "step", "train_cost", "train_comfort_mwh", "train_reward",
                "corrections", "fallbacks"],
               [[seed, k, _fmt(c), _fmt(m), _fmt(rw), int(nc), int(nf)]
                for r in results for seed, k, c, m, rw, nc, nf in r["costs"]])
    rows = []
    for r in results:
        f, i = r["final"], r["initial"]
        rows.append([r["seed"], cfg.method, cfg.agent, _fmt(f["objective"]), _fmt(i["objective"]),
                     _fmt(f["cost"]), _fmt(f["comfort_mwh"]), _fmt(f["nmae"]), _fmt(f["nsum"])])
    mean = lambda key, src: _fmt(np.mean([r[src][key] for r in results]))
    rows.append(["mean", cfg.method, cfg.agent, mean("objective", "final"),
                 mean("objective", "initial"), mean("cost", "final"),
                 mean("comfort_mwh", "final"), mean("nmae", "final"), mean("nsum", "final")])
    _write_csv(out / "eval_report.csv", EVAL_HEADER, rows)
    _write_csv(out / "surrogate_metrics.csv", ["seed", "fit_index", "step", "asset", "nmae_pct",
                                               "mae", "r2"],
               [[r["seed"], h.fit_index, h.step, h.asset, _fmt(100.0 * h.nmae), _fmt(h.mae), _fmt(h.r2)]
                for r in results for h in r["surrogates"]])
    if cfg.timing:
        _write_csv(out / "runtime.csv",
                   ["seed", "method", "steps", "min", "mean", "std", "max", "total"],
                   [[r["seed"], cfg.method, r["runtime"]["steps"],
                     *(_fmt(r["runtime"][k]) for k in ("min", "mean", "std", "max", "total"))]
                    for r in results])
    return out


EVAL_HEADER = ["seed", "method", "agent", "objective_absolute", "objective_initial", "cost",
               "comfort_mwh", "constraint_nmae", "constraint_nsum"]


def read_eval_report(run_dir) -> list[dict]:
    with open(Path(run_dir) / "eval_report.csv", newline="") as fh:
        return list(csv.DictReader(fh))


def report(runs, reference) -> list[dict]:
    """Relative objectives of each run against the reference run's final mean objective."""
    ref_rows = read_eval_report(reference)
    ref = float(next(r for r in ref_rows if r["seed"] == "mean")["objective_absolute"])
    out = []
    for run in runs:
        for r in read_eval_report(run):
            obj = float(r["objective_absolute"])
            init = float(r["objective_initial"])
            out.append({"run": str(run), "seed": r["seed"], "method": r["method"],
                        "agent": r["agent"], "objective_absolute": obj,
                        "objective_relative": relative_objective(obj, ref),
                        "initial_relative": relative_objective(init, ref),
                        "constraint_nmae": float(r["constraint_nmae"]),
                        "constraint_nsum": float(r["constraint_nsum"])})
    return out
