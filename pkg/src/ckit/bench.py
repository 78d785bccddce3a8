"""Config-driven experiment runner with CSV traces and rate fitting.

A single JSON document describes the problem, the algorithm, the accuracy
target and the seed batch; ``run_experiment`` executes the batch (runs may
execute in parallel, capped by CKIT_THREADS, without changing any numeric
output) and emits one CSV row per outer iteration / epoch / step.  The
wall_ms column is informational only and excluded from determinism
guarantees; it carries the run-level wall time.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import catalyst_min as cmin
from . import catalyst_minimax as cmm
from . import subsolvers as sub
from .core import OracleStream
from .errors import ConfigurationError
from .testbed import gen_quadratic, gen_saddle

__all__ = [
    "ALGORITHMS",
    "COLUMNS",
    "TraceRow",
    "RunTrace",
    "ExperimentConfig",
    "run_experiment",
    "fit_rate",
]

ALGORITHMS = (
    "catalyst_sgd",
    "r_catalyst_sgd",
    "exact_prox_baseline",
    "reg",
    "sreg",
    "sreg_restarted",
    "catalyst_minimax_det",
    "r_catalyst_minimax_det",
    "catalyst_minimax_stoch",
    "r_catalyst_minimax_stoch",
)

MIN_ALGOS = {"catalyst_sgd", "r_catalyst_sgd", "exact_prox_baseline"}

COLUMNS = (
    "run_id",
    "seed",
    "outer_k",
    "sfo_calls",
    "primal_gap",
    "dist_primal_sq",
    "dist_dual_sq",
    "composite_gap",
    "wall_ms",
)


@dataclass(frozen=True)
class TraceRow:
    run_id: int
    seed: int
    outer_k: int
    sfo_calls: int
    primal_gap: float
    dist_primal_sq: float
    dist_dual_sq: float
    composite_gap: float
    wall_ms: float

    def astuple(self):
        return (
            self.run_id,
            self.seed,
            self.outer_k,
            self.sfo_calls,
            self.primal_gap,
            self.dist_primal_sq,
            self.dist_dual_sq,
            self.composite_gap,
            self.wall_ms,
        )


@dataclass
class RunTrace:
    rows: list

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(COLUMNS)
            for r in self.rows:
                t = r.astuple()
                w.writerow([repr(v) if isinstance(v, float) else v for v in t])

    @staticmethod
    def from_csv(path) -> "RunTrace":
        rows = []
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            header = next(rd)
            if tuple(header) != COLUMNS:
                raise ConfigurationError(f"unexpected trace header {header}")
            for rec in rd:
                rows.append(
                    TraceRow(
                        int(rec[0]),
                        int(rec[1]),
                        int(rec[2]),
                        int(rec[3]),
                        float(rec[4]),
                        float(rec[5]),
                        float(rec[6]),
                        float(rec[7]),
                        float(rec[8]),
                    )
                )
        return RunTrace(rows)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def _need(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigurationError("missing required field", field=f"{path}.{key}")
    return d[key]


_REQUIRED = object()


def _num(d: dict, key: str, path: str, *, positive=False, nonneg=False, integer=False, default=_REQUIRED):
    if key not in d:
        if default is _REQUIRED:
            raise ConfigurationError("missing required field", field=f"{path}.{key}")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigurationError("must be a number", field=f"{path}.{key}")
    if integer and int(v) != v:
        raise ConfigurationError("must be an integer", field=f"{path}.{key}")
    if positive and not v > 0:
        raise ConfigurationError("must be > 0", field=f"{path}.{key}")
    if nonneg and v < 0:
        raise ConfigurationError("must be >= 0", field=f"{path}.{key}")
    return int(v) if integer else float(v)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; see README for the JSON schema."""

    problem: dict
    algorithm: str
    target: dict
    seeds: int
    out: Optional[str] = None

    @staticmethod
    def from_dict(doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigurationError("config must be a JSON object", field="")
        problem = _need(doc, "problem", "")
        if not isinstance(problem, dict):
            raise ConfigurationError("must be an object", field="problem")
        algorithm = _need(doc, "algorithm", "")
        if algorithm not in ALGORITHMS:
            raise ConfigurationError(
                f"unknown algorithm {algorithm!r}; one of {', '.join(ALGORITHMS)}",
                field="algorithm",
            )
        kind = _need(problem, "kind", "problem")
        if kind not in ("quadratic", "saddle"):
            raise ConfigurationError("must be 'quadratic' or 'saddle'", field="problem.kind")
        if (algorithm in MIN_ALGOS) != (kind == "quadratic"):
            raise ConfigurationError(
                f"algorithm {algorithm} does not run on {kind} problems", field="algorithm"
            )
        if kind == "quadratic":
            _num(problem, "d", "problem", positive=True, integer=True)
            L = _num(problem, "L", "problem", positive=True)
            mu = _num(problem, "mu", "problem", nonneg=True, default=0.0)
            if mu > L:
                raise ConfigurationError("must satisfy mu <= L", field="problem.mu")
        else:
            _num(problem, "dx", "problem", positive=True, integer=True)
            _num(problem, "dy", "problem", positive=True, integer=True)
            L = _num(problem, "L", "problem", positive=True)
            mu_p = _num(problem, "mu_p", "problem", nonneg=True, default=0.0)
            mu_d = _num(problem, "mu_d", "problem", positive=True)
            if mu_p > mu_d:
                raise ConfigurationError("must satisfy mu_p <= mu_d", field="problem.mu_p")
            if L < max(mu_p, mu_d):
                raise ConfigurationError("must satisfy L >= max(mu_p, mu_d)", field="problem.L")
        _num(problem, "sigma", "problem", nonneg=True, default=0.0)
        _num(problem, "seed", "problem", integer=True, default=0)
        target = doc.get("target", {})
        if not isinstance(target, dict):
            raise ConfigurationError("must be an object", field="target")
        for key in ("epsilon", "gap_ratio", "d_sq", "dy0_sq", "delta0", "r_sq"):
            _num(target, key, "target", positive=True, default=None)
        for key in ("K", "T", "E"):
            _num(target, key, "target", positive=True, integer=True, default=None)
        seeds = _num(doc, "seeds", "", positive=True, integer=True, default=1)
        out = doc.get("out")
        if out is not None and not isinstance(out, str):
            raise ConfigurationError("must be a string path", field="out")
        return ExperimentConfig(
            problem=problem, algorithm=algorithm, target=target, seeds=seeds, out=out
        )

    @staticmethod
    def from_json(path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as err:
                raise ConfigurationError(f"invalid JSON: {err}", field=str(path))
        return ExperimentConfig.from_dict(doc)

    def to_dict(self) -> dict:
        return {
            "problem": self.problem,
            "algorithm": self.algorithm,
            "target": self.target,
            "seeds": self.seeds,
            "out": self.out,
        }


# ---------------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------------


def _build_instance(problem: dict):
    seed = int(problem.get("seed", 0))
    sigma = float(problem.get("sigma", 0.0))
    if problem["kind"] == "quadratic":
        inst = gen_quadratic(int(problem["d"]), float(problem["L"]), float(problem.get("mu", 0.0)), seed)
    else:
        inst = gen_saddle(
            int(problem["dx"]),
            int(problem["dy"]),
            float(problem["L"]),
            float(problem.get("mu_p", 0.0)),
            float(problem["mu_d"]),
            seed,
            scale=float(problem.get("scale", 1.0)),
        )
    return inst, inst.objective(sigma=sigma)


def _quad_rows(inst, records, run_id, seed, elapsed_ms):
    rows = []
    for rec in records:
        gap = inst.value(rec.x_tilde) - inst.f_star
        dist = float((rec.x_tilde - inst.x_star) @ (rec.x_tilde - inst.x_star))
        rows.append(
            TraceRow(run_id, seed, rec.k, rec.sfo_calls, gap, dist, 0.0, gap, elapsed_ms)
        )
    return rows


def _vi_rows(inst, marks, run_id, seed, elapsed_ms):
    rows = []
    dx = inst.dim_x
    for t, z, calls in marks:
        x, y = z[:dx], z[dx:]
        gap = inst.primal_value(x) - inst.f_star
        dist = float((z - inst.z_star) @ (z - inst.z_star))
        ddual = float((y - inst.y_star) @ (y - inst.y_star))
        rows.append(TraceRow(run_id, seed, t, calls, gap, dist, ddual, gap, elapsed_ms))
    return rows


def _minimax_rows(inst, records, run_id, seed, elapsed_ms, coeff):
    rows = []
    for rec in records:
        gap = inst.primal_value(rec.x_tilde) - inst.f_star
        y_opt = inst.inner_argmax(rec.x_tilde)
        dist = float((rec.x_tilde - inst.x_star) @ (rec.x_tilde - inst.x_star))
        ddual = float((y_opt - rec.y_last) @ (y_opt - rec.y_last))
        rows.append(
            TraceRow(
                run_id, seed, rec.k, rec.sfo_calls, gap, dist, ddual, gap + coeff * ddual, elapsed_ms
            )
        )
    return rows


def _run_one(cfg_dict: dict, run_id: int) -> list:
    cfg = ExperimentConfig.from_dict(cfg_dict)
    inst, prob = _build_instance(cfg.problem)
    seed = int(cfg.problem.get("seed", 0))
    stream = OracleStream.for_run(seed, run_id)
    target = cfg.target
    algo = cfg.algorithm
    t_start = time.perf_counter()

    if algo in MIN_ALGOS:
        x0 = np.zeros(inst.dim)
        d_sq = target.get("d_sq") or float(inst.x_star @ inst.x_star)
        if algo == "r_catalyst_sgd":
            delta0 = target.get("delta0") or (inst.value(x0) - inst.f_star)
            eps = target.get("epsilon")
            if eps is None:
                if target.get("E") is None:
                    raise ConfigurationError("need epsilon or E", field="target")
                eps = delta0 / 2.0 ** target["E"]
            recipe = cmin.recipe_strongly_convex(prob.L, prob.mu, eps, prob.sigma, delta0)
            _, records = cmin.r_catalyst_run(prob, recipe, stream, x0)
        else:
            eps = target.get("epsilon")
            K = target.get("K")
            if eps is None and K is None:
                raise ConfigurationError("need epsilon or K", field="target")
            if eps is not None:
                K_eff = K or math.ceil(4.0 * math.sqrt(prob.L * d_sq / eps))
                T_eff = max(8, math.ceil(8 + 32.0 * prob.sigma**2 * K_eff / (prob.L * eps)))
            else:
                # K-only runs keep the minimal inner budget; sizing the
                # noise floor needs an epsilon target
                K_eff, T_eff = K, 8
            base = cmin.recipe_smooth(prob.L, eps or 1.0, 0.0, d_sq)
            recipe = cmin.MinRecipe(
                K=K_eff, gamma=base.gamma, beta=base.beta, T_of=lambda k: T_eff,
                delta_target=base.delta_target,
            )
            if algo == "exact_prox_baseline":
                recipe = cmin.MinRecipe(
                    K=recipe.K, gamma=recipe.gamma, beta=recipe.beta,
                    T_of=recipe.T_of, inner="exact",
                )
                _, records = cmin.catalyst_run(
                    prob, recipe, None, x0, exact_prox_fn=inst.exact_prox
                )
            else:
                _, records = cmin.catalyst_run(prob, recipe, stream, x0)
        elapsed = (time.perf_counter() - t_start) * 1e3
        return [r.astuple() for r in _quad_rows(inst, records, run_id, seed, elapsed)]

    z0 = np.zeros(inst.dim_x + inst.dim_y)
    if algo in ("reg", "sreg", "sreg_restarted"):
        mu = min(prob.mu_p, prob.mu_d)
        if not mu > 0:
            raise ConfigurationError(
                "extragradient solvers need mu_p > 0 and mu_d > 0", field="problem.mu_p"
            )
        marks = []
        if algo == "reg":
            T = target.get("T")
            if T is None:
                raise ConfigurationError("need T", field="target.T")
            out = sub.reg(
                prob, mu, z0, T, 1.0 / prob.L,
                record=lambda t, z: marks.append((t, z.copy(), 2 * t)),
            )
        elif algo == "sreg":
            T = target.get("T")
            if T is None:
                raise ConfigurationError("need T", field="target.T")
            out = sub.sreg(
                prob, mu, z0, T, stream,
                record=lambda t, z: marks.append((t, z.copy(), 2 * t)),
            )
        else:
            eps = target.get("epsilon")
            if eps is None:
                raise ConfigurationError("need epsilon", field="target.epsilon")
            r_sq = target.get("r_sq") or float(inst.z_star @ inst.z_star)
            epoch_marks = []
            sub.sreg_restarted(
                prob, mu, z0, eps, stream, r_sq,
                record=lambda e, z: epoch_marks.append((e, z.copy())),
            )
            # cumulative calls per epoch from the analytic budgets
            t0, _ = sub.sreg_schedule(prob.L, mu)
            cum = 0
            for e, z in epoch_marks:
                cum += 2 * math.ceil(6 * t0 + 768.0 * 2.0 ** (e + 3) * prob.sigma**2 / (mu**2 * r_sq))
                marks.append((e, z, cum))
        elapsed = (time.perf_counter() - t_start) * 1e3
        return [r.astuple() for r in _vi_rows(inst, marks, run_id, seed, elapsed)]

    # minimax catalysts
    stoch = algo.endswith("stoch")
    restarted = algo.startswith("r_")
    d_sq = target.get("d_sq") or float(inst.x_star @ inst.x_star)
    y0_opt = inst.inner_argmax(np.zeros(inst.dim_x))
    dy0_sq = target.get("dy0_sq") or float(y0_opt @ y0_opt)
    coeff = prob.mu_d / (12.0 if stoch else 6.0)
    gap_ratio = target.get("gap_ratio") or 1.0
    if restarted:
        delta0 = target.get("delta0")
        if delta0 is None:
            gap0 = inst.primal_value(np.zeros(inst.dim_x)) - inst.f_star
            delta0 = gap0 + coeff * dy0_sq
        kwargs = dict(
            strongly_convex=True,
            epochs=target.get("E"),
            eps_target=target.get("epsilon"),
            delta0_hat=delta0,
        )
        recipe = (
            cmm.recipe_stoch(prob, **kwargs) if stoch else cmm.recipe_det(prob, **kwargs)
        )
        _, records = cmm.r_catalyst_minimax_run(prob, recipe, stream, z0)
    else:
        kwargs = dict(
            eps_target=target.get("epsilon"),
            K=target.get("K"),
            gap_ratio=gap_ratio,
            d_sq=d_sq,
            dy0_sq=dy0_sq,
        )
        recipe = (
            cmm.recipe_stoch(prob, **kwargs) if stoch else cmm.recipe_det(prob, **kwargs)
        )
        _, records = cmm.catalyst_minimax_run(prob, recipe, stream, z0)
    elapsed = (time.perf_counter() - t_start) * 1e3
    return [r.astuple() for r in _minimax_rows(inst, records, run_id, seed, elapsed, coeff)]


def _n_workers(n_runs: int) -> int:
    env = os.environ.get("CKIT_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, n_runs))


def run_experiment(config: ExperimentConfig, out_dir: Optional[str] = None) -> RunTrace:
    """Execute the seed batch and return (and optionally write) the trace.

    Runs are independent; executing them in parallel cannot change any
    numeric output because every run owns its oracle stream.
    """
    cfg_dict = config.to_dict()
    run_ids = list(range(config.seeds))
    workers = _n_workers(len(run_ids))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            packs = list(pool.map(_run_one, [cfg_dict] * len(run_ids), run_ids))
    else:
        packs = [_run_one(cfg_dict, rid) for rid in run_ids]
    rows = [TraceRow(*t) for pack in packs for t in pack]
    trace = RunTrace(rows)
    out = out_dir or config.out
    if out:
        os.makedirs(out, exist_ok=True)
        trace.to_csv(os.path.join(out, f"{config.algorithm}.csv"))
    return trace


# ---------------------------------------------------------------------------
# Rate fitting
# ---------------------------------------------------------------------------


def fit_rate(trace, model: str, column: str = "primal_gap"):
    """Least-squares decay-rate fit over the trace's positive gap entries.

    ``model="power"`` fits log(gap) against log(k) and returns the exponent;
    ``model="geometric"`` fits log(gap) against k and returns the per-step
    factor.  The second return value is the RMS residual of the fit.
    """
    if model not in ("power", "geometric"):
        raise ConfigurationError("model must be 'power' or 'geometric'", field="model")
    if column not in COLUMNS[4:8]:
        raise ConfigurationError(f"column must be one of {COLUMNS[4:8]}", field="column")
    rows = trace.rows if isinstance(trace, RunTrace) else list(trace)
    ks, gaps = [], []
    for r in rows:
        g = getattr(r, column)
        if g > 0 and r.outer_k > 0:
            ks.append(r.outer_k)
            gaps.append(g)
    if len(ks) < 10:
        raise ConfigurationError(f"need >= 10 usable rows, got {len(ks)}", field="trace")
    y = np.log(np.asarray(gaps, dtype=float))
    x = np.log(np.asarray(ks, dtype=float)) if model == "power" else np.asarray(ks, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    value = float(slope) if model == "power" else float(math.exp(slope))
    return value, resid
