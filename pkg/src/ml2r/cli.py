"""Command-line front end: ``ml2r {weights,calibrate,run,study,pilot}``.

Experiments are described by a JSON config. Outputs are JSON (plans,
studies, pilot reports) and CSV tables. Every output depends only on the
config and the seed, never on the worker count or the clock.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass, field, asdict
from pathlib import Path

from . import analysis
from .calibration import (
    Kind, StructuralParams, MultilevelPlan, CalibrationWarning, DegenerateAllocationError,
    SizeOverflowError, bias_band, calibrate, theoretical_cost,
)
from .engine import NonFiniteSampleError, SamplerError, run_replicated
from .models import (
    NestedSampler, SmoothNestedSampler, EulerSampler, MilsteinSampler, GaussianBiasSampler,
    black_scholes_spec, bs_call_oracle, gaussian_cos_spec, gaussian_nested_oracle,
)
from .weights import InvalidParameterError, ml2r_weights, mlmc_weights, vandermonde_residual

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_NUMERIC = 0, 2, 3, 4

CSV_SCHEMA = "ml2r-csv/1"
CSV_COLUMNS = ["epsilon", "kind", "rmse", "bias", "m_hat", "cost_theoretical",
               "cost_measured", "sigma_hat", "R", "N", "K", "in_band"]
BIAS_COLUMNS = ("rmse", "bias", "m_hat", "in_band")
STUDY_SCHEMA = "ml2r-study/1"
PLAN_SCHEMA = "ml2r-plan/1"


class ConfigError(ValueError):
    pass


# model name -> (builder, default alpha, default beta)
def _nested(params, smooth=False):
    K0 = int(params.get("K0", 1))
    spec = gaussian_cos_spec(K0)
    cls = SmoothNestedSampler if smooth else NestedSampler
    return cls(spec), gaussian_nested_oracle().I0


def _bs(params, milstein=False):
    kw = {k: params[k] for k in ("s0", "strike", "r", "vol", "T", "K0") if k in params}
    spec = black_scholes_spec(**kw)
    full = {"s0": 100.0, "strike": 80.0, "r": 0.1, "vol": 0.4, "T": 1.0, **kw}
    oracle = bs_call_oracle(full["s0"], full["strike"], full["r"], full["vol"], full["T"])
    return (MilsteinSampler if milstein else EulerSampler)(spec), oracle


def _synthetic(params):
    I0 = float(params.get("I0", 1.0))
    s = GaussianBiasSampler(I0, float(params.get("c", 0.5)), float(params.get("sd0", 1.0)),
                            float(params.get("sd1", 1.0)), float(params.get("beta", 1.0)))
    return s, I0


MODELS = {
    "nested-cos": (lambda p: _nested(p), 1.0, 1.0),
    "nested-smooth": (lambda p: _nested(p, smooth=True), 1.0, 2.0),
    "bs-euler": (lambda p: _bs(p), 1.0, 1.0),
    "bs-milstein": (lambda p: _bs(p, milstein=True), 1.0, 2.0),
    "synthetic": (_synthetic, 1.0, None),
}


@dataclass
class ExperimentConfig:
    model: str
    seed: int
    model_params: dict = field(default_factory=dict)
    kinds: list = field(default_factory=lambda: ["MLMC", "ML2R"])
    M: int = 2
    epsilons: list = field(default_factory=list)
    alpha: float | None = None
    beta: float | None = None
    c_hat: dict = field(default_factory=dict)
    structural: dict | None = None
    pilot_n: int = 20_000
    v_inf_n: int = 0
    K: int = 1
    workers: int = 1
    out: str = "results"
    budget: float | None = None
    oracle: object = "model"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "model" not in d:
            raise ConfigError("config needs a 'model'")
        model = d.pop("model")
        if isinstance(model, dict):
            model = dict(model)
            name = model.pop("name", None)
            d.setdefault("model_params", model)
            model = name
        if model not in MODELS:
            raise ConfigError(f"unknown model {model!r}; choose from {sorted(MODELS)}")
        if "seed" not in d:
            raise ConfigError("config needs an explicit 'seed'")
        if "epsilon" in d:
            eps = d.pop("epsilon")
            d["epsilons"] = eps if isinstance(eps, list) else [eps]
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        cfg = cls(model=model, **d)
        cfg.check()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def check(self) -> None:
        try:
            self.seed = int(self.seed)
            self.kinds = [Kind(k).value for k in self.kinds]
            self.epsilons = [float(e) for e in self.epsilons]
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if any(not (e > 0 and math.isfinite(e)) for e in self.epsilons):
            raise ConfigError("every epsilon must be positive and finite")
        if self.K < 1:
            raise ConfigError("K must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.M < 2:
            raise ConfigError("M must be >= 2")
        if not self.kinds:
            raise ConfigError("at least one estimator kind is needed")

    def reproducible_dict(self) -> dict:
        """Config fields that determine results (no workers, no output path)."""
        d = asdict(self)
        for k in ("workers", "out"):
            d.pop(k)
        return d

    def build(self):
        """``(sampler, oracle, alpha, beta)``."""
        build, a0, b0 = MODELS[self.model]
        try:
            sampler, oracle = build(self.model_params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad model parameters: {exc}") from exc
        alpha = self.alpha if self.alpha is not None else a0
        beta = self.beta if self.beta is not None else b0
        if beta is None:
            beta = float(self.model_params.get("beta", 1.0))
        if self.oracle != "model":
            oracle = None if self.oracle is None else float(self.oracle)
        return sampler, oracle, float(alpha), float(beta)


def _dump_json(obj, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(rows: list[dict], stream, with_bias: bool = True) -> None:
    cols = [c for c in CSV_COLUMNS if with_bias or c not in BIAS_COLUMNS]
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in cols])


def _structural(cfg: ExperimentConfig, sampler, alpha, beta):
    """Base structural params and the pilot report (None when given in config)."""
    if cfg.structural is not None:
        s = cfg.structural
        try:
            p = StructuralParams(alpha=alpha, beta=beta, h_bold=sampler.h_bold,
                                 var_y0=float(s["var_y0"]), V1=float(s["V1"]), c_hat=1.0)
        except KeyError as exc:
            raise ConfigError(f"structural block needs {exc}") from exc
        return p, None, s.get("c1")
    rep = analysis.estimate_structural(sampler, sampler.h_bold, cfg.M, beta,
                                       n_pilot=cfg.pilot_n, seed=cfg.seed)
    return rep.to_params(alpha, c_hat=1.0), rep, rep.c1_hat


def _c_hat(cfg, kind: str, c1) -> float:
    if kind in cfg.c_hat:
        return float(cfg.c_hat[kind])
    # c_inf defaults to 1; MLMC uses |c1| when one was estimated
    if kind == Kind.ML2R.value or c1 is None:
        return 1.0
    return abs(float(c1))


def _plans(cfg: ExperimentConfig, echo):
    sampler, oracle, alpha, beta = cfg.build()
    if not cfg.epsilons:
        raise ConfigError("empty epsilon grid")
    base, pilot, c1 = _structural(cfg, sampler, alpha, beta)
    plans = []
    for eps in cfg.epsilons:
        for kind in cfg.kinds:
            p = base.replace(c_hat=_c_hat(cfg, kind, c1))
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", CalibrationWarning)
                plan = calibrate(eps, p, cfg.M, kind)
            for w in caught:
                echo(f"warning: {w.message}")
            plans.append(plan)
    return sampler, oracle, alpha, beta, pilot, plans


def _check_budget(cfg, plans) -> None:
    if cfg.budget is None:
        return
    projected = cfg.K * sum(theoretical_cost(p) for p in plans)
    if projected > cfg.budget:
        raise analysis.BudgetExceededError(
            f"projected cost {projected:.6g} exceeds budget {cfg.budget:.6g}")


def cmd_weights(args, out=sys.stdout) -> int:
    table = (ml2r_weights if args.kind.upper() == "ML2R" else mlmc_weights)(args.alpha, args.M, args.R)
    res = vandermonde_residual(table) if args.kind.upper() == "ML2R" else 0.0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["j", "w", "W", "residual"])
    for j in range(table.R):
        w.writerow([j + 1, repr(float(table.w[j])), repr(float(table.W[j])), repr(res)])
    out.write(buf.getvalue())
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "weights.csv").write_text(buf.getvalue())
    return EXIT_OK


def cmd_calibrate(cfg: ExperimentConfig, out=sys.stdout) -> int:
    echo = lambda s: print(s, file=out)
    *_, pilot, plans = _plans(cfg, echo)
    outdir = Path(cfg.out)
    echo("kind,epsilon,R,h,N,mu_star,cost_theoretical")
    for plan in plans:
        echo(f"{plan.kind.value},{plan.epsilon!r},{plan.R},{plan.h!r},{plan.N},"
             f"{plan.mu_star!r},{theoretical_cost(plan)!r}")
    _dump_json({"schema": PLAN_SCHEMA, "config": cfg.reproducible_dict(),
                "pilot": None if pilot is None else pilot.to_dict(),
                "plans": [p.to_dict() for p in plans]}, outdir / "plans.json")
    return EXIT_OK


def load_plans(path) -> list[MultilevelPlan]:
    with open(path) as fh:
        d = json.load(fh)
    return [MultilevelPlan.from_dict(p) for p in d["plans"]]


def _run_grid(cfg: ExperimentConfig, out, name: str) -> int:
    echo = lambda s: print(s, file=out)
    sampler, oracle, alpha, beta, pilot, plans = _plans(cfg, echo)
    _check_budget(cfg, plans)
    lo, hi = bias_band(alpha, cfg.M)
    rows, results = [], []
    for plan in plans:
        study = run_replicated(plan, sampler, cfg.seed, cfg.K, workers=cfg.workers,
                               oracle=oracle)
        row = {"epsilon": plan.epsilon, "kind": plan.kind.value, "R": plan.R, "N": plan.N,
               "K": cfg.K, "cost_theoretical": theoretical_cost(plan),
               "cost_measured": float(study.costs.mean())}
        rep = None
        if cfg.K >= 2:
            rep = analysis.study_statistics(study, oracle)
            row["sigma_hat"] = rep.sigma_hat
            if oracle is not None:
                row.update(rmse=rep.empirical_rmse, bias=rep.empirical_bias, m_hat=rep.m_hat)
                if plan.kind is Kind.MLMC:
                    row["in_band"] = analysis.bias_band_check(rep, alpha, cfg.M).inside
        elif oracle is not None:
            err = float(study.estimates[0]) - oracle
            row.update(rmse=abs(err), bias=err, m_hat=err / plan.epsilon)
        rows.append(row)
        results.append({"study": study.to_dict(),
                        "report": None if rep is None else rep.to_dict()})
    outdir = Path(cfg.out)
    _dump_json({"schema": STUDY_SCHEMA, "config": cfg.reproducible_dict(),
                "pilot": None if pilot is None else pilot.to_dict(),
                "bias_band": [lo, hi], "results": results}, outdir / f"{name}.json")
    with open(outdir / f"{name}.csv", "w") as fh:
        write_csv(rows, fh, with_bias=oracle is not None)
    write_csv(rows, out, with_bias=oracle is not None)
    return EXIT_OK


def cmd_run(cfg: ExperimentConfig, out=sys.stdout) -> int:
    if len(cfg.epsilons) > 1:
        raise ConfigError("run takes a single epsilon; use 'study' for a grid")
    return _run_grid(cfg, out, "run")


def cmd_study(cfg: ExperimentConfig, out=sys.stdout) -> int:
    return _run_grid(cfg, out, "study")


def cmd_pilot(cfg: ExperimentConfig, out=sys.stdout) -> int:
    sampler, _, alpha, beta = cfg.build()
    rep = analysis.estimate_structural(sampler, sampler.h_bold, cfg.M, beta,
                                       n_pilot=cfg.pilot_n, seed=cfg.seed)
    doc = {"schema": "ml2r-pilot/1", "config": cfg.reproducible_dict(), "pilot": rep.to_dict()}
    if cfg.v_inf_n:
        h = sampler.h_bold
        vi = analysis.estimate_v_inf(sampler, cfg.M, beta, (h / cfg.M ** 3, h / cfg.M ** 4),
                                     n=cfg.v_inf_n, seed=cfg.seed)
        doc["v_inf"] = asdict(vi)
    _dump_json(doc, Path(cfg.out) / "pilot.json")
    for k in ("var_y0_hat", "V1_hat", "c1_hat", "c1_se", "theta_hat"):
        print(f"{k},{getattr(rep, k)!r}", file=out)
    if "v_inf" in doc:
        print(f"v_inf,{doc['v_inf']['v_inf']!r}", file=out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ml2r", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    w = sub.add_parser("weights", help="print the weight table")
    w.add_argument("--alpha", type=float, default=1.0)
    w.add_argument("--M", type=int, default=2)
    w.add_argument("--R", type=int, required=True)
    w.add_argument("--kind", default="ML2R")
    w.add_argument("--out")
    for name, text in (("calibrate", "calibrate plans"), ("run", "replicated run at one epsilon"),
                       ("study", "replicated runs over an epsilon grid"),
                       ("pilot", "pilot estimates of structural constants")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--workers", type=int)
        p.add_argument("--out")
        p.add_argument("--budget", type=float, help="cap on projected cost units")
    return ap


COMMANDS = {"calibrate": cmd_calibrate, "run": cmd_run, "study": cmd_study, "pilot": cmd_pilot}


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.command == "weights":
            return cmd_weights(args, out)
        cfg = ExperimentConfig.load(args.config)
        for k in ("seed", "workers", "out", "budget"):
            v = getattr(args, k)
            if v is not None:
                setattr(cfg, k, v)
        cfg.check()
        return COMMANDS[args.command](cfg, out)
    except (ConfigError, InvalidParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except analysis.BudgetExceededError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (NonFiniteSampleError, SizeOverflowError, OverflowError, DegenerateAllocationError,
            SamplerError, analysis.InsufficientPilotError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
