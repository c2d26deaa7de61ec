"""Command line entry point: ``lostsales-lab <command> --config run.json``.

Every run writes CSV files and a ``manifest.json`` into the output directory.
The manifest carries the resolved config, the master seed and a sha256 of
each CSV, and nothing that changes between identical runs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .demand import demand_from_config, increment_model
from .errors import LostSalesError, NumericalGuardError, ValidationError
from .experiments import gap_vs_L, heavy_traffic_scan, kappa_bar, mdp_benchmark
from .ladder import (
    ascending_ladder_exact,
    ascending_ladder_mc,
    ladder_moments_kappa,
    ladder_summary,
    renewal_measure,
)
from .mdp import build_mdp, relative_value_iteration
from .policies import policy_from_config
from .simulation import SimConfig, estimate_cost_rate
from .tuning import optimize_r, optimize_xi, pil_target_for
from .value import (
    CostParams,
    analytic_exponential_table,
    build_value_table,
    eval_a_r,
    quadratic_decomposition,
    value_exact,
    wiener_hopf_residual,
)

COMMANDS = ("ladder", "value", "simulate", "mdp", "tune", "experiment")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int0 = {"type": "integer", "minimum": 0}
_int1 = {"type": "integer", "minimum": 1}
_nums = {"type": "array", "items": _num, "minItems": 1}

DEMAND_SCHEMA = {
    "type": "object",
    "required": ["family"],
    "properties": {
        "family": {"enum": ["geometric", "exponential", "two_point", "pmf"]},
        "rho": _pos, "rate": _pos, "span": _pos, "tail_eps": _pos,
        "values": _nums, "probs": _nums,
    },
    "additionalProperties": False,
}

SIM_SCHEMA = {
    "type": "object",
    "required": ["L", "T"],
    "properties": {
        "L": _int0, "T": _int1, "warmup": _int0, "replications": _int1,
        "crn": {"type": "boolean"},
        "pipeline0": {"type": "array", "items": {"type": "number", "minimum": 0}},
    },
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "required": ["demand"],
    "properties": {
        "demand": DEMAND_SCHEMA,
        "costs": {
            "type": "object", "required": ["h", "p"],
            "properties": {"h": {"type": "number", "minimum": 0},
                           "p": {"type": "number", "minimum": 0}},
            "additionalProperties": False,
        },
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "convention": {"enum": ["derived", "as-printed", "as_printed"]},
        "r": {"type": "number", "minimum": 0},
        "K": _int1,
        "x_max": _pos,
        "n_points": _int1,
        "mc_walks": _int1,
        "policy": {"type": "object", "required": ["kind"]},
        "sim": SIM_SCHEMA,
        "mdp": {
            "type": "object", "required": ["L", "J_max", "q_max"],
            "properties": {"L": _int0, "J_max": _num, "q_max": _num, "K": _int1,
                           "tol": _pos, "policy_table": {"type": "boolean"}},
            "additionalProperties": False,
        },
        "tune": {
            "type": "object", "required": ["p_list"],
            "properties": {"p_list": _nums, "K": _int1, "refine": _int1,
                           "xi_search": {"type": "object"}},
        },
        "experiment": {
            "type": "object", "required": ["id"],
            "properties": {
                "id": {"enum": ["heavy_traffic", "kappa_bar", "gap_vs_L", "mdp_benchmark"]},
                "r_grid": _nums, "p_list": _nums,
                "L_list": {"type": "array", "items": _int0, "minItems": 1},
                "K": _int1, "proj_K": _int1, "base_stock": {"type": "boolean"},
                "both_conventions": {"type": "boolean"},
                "J_max": _num, "q_max": _num,
            },
        },
    },
}

# which config blocks each command needs
NEEDS = {
    "ladder": ("r",), "value": ("r", "costs"), "simulate": ("policy", "sim", "costs"),
    "mdp": ("mdp", "costs"), "tune": ("tune", "costs"), "experiment": ("experiment",),
}


def _convention(s):
    return "as-printed" if s in ("as-printed", "as_printed") else "derived"


def load_config(path, command, seed=None, convention=None) -> dict:
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as e:
            raise ValidationError(f"config is not valid JSON: {e}") from None
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(map(str, e.absolute_path)) or "<root>"
        raise ValidationError(f"config invalid at {where}: {e.message}") from None
    missing = [k for k in NEEDS[command] if k not in cfg]
    if missing:
        raise ValidationError(f"'{command}' needs config keys {missing}")
    if seed is not None:
        cfg["seed"] = seed
    cfg.setdefault("seed", 0)
    if convention is not None:
        cfg["convention"] = convention
    cfg["convention"] = _convention(cfg.get("convention", "derived"))
    return cfg


def _costs(cfg):
    c = cfg.get("costs", {"h": 1.0, "p": 1.0})
    return CostParams(float(c["h"]), float(c["p"]))


def _sim_config(block, seed):
    b = dict(block)
    if "pipeline0" in b:
        b["pipeline0"] = tuple(b["pipeline0"])
    return SimConfig(seed=seed, **b)


def _csv_text(header, rows, comment=None) -> str:
    buf = io.StringIO()
    if comment is not None:
        buf.write("# " + json.dumps(comment, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        f = float(o)
        return f if math.isfinite(f) else repr(f)
    return o


def _dict_rows(rows):
    keys = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    return keys, [[r.get(k) for k in keys] for r in rows]


# commands ----------------------------------------------------------------


def run_ladder(cfg):
    demand = demand_from_config(cfg["demand"])
    r, K = float(cfg["r"]), int(cfg.get("K", 1))
    inc = increment_model(demand, r, K)
    summary = ladder_summary(inc)
    x_max = float(cfg.get("x_max", 10 * max(summary.mu_plus, demand.sigma)))
    ren = renewal_measure(summary, x_max)
    if demand.is_lattice:
        x = ren.grid
    else:
        x = np.linspace(0.0, x_max, int(cfg.get("n_points", 201)))
    header = {"mu_plus": summary.mu_plus, "sigma_plus": summary.sigma_plus,
              "kappa": summary.kappa, "residual_mass": summary.dist.residual_mass,
              "mu_Y": inc.mu, "lattice_span": summary.span}
    if "mc_walks" in cfg and demand.is_lattice:
        mc = ascending_ladder_mc(inc, int(cfg["mc_walks"]), int(cfg["seed"]))
        ms = ladder_moments_kappa(mc, lattice=True, span=summary.span)
        exact = summary.dist.pmf / summary.dist.pmf.sum()
        n = max(len(exact), len(mc.pmf))
        tv = 0.5 * float(np.abs(np.pad(exact, (0, n - len(exact)))
                                - np.pad(mc.pmf, (0, n - len(mc.pmf)))).sum())
        header.update(mc_walks=mc.sample_count, mc_mu_plus=ms.mu_plus,
                      mc_mu_plus_se=ms.mu_plus_se, mc_kappa=ms.kappa,
                      mc_kappa_se=ms.kappa_se, mc_tv=tv)
    rows = zip(x, ren.U(x), ren.g(x))
    summary_out = _jsonable(header)
    return {"ladder.csv": _csv_text(["x", "U_plus", "g_r"], rows, summary_out)}, summary_out


def _value_table(cfg):
    demand = demand_from_config(cfg["demand"])
    costs = _costs(cfg)
    r, conv = float(cfg["r"]), cfg["convention"]
    if demand.family == "exponential":
        table = analytic_exponential_table(demand, r, costs, cfg.get("x_max", math.inf))
        return table.with_convention(conv)
    inc = increment_model(demand, r, int(cfg.get("K", 1)))
    return build_value_table(inc, costs, conv, x_max=cfg.get("x_max"))


def run_value(cfg):
    table = _value_table(cfg)
    n = int(cfg.get("n_points", 200))
    lattice = table.span is not None
    if lattice:
        top = table.x_max - table.r
        x = table.grid(top)[:n]
    else:
        top = cfg.get("x_max", 10 * table.inc.demand.mu + table.xi)
        x = np.linspace(0.0, top, n)
    v = value_exact(table, x)
    quad, corr = quadratic_decomposition(table, x)
    if lattice:
        wh = wiener_hopf_residual(table, x)
        res, wh_rel = wh.residuals, wh.relative
    else:
        res, wh_rel = [None] * len(x), None
    summary = _jsonable({
        "r": table.r, "mu_Y": table.mu_Y, "b": table.b, "xi_tilde": table.xi_tilde,
        "xi": table.xi, "kappa": table.ladder.kappa, "mu_plus": table.ladder.mu_plus,
        "EJ_inf": table.EJ_inf, "cost_rate": table.cost_rate, "convention": table.convention,
        "max_decomposition_error": float(np.max(np.abs(v - quad - corr))),
        "wh_relative_residual": wh_rel,
    })
    rows = zip(x, eval_a_r(table, x), v, quad, corr, res)
    return {"value.csv": _csv_text(["x", "a_r", "v_r", "quadratic", "correction",
                                    "wh_residual"], rows)}, summary


def run_simulate(cfg):
    demand = demand_from_config(cfg["demand"])
    costs = _costs(cfg)
    config = _sim_config(cfg["sim"], int(cfg["seed"]))
    pcfg = dict(cfg["policy"])
    if pcfg.get("kind") in ("pil", "hybrid_switch") and "xi" not in pcfg:
        # default target: the projected level from the constant order r
        pcfg["xi"] = pil_target_for(demand, costs, float(pcfg["r"]), int(pcfg.get("K", 1)),
                                    cfg["convention"])
        if pcfg["kind"] == "pil":
            pcfg.pop("r")
    policy = policy_from_config(pcfg)
    est = estimate_cost_rate(policy, demand, costs, config)
    m = est.metadata
    rows = zip(range(est.replications), est.rep_means, m["rep_orders"], m["rep_inventory"],
               m["rep_lost_fraction"])
    summary = _jsonable({
        "policy": policy.to_config(), "mean_cost": est.mean, "se": est.se,
        "warmup": est.warmup, "window": m["window"],
        **{k: m[k] for k in m if k.endswith(("_mean", "_se")) or k == "max_J"},
    })
    return {"simulate.csv": _csv_text(["rep", "mean_cost", "mean_order", "mean_inventory",
                                       "lost_fraction"], rows)}, summary


def run_mdp(cfg):
    demand = demand_from_config(cfg["demand"])
    b = cfg["mdp"]
    mdp = build_mdp(demand, _costs(cfg), int(b["L"]), float(b["J_max"]), float(b["q_max"]),
                    int(b.get("K", 1)))
    sol = relative_value_iteration(mdp, float(b.get("tol", 1e-9)))
    summary = _jsonable({"g_star": sol.g_star, "iterations": sol.iterations,
                         "span_residual": sol.span_residual,
                         "truncation_mass": sol.truncation_mass, "g_lower": sol.lower,
                         "g_upper": sol.upper, "n_states": mdp.n_states})
    files = {}
    if b.get("policy_table"):
        states = np.indices(mdp.shape).reshape(mdp.L + 1, -1).T * mdp.span
        names = ["J"] + [f"q{i}" for i in range(mdp.L)] + ["order"]
        orders = sol.policy.reshape(-1) * mdp.span
        files["policy.csv"] = _csv_text(names, (list(s) + [o] for s, o in zip(states, orders)))
    return files, summary


def run_tune(cfg):
    demand = demand_from_config(cfg["demand"])
    costs = _costs(cfg)
    t = cfg["tune"]
    K = int(t.get("K", 10))
    rows = []
    for p in t["p_list"]:
        c = CostParams(costs.h, float(p))
        res = optimize_r(demand, c, K, t.get("refine"))
        xi = pil_target_for(demand, c, res.r, K, cfg["convention"]) if res.r > 0 else None
        row = {"p": float(p), "r_p": res.r, "cost": res.cost, "K": K, "xi": xi,
               "evaluations": res.evaluations,
               "rate": math.sqrt(2 * p / (demand.sigma2 * costs.h)) * (demand.mu - res.r)
               if costs.h > 0 else None}
        if res.refined:
            row.update(r_refined=res.refined[0], cost_refined=res.refined[1],
                       K_refined=res.refined[2])
        rows.append(row)
    rs = [r["r_p"] for r in rows]
    monotone = all(b >= a - 1e-12 for a, b in zip(rs, rs[1:]))
    kb, _ = kappa_bar(demand, sorted(set(rs)), K)
    files = {}
    search = t.get("xi_search")
    if search:
        sim = _sim_config(search["sim"], int(cfg["seed"]))
        out = []
        for row in rows:
            if row["xi"] is None:
                continue
            s = optimize_xi(demand, CostParams(costs.h, row["p"]), sim.L, sim,
                            xi_center=row["xi"], K=int(search.get("K", 1)),
                            max_evals=int(search.get("max_evals", 30)))
            row.update(xi_p=s.xi, xi_p_cost=s.cost, xi_p_se=s.se, unimodal=s.unimodal)
            out += [[row["p"], *smp] for smp in s.samples]
        files["xi_search.csv"] = _csv_text(["p", "xi", "mean_cost", "se"], out)
    keys, table = _dict_rows(rows)
    files["tune.csv"] = _csv_text(keys, table)
    return files, _jsonable({"monotone": monotone, "kappa_bar": kb, "K": K})


def run_experiment(cfg):
    demand = demand_from_config(cfg["demand"])
    e = cfg["experiment"]
    K = int(e.get("K", 10))
    kind = e["id"]
    if kind == "heavy_traffic":
        rows = heavy_traffic_scan(demand, e["r_grid"], K)
        summary = {"rows": len(rows)}
    elif kind == "kappa_bar":
        kb, ks = kappa_bar(demand, e["r_grid"], K)
        rows = [{"r": r, "kappa": k} for r, k in ks]
        summary = {"kappa_bar": kb}
    elif kind == "gap_vs_L":
        costs = _costs(cfg)
        convs = ("derived", "as-printed") if e.get("both_conventions") else (cfg["convention"],)
        out = gap_vs_L(demand, costs.h, e["p_list"], e["L_list"],
                       _sim_config(cfg["sim"], int(cfg["seed"])) if "sim" in cfg
                       else SimConfig(0, 200_000, seed=int(cfg["seed"]), replications=20),
                       K=K, proj_K=int(e.get("proj_K", 1)), conventions=convs,
                       kappa_r=e.get("r_grid"), base_stock=bool(e.get("base_stock")))
        rows = out["rows"]
        summary = {"kappa_bar": out["kappa_bar"], "bound": out["bound"], "r_p": out["r_p"]}
    else:
        costs = _costs(cfg)
        rows = mdp_benchmark(demand, costs.h, e["p_list"], e.get("L_list", [0, 1, 2]),
                             float(e["J_max"]), float(e["q_max"]), K)
        summary = {"rows": len(rows)}
    keys, table = _dict_rows(rows)
    return {f"{kind}.csv": _csv_text(keys, table)}, _jsonable(summary)


RUNNERS = {"ladder": run_ladder, "value": run_value, "simulate": run_simulate,
           "mdp": run_mdp, "tune": run_tune, "experiment": run_experiment}


def write_outputs(out_dir: Path, command: str, cfg: dict, files: dict, summary: dict):
    out_dir.mkdir(parents=True, exist_ok=True)
    digests = {}
    for name, text in files.items():
        data = text.encode()
        (out_dir / name).write_bytes(data)
        digests[name] = hashlib.sha256(data).hexdigest()
    manifest = {"command": command, "version": __version__, "seed": cfg["seed"],
                "config": cfg, "outputs": digests, "summary": summary}
    (out_dir / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2,
                                                      sort_keys=True) + "\n")
    return manifest


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lostsales-lab",
                                 description="Lost-sales inventory laboratory.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON run config")
    ap.add_argument("--out", default="lostsales-out", help="output directory")
    ap.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
    ap.add_argument("--convention", choices=["derived", "as-printed"], default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: seed must fit in an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, args.command, args.seed, args.convention)
        files, summary = RUNNERS[args.command](cfg)
        manifest = write_outputs(Path(args.out), args.command, cfg, files, summary)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ValidationError as e:
        print(f"validation error: {e}", file=sys.stderr)
        return 2
    except NumericalGuardError as e:
        print(f"numerical guard: {type(e).__name__}: {e}", file=sys.stderr)
        return 3
    except LostSalesError as e:  # pragma: no cover - every subclass is one of the two
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(json.dumps(manifest["summary"], sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
