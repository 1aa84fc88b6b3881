"""Command line interface: config ingestion, dispatch, serialization.

Config files are flat JSON objects; unknown keys are rejected and command
line flags override file values.  Every output file carries the seed and a
version string in `#`-prefixed header lines, and the effective config is
echoed beside the results so a run can be reproduced bit for bit.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import BACKEND
from .dynamics import trajectory_to_rows
from .martingale_lab import (classify_martingale, gbm_inverse_family,
                             gbm_linear_family, DiffusionSpec)
from .measure_flow import flow_check, simulate_fundamental_under_flow
from .montecarlo import (convergence_study, deterministic_run, run_table,
                         worker_count)
from .network import make_network
from .params import (FLOW_NETWORK, NETWORK_PRESETS, BurstParams, ModelParams,
                     ParameterError, flow_check_defaults, paper_defaults)

_MODEL_KEYS = tuple(f.name for f in dataclasses.fields(ModelParams)
                    if f.name != "burst")
_BURST_KEYS = ("burst_window", "burst_delta_mult", "burst_lambda_mult")
_EXTRA_KEYS = ("network_kind", "network_param", "t_probe")
CONFIG_KEYS = _MODEL_KEYS + _BURST_KEYS + _EXTRA_KEYS


def version_string() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=5,
                             cwd=Path(__file__).parent)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def config_to_dict(params: ModelParams, network=("powerlaw", 2.2),
                   t_probe: float = 0.6) -> dict:
    d = {k: getattr(params, k) for k in _MODEL_KEYS}
    d["burst_window"] = params.burst.window
    d["burst_delta_mult"] = params.burst.delta_mult
    d["burst_lambda_mult"] = params.burst.lambda_mult
    d["network_kind"], d["network_param"] = network
    d["t_probe"] = t_probe
    return d


def config_from_dict(d: dict) -> tuple[ModelParams, dict]:
    unknown = set(d) - set(CONFIG_KEYS)
    if unknown:
        raise ParameterError(
            f"unknown config keys: {', '.join(sorted(unknown))}")
    base = paper_defaults()
    model_kw = {k: d[k] for k in _MODEL_KEYS if k in d}
    burst = BurstParams(
        window=d.get("burst_window", base.burst.window),
        delta_mult=d.get("burst_delta_mult", base.burst.delta_mult),
        lambda_mult=d.get("burst_lambda_mult", base.burst.lambda_mult))
    params = dataclasses.replace(base, burst=burst, **model_kw)
    params.validate()
    extras = {
        "network": (d.get("network_kind", "powerlaw"),
                    d.get("network_param", 2.2)),
        "t_probe": d.get("t_probe", 0.6),
    }
    return params, extras


def load_config(path: str | None, overrides: dict | None = None
                ) -> tuple[ModelParams, dict]:
    """Load a flat JSON config; missing file entries fall back to the
    defaults, CLI overrides win over file values."""
    d = {}
    if path:
        with open(path) as fh:
            text = fh.read().strip()
            if text:
                d = json.loads(text)
        if not isinstance(d, dict):
            raise ParameterError("config: expected a JSON object")
    if overrides:
        d.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(d)


def _header_lines(params: ModelParams) -> list[str]:
    return [f"# seed={params.seed}",
            f"# version={version_string()}",
            f"# backend={BACKEND}"]


def write_csv(path: Path, header: list[str], rows, params: ModelParams):
    with open(path, "w", newline="") as fh:
        for line in _header_lines(params):
            fh.write(line + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_json(path: Path, payload: dict, params: ModelParams):
    payload = dict(payload)
    payload.setdefault("seed", params.seed)
    payload.setdefault("version", version_string())
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def echo_config(out_dir: Path, params: ModelParams, extras: dict):
    cfg = config_to_dict(params, extras["network"], extras["t_probe"])
    with open(out_dir / "run_config.json", "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")


TRAJ_COLUMNS = ["t", "WF", "M", "Lambda", "theta", "X", "n", "beta",
                "regime"]


def _dump_trajectories(path: Path, trajs, params: ModelParams):
    with open(path, "w", newline="") as fh:
        for line in _header_lines(params):
            fh.write(line + "\n")
        fh.write("path_id," + ",".join(TRAJ_COLUMNS) + "\n")
        for traj in trajs:
            for row in trajectory_to_rows(traj):
                fh.write(f"{traj.path_index}," +
                         ",".join(_fmt(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# subcommands

def cmd_simulate(args) -> int:
    params, extras = _config_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    kind, kparam = extras["network"]
    dist = make_network(kind, kparam, params.nodes)
    n = args.paths or min(params.n_paths, 5)
    trajs = []
    from .dynamics import simulate_path
    for j in range(n):
        trajs.append(simulate_path(params, dist, j))
    name = args.network or f"{kind}{kparam}"
    _dump_trajectories(out / f"trajectories_{name}.csv", trajs, params)
    echo_config(out, params, extras)
    print(f"simulate: wrote {n} paths to {out}/trajectories_{name}.csv")
    return 0


def cmd_table(args) -> int:
    params, extras = _config_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_table(params, n_paths=args.paths,
                     workers=worker_count())
    header = ["network", "mean_degree", "mean_max", "se_max", "mean_argmax",
              "se_argmax", "beta_at_0.6", "se_beta_at_0.6", "beta_at_1.6",
              "se_beta_at_1.6", "n_paths"]
    write_csv(out / "table.csv", header,
              ([r[h] for h in header] for r in rows), params)
    echo_config(out, params, extras)
    print(f"table: wrote 4-network comparison to {out}/table.csv")
    return 0


def cmd_deterministic(args) -> int:
    params, extras = _config_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    curves = deterministic_run(params)
    for name, traj in curves.items():
        _dump_trajectories(out / f"deterministic_{name}.csv", [traj], params)
    echo_config(out, params, extras)
    print(f"deterministic: wrote 4 curves to {out}")
    return 0


def cmd_flow_check(args) -> int:
    if args.config or args.network:
        params, extras = _config_from_args(args)
    else:
        params, extras = flow_check_defaults(), {
            "network": FLOW_NETWORK, "t_probe": 0.6}
        params = _apply_common_overrides(params, args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    kind, kparam = extras["network"]
    dist = make_network(kind, kparam, params.nodes)
    n = args.n or 10000
    rep = flow_check(params, dist, args.t, n)
    fund = simulate_fundamental_under_flow(args.t, params, args.fund_paths)
    payload = rep.to_dict()
    payload["fundamental_under_flow"] = fund
    write_json(out / "flow_check.json", payload, params)
    echo_config(out, params, extras)
    print(f"flow-check: t={args.t} n={n} mean_Z={rep.mean_Z:.4f} "
          f"z_score={rep.z_score:.2f} -> {out}/flow_check.json")
    return 0


def cmd_feller(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.family == "gbm-inverse":
        spec = gbm_inverse_family(args.mu0, args.sigma0)
    elif args.family == "gbm-linear":
        spec = gbm_linear_family(args.mu0, args.sigma0)
    elif args.family == "custom-table":
        spec = _spec_from_table(args.table)
    else:
        raise ParameterError(f"feller family: unknown '{args.family}'")
    rep = classify_martingale(spec)
    payload = rep.to_dict()
    payload["family"] = args.family
    payload["mu0"], payload["sigma0"] = args.mu0, args.sigma0
    payload["version"] = version_string()
    with open(out / "feller.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"feller: {spec.name} -> verdict {rep.verdict}")
    return 0


def _spec_from_table(path: str) -> DiffusionSpec:
    data = np.genfromtxt(path, delimiter=",", names=True)
    xs = data["x"]
    mu_v, sig_v, f_v = data["mu"], data["sigma"], data["f"]

    def interp(vals):
        return lambda x: np.interp(x, xs, vals)

    return DiffusionSpec(mu=interp(mu_v), sigma=interp(sig_v),
                         f=interp(f_v), l=float(xs[0]), r=float(xs[-1]),
                         c=float(xs[len(xs) // 2]), name=f"table:{path}")


def cmd_convergence(args) -> int:
    params, extras = _config_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    kind, kparam = extras["network"]
    dist = make_network(kind, kparam, params.nodes)
    ladder = tuple(float(v) for v in args.ladder.split(","))
    res = convergence_study(params, dist, ladder, n_paths=args.paths or 100)
    write_json(out / "convergence.json", {
        "dt": res["dt"],
        "gap_median": {str(k): v for k, v in res["gap_median"].items()},
        "gap_ratio_medians": res["gap_ratio_medians"],
        "strong_error_median": {str(k): v for k, v in
                                res["strong_error_median"].items()},
        "n_paths": res["n_paths"]}, params)
    echo_config(out, params, extras)
    print(f"convergence: ratios {res['gap_ratio_medians']} -> "
          f"{out}/convergence.json")
    return 0


# ---------------------------------------------------------------------------

def _apply_common_overrides(params: ModelParams, args) -> ModelParams:
    kw = {}
    if getattr(args, "seed", None) is not None:
        kw["seed"] = args.seed
    if getattr(args, "dt", None) is not None:
        kw["dt"] = args.dt
    if getattr(args, "paths", None) is not None:
        kw["n_paths"] = args.paths
    return params.replace(**kw) if kw else params


def _config_from_args(args) -> tuple[ModelParams, dict]:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "dt", None) is not None:
        overrides["dt"] = args.dt
    if getattr(args, "paths", None) is not None:
        overrides["n_paths"] = args.paths
    if getattr(args, "t_probe", None) is not None:
        overrides["t_probe"] = args.t_probe
    if getattr(args, "network", None):
        if args.network not in NETWORK_PRESETS:
            raise ParameterError(
                f"network: unknown preset '{args.network}' "
                f"(choose from {', '.join(NETWORK_PRESETS)})")
        kind, kparam = NETWORK_PRESETS[args.network]
        overrides["network_kind"] = kind
        overrides["network_param"] = kparam
    if getattr(args, "deterministic", False):
        overrides.update(sigma_bar=0.0, sigma_M=0.0, sigma_theta=0.0)
    return load_config(getattr(args, "config", None), overrides)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="bubbleflow",
        description="Liquidity-driven asset bubble simulator")
    ap.add_argument("--version", action="version",
                    version=f"bubbleflow {version_string()}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, network=True):
        p.add_argument("--config", help="flat JSON config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--paths", type=int)
        p.add_argument("--dt", type=float)
        p.add_argument("--out", default="out")
        p.add_argument("--t-probe", dest="t_probe", type=float)
        if network:
            p.add_argument("--network", choices=sorted(NETWORK_PRESETS))
        p.add_argument("--deterministic", action="store_true")

    p = sub.add_parser("simulate", help="dump trajectory CSVs")
    common(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("table", help="four-network comparison table")
    common(p)
    p.set_defaults(fn=cmd_table)

    p = sub.add_parser("deterministic", help="zero-volatility curves")
    common(p)
    p.set_defaults(fn=cmd_deterministic)

    p = sub.add_parser("flow-check", help="pricing-flow verification")
    common(p)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--n", type=int)
    p.add_argument("--fund-paths", type=int, default=100000)
    p.set_defaults(fn=cmd_flow_check)

    p = sub.add_parser("feller", help="martingale classification")
    p.add_argument("--family", required=True,
                   choices=["gbm-inverse", "gbm-linear", "custom-table"])
    p.add_argument("--mu0", type=float, default=1.0)
    p.add_argument("--sigma0", type=float, default=1.0)
    p.add_argument("--table", help="csv with columns x,mu,sigma,f")
    p.add_argument("--out", default="out")
    p.set_defaults(fn=cmd_feller)

    p = sub.add_parser("convergence", help="dt-ladder study")
    common(p)
    p.add_argument("--ladder", default="4e-3,2e-3,1e-3")
    p.set_defaults(fn=cmd_convergence)
    return ap


def main(argv=None) -> int:
    from .martingale_lab import NumericsError
    from .montecarlo import EnsembleError

    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (ParameterError, EnsembleError, NumericsError, OSError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
