"""Batch experiment driver.

Three subcommands:

``run``
    Simulate the configured kernels on one model, writing one trace CSV per
    kernel plus a summary JSON with posterior means, batch-means variances,
    and lag-1 autocorrelations.

``spectra``
    Discretize the model on a grid and emit an ordering certificate JSON
    with operator norms, exact asymptotic variances, and pass flags.

``gen-data``
    Generate a synthetic probit dataset in the CSV format the probit model
    reads.

Configuration is a flat ``key = value`` text file; any key can also be given
on the command line as a trailing ``key=value`` override, and ``--seed``,
``--iters``, ``--out`` are shortcuts for the corresponding keys.  Reruns with
the same configuration produce byte-identical outputs, and every report
embeds the hash of its resolved configuration together with the library
version.  Exit codes: 0 success, 1 usage or configuration error, 2 numerical
failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from . import __version__
from .diagnostics import (
    Trace,
    batch_means_variance,
    compare_traces,
    lag_one_autocorrelation,
    write_trace,
)
from .errors import DesignError, SamplerError
from .group_action import MultiplicativeAction
from .kernels import (
    ExponentialRMeasure,
    GammaRootRMeasure,
    HaarRule,
    QrRule,
    run_joint_chain,
    run_sandwich_chain,
)
from .models import LaplaceToyModel, ProbitModel, save_probit_data
from .spectra import GridSpec, certify_orderings, discretize_joint, discretized_family, grid_convergence

_CLT_NOTE = (
    "Batch-means analysis assumes a chain central limit theorem; geometric "
    "ergodicity is not verified here.  The batch-count floor is a stability "
    "check, not a proof."
)

# kernel names in efficiency order, best first, used to sort certificates
_KERNEL_RANK = {"haar_pxda": 0, "pxda": 1, "da": 2, "joint_xg": 3}

_DEFAULTS: dict = {
    "model": "laplace_toy",
    "data": "",
    "kernels": "da,pxda,haar_pxda",
    "iterations": 20000,
    "burn_in": -1,  # -1 means a tenth of iterations
    "thin": 1,
    "seed": 0,
    "r_kind": "",  # "" picks exponential for laplace_toy, gamma_root for probit
    "r_a": 1.0,
    "r_b": 0.5,
    "grid_lo": -25.0,
    "grid_hi": 25.0,
    "grid_cells": 400,
    "output_dir": "pxda_out",
}

_GEN_DEFAULTS: dict = {"n": 20, "p": 2, "seed": 7, "out": "probit_data.csv"}


class UsageError(Exception):
    """Configuration or argument problem; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # the contract reserves exit code 2 for numerical failure
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _coerce(key: str, value: str, defaults: dict):
    if key not in defaults:
        raise UsageError(f"unknown configuration key {key!r}")
    template = defaults[key]
    try:
        if isinstance(template, bool):
            raise TypeError("no boolean keys")
        if isinstance(template, int):
            return int(value)
        if isinstance(template, float):
            return float(value)
        return str(value)
    except ValueError:
        raise UsageError(f"bad value for {key}: {value!r}") from None


def _parse_config_file(path: str, defaults: dict) -> dict:
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = _coerce(key.strip(), value.strip(), defaults)
    return out


def _resolve_config(args, defaults: dict) -> dict:
    cfg = dict(defaults)
    if getattr(args, "config", None):
        cfg.update(_parse_config_file(args.config, defaults))
    for token in getattr(args, "overrides", None) or []:
        if "=" not in token:
            raise UsageError(f"override must look like key=value, got {token!r}")
        key, _, value = token.partition("=")
        cfg[key.strip()] = _coerce(key.strip(), value.strip(), defaults)
    # flag shortcuts win over both file and overrides
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "iters", None) is not None:
        cfg["iterations"] = args.iters
    if getattr(args, "out", None) is not None:
        cfg["out" if "out" in defaults else "output_dir"] = args.out
    return cfg


def _canonical_text(cfg: dict) -> str:
    return "\n".join(f"{k}={cfg[k]}" for k in sorted(cfg)) + "\n"


def _config_sha256(cfg: dict) -> str:
    return hashlib.sha256(_canonical_text(cfg).encode()).hexdigest()


def _validate_run_config(cfg: dict) -> dict:
    cfg = dict(cfg)
    if cfg["model"] not in ("laplace_toy", "probit"):
        raise UsageError(f"model must be laplace_toy or probit, got {cfg['model']!r}")
    names = [k.strip() for k in str(cfg["kernels"]).split(",") if k.strip()]
    if not names:
        raise UsageError("kernels list is empty")
    for name in names:
        if name not in _KERNEL_RANK:
            raise UsageError(f"unknown kernel {name!r}; choose from da, pxda, haar_pxda, joint_xg")
    if len(set(names)) != len(names):
        raise UsageError("each kernel may appear only once")
    cfg["kernels"] = names
    if cfg["iterations"] < 1:
        raise UsageError("iterations must be positive")
    if cfg["burn_in"] == -1:
        cfg["burn_in"] = cfg["iterations"] // 10
    if not (0 <= cfg["burn_in"] < cfg["iterations"]):
        raise UsageError("need iterations > burn_in >= 0")
    if cfg["thin"] < 1:
        raise UsageError("thin must be at least one")
    if cfg["grid_cells"] < 2 or not cfg["grid_lo"] < cfg["grid_hi"]:
        raise UsageError("grid needs lo < hi and at least two cells")
    return cfg


def _build_model(cfg: dict):
    if cfg["model"] == "laplace_toy":
        return LaplaceToyModel()
    if not cfg["data"]:
        raise UsageError("probit model needs data=<csv path>")
    try:
        return ProbitModel.from_csv(cfg["data"])
    except OSError as exc:
        raise UsageError(f"cannot read data file: {exc}") from None
    except DesignError as exc:
        raise UsageError(f"bad probit data: {exc}") from None


def _build_r_measure(cfg: dict):
    kind = cfg["r_kind"] or ("gamma_root" if cfg["model"] == "probit" else "exponential")
    if kind == "exponential":
        if cfg["r_a"] != 1.0:
            raise UsageError("the exponential r-measure fixes r_a = 1; set r_kind=gamma_root to vary it")
        return ExponentialRMeasure(rate=cfg["r_b"])
    if kind == "gamma_root":
        return GammaRootRMeasure(a=cfg["r_a"], b=cfg["r_b"])
    raise UsageError(f"r_kind must be exponential or gamma_root, got {kind!r}")


def _build_rule(name: str, cfg: dict, model):
    action = MultiplicativeAction(model.dim_y)
    if name == "da":
        return None
    if name == "pxda":
        return QrRule(action, _build_r_measure(cfg))
    if name == "haar_pxda":
        return HaarRule(action)
    raise UsageError(f"kernel {name!r} has no y-update rule")


def _coord_names(model, with_group: bool) -> list[str]:
    if isinstance(model, LaplaceToyModel):
        names = ["x"]
    else:
        names = [f"b{j}" for j in range(model.dim_x)]
    return names + ["g"] if with_group else names


def _simulate(model, name: str, cfg: dict, rng) -> np.ndarray:
    total = cfg["iterations"] * cfg["thin"]
    x0 = 0.0 if isinstance(model, LaplaceToyModel) else np.zeros(model.dim_x)
    if name == "joint_xg":
        values = run_joint_chain(model, MultiplicativeAction(model.dim_y), x0, 1.0, total, rng)
    else:
        values = run_sandwich_chain(model, _build_rule(name, cfg, model), x0, total, rng)
    return values[cfg["thin"] - 1 :: cfg["thin"]]


def _coordinate_report(trace: Trace, n_coords: int) -> dict:
    out = {}
    for j in range(n_coords):
        h = (lambda jj: lambda rows: rows[:, jj])(j)
        est = batch_means_variance(trace, h)
        rho, rho_se = lag_one_autocorrelation(trace, h)
        out[f"coord{j}"] = {
            "mean": est.mean,
            "mean_se": est.standard_error_of_mean,
            "bm_variance": est.point,
            "bm_variance_se": est.variance_se,
            "lag1_autocorr": rho,
            "lag1_autocorr_se": rho_se,
            "batches": est.batches,
            "batch_size": est.batch_size,
        }
    return out


def cmd_run(cfg: dict) -> int:
    cfg = _validate_run_config(cfg)
    model = _build_model(cfg)
    for name in cfg["kernels"]:
        if name != "joint_xg":
            _build_rule(name, cfg, model)  # surface r-measure config errors before simulating
    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)

    children = np.random.SeedSequence(cfg["seed"]).spawn(len(cfg["kernels"]))
    traces: dict[str, Trace] = {}
    for name, child in zip(cfg["kernels"], children):
        values = _simulate(model, name, cfg, np.random.default_rng(child))
        traces[name] = Trace(
            values=values,
            seed=cfg["seed"],
            kernel_id=name,
            burn_in=cfg["burn_in"],
            thin=cfg["thin"],
        )

    report_cfg = dict(cfg, kernels=",".join(cfg["kernels"]))
    summary: dict = {
        "version": __version__,
        "config_sha256": _config_sha256(report_cfg),
        "config": report_cfg,
        "clt_note": _CLT_NOTE,
        "kernels": {},
    }
    n_state = model.dim_x if not isinstance(model, LaplaceToyModel) else 1
    for name, trace in traces.items():
        path = outdir / f"trace_{name}.csv"
        write_trace(trace, path, coord_names=_coord_names(model, with_group=name == "joint_xg"))
        summary["kernels"][name] = {
            "trace_file": path.name,
            "n_kept_rows": len(trace) - trace.burn_in,
            "coordinates": _coordinate_report(trace, n_state),
        }

    if len(traces) >= 2:
        table = compare_traces(list(traces.values()))
        agreement = []
        rows = table.rows
        for i in range(len(rows)):
            for j in range(i + 1, len(rows)):
                diff = rows[i]["mean"] - rows[j]["mean"]
                comb = float(np.hypot(rows[i]["mean_se"], rows[j]["mean_se"]))
                agreement.append(
                    {
                        "first": rows[i]["kernel_id"],
                        "second": rows[j]["kernel_id"],
                        "mean_diff": diff,
                        "combined_se": comb,
                        "consistent": bool(abs(diff) <= 3 * comb),
                    }
                )
        summary["comparison"] = table.to_json_dict()
        summary["mean_agreement"] = agreement
        print(table.to_text())

    spath = outdir / "summary.json"
    spath.write_bytes((json.dumps(summary, sort_keys=True, indent=2) + "\n").encode())
    print(f"wrote {spath} and {len(traces)} trace file(s) to {outdir}")
    return 0


def cmd_spectra(cfg: dict) -> int:
    cfg = _validate_run_config(cfg)
    if cfg["model"] != "laplace_toy":
        raise UsageError(
            "spectra needs a model with one-dimensional x and y; only laplace_toy qualifies here"
        )
    if "joint_xg" in cfg["kernels"]:
        raise UsageError(
            "joint_xg has no discretized matrix of its own; its x-marginal moves like haar_pxda"
        )
    model = LaplaceToyModel()
    action = MultiplicativeAction(model.dim_y)
    grid = GridSpec(cfg["grid_lo"], cfg["grid_hi"], cfg["grid_cells"])
    names = sorted(cfg["kernels"], key=_KERNEL_RANK.__getitem__)
    rules = {name: _build_rule(name, cfg, model) for name in names}

    _, kernels = discretized_family(model, action, rules, grid, grid)
    tests = {
        "x": lambda x: x,
        "x_squared": lambda x: x**2,
        "sign": np.sign,
        "exp_neg_abs": lambda x: np.exp(-np.abs(x)),
    }
    cert = certify_orderings([kernels[n] for n in names], tests)
    conv = grid_convergence(lambda g: discretize_joint(model, g, g).da_kernel(), grid)

    report_cfg = dict(cfg, kernels=",".join(cfg["kernels"]))
    out = {
        "version": __version__,
        "config_sha256": _config_sha256(report_cfg),
        "config": report_cfg,
        "certificate": cert.to_json_dict(),
        "da_norm_grid_convergence": conv,
    }
    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    cpath = outdir / "certificate.json"
    cpath.write_bytes((json.dumps(out, sort_keys=True, indent=2) + "\n").encode())

    for i, name in enumerate(cert.labels):
        print(f"norm[{name}] = {cert.norms[i]:.12f}")
    flag = "pass" if cert.all_pass else "FAIL"
    print(f"ordering certificate: {flag} (slack {cert.slack:g}, {cert.n_cells} cells)")
    print(f"grid doubling: delta = {conv['delta']:.3e} ({'converged' if conv['converged'] else 'NOT CONVERGED'})")
    print(f"wrote {cpath}")
    return 0


def cmd_gen_data(args) -> int:
    cfg = dict(_GEN_DEFAULTS)
    for token in args.overrides or []:
        if "=" not in token:
            raise UsageError(f"override must look like key=value, got {token!r}")
        key, _, value = token.partition("=")
        cfg[key.strip()] = _coerce(key.strip(), value.strip(), _GEN_DEFAULTS)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out"] = args.out
    n, p = cfg["n"], cfg["p"]
    if not n > p >= 1:
        raise UsageError(f"need n > p >= 1, got n={n}, p={p}")

    rng = np.random.default_rng(cfg["seed"])
    # draw order: design first, then responses
    Z = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[0] = 1.0
    if p > 1:
        beta[1] = -1.0
    probs = ndtr(Z @ beta)
    v = (rng.random(n) < probs).astype(int)
    save_probit_data(cfg["out"], Z, v)
    print(f"wrote {cfg['out']}: n={n}, p={p}, positives={int(v.sum())}")
    return 0


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="flat key = value configuration file")
    sub.add_argument("--seed", type=int, help="override the seed key")
    sub.add_argument("--iters", type=int, help="override the iterations key")
    sub.add_argument("--out", help="override the output_dir key")
    sub.add_argument(
        "overrides",
        nargs="*",
        metavar="key=value",
        help="override any configuration key",
    )


def _build_parser() -> _Parser:
    epilog = "configuration keys and defaults: " + ", ".join(
        f"{k}={v!r}" for k, v in _DEFAULTS.items()
    )
    parser = _Parser(prog="pxda", description=__doc__.splitlines()[0], epilog=epilog)
    parser.add_argument("--version", action="version", version=f"pxda {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p_run = subs.add_parser("run", help="simulate kernels, write traces and a summary", epilog=epilog)
    _add_common(p_run)
    p_spec = subs.add_parser("spectra", help="emit a discretized ordering certificate", epilog=epilog)
    _add_common(p_spec)
    p_gen = subs.add_parser(
        "gen-data",
        help="generate a synthetic probit dataset",
        epilog="keys and defaults: " + ", ".join(f"{k}={v!r}" for k, v in _GEN_DEFAULTS.items()),
    )
    p_gen.add_argument("--seed", type=int, help="override the seed")
    p_gen.add_argument("--out", help="output CSV path")
    p_gen.add_argument("overrides", nargs="*", metavar="key=value", help="n=... and p=...")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse --help/--version exit 0, errors exit 1
        return int(exc.code or 0)
    try:
        if args.command == "gen-data":
            return cmd_gen_data(args)
        cfg = _resolve_config(args, _DEFAULTS)
        if args.command == "run":
            return cmd_run(cfg)
        return cmd_spectra(cfg)
    except UsageError as exc:
        print(f"pxda: {exc}", file=sys.stderr)
        return 1
    except (SamplerError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"pxda: numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"pxda: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
