"""Command line front end.

Subcommands:
  generate   draw a synthetic clustered dataset and write it to CSV
  embed      optimize an embedding of a dataset CSV
  quality    score an embedding against the analytic bounds
  perfect    write the best-achievable line embedding for a dataset
  certify    run the full certificate chain on a dataset
  sweep      degradation sweep over shrinking separation

Every subcommand accepts --config FILE, a flat JSON object whose keys are
the long option names with dashes replaced by underscores.  Explicit
flags win over config entries, which win over built-in defaults.  JSON
reports embed the effective configuration and its sha256, so a rerun is
byte-identical apart from metadata.timestamp.

Exit codes: 0 success, 2 bad input or usage, 3 file I/O failure,
4 optimizer divergence, 5 certificate failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from snesep import __version__
from snesep.affinity import input_affinities, uniform_scales
from snesep.certify import report_to_dict, run_certification
from snesep.core import (Dataset, Embedding, PreconditionError, ValidationError,
                         load_dataset, load_embedding, save_dataset, save_embedding,
                         separation_threshold, validate_dataset)
from snesep.datagen import GeneratorSpec, generate, save_sweep, separation_sweep
from snesep.kernels import KernelSpec, parse_kernel
from snesep.objective import loss_at
from snesep.optimizer import (OptimizerConfig, OptimizerDivergence, init_embedding,
                              minimize, save_trace)
from snesep.quality import build_quality_report, lemma_bounds, perfect_embedding, quality_exact

THEOREM_SIGMA = 2.0 ** -0.5


def run_embed(ds: Dataset, kern: KernelSpec, sigma: float, d: int,
              cfg: OptimizerConfig):
    """Affinities at uniform bandwidth sigma, then optimize from a seeded
    gaussian start.  Returns (embedding, trace, input affinities)."""
    p = input_affinities(ds, uniform_scales(ds.k, sigma))
    start = init_embedding(ds.k, d, cfg.init_scale, cfg.seed)
    emb, trace = minimize(p, start, kern, cfg)
    return emb, trace, p


@dataclass(frozen=True)
class _Opt:
    key: str
    typ: object
    default: object
    required: bool = False
    switch: bool = False
    help: str = ""


def _int_list(value):
    if isinstance(value, str):
        value = [part for part in value.split(",") if part.strip()]
    return [int(v) for v in value]


def _float_list(value):
    if isinstance(value, str):
        value = [part for part in value.split(",") if part.strip()]
    return [float(v) for v in value]


_OPT_SEED = _Opt("seed", int, None, required=True, help="generator seed")
_OPT_DATA = _Opt("data", str, None, required=True, help="dataset CSV path")
_OPT_REPORT = _Opt("report", str, None, help="write a JSON report here")
_OPT_THREADS = _Opt("threads", int, None, help="thread count to record in reports")
_OPT_D = _Opt("d", int, 1, help="embedding dimension")
_OPTS_OPTIMIZER = (
    _Opt("method", str, "adam", help="adam or gd_momentum"),
    _Opt("step_size", float, 0.05, help="optimizer step size"),
    _Opt("iterations", int, 2000, help="iteration budget"),
    _Opt("init_scale", float, 1e-2, help="stddev of the random start"),
    _Opt("early_stop", float, 1e-7, help="stop once the gradient norm drops below this"),
)

_COMMON = {
    "generate": (
        _Opt("n_clusters", int, None, required=True, help="number of clusters"),
        _Opt("cluster_size", int, None, required=True, help="points per cluster"),
        _Opt("dim", int, None, required=True, help="ambient dimension"),
        _OPT_SEED,
        _Opt("margin", float, 2.0, help="separation margin over the requirement"),
        _Opt("mode", str, "satisfy", help="satisfy or violate"),
        _Opt("target_c", float, None, help="cross-cluster distance to hit in violate mode"),
        _Opt("cluster_shape", str, "gaussian_clipped",
             help="gaussian_clipped or uniform_ball"),
        _Opt("out", str, "dataset.csv", help="output CSV path"),
        _OPT_REPORT, _OPT_THREADS,
    ),
    "embed": (
        _OPT_DATA,
        _Opt("kernel", str, "gaussian", help="gaussian, cauchy, or exp:RATE"),
        _Opt("sigma", float, THEOREM_SIGMA, help="input affinity bandwidth"),
        _OPT_D, *_OPTS_OPTIMIZER, _OPT_SEED,
        _Opt("out", str, "embedding.csv", help="output CSV path"),
        _Opt("trace", str, None, help="write per-iteration loss CSV here"),
        _OPT_REPORT, _OPT_THREADS,
    ),
    "quality": (
        _OPT_DATA,
        _Opt("embedding", str, None, required=True, help="embedding CSV path"),
        _Opt("mc_samples", int, 10_000, help="Monte Carlo sample count"),
        _Opt("mc_seed", int, 0, help="Monte Carlo seed"),
        _OPT_REPORT, _OPT_THREADS,
    ),
    "perfect": (
        _OPT_DATA,
        _Opt("out", str, "perfect.csv", help="output CSV path"),
        _OPT_REPORT, _OPT_THREADS,
    ),
    "certify": (
        _OPT_DATA, _OPT_D,
        _Opt("relaxed", bool, False, switch=True,
             help="use the dimension-aware separation requirement"),
        _Opt("random_embeddings", int, 10, help="random embeddings for the chain check"),
        _Opt("general_kernel", str, None, help="also certify this kernel family"),
        *_OPTS_OPTIMIZER,
        _Opt("seed", int, 0, help="optimizer seed"),
        _Opt("report", str, "certificate.json", help="write the JSON certificate here"),
        _OPT_THREADS,
    ),
    "sweep": (
        _Opt("n_clusters", int, None, required=True, help="number of clusters"),
        _Opt("cluster_size", int, None, required=True, help="points per cluster"),
        _Opt("dim", int, None, required=True, help="ambient dimension"),
        _OPT_SEED,
        _Opt("targets", _float_list, None, required=True,
             help="comma-separated separation targets"),
        _Opt("seeds", _int_list, None, required=True, help="comma-separated sweep seeds"),
        _Opt("cluster_shape", str, "gaussian_clipped",
             help="gaussian_clipped or uniform_ball"),
        _Opt("kernel", str, "gaussian", help="gaussian, cauchy, or exp:RATE"),
        _OPT_D, *_OPTS_OPTIMIZER,
        _Opt("out", str, "sweep.csv", help="per-cell CSV path"),
        _Opt("summary", str, None, help="write a per-target JSON summary here"),
        _OPT_REPORT, _OPT_THREADS,
    ),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="snesep",
                                     description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"snesep {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)
    for command, opts in _COMMON.items():
        sub = subs.add_parser(command)
        sub.add_argument("--config", type=str, default=None,
                         help="flat JSON file of option defaults")
        for opt in opts:
            flag = "--" + opt.key.replace("_", "-")
            if opt.switch:
                sub.add_argument(flag, action="store_true", default=None, help=opt.help)
            else:
                sub.add_argument(flag, type=opt.typ, default=None, help=opt.help)
        sub.set_defaults(func=_HANDLERS[command], opts=opts)
    return parser


def _load_config(path: str) -> dict:
    with open(path) as fh:
        try:
            config = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(config, dict):
        raise ValidationError(f"{path}: config must be a JSON object")
    return config


def _effective(args) -> dict:
    config = _load_config(args.config) if args.config is not None else {}
    leftover = dict(config)
    eff = {}
    for opt in args.opts:
        cli_value = getattr(args, opt.key)
        raw = leftover.pop(opt.key, None)
        if cli_value is not None:
            eff[opt.key] = cli_value
        elif opt.key in config:
            eff[opt.key] = _coerce(opt, raw)
        else:
            eff[opt.key] = opt.default
    if leftover:
        raise ValidationError("unknown config keys: " + ", ".join(sorted(leftover)))
    missing = [opt.key for opt in args.opts if opt.required and eff[opt.key] is None]
    if missing:
        raise ValidationError("missing required settings: "
                              + ", ".join("--" + key.replace("_", "-") for key in missing))
    return eff


def _coerce(opt: _Opt, value):
    if opt.switch:
        if not isinstance(value, bool):
            raise ValidationError(f"config key {opt.key} must be true or false")
        return value
    if value is None:
        return None
    try:
        return opt.typ(value)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"config key {opt.key}: {exc}") from exc


def _json_safe(value):
    if isinstance(value, dict):
        return {key: _json_safe(v) for key, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        value = float(value)
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _write_report(command: str, eff: dict, payload: dict) -> None:
    path = eff.get("report")
    if path is None:
        return
    config = _json_safe({key: value for key, value in eff.items() if key != "report"})
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    report = {
        "command": command,
        "metadata": {
            "version": __version__,
            "config_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "threads": eff.get("threads") if eff.get("threads") is not None
                       else _env_threads(),
        },
        "config": config,
    }
    report.update(_json_safe(payload))
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _env_threads():
    raw = os.environ.get("SNESEP_THREADS")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        return None


def _optimizer_config(eff: dict) -> OptimizerConfig:
    return OptimizerConfig(method=eff["method"], step_size=eff["step_size"],
                           iterations=eff["iterations"], seed=eff["seed"],
                           init_scale=eff["init_scale"],
                           early_stop_grad_norm=eff["early_stop"])


def cmd_generate(args) -> int:
    eff = _effective(args)
    spec = GeneratorSpec(n_clusters=eff["n_clusters"], cluster_size=eff["cluster_size"],
                         dim=eff["dim"], seed=eff["seed"], margin=eff["margin"],
                         mode=eff["mode"], target_c=eff["target_c"],
                         cluster_shape=eff["cluster_shape"])
    ds = generate(spec)
    save_dataset(ds, eff["out"])
    cert = validate_dataset(ds, separation_threshold(ds.n_clusters))
    _write_report("generate", eff, {
        "points": ds.k,
        "separation": {"max_diameter": cert.max_diameter,
                       "min_separation": cert.min_separation,
                       "threshold": cert.threshold,
                       "satisfied": cert.satisfied},
    })
    print(f"wrote {ds.k} points in {ds.n_clusters} clusters to {eff['out']} "
          f"(min separation {cert.min_separation:.4g}, requirement {cert.threshold:.4g}, "
          f"{'satisfied' if cert.satisfied else 'violated'})")
    return 0


def cmd_embed(args) -> int:
    eff = _effective(args)
    ds = load_dataset(eff["data"])
    kern = parse_kernel(eff["kernel"])
    cfg = _optimizer_config(eff)
    emb, trace, p = run_embed(ds, kern, eff["sigma"], eff["d"], cfg)
    save_embedding(emb, ds.labels, eff["out"])
    if eff["trace"] is not None:
        save_trace(trace, eff["trace"])
    final_loss = loss_at(p, emb, kern).total
    q = quality_exact(emb, ds)
    _write_report("embed", eff, {
        "loss": final_loss,
        "quality": q,
        "iterations_run": trace.iterations_run,
        "converged": trace.converged,
    })
    print(f"embedded {ds.k} points into {eff['d']}d, loss {final_loss:.6g}, "
          f"quality {q:.6g}, {trace.iterations_run} iterations"
          f"{' (converged)' if trace.converged else ''}")
    return 0


def cmd_quality(args) -> int:
    eff = _effective(args)
    ds = load_dataset(eff["data"])
    emb, labels = load_embedding(eff["embedding"])
    if not np.array_equal(labels, ds.labels):
        raise ValidationError("embedding labels do not match the dataset")
    rep = build_quality_report(emb, ds, eff["mc_samples"], eff["mc_seed"])
    _write_report("quality", eff, {
        "q_exact": rep.q_exact,
        "q_mc": rep.q_mc,
        "q_mc_stderr": rep.q_mc_stderr,
        "mc_samples": rep.mc_samples,
        "lemma_lower": rep.lemma_lower,
        "lemma_perfect": rep.lemma_perfect,
        "theorem_upper": rep.theorem_upper,
        "mismatches": rep.mismatches,
        "contiguous": rep.contiguous,
    })
    contig = {None: "n/a", True: "yes", False: "no"}[rep.contiguous]
    print(f"Q = {rep.q_exact:.6f} (floor {rep.lemma_lower:.6f}, "
          f"perfect {rep.lemma_perfect:.6f}, ceiling {rep.theorem_upper:.6f})")
    print(f"MC estimate {rep.q_mc:.6f} +/- {rep.q_mc_stderr:.6f} "
          f"({rep.mc_samples} samples), mismatches {rep.mismatches}, contiguous {contig}")
    return 0


def cmd_perfect(args) -> int:
    eff = _effective(args)
    ds = load_dataset(eff["data"])
    emb = perfect_embedding(ds)
    save_embedding(emb, ds.labels, eff["out"])
    q = quality_exact(emb, ds)
    _, target = lemma_bounds(ds.cluster_size)
    _write_report("perfect", eff, {
        "q_exact": q, "lemma_perfect": target, "gap": q - target,
    })
    print(f"wrote the reference line embedding to {eff['out']}: "
          f"Q = {q:.12f}, target {target:.12f}")
    return 0


def cmd_certify(args) -> int:
    eff = _effective(args)
    ds = load_dataset(eff["data"])
    cfg = _optimizer_config(eff)
    kern = parse_kernel(eff["general_kernel"]) if eff["general_kernel"] else None
    report = run_certification(ds, d=eff["d"], cfg=cfg,
                               random_embeddings=eff["random_embeddings"],
                               relaxed=eff["relaxed"], general_kern=kern)
    payload = report_to_dict(report)
    _write_report("certify", eff, payload)

    def line(name, ok, detail=""):
        print(f"  {name:<22} {'pass' if ok else 'FAIL'}  {detail}")

    print(f"certificates for {eff['data']} (n={ds.n_clusters}, a={ds.cluster_size}):")
    line("affinity bounds", report.p_bounds.passed)
    line("lattice loss", report.lattice.passed,
         f"{report.lattice.loss:.6g} <= {report.lattice.bound:.6g}")
    line("chain (optimized)", report.chain.passed,
         f"{report.chain.lhs:.6g} <= {report.chain.rhs:.6g}")
    line("chain (reference)", report.perfect_chain.passed)
    line("chain (random)", report.random_chains_passed,
         f"{report.random_chains_checked} embeddings, "
         f"worst slack {report.random_chains_worst_slack:.6g}")
    line("score ceiling", report.theorem.passed,
         f"{report.theorem.lhs:.6g} <= {report.theorem.rhs:.6g}")
    if report.general is not None:
        line(f"kernel {report.general.kernel}",
             report.general.ratio_finite and report.general.ball_passed,
             f"loss ratio {report.general.ratio:.6g}")
    print("all certificates pass" if report.all_passed
          else "CERTIFICATE FAILURE", flush=True)
    return 0 if report.all_passed else 5


def cmd_sweep(args) -> int:
    eff = _effective(args)
    base = GeneratorSpec(n_clusters=eff["n_clusters"], cluster_size=eff["cluster_size"],
                         dim=eff["dim"], seed=eff["seed"],
                         cluster_shape=eff["cluster_shape"])
    cfg = _optimizer_config(eff)
    kern = parse_kernel(eff["kernel"])
    report = separation_sweep(base, eff["targets"], eff["seeds"], cfg, kern, eff["d"])
    save_sweep(report, eff["out"], eff["summary"])
    _write_report("sweep", eff, {"summary": report.summary()})
    print(f"swept {len(report.targets)} separation targets x {len(report.seeds)} seeds "
          f"-> {eff['out']}")
    for c, stats in report.summary().items():
        print(f"  c={c}: mean Q {stats['mean_quality']:.4f}, "
              f"mean mismatches {stats['mean_mismatches']:.2f}, "
              f"contiguous {stats['contiguous_fraction']:.0%}")
    return 0


_HANDLERS = {
    "generate": cmd_generate,
    "embed": cmd_embed,
    "quality": cmd_quality,
    "perfect": cmd_perfect,
    "certify": cmd_certify,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        return args.func(args)
    except (ValidationError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OptimizerDivergence as exc:
        print(f"error: optimizer diverged ({exc})", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
