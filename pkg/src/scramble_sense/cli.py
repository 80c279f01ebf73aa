"""Command-line front end.

Subcommands::

    scramble-sense run CONFIG [--out DIR]
    scramble-sense scaling CONFIG [--out DIR]
    scramble-sense theory --protocol quadratic --A 1 --M 10000
    scramble-sense theory --required-circuits coherent --K 580 --delta 0.01
    scramble-sense decode-demo --n 20 --K 30 --gamma-r 0.05
    scramble-sense preset fig3 [--out FILE]

Exit codes: 0 on success, 2 for configuration or flag errors, 3 when the
estimator hits a numerical failure (singular system, codeword collision).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .clifford import conjugate, sample_uniform_clifford
from .config import LoadedConfig, load_config, preset_document, preset_names
from .estimators import NumericalFailure
from .harness import ConfigError, _random_paulis, run_trial, scaling_sweep
from .pauli import x_support
from .readout import CodewordSet, correctability_check, decode_shots, flip_masks
from .theory import (
    PredictionInput,
    TheoryError,
    collision_bound,
    insensitivity_probability,
    predict_variance,
    readout_transition_M_star,
    required_circuits,
)

ESTIMATES_HEADER = ["id", "kind", "t", "pauli", "true", "estimate", "predicted_std",
                    "thresholded", "corrected"]
SCALING_HEADER = ["M", "rms_coherent", "rms_incoherent", "theory_coherent",
                  "theory_incoherent", "slope_running"]
CSV_SCHEMA = 1


class UsageError(Exception):
    """Raised by the argument parser instead of exiting."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def _num(x: float) -> str:
    """Shortest round-trip text for a float, ``nan`` for missing values."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return repr(float(x))


def _stamp(kind: str, loaded: LoadedConfig) -> str:
    return (f"# scramble_sense {__version__} {kind} schema={CSV_SCHEMA} "
            f"seed={loaded.experiment.seed} config={loaded.hash}\n")


def _write_csv(path: Path, stamp: str, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    buf.write(stamp)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buf.getvalue())


def _out_dir(loaded: LoadedConfig, override: str | None) -> Path:
    out = Path(override or loaded.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    loaded = load_config(args.config)
    cfg = loaded.experiment
    M = cfg.shots[0]
    trial = run_trial(cfg, M)
    rep, signals = trial.report, trial.signals
    by_id = {s.id: s for s in signals}
    rows = []
    for i, sid in enumerate(rep.ids):
        s = by_id[sid]
        rows.append([sid, s.kind, s.t, s.generator.label(), _num(s.amplitude), _num(rep.estimates[i]),
                     _num(rep.predicted_std[i]), int(rep.thresholded[i]), int(rep.corrected[i])])
    out = _out_dir(loaded, args.out)
    _write_csv(out / "estimates.csv", _stamp("estimates", loaded), ESTIMATES_HEADER, rows)
    m = trial.metrics
    summary = {
        "version": __version__,
        "schema": CSV_SCHEMA,
        "seed": cfg.seed,
        "config_hash": loaded.hash,
        "protocol": cfg.protocol,
        "n": cfg.n,
        "M": M,
        "A": m["A"],
        "A_hat": m["A_hat"],
        "rms_coherent": m["rms_coherent"],
        "rms_incoherent": m["rms_incoherent"],
        "max_abs_error": m["max_abs_error"],
        "not_estimable": m["not_estimable"],
    }
    for key in ("decode_ties", "decode_out_of_radius"):
        if key in m:
            summary[key] = m[key]
    (out / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    return 0


def _jsonable(d: dict) -> dict:
    return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in d.items()}


def cmd_scaling(args) -> int:
    loaded = load_config(args.config)
    records = scaling_sweep(loaded.experiment)
    rows = [[r.M, _num(r.rms_coherent), _num(r.rms_incoherent), _num(r.theory_coherent),
             _num(r.theory_incoherent), _num(r.slope_running)] for r in records]
    out = _out_dir(loaded, args.out)
    _write_csv(out / "scaling.csv", _stamp("scaling", loaded), SCALING_HEADER, rows)
    return 0


def cmd_theory(args) -> int:
    record: dict = {"version": __version__}
    if args.required_circuits:
        if args.K is None or args.delta is None:
            raise UsageError("--required-circuits needs --K and --delta")
        kind = args.required_circuits
        record.update(kind=kind, K=args.K, delta=args.delta)
        record["required_circuits"] = required_circuits(kind, args.K, args.delta, args.N)
        if kind == "coherent":
            record["failure_probability"] = insensitivity_probability(args.K, record["required_circuits"])
        else:
            record["failure_probability"] = collision_bound(args.K, args.N, record["required_circuits"])
    elif args.M_star:
        if args.gamma_r is None or args.N is None or args.theta is None:
            raise UsageError("--M-star needs --gamma-r, --N and --theta")
        record["M_star"] = readout_transition_M_star(args.gamma_r, args.N, args.theta)
    else:
        if args.protocol is None or args.M is None:
            raise UsageError("theory needs --protocol and --M (or --required-circuits / --M-star)")
        inp = PredictionInput(args.protocol, args.M, args.A, args.N, args.gamma_r or 0.0, args.s,
                              args.phi, args.gamma, args.beta)
        var = predict_variance(inp)
        record.update(protocol=args.protocol, M=args.M, A=args.A, variance=var, std=math.sqrt(var))
    sys.stdout.write(json.dumps(record, sort_keys=True) + "\n")
    return 0


def cmd_decode_demo(args) -> int:
    """Codeword statistics of random global-Clifford codes."""
    rng = np.random.default_rng(args.seed)
    paulis = _random_paulis(args.n, args.K, rng)
    circuits = []
    for c in range(args.n_circuits):
        cliff = sample_uniform_clifford(args.n, rng)
        words = {x_support(conjugate(cliff, p)[0]) for p in paulis}
        codes = CodewordSet(args.n, tuple(words))
        rep = correctability_check(codes, args.gamma_r)
        source = rng.choice(codes.array(), size=args.shots)
        flips = flip_masks(args.n, args.shots, args.gamma_r, rng)
        decoded, inside, _ = decode_shots(source ^ flips, codes)
        near = np.bitwise_count(flips) <= codes.radius
        circuits.append({
            "circuit": c,
            "codewords": len(codes.codewords),
            "d_min": rep.d_min,
            "radius": codes.radius,
            "relative_radius": rep.relative_radius,
            "correctable": rep.correctable,
            "d_min_bound": rep.bound,
            "d_min_approx": rep.approx,
            "inside_radius": float(inside.mean()),
            "recovered": float(np.mean(decoded == source)),
            "within_radius": float(near.mean()),
            "recovered_within_radius": float(np.mean(decoded[near] == source[near])) if near.any() else None,
        })
    out = {"version": __version__, "seed": args.seed, "n": args.n, "K": args.K,
           "gamma_r": args.gamma_r, "circuits": circuits}
    sys.stdout.write(json.dumps(out, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_preset(args) -> int:
    if args.list:
        sys.stdout.write("\n".join(preset_names()) + "\n")
        return 0
    if args.name is None:
        raise UsageError("preset needs a name (or --list)")
    text = json.dumps(preset_document(args.name), indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="scramble-sense", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    run = sub.add_parser("run", help="one trial; writes estimates.csv and summary.json")
    run.add_argument("config")
    run.add_argument("--out")
    run.set_defaults(func=cmd_run)

    sc = sub.add_parser("scaling", help="RMS error against M; writes scaling.csv")
    sc.add_argument("config")
    sc.add_argument("--out")
    sc.set_defaults(func=cmd_scaling)

    th = sub.add_parser("theory", help="closed-form predictions as JSON")
    th.add_argument("--protocol")
    th.add_argument("--M", type=float)
    th.add_argument("--A", type=float, default=1.0)
    th.add_argument("--N", type=int)
    th.add_argument("--s", type=int, default=1)
    th.add_argument("--phi", type=float)
    th.add_argument("--gamma", type=float, default=0.0)
    th.add_argument("--gamma-r", dest="gamma_r", type=float)
    th.add_argument("--beta", type=float)
    th.add_argument("--theta", type=float)
    th.add_argument("--K", type=int)
    th.add_argument("--delta", type=float)
    th.add_argument("--required-circuits", dest="required_circuits", choices=["coherent", "incoherent"])
    th.add_argument("--M-star", dest="M_star", action="store_true")
    th.set_defaults(func=cmd_theory)

    dd = sub.add_parser("decode-demo", help="minimum distance and decoding of random codes")
    dd.add_argument("--n", type=int, default=20)
    dd.add_argument("--K", type=int, default=30)
    dd.add_argument("--n-circuits", dest="n_circuits", type=int, default=2)
    dd.add_argument("--gamma-r", dest="gamma_r", type=float, default=0.05)
    dd.add_argument("--shots", type=int, default=10_000)
    dd.add_argument("--seed", type=int, default=0)
    dd.set_defaults(func=cmd_decode_demo)

    pr = sub.add_parser("preset", help="print a bundled config")
    pr.add_argument("name", nargs="?")
    pr.add_argument("--out")
    pr.add_argument("--list", action="store_true")
    pr.set_defaults(func=cmd_preset)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError("a subcommand is required; see --help")
        return args.func(args)
    except (UsageError, ConfigError, TheoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
