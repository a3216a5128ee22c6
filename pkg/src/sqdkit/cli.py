"""Command-line interface.

Subcommands: run (single point), pes (scan), extrapolate (zero-variance fit
from JSONL logs), oracle (dense exact diagonalization), hci (variational
selection baseline), shots (generate or inspect shot files).

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .extrapolate import (
    SingularFitError,
    fit_zero_variance,
    points_from_jsonl,
)
from .fock import SectorSizeError, build_dense
from .hamiltonian import FcidumpError, parse_fcidump
from .recovery import InitializationError
from .sampler import NoiseSpec, ShotParseError, read_shots, sample, write_shots
from .solver import SolverConvergenceError, hci_ground
from .workflow import (
    ConfigError,
    _coerce_point_cfg,
    load_pes_config,
    plan_preview,
    run_pes,
    run_point,
)

CONFIG_ERRORS = (ConfigError, FcidumpError, ShotParseError, ValueError, OSError)
NUMERICAL_ERRORS = (
    SolverConvergenceError,
    SectorSizeError,
    InitializationError,
    SingularFitError,
    RuntimeError,
    np.linalg.LinAlgError,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sqdkit",
        description="Sample-based quantum diagonalization workflows",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out-dir", default=None, help="output directory")
        p.add_argument(
            "--threads",
            type=int,
            default=None,
            help="worker threads (default: SQD_THREADS or 1)",
        )

    p_run = sub.add_parser("run", help="run a single point")
    p_run.add_argument("--config", required=True)
    common(p_run)

    p_pes = sub.add_parser("pes", help="run a potential-energy-surface scan")
    p_pes.add_argument("--config", required=True)
    p_pes.add_argument("--dry-run", action="store_true", help="validate and print the plan")
    p_pes.add_argument("--plot", action="store_true", help="render the PES figure next to the CSV")
    common(p_pes)

    p_ext = sub.add_parser("extrapolate", help="zero-variance fit from JSONL logs")
    p_ext.add_argument("--log", required=True, help="JSONL with batch_size/energy/variance records")
    p_ext.add_argument("--batch-sizes", default=None, help="comma-separated batch sizes to use")
    p_ext.add_argument("--out", default=None, help="write the fit as JSON here")
    p_ext.add_argument("--plot", default=None, metavar="PNG", help="render the fit figure")

    p_orc = sub.add_parser("oracle", help="dense exact ground energy (small sectors)")
    p_orc.add_argument("--fcidump", required=True)
    p_orc.add_argument("--cap", type=int, default=20000, help="sector-dimension cap")

    p_hci = sub.add_parser("hci", help="variational selection baseline")
    p_hci.add_argument("--fcidump", required=True)
    p_hci.add_argument("--eps", default="5e-6,1e-6", help="comma-separated eps1 schedule")

    p_sh = sub.add_parser("shots", help="generate or inspect shot files")
    p_sh.add_argument("--fcidump", default=None, help="Hamiltonian for generation")
    p_sh.add_argument(
        "--params",
        default="random",
        help="ansatz parameter JSON, or 'random' for the demo initializer",
    )
    p_sh.add_argument("--n-shots", type=int, default=10000)
    p_sh.add_argument("--flip-probability", type=float, default=0.0)
    p_sh.add_argument("--seed", type=int, default=0)
    p_sh.add_argument("--out", default=None, help="write generated shots here")
    p_sh.add_argument("--in", dest="inspect", default=None, help="inspect an existing shot file")

    return parser


def _cmd_run(args) -> int:
    data = json.loads(Path(args.config).read_text())
    seed = int(data.get("seed", 0)) if args.seed is None else args.seed
    entry = data if "fcidump" in data else data["points"][0]
    defaults = {
        k: v
        for k, v in data.items()
        if k in ("method", "n_shots", "noise", "recovery", "solver", "hci_eps1", "oracle_cap")
    }
    cfg = _coerce_point_cfg(entry, defaults, seed)
    log_path = None
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        log_path = out / f"{cfg.label}.recovery.jsonl"
    point = run_point(cfg, log_path=log_path)
    print(json.dumps(point.__dict__, indent=2, sort_keys=True))
    if args.out_dir:
        (Path(args.out_dir) / f"{cfg.label}.json").write_text(
            json.dumps(point.__dict__, sort_keys=True)
        )
    return 0


def _cmd_pes(args) -> int:
    config = load_pes_config(args.config)
    if args.seed is not None:
        config["seed"] = args.seed
    if args.out_dir is not None:
        config["out_dir"] = args.out_dir
    if args.threads is not None:
        config["threads"] = args.threads
    if args.dry_run:
        print(json.dumps(plan_preview(config), indent=2))
        return 0
    points = run_pes(config)
    csv_path = Path(config["out_dir"]) / "pes.csv"
    print(f"wrote {csv_path} ({len(points)} points)")
    if args.plot:
        from .plotting import plot_pes

        print(f"wrote {plot_pes(csv_path)}")
    return 0


def _cmd_extrapolate(args) -> int:
    batch_sizes = None
    if args.batch_sizes:
        batch_sizes = [int(b) for b in args.batch_sizes.split(",") if b]
    points = points_from_jsonl(Path(args.log).read_text(), batch_sizes)
    if len(points) < 2:
        raise ConfigError(f"found {len(points)} usable points in {args.log}")
    fit = fit_zero_variance(points)
    payload = fit.to_dict()
    print(json.dumps(payload, indent=2))
    if args.out:
        Path(args.out).write_text(json.dumps(payload, sort_keys=True))
    if args.plot:
        from .plotting import plot_extrapolation

        print(f"wrote {plot_extrapolation(points, fit, args.plot)}")
    return 0


def _cmd_oracle(args) -> int:
    h = parse_fcidump(Path(args.fcidump).read_text())
    mat = build_dense(h, h.sector, cap=args.cap)
    energy = float(np.linalg.eigvalsh(mat)[0])
    print(json.dumps({"energy": energy, "d": mat.shape[0], "sector": list(h.sector)}))
    return 0


def _cmd_hci(args) -> int:
    h = parse_fcidump(Path(args.fcidump).read_text())
    schedule = [float(e) for e in args.eps.split(",") if e]
    res = hci_ground(h, h.sector, schedule)
    print(
        json.dumps(
            {
                "energy": res.energy,
                "d": res.dimension,
                "d_significant": res.d_significant,
                "variance": res.variance,
            }
        )
    )
    return 0


def _cmd_shots(args) -> int:
    if args.inspect is not None:
        shots = read_shots(Path(args.inspect).read_text())
        ca, cb = shots.electron_counts()
        summary = {
            "n_shots": len(shots),
            "m": shots.m,
            "alpha_counts": {str(k): int(v) for k, v in zip(*np.unique(ca, return_counts=True))},
            "beta_counts": {str(k): int(v) for k, v in zip(*np.unique(cb, return_counts=True))},
        }
        print(json.dumps(summary, indent=2))
        return 0
    if args.fcidump is None:
        raise ConfigError("shots: provide --fcidump to generate or --in to inspect")
    from .ansatz import load_params, prepare_lucj, random_params

    h = parse_fcidump(Path(args.fcidump).read_text())
    if args.params == "random":
        params = random_params(h.m_orbitals, seed=args.seed)
    else:
        params = load_params(args.params)
    state = prepare_lucj(params, h)
    shots = sample(state, args.n_shots, NoiseSpec(args.flip_probability, args.seed))
    text = write_shots(shots)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out} ({len(shots)} shots)")
    else:
        sys.stdout.write(text)
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "pes": _cmd_pes,
    "extrapolate": _cmd_extrapolate,
    "oracle": _cmd_oracle,
    "hci": _cmd_hci,
    "shots": _cmd_shots,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return _COMMANDS[args.command](args)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
