"""Command-line front end: ``collchain <command> [--config PATH] [--out DIR] ...``."""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from .config import default_config, parse_config
from .errors import CollChainError, ParseError, ValidationError

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _load(args):
    cfg = parse_config(args.config) if args.config else default_config()
    if args.variant:
        from .collision import Variant

        try:
            cfg = dataclasses.replace(cfg, variant=Variant.parse(args.variant))
        except ValueError as exc:
            raise ValidationError(str(exc)) from None
    return cfg


def _out(args, cfg):
    out = args.out or cfg.outputs.directory
    os.makedirs(out, exist_ok=True)
    return out


def cmd_spectrum(args):
    from .chain import spectrum_for

    cfg = _load(args)
    sp = spectrum_for(cfg.chain)
    lines = ["j,energy,n"] + [f"{j},{e:.17g},{n}" for j, (e, n) in enumerate(zip(sp.energies, sp.excitations))]
    text = "# format_version: 1\n" + "\n".join(lines) + "\n"
    if args.out:
        path = os.path.join(_out(args, cfg), "spectrum.csv")
        with open(path, "w") as fh:
            fh.write(text)
        print(path)
    else:
        sys.stdout.write(text)


def _tensor(cfg, threads):
    from .chain import spectrum_for
    from .collision import assemble_tensor

    sp = spectrum_for(cfg.chain)
    return sp, assemble_tensor(cfg.chain, sp, cfg.variant, cfg.quadrature, n_threads=threads)


def cmd_tensor(args):
    from .collision import save_tensor
    from .pipeline import tensor_residuals

    cfg = _load(args)
    sp, T = _tensor(cfg, args.threads)
    path = os.path.join(_out(args, cfg), "tensor.txt")
    save_tensor(T, path)
    for key, val in tensor_residuals(T, sp, cfg.chain.beta).items():
        print(f"{key}: {val:.6e}")
    print(f"seconds: {T.quadrature['seconds']:.3f}")
    print(path)


def cmd_evolve(args):
    from .dynamics import evolve, poisson_generator, trajectory_csv
    from .pipeline import initial_state

    cfg = _load(args)
    sp, T = _tensor(cfg, args.threads)
    L = poisson_generator(np.diag(sp.energies), T, cfg.chain.gamma)
    traj = evolve(L, initial_state(cfg.initial_state, sp, cfg.chain.beta), cfg.time_grid.times(), cfg.method)
    path = os.path.join(_out(args, cfg), "trajectory.csv")
    meta = {"variant": cfg.variant.value, "epsilon": repr(cfg.chain.epsilon), "gamma": repr(cfg.chain.gamma)}
    with open(path, "w") as fh:
        fh.write(trajectory_csv(traj, sp, cfg.outputs.coherences, meta=meta))
    print(path)


def cmd_steady(args):
    from .chain import gibbs_state
    from .dynamics import observables, poisson_generator, steady_state, trace_distance
    from .pipeline import steady_csv

    cfg = _load(args)
    sp, T = _tensor(cfg, args.threads)
    rho = steady_state(poisson_generator(np.diag(sp.energies), T, cfg.chain.gamma)).data
    obs = observables(rho, sp)
    path = os.path.join(_out(args, cfg), "steady.csv")
    with open(path, "w") as fh:
        fh.write(steady_csv(rho, sp, {"variant": cfg.variant.value}))
    print(f"rho123_over_rho00: {obs['rho123_over_rho00']:.10g}")
    print(f"beta_eff: {obs['beta_eff']:.10g}")
    print(f"gibbs_trace_distance: {trace_distance(rho, gibbs_state(sp, cfg.chain.beta).data):.6e}")
    print(path)


def cmd_classify(args):
    from .analysis import classify

    cfg = _load(args)
    sp, T = _tensor(cfg, args.threads)
    text = classify(T, sp, cfg.chain.beta).to_text()
    path = os.path.join(_out(args, cfg), "classify.txt")
    with open(path, "w") as fh:
        fh.write(text)
    sys.stdout.write(text)


def cmd_run(args):
    from .pipeline import run_scenario

    cfg = _load(args)
    man = run_scenario(cfg, _out(args, cfg), threads=args.threads)
    print(os.path.join(man.directory, "manifest.txt"))


def cmd_sweep(args):
    cfg = _load(args)
    if cfg.sweep is None:
        raise ValidationError("the configuration has no [sweep] section")
    cmd_run(args)


def cmd_reproduce(args):
    from .pipeline import reproduce_figure

    cfg = _load(args)
    plots = True if args.plots else None
    man = reproduce_figure(args.figure, cfg, args.out or "figures", threads=args.threads, plots=plots)
    for name in man.files:
        print(os.path.join(man.directory, name))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="collchain", description="Collisional thermalization of qubit chains.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario file (sectioned key = value)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--variant", help="Exact, Narrow, BandResolved or Local")
    common.add_argument("--threads", type=int, default=1, help="worker count")
    common.add_argument("--seed", type=int, default=None, help="reserved; the dynamics is deterministic")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "spectrum": (cmd_spectrum, "print or save the chain spectrum"),
        "tensor": (cmd_tensor, "assemble and save the collision tensor"),
        "evolve": (cmd_evolve, "propagate the initial state and write trajectory.csv"),
        "steady": (cmd_steady, "compute the stationary state"),
        "classify": (cmd_classify, "classify the collision map"),
        "run": (cmd_run, "full pipeline with manifest"),
        "sweep": (cmd_sweep, "full pipeline over the [sweep] values"),
        "reproduce": (cmd_reproduce, "regenerate figure data"),
    }
    for name, (func, help_text) in commands.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=func)
        if name == "reproduce":
            p.add_argument("figure", help="fig2, fig3 or fig4")
            p.add_argument("--plots", action="store_true", help="also write SVG line plots")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CollChainError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
