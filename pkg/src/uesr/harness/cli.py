"""Command line entry point: ``uesr {train,transfer,eval,grad-check,render,plot}``.

Exit codes: 0 success, 1 training diverged (NaN) or a failed gradient
check, 2 invalid configuration, arguments or checkpoint.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from ..env_warehouse import N_ACTIONS, Variant, create_env, render_ascii, reset_episode, step
from .config import ExperimentConfig, load_config
from .experiment import CheckpointMismatch, TrainingDiverged, evaluate, train, transfer

EXIT_OK, EXIT_DIVERGED, EXIT_INVALID = 0, 1, 2
VARIANTS = [v.value for v in Variant]


def _cmd_train(args) -> int:
    if args.config:
        config = load_config(args.config, seed=args.seed, total_env_steps=args.steps,
                             metrics_path=args.metrics, checkpoint_path=args.checkpoint)
    else:
        config = ExperimentConfig(scheme=args.scheme or "m_ues_r")
        changes = {k: v for k, v in dict(seed=args.seed, total_env_steps=args.steps,
                                          metrics_path=args.metrics, checkpoint_path=args.checkpoint).items()
                   if v is not None}
        config = config.replace(**changes)
    if args.scheme and args.config:
        config = config.replace(scheme=args.scheme)
    result = train(config)
    print(f"scheme={config.scheme.value} seed={config.seed} env_steps={result.env_steps} "
          f"episodes={result.episodes} deliveries_per_episode={result.deliveries_per_episode:.4f} "
          f"best_window={result.best_window_deliveries:.4f}")
    if result.checkpoint_path:
        print(f"checkpoint: {result.checkpoint_path}")
    return EXIT_OK


def _cmd_transfer(args) -> int:
    config = load_config(args.config) if args.config else None
    result = transfer(args.checkpoint, args.variant, config, args.batches)
    print(f"variant={result.variant} updates={result.updates} episodes={result.episodes} "
          f"deliveries={result.deliveries} deliveries_per_episode={result.deliveries_per_episode:.4f}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    from .experiment import load_agents

    variant = args.variant
    if variant is None:
        _, _, meta = load_agents(args.checkpoint)
        variant = meta["layout_variant"]
    result = evaluate(args.checkpoint, variant, args.episodes, args.seed)
    print(f"variant={variant} episodes={result.episodes} mean={result.mean_deliveries:.4f} "
          f"std={result.std_deliveries:.4f}")
    return EXIT_OK


def _cmd_grad_check(args) -> int:
    from .gradchecks import gradient_suite

    ok = True
    for res in gradient_suite(args.seed):
        print(f"{res.name:20s} {res.report}")
        ok &= res.report.passed
    return EXIT_OK if ok else EXIT_DIVERGED


def _cmd_render(args) -> int:
    state = create_env(args.variant, args.seed)
    rng = np.random.default_rng(args.seed)
    print(render_ascii(state))
    for _ in range(args.steps):
        actions = rng.integers(0, N_ACTIONS, size=state.params.n_agents)
        outcome = step(state, actions)
        print(f"\nactions {actions.tolist()} rewards {outcome.rewards.tolist()}")
        print(render_ascii(state))
        if outcome.episode_done:
            reset_episode(state)
    return EXIT_OK


def _cmd_plot(args) -> int:
    from .plots import emit_plots, group_by_directory

    out = emit_plots(group_by_directory(args.csv), args.out, column=args.column)
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uesr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on the training layout")
    p.add_argument("--config", help="INI experiment file (defaults apply when omitted)")
    p.add_argument("--seed", type=int)
    p.add_argument("--scheme", choices=["ia2c", "m_r", "m_ues", "m_ues_r"])
    p.add_argument("--steps", type=int, help="total environment steps, summed over parallel envs")
    p.add_argument("--metrics", help="metrics CSV path")
    p.add_argument("--checkpoint", help="final checkpoint path (.npz)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("transfer", help="fine-tune a checkpoint on a shifted layout")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--variant", required=True, choices=VARIANTS)
    p.add_argument("--batches", type=int, help="fine-tuning batches (0 = zero-shot evaluation)")
    p.add_argument("--config", help="override the configuration stored in the checkpoint")
    p.set_defaults(func=_cmd_transfer)

    p = sub.add_parser("eval", help="frozen evaluation of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--variant", choices=VARIANTS, help="layout (default: the one trained on)")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("grad-check", help="finite-difference check of all gradients")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_grad_check)

    p = sub.add_parser("render", help="print a random-action rollout as ASCII frames")
    p.add_argument("--variant", default="training", choices=VARIANTS)
    p.add_argument("--steps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("plot", help="learning-curve SVG; CSVs are grouped by parent directory")
    p.add_argument("csv", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--column", default="deliveries_per_episode")
    p.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except TrainingDiverged as err:
        print(f"error: training diverged: {err}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ValueError, CheckpointMismatch, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
