"""Command-line entry point.

Exit codes: 0 success, 1 validation error, 2 runtime error.  Log level
comes from the CF_LAB_LOG environment variable (default WARNING).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from importlib import resources

from ..xapp.pretrain import PretrainConfig, pretrain, write_manifest
from .scenario import ScenarioConfig, ScenarioError
from .serve import serve
from .sim import run
from .sweep import sweep_experiment, to_csv


def _load_scenario(path: str | None) -> ScenarioConfig:
    if path is None:
        ref = resources.files("cflab.data").joinpath("default_scenario.json")
        with resources.as_file(ref) as p:
            return ScenarioConfig.from_file(str(p))
    return ScenarioConfig.from_file(path)


def _cmd_run(args) -> int:
    scenario = _load_scenario(args.scenario)
    if args.seed is not None:
        scenario.seed = args.seed
    log = run(scenario)
    if args.out:
        log.write_csv(args.out)
    else:
        sys.stdout.write(log.to_csv())
    total = sum(r.total_thpt_mbps for r in log.rows) / max(len(log.rows), 1)
    print(f"ran {len(log.rows)} s, mean total UL throughput {total:.2f} Mbps",
          file=sys.stderr)
    return 0


def _cmd_pretrain(args) -> int:
    cfg = PretrainConfig(episodes=args.episodes, seed=args.seed)
    last = [0]

    def progress(episode, ep_return):
        if episode - last[0] >= 50 or episode == cfg.episodes - 1:
            last[0] = episode
            print(f"episode {episode + 1}/{cfg.episodes} return {ep_return:+.2f}",
                  file=sys.stderr)

    result = pretrain(cfg, progress=progress)
    result.model.save(args.out)
    write_manifest(args.out + ".manifest.json", cfg)
    print(f"saved model to {args.out}", file=sys.stderr)
    return 0


def _cmd_sweep(args) -> int:
    rows = sweep_experiment(args.model, seed=args.seed)
    csv = to_csv(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            f.write(csv)
    else:
        sys.stdout.write(csv)
    return 0


def _cmd_serve(args) -> int:
    scenario = _load_scenario(args.scenario)
    serve(scenario, args.port, speed=args.speed)
    return 0


def _cmd_validate(args) -> int:
    scenario = _load_scenario(args.scenario)
    scenario.validate()
    print("scenario valid")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cflab",
        description="Cell-free MU-MIMO uplink simulator with an O-RAN style "
                    "control plane and antenna-association xApp")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario and emit the metrics CSV")
    p.add_argument("--scenario", help="scenario JSON (default: bundled scenario)")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("pretrain", help="pretrain the antenna-association DQN")
    p.add_argument("--episodes", type=int, default=PretrainConfig().episodes)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model output path")
    p.set_defaults(func=_cmd_pretrain)

    p = sub.add_parser("sweep", help="antenna sweep: power/throughput/time vs count")
    p.add_argument("--model", required=True, help="trained model path")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("serve", help="serve a live scenario for the console")
    p.add_argument("--scenario", help="scenario JSON (default: bundled scenario)")
    p.add_argument("--port", type=int, default=9310)
    p.add_argument("--speed", type=float, default=1.0,
                   help="time dilation: simulated seconds per wall second")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("validate", help="validate a scenario file")
    p.add_argument("--scenario", help="scenario JSON (default: bundled scenario)")
    p.set_defaults(func=_cmd_validate)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("CF_LAB_LOG", "WARNING").upper())
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        logging.getLogger(__name__).exception("runtime failure")
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
