"""Command-line front end.

Every subcommand prints one JSON document on stdout and a short human
summary on stderr.  Exit status: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from . import bellman, evaluation, gallery, model, sim, strategy
from .model import Game, GameError, Owner
from .numerics import DomainError, to_json_value

SCHEMA_VERSION = 1

log = logging.getLogger("stochgame")


class UsageError(Exception):
    pass


def _vec(game: Game, x) -> dict:
    return {vid: to_json_value(float(v)) for vid, v in zip(game.ids, x)}


def _read_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise GameError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _load_game(path: str) -> Game:
    try:
        return model.load_file(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _load_strategy(path, game: Game, player: Owner):
    if path is None:
        if game.owned(player):
            raise UsageError(f"--{'sigma' if player == Owner.MAX else 'pi'} is required: "
                             f"the game has {player.value} vertices")
        return strategy.MDStrategy(player, {})
    strat = strategy.strategy_from_dict(_read_json(path), game)
    if strat.player != player:
        raise GameError(f"{path}: expected a {player.value} strategy, got {strat.player.value}")
    return strat


def _write(path, text: str) -> None:
    Path(path).write_text(text)


# -- subcommands ------------------------------------------------------------


def cmd_solve(args):
    game = _load_game(args.game)
    rep = bellman.value_iterate(game, tol=args.tol, max_iter=args.max_iter,
                                divergence_bound=args.bound)
    log.info("solve: %d iterations, residual %.3g, converged=%s, %d divergent",
             rep.iterations, rep.residual, rep.converged, len(rep.divergent))
    return {
        "values": _vec(game, rep.values),
        "iterations": rep.iterations,
        "residual": to_json_value(rep.residual),
        "divergent": sorted(rep.divergent),
        "converged": rep.converged,
    }


def cmd_nstep(args):
    game = _load_game(args.game)
    return {"n": args.n, "values": _vec(game, bellman.nstep_values(game, args.n))}


def cmd_discounted(args):
    game = _load_game(args.game)
    x, bound = bellman.discounted_iterate(game, args.lam, args.tol)
    log.info("discounted: lambda=%g, error bound %.3g", args.lam, bound)
    return {"lambda": args.lam, "values": _vec(game, x), "error_bound": bound}


def cmd_strategy(args):
    game = _load_game(args.game)
    out = {"player": args.player, "kind": args.kind, "eps": args.eps}
    if args.player == "min":
        rep = bellman.value_iterate(game)
        if args.kind == "md":
            strat = strategy.min_md_optimal(game, rep)
        else:
            strat = strategy.min_eps_hd(game, rep, args.eps)
    elif args.kind == "md":
        strat, lam, ell = strategy.max_md_eps(game, args.eps, start=args.start)
        out.update({"lambda": lam, "ell": ell})
        log.info("max md: lambda=%r, ell=%d", lam, ell)
    else:
        strat = strategy.max_eps_hd(game, args.eps, start=args.start)
        out["horizon"] = strat.n
    doc = strategy.strategy_to_dict(strat)
    if args.out:
        _write(args.out, json.dumps(doc, indent=1) + "\n")
    out["strategy"] = doc
    return out


def cmd_evaluate(args):
    game = _load_game(args.game)
    sigma = _load_strategy(args.sigma, game, Owner.MAX)
    pi = _load_strategy(args.pi, game, Owner.MIN)
    for s in (sigma, pi):
        if not hasattr(s, "distribution"):
            raise UsageError("evaluate takes memoryless strategies; use simulate for HD rules")
    if args.targets:
        p = evaluation.evaluate_reach(game, sigma, pi, args.start, args.targets)
        log.info("reach probability from %s: %.12g", args.start, p)
        return {"from": args.start, "targets": args.targets, "reach_probability": p}
    res = evaluation.evaluate_md_pair(game, sigma, pi, args.start)
    log.info("expected total reward from %s: %s (%s)", args.start, res.value, res.method)
    return {
        "from": args.start,
        "value": to_json_value(res.value),
        "finite_certified": res.finite_certified,
        "method": res.method,
    }


def cmd_simulate(args):
    game = _load_game(args.game)
    sigma = _load_strategy(args.sigma, game, Owner.MAX)
    pi = _load_strategy(args.pi, game, Owner.MIN)
    stats = sim.simulate(game, sigma, pi, args.start, horizon=args.horizon,
                         episodes=args.episodes, seed=args.seed, targets=args.targets,
                         threads=args.threads)
    log.info("simulate: mean %.6g +- %.3g over %d episodes", stats.mean_acc, stats.stderr,
             stats.episodes)
    return {"from": args.start, **stats.to_dict()}


def cmd_gallery(args):
    game, manifest = gallery.gallery(args.name, args.n)
    manifest = {"name": args.name, "n": args.n, **manifest}
    if args.out:
        model.save_file(game, args.out)
        mpath = args.manifest or str(Path(args.out).with_suffix("")) + ".manifest.json"
        _write(mpath, json.dumps(manifest, indent=1) + "\n")
        manifest["game_file"] = args.out
        manifest["manifest_file"] = mpath
    else:
        manifest["game"] = model.to_dict(game)
    log.info("gallery: %s with N=%d, %d vertices", args.name, args.n, len(game))
    return manifest


def cmd_transform(args):
    game = _load_game(args.game)
    if args.reach_to_acc:
        if not args.targets:
            raise UsageError("--reach-to-acc needs --targets")
        out_game = model.reach_to_acc(game, args.targets)
        extra = {"transform": "reach-to-acc", "targets": args.targets}
    else:
        out_game, entry = model.normalize_rewards(game)
        extra = {"transform": "normalize", "entry": entry}
    model.save_file(out_game, args.out)
    log.info("transform: wrote %d vertices to %s", len(out_game), args.out)
    return {**extra, "vertices": len(out_game), "out": args.out}


# -- parser -----------------------------------------------------------------


def _positive(kind):
    def parse(text):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {kind.__name__}: {text!r}") from None
        if not value > 0 or (kind is float and math.isinf(value)):
            raise argparse.ArgumentTypeError(f"must be positive and finite: {text!r}")
        return value
    return parse


def _non_negative_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid int: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0: {text!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stochgame", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="Kleene value iteration")
    s.add_argument("--game", required=True)
    s.add_argument("--tol", type=_positive(float), default=bellman.DEFAULT_TOL)
    s.add_argument("--max-iter", type=_positive(int), default=bellman.DEFAULT_MAX_ITER)
    s.add_argument("--bound", type=_positive(float), default=bellman.DEFAULT_BOUND)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("nstep", help="optimal n-step values L^(n+1)(0)")
    s.add_argument("--game", required=True)
    s.add_argument("--n", type=_non_negative_int, required=True)
    s.set_defaults(func=cmd_nstep)

    s = sub.add_parser("discounted", help="discounted value iteration")
    s.add_argument("--game", required=True)
    s.add_argument("--lambda", dest="lam", type=_positive(float), required=True)
    s.add_argument("--tol", type=_positive(float), default=bellman.DEFAULT_TOL)
    s.set_defaults(func=cmd_discounted)

    s = sub.add_parser("strategy", help="synthesize a strategy")
    s.add_argument("--game", required=True)
    s.add_argument("--player", choices=["max", "min"], required=True)
    s.add_argument("--kind", choices=["md", "hd"], default="md")
    s.add_argument("--eps", type=_positive(float), default=0.01)
    s.add_argument("--start", default=None, help="optimize at this vertex only (max)")
    s.add_argument("--out", default=None, help="also write the strategy document here")
    s.set_defaults(func=cmd_strategy)

    for name, func, helptext in (("evaluate", cmd_evaluate, "exact evaluation of a strategy pair"),
                                 ("simulate", cmd_simulate, "Monte Carlo rollout")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--game", required=True)
        s.add_argument("--sigma", default=None, help="Max strategy file")
        s.add_argument("--pi", default=None, help="Min strategy file")
        s.add_argument("--from", dest="start", required=True)
        s.add_argument("--targets", nargs="+", default=None)
        if name == "simulate":
            s.add_argument("--horizon", type=_positive(int), default=10_000)
            s.add_argument("--episodes", type=_positive(int), default=10_000)
            s.add_argument("--seed", type=_non_negative_int, default=0)
            s.add_argument("--threads", type=_positive(int), default=1)
        s.set_defaults(func=func)

    s = sub.add_parser("gallery", help="write a counterexample game")
    s.add_argument("--name", choices=["fig1", "fig1-nomax", "fig1-nomin", "fig2"], required=True)
    s.add_argument("--n", type=_positive(int), required=True)
    s.add_argument("--out", default=None)
    s.add_argument("--manifest", default=None)
    s.set_defaults(func=cmd_gallery)

    s = sub.add_parser("transform", help="rewrite a game")
    s.add_argument("--game", required=True)
    mode = s.add_mutually_exclusive_group(required=True)
    mode.add_argument("--reach-to-acc", action="store_true")
    mode.add_argument("--normalize", action="store_true")
    s.add_argument("--targets", nargs="+", default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_transform)
    return p


def _emit(doc) -> None:
    sys.stdout.write(json.dumps(doc, sort_keys=True) + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        result = args.func(args)
    except UsageError as exc:
        _emit({"schema_version": SCHEMA_VERSION, "error": "usage", "reason": str(exc)})
        log.error("usage error: %s", exc)
        return 2
    except (DomainError, GameError, KeyError) as exc:
        reason = str(exc).replace("\n", " ")
        _emit({"schema_version": SCHEMA_VERSION, "error": type(exc).__name__, "reason": reason})
        log.error("error: %s", reason)
        return 1
    _emit({"schema_version": SCHEMA_VERSION, "command": args.command, **result})
    return 0


run = main


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
