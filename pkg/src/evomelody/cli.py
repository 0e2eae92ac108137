"""Command-line driver: synthetic-oracle evolution runs, session utilities,
and the HTTP server.

Exit codes: 0 success, 1 usage or input error, 2 verification failure.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import engine, session as sessionmod
from .engine import DEConfig
from .expression import ExpressionProfile, apply_expression
from .fitness import SyntheticOracle, eval_oracle
from .genome import (
    DurationGrid,
    ScaleContext,
    decode_genome,
    random_genome,
    uniform_bounds,
)
from .midi_io import SmfConfig, write_smf

SYNTH_LOW, SYNTH_HIGH = -100.0, 100.0
ORACLE_NAMESPACE = 1  # rng namespace for the hidden-target reference draw


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="evomelody")
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser(
        "evolve-synthetic",
        help="run the optimizer against a synthetic oracle and report convergence",
    )
    ev.add_argument("--oracle", choices=["sphere", "hidden-target"], default="sphere")
    ev.add_argument("--dims", type=int, default=12)
    ev.add_argument("--pop", type=int, default=30)
    ev.add_argument("--gens", type=int, default=300)
    ev.add_argument("--F", type=float, default=0.5)
    ev.add_argument("--Cr", type=float, default=0.9)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--out", help="write the best genome as a MIDI file (dims must be 3*N)")

    ex = sub.add_parser("export-midi", help="render one session candidate to a MIDI file")
    ex.add_argument("--session", required=True, help="session document path")
    ex.add_argument("--candidate", required=True, help="candidate id (round or pop-s<i>)")
    ex.add_argument("--out", required=True)

    rp = sub.add_parser("replay", help="verify a session reproduces from its score log")
    rp.add_argument("--session", required=True, help="session document path")

    sv = sub.add_parser("serve", help="run the HTTP service")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8000)
    sv.add_argument("--data-dir", default="sessions")
    sv.add_argument("--static-dir", help="serve a built web UI from this directory at /ui")
    return parser


def _score_all(oracle: SyntheticOracle, members: np.ndarray) -> list[float]:
    return [eval_oracle(oracle, row) for row in members]


def run_synthetic(
    oracle_kind: str,
    dims: int,
    pop_size: int,
    gens: int,
    F: float,
    Cr: float,
    seed: int,
) -> tuple[list[str], np.ndarray, list[float]]:
    """Evolve against an oracle; returns (report lines, final members, fitness)."""
    cfg = DEConfig(population_size=pop_size, F=F, Cr=Cr, D=dims, seed=seed)
    bounds = uniform_bounds(dims, SYNTH_LOW, SYNTH_HIGH)
    if oracle_kind == "sphere":
        oracle = SyntheticOracle("sphere")
    else:
        target = random_genome(
            engine.derive_stream(seed, 0, namespace=ORACLE_NAMESPACE), bounds
        )
        oracle = SyntheticOracle("hidden_target", target=target)

    pop = engine.init_population(cfg, bounds, engine.derive_stream(seed, 0))
    pop = pop.with_fitness(_score_all(oracle, pop.members))
    lines = ["generation,best_fitness,mean_fitness"]
    lines.append(_report_line(pop))
    for g in range(1, gens + 1):
        trials = engine.propose_trials(pop, cfg, engine.derive_stream(seed, g))
        trials = [t.scored(eval_oracle(oracle, t.trial)) for t in trials]
        pop = engine.step_generation(pop, trials, cfg)
        lines.append(_report_line(pop))
    best = pop.best_index()
    lines.append("best_genome," + ",".join(repr(float(v)) for v in pop.members[best]))
    return lines, pop.members, list(pop.fitness)


def _report_line(pop) -> str:
    fitness = [f for f in pop.fitness if f is not None]
    return f"{pop.generation},{min(fitness)!r},{float(np.mean(fitness))!r}"


def _cmd_evolve(args) -> int:
    try:
        lines, members, fitness = run_synthetic(
            args.oracle, args.dims, args.pop, args.gens, args.F, args.Cr, args.seed
        )
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print("\n".join(lines))
    if args.out:
        if args.dims % 3 != 0:
            print("error: --out needs dims divisible by 3 to decode a melody", file=sys.stderr)
            return 1
        best = int(np.argmin([f if f is not None else np.inf for f in fitness]))
        phrase = decode_genome(
            members[best],
            ScaleContext(key_root=0, mode="major", low_bound=60, high_bound=84),
            DurationGrid(),
            bpm=120.0,
        )
        events = apply_expression(phrase, ExpressionProfile(), tpqn=480)
        with open(args.out, "wb") as fh:
            fh.write(write_smf(events, SmfConfig(tpqn=480, bpm=120.0)))
        print(f"wrote {args.out}", file=sys.stderr)
    return 0


def _cmd_export(args) -> int:
    try:
        sess = sessionmod.load_from_path(args.session)
    except (OSError, sessionmod.SessionLoadError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    try:
        genes = sess.candidate_genes(args.candidate)
    except KeyError:
        print(f"error: unknown candidate {args.candidate!r}", file=sys.stderr)
        return 1
    with open(args.out, "wb") as fh:
        fh.write(sess.render_smf(genes))
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def _cmd_replay(args) -> int:
    try:
        sess = sessionmod.load_from_path(args.session)
    except (OSError, sessionmod.SessionLoadError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    try:
        problems = sessionmod.verify_replay(sess)
    except sessionmod.SessionError as e:
        print(f"replay diverged: {e}")
        return 2
    if problems:
        print(f"replay diverged for session {sess.session_id}:")
        for p in problems:
            print(f"  {p}")
        return 2
    print(f"session {sess.session_id} replays exactly (generation {sess.population.generation})")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(data_dir=args.data_dir)
    if args.static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=args.static_dir, html=True), name="ui")
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "evolve-synthetic": _cmd_evolve,
        "export-midi": _cmd_export,
        "replay": _cmd_replay,
        "serve": _cmd_serve,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
