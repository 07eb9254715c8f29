"""Command-line entry point: ``exante {validate,solve,check,reconstruct,random}``.

Exit codes: 0 success, 1 domain error (invalid game, scheme not accepted by
a check that was asked to pass), 2 unreadable input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import io
from .auxgame import DEFAULT_STATE_CAP
from .errors import ExanteError, InputError, LpError, ValidationError
from .game import DEFAULT_PLAN_CAP, build_sequences, plan_label, validate
from .generate import GameShape, random_game
from .lp import CUTTING_PLANE, DEFAULT_TOL, ELLIPSOID, Tolerances
from .reconstruction import reconstruct_mixed
from .solver import EXACT, RECONSTRUCTED, extract_scheme, solve_opt_ea
from .verifier import (DEFAULT_TOL as CHECK_TOL, MatrixInstance, PersuasionReport, aux_matrix_form,
                       brute_force_opt_ea, check_ex_ante, check_ex_interim, export_matrix_form, named_rows,
                       scheme_array)

EXIT_OK, EXIT_DOMAIN, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
BOTH = "both"
MODE_AGREEMENT = 1e-6


@dataclass(frozen=True)
class RunConfig:
    command: str
    input: Path | None = None
    scheme: Path | None = None
    mode: str = CUTTING_PLANE
    prior: str = EXACT
    tol: float = CHECK_TOL
    max_plans: int = DEFAULT_PLAN_CAP
    max_states: int = DEFAULT_STATE_CAP
    output: str = "text"
    brute_force: bool = False
    seed: int = 0
    which: str = BOTH
    player: int = 1
    strategy: Path | None = None
    receivers: int = 1
    scheme_out: Path | None = None

    def __post_init__(self):
        if not 0 < self.tol < 1e-2:
            raise ValueError("--tol must lie in (0, 0.01)")
        if self.max_plans <= 0 or self.max_states <= 0:
            raise ValueError("caps must be positive")

    @property
    def lp_tol(self) -> Tolerances:
        return replace(DEFAULT_TOL, opt=min(self.tol, DEFAULT_TOL.opt), duality=min(self.tol, DEFAULT_TOL.duality))


@dataclass
class Outcome:
    code: int
    report: dict
    text: list[str]


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as err:
        raise InputError(f"cannot read {path}: {err}") from None


def _load_game(cfg: RunConfig):
    parsed = io.parse_game(_read(cfg.input))
    try:
        return parsed, validate(parsed.raw)
    except ValidationError as err:
        err.parsed = parsed
        raise


def _violations(err: ValidationError) -> tuple[list[dict], list[str]]:
    parsed = getattr(err, "parsed", None)
    items, lines = [], []
    for v in err.violations:
        where = parsed.locate(v) if parsed is not None else None
        items.append({"kind": v.kind, "message": v.message, "subject": v.subject,
                      "line": where[0] if where else None, "column": where[1] if where else None})
        at = f" at line {where[0]}, column {where[1]}" if where else ""
        lines.append(f"{v.kind}{at}: {v.message}")
    return items, lines


def cmd_validate(cfg: RunConfig) -> Outcome:
    _, g = _load_game(cfg)
    report = {"valid": True, "receivers": list(g.receivers), "infosets": len(g.infosets),
              "terminals": len(g.terminals), "typed_actions": list(g.typed_actions)}
    return Outcome(EXIT_OK, report, [f"valid: {len(g.receivers)} receiver(s), {len(g.infosets)} infosets, "
                                     f"{len(g.terminals)} terminals, typed actions {list(g.typed_actions)}"])


def _report_json(r: PersuasionReport) -> dict:
    return {
        "persuasive": r.persuasive,
        "sender_value": r.value,
        "worst": None if r.worst is None else _slack_json(r.worst),
        "violations": [_slack_json(s) for s in r.violations],
        "slacks": [_slack_json(s) for s in r.slacks],
    }


def _slack_json(s) -> dict:
    out = {"receiver": s.receiver + 1, "deviation": s.deviation, "slack": s.slack}
    if s.recommendation is not None:
        out["recommendation"] = s.recommendation
        out["conditional"] = s.conditional
    return out


def _report_text(name: str, r: PersuasionReport) -> list[str]:
    verdict = "persuasive" if r.persuasive else "NOT persuasive"
    lines = [f"{name}: {verdict}, sender value {r.value:.10g}"]
    for s in r.violations or ([r.worst] if r.worst else []):
        rec = f"after recommendation {s.recommendation!r}, " if s.recommendation is not None else ""
        tag = "violated" if s.slack < -r.tol else "binding"
        lines.append(f"  receiver {s.receiver + 1}: {rec}deviation {s.deviation!r} slack {s.slack:.10g} ({tag})")
    return lines


def cmd_solve(cfg: RunConfig) -> Outcome:
    _, g = _load_game(cfg)
    modes = [CUTTING_PLANE, ELLIPSOID] if cfg.mode == BOTH else [cfg.mode]
    runs = {}
    for mode in modes:
        t0 = time.perf_counter()
        sol = solve_opt_ea(g, prior=cfg.prior, mode=mode, tol=cfg.lp_tol, state_cap=cfg.max_states)
        runs[mode] = (sol, time.perf_counter() - t0)
    sol = runs[modes[0]][0]
    scheme = extract_scheme(sol)
    if cfg.prior == EXACT:
        m = export_matrix_form(g, cfg.max_states, cfg.max_plans)
    else:
        m = aux_matrix_form(sol.aux, sol.prior, sol.tensors, cfg.max_plans)
    rows = named_rows(scheme, g.typed_actions)
    check = check_ex_ante(m, scheme_array(m, rows), cfg.tol)
    code = EXIT_OK if check.persuasive and abs(check.value - sol.value) <= 1e-6 else EXIT_NUMERIC
    values = {mode: runs[mode][0].value for mode in modes}
    if max(values.values()) - min(values.values()) > MODE_AGREEMENT:
        code = EXIT_NUMERIC
    report = {
        "sender_value": sol.value,
        "prior": cfg.prior,
        "theta_size": len(sol.prior),
        "support_size": len(sol.gamma),
        "modes": {mode: {"sender_value": s.value, "iterations": s.stats.get("iterations"),
                         "oracle_calls": s.stats.get("oracle_calls"), "columns": s.stats.get("columns")}
                  for mode, (s, _) in runs.items()},
        "scheme": io.scheme_to_json(rows)["rows"],
        "ex_ante_check": {"persuasive": check.persuasive, "sender_value": check.value,
                          "worst": None if check.worst is None else _slack_json(check.worst)},
    }
    if cfg.brute_force:
        report["brute_force_value"] = brute_force_opt_ea(m)[0]
    text = [f"sender value {sol.value:.10g} (prior {cfg.prior}, |Theta*| = {len(sol.prior)}, "
            f"support {len(sol.gamma)})"]
    for mode, (s, secs) in runs.items():
        text.append(f"  {mode}: value {s.value:.10g}, {s.stats.get('iterations')} LP iterations, "
                    f"{s.stats.get('oracle_calls')} oracle calls, {secs:.3f}s")
    text.append("scheme:")
    for state, row in rows.items():
        recs = ", ".join(f"{'|'.join(j)}: {p:.6g}" for j, p in row.items())
        text.append(f"  {state}: {recs}")
    text += _report_text("ex ante re-check", check)
    if cfg.brute_force:
        text.append(f"brute-force OPT-EA value {report['brute_force_value']:.10g}")
    if cfg.scheme_out is not None:
        cfg.scheme_out.write_text(io.dumps(io.scheme_to_json(rows)), encoding="utf-8")
    return Outcome(code, report, text)


def _instance(cfg: RunConfig) -> MatrixInstance:
    text = _read(cfg.input)
    try:
        fmt = json.loads(text).get("format") if text.strip() else None
    except (json.JSONDecodeError, AttributeError):
        fmt = None
    if fmt == io.INSTANCE_FORMAT:
        return io.parse_instance(text)
    _, g = _load_game(cfg)
    return export_matrix_form(g, cfg.max_states, cfg.max_plans)


def cmd_check(cfg: RunConfig) -> Outcome:
    m = _instance(cfg)
    phi = scheme_array(m, io.parse_scheme(_read(cfg.scheme)))
    report: dict = {}
    text: list[str] = []
    checks: list[tuple[str, Callable]] = []
    if cfg.which in ("ex_ante", BOTH):
        checks.append(("ex_ante", check_ex_ante))
    if cfg.which in ("ex_interim", BOTH):
        checks.append(("ex_interim", check_ex_interim))
    for name, fn in checks:
        r = fn(m, phi, cfg.tol)
        report[name] = _report_json(r)
        text += _report_text(name.replace("_", " "), r)
    report["sender_value"] = report[checks[0][0]]["sender_value"]
    if cfg.brute_force:
        report["brute_force_value"] = brute_force_opt_ea(m)[0]
        text.append(f"brute-force OPT-EA value {report['brute_force_value']:.10g}")
    # a check reporting "not persuasive" is a successful run; only malformed inputs fail
    return Outcome(EXIT_OK, report, text)


def cmd_reconstruct(cfg: RunConfig) -> Outcome:
    _, g = _load_game(cfg)
    idx = build_sequences(g, cfg.player)
    if cfg.strategy is not None:
        strategy = json.loads(_read(cfg.strategy))
    else:
        strategy = {i: {a: 1 / len(idx.actions[i]) for a in idx.actions[i]} for i in idx.infosets}
    mixed = reconstruct_mixed(g, cfg.player, strategy, mode=CUTTING_PLANE if cfg.mode == BOTH else cfg.mode,
                              tol=cfg.lp_tol, idx=idx)
    plans = [(plan_label(p), x) for p, x in mixed.probs.items()]
    report = {"player": cfg.player, "sequences": len(idx), "support": len(plans),
              "residual": mixed.stats["residual"], "plans": [{"plan": p, "prob": x} for p, x in plans]}
    text = [f"player {cfg.player}: {len(plans)} plans for {len(idx)} sequences, "
            f"max |Mx - r*| = {mixed.stats['residual']:.3g}"]
    text += [f"  {p}: {x:.10g}" for p, x in plans]
    return Outcome(EXIT_OK, report, text)


def cmd_random(cfg: RunConfig) -> Outcome:
    raw = random_game(np.random.default_rng(cfg.seed), GameShape(receivers=cfg.receivers, max_plans=8))
    doc = io.game_to_json(raw)
    return Outcome(EXIT_OK, doc, [io.dumps(doc).rstrip("\n")])


COMMANDS = {"validate": cmd_validate, "solve": cmd_solve, "check": cmd_check,
            "reconstruct": cmd_reconstruct, "random": cmd_random}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="exante", description="Optimal ex ante persuasive signaling in "
                                     "sequential games with one or two receivers.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=CHECK_TOL, help="persuasiveness / LP tolerance")
    common.add_argument("--mode", choices=[CUTTING_PLANE, ELLIPSOID, BOTH], default=CUTTING_PLANE)
    common.add_argument("--max-plans", type=int, default=DEFAULT_PLAN_CAP)
    common.add_argument("--max-states", type=int, default=DEFAULT_STATE_CAP)
    common.add_argument("--output", choices=["text", "json"], default="text")
    common.add_argument("--brute-force", action="store_true", help="also solve the explicit LP over all states")
    common.add_argument("--seed", type=int, default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check a game file")
    p.add_argument("input", type=Path)
    p = sub.add_parser("solve", parents=[common], help="optimal ex ante persuasive scheme")
    p.add_argument("input", type=Path)
    p.add_argument("--prior", choices=[EXACT, RECONSTRUCTED], default=EXACT)
    p.add_argument("--scheme-out", type=Path, help="write the scheme file here")
    p = sub.add_parser("check", parents=[common], help="check a scheme against a game or instance")
    p.add_argument("input", type=Path)
    p.add_argument("scheme", type=Path)
    p.add_argument("--which", choices=["ex_ante", "ex_interim", BOTH], default=BOTH)
    p = sub.add_parser("reconstruct", parents=[common], help="small-support mixed strategy for a player")
    p.add_argument("input", type=Path)
    p.add_argument("--player", type=int, default=1)
    p.add_argument("--strategy", type=Path, help="JSON {infoset: {action: prob}}; uniform if omitted")
    p = sub.add_parser("random", parents=[common], help="print a random game file")
    p.add_argument("--receivers", type=int, choices=[1, 2], default=1)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    fields = {k: v for k, v in vars(args).items() if k in RunConfig.__dataclass_fields__}
    return RunConfig(**fields)


def run(cfg: RunConfig) -> Outcome:
    try:
        return COMMANDS[cfg.command](cfg)
    except ValidationError as err:
        items, lines = _violations(err)
        return Outcome(EXIT_DOMAIN, {"error": "ValidationError", "module": err.module, "violations": items}, lines)
    except InputError as err:
        return _failure(EXIT_INPUT, err, {"line": err.line, "column": err.column})
    except LpError as err:
        return _failure(EXIT_NUMERIC, err)
    except ExanteError as err:
        return _failure(EXIT_DOMAIN, err)


def _failure(code: int, err: ExanteError, extra: dict | None = None) -> Outcome:
    report = {"error": type(err).__name__, "module": err.module, "message": str(err), **(extra or {})}
    return Outcome(code, report, [f"{type(err).__name__} ({err.module}): {err}"])


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    out = run(cfg)
    stream = sys.stdout if out.code == EXIT_OK else sys.stderr
    if cfg.output == "json":
        print(io.dumps(out.report), end="", file=stream)
    else:
        print("\n".join(out.text), file=stream)
    return out.code


if __name__ == "__main__":
    sys.exit(main())
