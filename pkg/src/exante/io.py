"""Reading and writing game, instance and scheme files (UTF-8 JSON).

Every parse error carries the line and column of the offending JSON value.
Joint plans in instance tables are keyed by the receivers' plan names joined
with ``|``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping

import numpy as np

from .errors import InputError, ValidationError, Violation
from .game import Decision, PayoffRow, RawGame, Terminal, ValidatedGame, to_fraction
from .verifier import MatrixInstance

GAME_FORMAT = "ea-persuasion-game/1"
INSTANCE_FORMAT = "ea-persuasion-instance/1"
SCHEME_FORMAT = "ea-persuasion-scheme/1"
JOINT_SEP = "|"

_decoder = json.JSONDecoder()
_WS = " \t\n\r"


def value_offsets(text: str) -> dict[str, int]:
    """JSON pointer -> character offset of every value in a well-formed document."""
    out: dict[str, int] = {}

    def skip(pos: int) -> int:
        while pos < len(text) and text[pos] in _WS:
            pos += 1
        return pos

    def walk(pos: int, pointer: str) -> int:
        pos = skip(pos)
        out[pointer] = pos
        if text[pos] == "{":
            pos = skip(pos + 1)
            if text[pos] == "}":
                return pos + 1
            while True:
                key, pos = json.decoder.scanstring(text, skip(pos) + 1)
                pos = skip(pos) + 1  # ':'
                pos = skip(walk(pos, f"{pointer}/{key.replace('~', '~0').replace('/', '~1')}"))
                if text[pos] == "}":
                    return pos + 1
                pos += 1  # ','
        if text[pos] == "[":
            pos = skip(pos + 1)
            if text[pos] == "]":
                return pos + 1
            k = 0
            while True:
                pos = skip(walk(pos, f"{pointer}/{k}"))
                k += 1
                if text[pos] == "]":
                    return pos + 1
                pos += 1
        _, end = _decoder.raw_decode(text, pos)
        return end

    walk(0, "")
    return out


@dataclass
class Document:
    """Parsed JSON with a way back from pointers to file positions."""

    data: Any
    text: str
    _offsets: dict[str, int] | None = field(default=None, repr=False)

    def position(self, pointer: str) -> tuple[int, int]:
        if self._offsets is None:
            self._offsets = value_offsets(self.text)
        offset = self._offsets.get(pointer, 0)
        line = self.text.count("\n", 0, offset) + 1
        return line, offset - (self.text.rfind("\n", 0, offset) + 1) + 1

    def error(self, message: str, pointer: str) -> InputError:
        line, col = self.position(pointer)
        return InputError(f"{message} at {pointer or '/'}", line, col)


def load_document(text: str, expected_format: str) -> Document:
    if not text.strip():
        raise InputError("MalformedTree: empty input file", 1, 1)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise InputError(f"invalid JSON: {err.msg}", err.lineno, err.colno) from None
    doc = Document(data, text)
    if not isinstance(data, dict):
        raise doc.error("top level must be an object", "")
    if data.get("format") != expected_format:
        raise doc.error(f"expected format {expected_format!r}, got {data.get('format')!r}", "/format")
    return doc


def _get(doc: Document, obj, key: str, pointer: str, kind):
    if not isinstance(obj, dict) or key not in obj:
        raise doc.error(f"missing field {key!r}", pointer)
    value = obj[key]
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise doc.error(f"field {key!r} has the wrong type", f"{pointer}/{key}")
    return value


def _number(doc: Document, value, pointer: str) -> Fraction:
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise doc.error("expected a number", pointer)
    try:
        return to_fraction(value)
    except (ValueError, ZeroDivisionError):
        raise doc.error(f"not a number: {value!r}", pointer) from None


def _plain(x: Fraction):
    """int, exact float, or rational string -- whichever keeps the value exact."""
    if x.denominator == 1:
        return int(x.numerator)
    f = float(x)
    return f if Fraction(f) == x else f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class ParsedGame:
    raw: RawGame
    doc: Document
    # violation subject (action, infoset or terminal path) -> JSON pointer
    pointers: Mapping[str, str]

    def locate(self, violation: Violation) -> tuple[int, int] | None:
        pointer = self.pointers.get(violation.subject) if violation.subject else None
        return self.doc.position(pointer) if pointer is not None else None


def parse_game(text: str) -> ParsedGame:
    doc = load_document(text, GAME_FORMAT)
    data = doc.data
    receivers = _get(doc, data, "receivers", "", list)
    for k, r in enumerate(receivers):
        if isinstance(r, bool) or not isinstance(r, int):
            raise doc.error("receiver ids must be integers", f"/receivers/{k}")
    pointers: dict[str, str] = {}
    marginals: dict[str, list] = {}
    conflicts: list[Violation] = []

    def node(obj, pointer: str, path: tuple[str, ...]):
        kind = _get(doc, obj, "kind", pointer, str)
        if kind == "terminal":
            pointers.setdefault("/".join(path) or "<root>", pointer)
            rows = []
            for k, row in enumerate(_get(doc, obj, "payoffs", pointer, list)):
                rp = f"{pointer}/payoffs/{k}"
                when = row.get("when", {}) if isinstance(row, dict) else None
                if not isinstance(when, dict) or not all(isinstance(v, str) for v in when.values()):
                    raise doc.error("'when' must map action ids to type ids", f"{rp}/when")
                utils = _get(doc, row, "receivers", rp, list)
                rows.append(PayoffRow(
                    tuple(sorted(when.items())),
                    _number(doc, row.get("sender"), f"{rp}/sender"),
                    tuple(_number(doc, u, f"{rp}/receivers/{j}") for j, u in enumerate(utils)),
                ))
            return Terminal(tuple(rows))
        if kind != "decision":
            raise doc.error(f"unknown node kind {kind!r}", f"{pointer}/kind")
        player = _get(doc, obj, "player", pointer, int)
        infoset = _get(doc, obj, "infoset", pointer, str)
        pointers.setdefault(infoset, pointer)
        children = []
        for k, act in enumerate(_get(doc, obj, "actions", pointer, list)):
            ap = f"{pointer}/actions/{k}"
            name = _get(doc, act, "name", ap, str)
            pointers.setdefault(name, ap)
            if "types" in act:
                types = _get(doc, act, "types", ap, list)
                dist = []
                for j, t in enumerate(types):
                    tname = _get(doc, t, "name", f"{ap}/types/{j}", str)
                    prob = t.get("prob") if isinstance(t, dict) else None
                    if not isinstance(prob, (str, int, float)) or isinstance(prob, bool):
                        raise doc.error("type probability must be a string or number", f"{ap}/types/{j}")
                    dist.append((tname, prob))
                if name in marginals and marginals[name] != dist:
                    conflicts.append(Violation("InfosetMismatch", f"action {name!r} typed twice differently", name))
                marginals.setdefault(name, dist)
                pointers[name] = f"{ap}/types"
            children.append((name, node(_get(doc, act, "child", ap, dict), f"{ap}/child", path + (name,))))
        return Decision(player, infoset, tuple(children))

    root = node(_get(doc, data, "root", "", dict), "/root", ())
    parsed = ParsedGame(RawGame(tuple(receivers), root, marginals), doc, pointers)
    if conflicts:
        raise ValidationError(conflicts)
    return parsed


def game_to_json(game: RawGame | ValidatedGame) -> dict:
    def node(n):
        if isinstance(n, Terminal):
            return {"kind": "terminal", "payoffs": [
                {"when": dict(r.when), "sender": _plain(to_fraction(r.sender)),
                 "receivers": [_plain(to_fraction(u)) for u in r.receivers]}
                for r in n.payoffs]}
        actions = []
        for a, child in n.actions:
            entry: dict = {"name": a}
            if a in game.marginals:
                entry["types"] = [{"name": t, "prob": str(to_fraction(p))} for t, p in game.marginals[a]]
            entry["child"] = node(child)
            actions.append(entry)
        return {"kind": "decision", "player": n.player, "infoset": n.infoset, "actions": actions}

    return {"format": GAME_FORMAT, "receivers": list(game.receivers), "root": node(game.root)}


def parse_instance(text: str) -> MatrixInstance:
    doc = load_document(text, INSTANCE_FORMAT)
    data = doc.data
    states, probs = [], []
    for k, s in enumerate(_get(doc, data, "states", "", list)):
        states.append(_get(doc, s, "name", f"/states/{k}", str))
        probs.append(_number(doc, s.get("prob"), f"/states/{k}/prob"))
    if len(set(states)) != len(states):
        raise doc.error("state names repeat", "/states")
    if sum(probs) != 1 or any(p < 0 for p in probs):
        raise doc.error(f"ProbabilitySum: state probabilities sum to {sum(probs)}", "/states")
    plans = _get(doc, data, "plans", "", list)
    if not 1 <= len(plans) <= 2:
        raise doc.error("one or two receivers expected", "/plans")
    for i, ps in enumerate(plans):
        if not isinstance(ps, list) or not ps or not all(isinstance(p, str) for p in ps) or len(set(ps)) != len(ps):
            raise doc.error("plan names must be distinct strings", f"/plans/{i}")
    shape = (len(states),) + tuple(len(ps) for ps in plans)
    joint = [JOINT_SEP.join(c) for c in itertools.product(*plans)]

    def table(obj, pointer: str) -> np.ndarray:
        if not isinstance(obj, dict):
            raise doc.error("table must be an object keyed by state", pointer)
        out = np.zeros(shape)
        for s, name in enumerate(states):
            row = obj.get(name)
            if not isinstance(row, dict):
                raise doc.error(f"table has no row for state {name!r}", pointer)
            extra = set(row) - set(joint)
            if extra:
                raise doc.error(f"unknown joint plan {sorted(extra)[0]!r}", f"{pointer}/{name}")
            for flat, key in enumerate(joint):
                if key not in row:
                    raise doc.error(f"missing entry for joint plan {key!r}", f"{pointer}/{name}")
                out[(s,) + np.unravel_index(flat, shape[1:])] = float(_number(doc, row[key], f"{pointer}/{name}/{key}"))
        return out

    utils = _get(doc, data, "u_receivers", "", list)
    if len(utils) != len(plans):
        raise doc.error("one utility table per receiver expected", "/u_receivers")
    return MatrixInstance(
        states=tuple(states),
        prior=np.array([float(p) for p in probs]),
        plans=tuple(tuple(ps) for ps in plans),
        sender=table(data.get("u_sender"), "/u_sender"),
        receivers=tuple(table(u, f"/u_receivers/{i}") for i, u in enumerate(utils)),
    )


def instance_to_json(m: MatrixInstance, probs: list | None = None) -> dict:
    def table(u):
        return {s: {JOINT_SEP.join(m.joint_label(j)): _plain(Fraction(repr(float(u[(k,) + j]))))
                    for j in m.joint_plans()} for k, s in enumerate(m.states)}

    probs = probs or [str(to_fraction(float(p))) for p in m.prior]
    return {"format": INSTANCE_FORMAT,
            "states": [{"name": s, "prob": p} for s, p in zip(m.states, probs)],
            "plans": [list(ps) for ps in m.plans],
            "u_sender": table(m.sender),
            "u_receivers": [table(u) for u in m.receivers]}


def parse_scheme(text: str) -> dict[str, dict[tuple[str, ...], float]]:
    """``{state: {joint plan: prob}}``; names are checked against an instance later."""
    doc = load_document(text, SCHEME_FORMAT)
    rows: dict[str, dict[tuple[str, ...], float]] = {}
    for k, row in enumerate(_get(doc, doc.data, "rows", "", list)):
        rp = f"/rows/{k}"
        state = _get(doc, row, "state", rp, str)
        if state in rows:
            raise doc.error(f"state {state!r} has two rows", rp)
        out: dict[tuple[str, ...], float] = {}
        for j, rec in enumerate(_get(doc, row, "recommendations", rp, list)):
            plan = _get(doc, rec, "plan", f"{rp}/recommendations/{j}", list)
            if not all(isinstance(p, str) for p in plan):
                raise doc.error("plan must list one plan name per receiver", f"{rp}/recommendations/{j}/plan")
            key = tuple(plan)
            out[key] = out.get(key, 0.0) + float(_number(doc, rec.get("prob"), f"{rp}/recommendations/{j}/prob"))
        rows[state] = out
    return rows


def scheme_to_json(rows: Mapping[str, Mapping[tuple[str, ...], float]]) -> dict:
    return {"format": SCHEME_FORMAT, "rows": [
        {"state": s, "recommendations": [{"plan": list(j), "prob": repr(float(p))} for j, p in row.items()]}
        for s, row in rows.items()]}


def dumps(obj) -> str:
    """Indented JSON with a trailing newline; insertion order is kept, so output is deterministic."""
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"
