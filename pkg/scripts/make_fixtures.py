"""Regenerate the entrant fixtures in fixtures/ (run from the repository root)."""

from fractions import Fraction
from pathlib import Path

from exante import io
from exante.game import Decision, PayoffRow, RawGame, Terminal

OUT = Path("fixtures")
MARKET = [("E", "3/10"), ("H", "7/10")]


def entrant() -> RawGame:
    # the receiver enters (In), stays out (Out) or takes the outside project (P)
    enter = Terminal((PayoffRow((("In", "E"),), -1, (1,)), PayoffRow((("In", "H"),), -1, (-1,))))
    stay_out = Terminal((PayoffRow((), 1, (0,)),))
    project = Terminal((PayoffRow((("P", "E"),), 0, (Fraction(1, 2),)), PayoffRow((("P", "H"),), 0, (0,))))
    root = Decision(1, "entrant", (("In", enter), ("Out", stay_out), ("P", project)))
    return RawGame((1,), root, {"In": MARKET, "P": MARKET})


def two_receiver_gap() -> RawGame:
    """Receiver 2 moves without seeing receiver 1's choice; obedience after each
    recommendation pins every ex interim scheme to (down, left), while a
    commitment-only constraint lets the sender steer toward (up, mid)."""
    sender = {"up": (1, 2, 2), "down": (0, 2, 2)}
    first = {"up": (0, 2, 2), "down": (1, 3, 1)}
    second = {"up": (2, 3, 2), "down": (1, 0, 0)}
    branches = []
    for a in ("up", "down"):
        leaves = tuple(
            (b, Terminal((PayoffRow((), sender[a][k], (first[a][k], second[a][k])),)))
            for k, b in enumerate(("left", "mid", "right")))
        branches.append((a, Decision(2, "second", leaves)))
    return RawGame((1, 2), Decision(1, "first", tuple(branches)))


def entrant_common() -> dict:
    plans = ["In", "Out", "P"]
    sender = {"E": [-1, 1, 0], "H": [-1, 1, 0]}
    receiver = {"E": [1, 0, 0.5], "H": [-1, 0, 0]}
    return {
        "format": io.INSTANCE_FORMAT,
        "states": [{"name": s, "prob": p} for s, p in MARKET],
        "plans": [plans],
        "u_sender": {s: dict(zip(plans, row)) for s, row in sender.items()},
        "u_receivers": [{s: dict(zip(plans, row)) for s, row in receiver.items()}],
    }


def scheme(rows: dict) -> dict:
    return {"format": io.SCHEME_FORMAT, "rows": [
        {"state": s, "recommendations": [{"plan": [plan], "prob": p} for plan, p in recs.items()]}
        for s, recs in rows.items()]}


def main():
    OUT.mkdir(exist_ok=True)
    (OUT / "entrant.game").write_text(io.dumps(io.game_to_json(entrant())))
    (OUT / "entrant_common.instance").write_text(io.dumps(entrant_common()))
    split = {"In": "1/2", "Out": "1/2"}
    (OUT / "phi_prime.scheme").write_text(io.dumps(scheme({"E": split, "H": {"Out": "1"}})))
    (OUT / "phi_double_prime.scheme").write_text(
        io.dumps(scheme({"E": {"P": "1"}, "H": {"Out": "11/14", "P": "3/14"}})))
    (OUT / "gap_two_receivers.game").write_text(io.dumps(io.game_to_json(two_receiver_gap())))
    # phi' over the product state space of entrant.game: only the type of In matters
    rows = {f"In={a},P={b}": (split if a == "E" else {"Out": "1"}) for a in "EH" for b in "EH"}
    (OUT / "entrant_phi_prime.scheme").write_text(io.dumps(scheme(rows)))


if __name__ == "__main__":
    main()
