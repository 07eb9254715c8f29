from pathlib import Path

import pytest

from exante import io
from exante.game import Decision, PayoffRow, RawGame, Terminal, validate

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def leaf(sender=0, *receivers):
    return Terminal((PayoffRow((), sender, tuple(receivers) or (0,)),))


def two_level_raw() -> RawGame:
    """I1: a, b; after a the same player meets I2: c, d."""
    inner = Decision(1, "I2", (("c", leaf()), ("d", leaf())))
    return RawGame((1,), Decision(1, "I1", (("a", inner), ("b", leaf()))))


def single_infoset_raw() -> RawGame:
    return RawGame((1,), Decision(1, "I", (("x", leaf()), ("y", leaf()), ("z", leaf()))))


def load_game(name: str):
    return validate(io.parse_game((FIXTURES / name).read_text()).raw)


@pytest.fixture
def two_level():
    return validate(two_level_raw())


@pytest.fixture
def entrant():
    return load_game("entrant.game")


@pytest.fixture
def fixtures_dir():
    return FIXTURES


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
