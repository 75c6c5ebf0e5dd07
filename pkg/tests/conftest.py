import pytest

from motifgae.generators import GeneratorParams


@pytest.fixture
def params():
    return GeneratorParams()


def quiet(params: GeneratorParams) -> GeneratorParams:
    """Params with every noise probability forced to zero."""
    return params.with_overrides({
        "collector.noise_prob": 0, "sink.noise_prob": 0, "collusion.noise_prob": 0,
        "sg.noise_prob": 0, "gs.noise_prob": 0, "cyclic.noise_prob": 0,
    })


@pytest.fixture
def quiet_params(params):
    return quiet(params)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
