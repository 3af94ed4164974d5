from logging import WARNING, Logger
from typing import List
import pytest

from plate_regularity.params import SystemParams


class MockedLogger(Logger):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.logs = []

    def _log(self, *args, **kwargs) -> None:
        self.logs.append((args, kwargs))

    def messages(self, level: int = WARNING) -> List[str]:
        return [str(args[1]) for args, _ in self.logs if args[0] >= level]


logger_counter = 0


@pytest.fixture()
def mocked_logger() -> MockedLogger:
    global logger_counter

    logger = MockedLogger(name=f"MockedLogger#{logger_counter}")
    logger_counter += 1

    return logger


def unit_params(theta: float, beta: float, **kwargs: float) -> SystemParams:
    """α = γ = δ = κ = 1 unless overridden"""
    return SystemParams(theta, beta, **kwargs)
