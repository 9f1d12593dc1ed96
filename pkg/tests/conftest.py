"""Shared fixtures: compiled bundled scenarios and session factories."""

from __future__ import annotations

import itertools

import pytest

from decoyweaver.scenario import CompiledScenario, compile_runtime, find_scenario
from decoyweaver.sessions import Session, session_id_for


@pytest.fixture(scope="session")
def webshop() -> CompiledScenario:
    return compile_runtime(find_scenario("webshop"))


@pytest.fixture(scope="session")
def ftp_depot() -> CompiledScenario:
    return compile_runtime(find_scenario("ftp-depot"))


@pytest.fixture(scope="session")
def iot_fleet() -> CompiledScenario:
    return compile_runtime(find_scenario("iot-fleet"))


_ip_counter = itertools.count(1)


def make_session(machine: CompiledScenario, ip: str | None = None,
                 opened_at: int = 1_000_000) -> Session:
    ip = ip or f"127.0.9.{next(_ip_counter) % 250 + 1}"
    window = "20260101"
    return Session(
        id=session_id_for(machine.id, window, ip),
        scenario_id=machine.id,
        source_ip=ip,
        window=window,
        opened_at=opened_at,
        current_stage=machine.entry,
    )


class StepClock:
    """Deterministic clock for SessionStore: starts at t0, ticks on demand."""

    def __init__(self, t0: int = 1_750_000_000_000) -> None:
        self.now = t0

    def __call__(self) -> int:
        return self.now

    def tick(self, ms: int) -> int:
        self.now += ms
        return self.now
