"""Shared fixtures: random open-system models and the acceptance report."""
from __future__ import annotations

import numpy as np
import pytest

from collective_qo.hilbert import Operator, SpaceDescriptor
from collective_qo.models import Channel, SystemModel

_REPORT: list[tuple[str, str, str]] = []


def random_model(rng: np.random.Generator, dims=(2, 2), n_channels: int = 3) -> SystemModel:
    """Random Hermitian Hamiltonian plus positive-rate diagonal channels."""
    space = SpaceDescriptor(tuple(dims))
    d = space.dim
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    H = Operator(space, 0.5 * (A + A.conj().T))
    ch = []
    for k in range(n_channels):
        L = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        L /= np.linalg.norm(L, 2)
        ch.append(Channel(L, L, float(rng.uniform(0.2, 2.0)), None, f"c{k}"))
    return SystemModel(space, H, ch, {})


def random_state(rng: np.random.Generator, d: int) -> np.ndarray:
    G = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    r = G @ G.conj().T
    return r / np.trace(r).real


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def report():
    """Record one line per acceptance check; printed in the terminal summary."""

    def add(crit: str, ok: bool | str, detail: str):
        status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
        _REPORT.append((crit, status, detail))
        print(f"[{status}] {crit}: {detail}")

    return add


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    crits: dict[str, list] = {}
    for crit, status, detail in _REPORT:
        crits.setdefault(crit, []).append((status, detail))
    for crit in sorted(crits, key=lambda c: int(c.split()[-1])):
        checks = crits[crit]
        statuses = {s for s, _ in checks}
        if "FAIL" in statuses:
            verdict = "FAIL"
        elif "XFAIL" in statuses:
            verdict = "PASS*"
        else:
            verdict = "PASS"
        terminalreporter.write_line(f"{verdict:6s} {crit}: " + "; ".join(f"{d} [{s}]" for s, d in checks))
    if any(s == "XFAIL" for _, s, _ in _REPORT):
        terminalreporter.write_line("PASS* = all checks pass except documented deviations (strict xfail)")
