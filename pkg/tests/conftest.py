"""Shared fixtures and the suite-wide network guard.

The guard blocks every non-loopback socket connection for the entire run, so
a green suite doubles as the offline guarantee; loopback stays open for the
scripted-server and HTTP API tests.
"""

from __future__ import annotations

import ipaddress
import socket
from contextlib import contextmanager
from pathlib import Path

import pytest
from hypothesis import settings

from srkit.mesh import MeshKb, ingest_descriptors
from srkit.pipeline import PipelineConfig

settings.register_profile("ci", deadline=None, derandomize=True)
settings.load_profile("ci")

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "fixtures"

_REAL_CONNECT = socket.socket.connect
_REAL_CONNECT_EX = socket.socket.connect_ex


class NetworkBlockedError(RuntimeError):
    pass


def _is_loopback(sock: socket.socket, address) -> bool:
    if sock.family not in (socket.AF_INET, socket.AF_INET6):
        return True  # unix domain sockets etc.
    host = address[0]
    if isinstance(host, bytes):
        host = host.decode("ascii", "replace")
    if host == "localhost":
        return True
    try:
        return ipaddress.ip_address(host).is_loopback
    except ValueError:
        return False


def _guarded_connect(self, address):
    if not _is_loopback(self, address):
        raise NetworkBlockedError(f"non-loopback connection attempted: {address!r}")
    return _REAL_CONNECT(self, address)


def _guarded_connect_ex(self, address):
    if not _is_loopback(self, address):
        raise NetworkBlockedError(f"non-loopback connection attempted: {address!r}")
    return _REAL_CONNECT_EX(self, address)


@pytest.fixture(scope="session", autouse=True)
def socket_guard():
    """Networking disabled (loopback excepted) for the whole suite."""
    socket.socket.connect = _guarded_connect
    socket.socket.connect_ex = _guarded_connect_ex
    yield
    socket.socket.connect = _REAL_CONNECT
    socket.socket.connect_ex = _REAL_CONNECT_EX


@contextmanager
def no_sockets_at_all():
    """Stricter: any connect, loopback included, fails. For replay tests."""

    def deny(self, address):
        raise NetworkBlockedError(f"socket use forbidden here: {address!r}")

    socket.socket.connect = deny
    socket.socket.connect_ex = deny
    try:
        yield
    finally:
        socket.socket.connect = _guarded_connect
        socket.socket.connect_ex = _guarded_connect_ex


@pytest.fixture(scope="session")
def core_kb() -> MeshKb:
    return ingest_descriptors(FIXTURES / "mesh_core.tsv")


@pytest.fixture()
def golden_config(tmp_path) -> PipelineConfig:
    return PipelineConfig(
        kb_source=str(FIXTURES / "mesh_core.tsv"),
        provider="replay",
        cassette_path=str(FIXTURES / "cassettes" / "golden.jsonl"),
        pubmed_mode="fixture",
        corpus_path=str(FIXTURES / "corpus.jsonl"),
        sessions_dir=str(tmp_path / "sessions"),
        model_id="golden-chat",
    )


GOLDEN_QUESTION = "What are the causes of Hepatitis A?"
SENTINEL_PMIDS = {"90000001", "90000002", "90000003", "90000004", "90000005"}


def canonical_session(payload: dict) -> dict:
    """Strip run-specific identity so two runs can be compared byte-wise."""
    clean = dict(payload)
    clean["session_id"] = None
    clean["created_at"] = None
    if clean.get("feedback"):
        clean["feedback"] = [
            {**event, "timestamp": None} for event in clean["feedback"]
        ]
    return clean
