"""Heisenberg groups as an AAG platform, with the memory length-based attack."""

from .attack import (
    AttackConfig,
    AttackResult,
    BeamEntry,
    Budget,
    CapturedInstance,
    attack,
    expand,
    verify_result,
)
from .group import Element, GroupParams
from .harness import ExperimentConfig, run_batch, run_grid, trend_report
from .protocol import PrivateKey, PublicSet, Session, run_session

__all__ = [
    "AttackConfig",
    "AttackResult",
    "BeamEntry",
    "Budget",
    "CapturedInstance",
    "Element",
    "ExperimentConfig",
    "GroupParams",
    "PrivateKey",
    "PublicSet",
    "Session",
    "attack",
    "expand",
    "run_batch",
    "run_grid",
    "run_session",
    "trend_report",
    "verify_result",
]
