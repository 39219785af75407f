"""Simulation of entanglement-based detectable Byzantine agreement under intercept-resend attacks."""

from .adversary import ALWAYS_X, ALWAYS_Z, AttackBasisPolicy, AttackCase, apply_attack, infer_secret
from .correlators import ALL_KEYS, CorrelatorEstimate, CorrelatorKey, estimate, table1_reference, theoretical
from .detector import DetectorConfig, Status, Verdict, decide
from .protocol import derive_lists, run_agreement, run_distribution, run_protocol, verify_step_iii
from .qengine import (
    Basis,
    Ensemble,
    PauliObservable,
    PureState,
    Qubit,
    apply_uniform_unitary,
    expectation_pair,
    make_psi4,
    measure_qubit,
    project_all,
)
from .records import MeasurementRecord, Party, Trit

__version__ = "0.1.0"

__all__ = [
    "ALL_KEYS",
    "ALWAYS_X",
    "ALWAYS_Z",
    "AttackBasisPolicy",
    "AttackCase",
    "Basis",
    "CorrelatorEstimate",
    "CorrelatorKey",
    "DetectorConfig",
    "Ensemble",
    "MeasurementRecord",
    "Party",
    "PauliObservable",
    "PureState",
    "Qubit",
    "Status",
    "Trit",
    "Verdict",
    "apply_attack",
    "apply_uniform_unitary",
    "decide",
    "derive_lists",
    "estimate",
    "expectation_pair",
    "infer_secret",
    "make_psi4",
    "measure_qubit",
    "project_all",
    "run_agreement",
    "run_distribution",
    "run_protocol",
    "table1_reference",
    "theoretical",
    "verify_step_iii",
]
