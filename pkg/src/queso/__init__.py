"""Rewrite-rule synthesis with polynomial identity filtering, and rule-driven circuit optimization."""
__version__ = "0.1.0"

from .circuit import Circuit, GateInstance, canonical_hash, emit_qasm, parse_qasm
from .field import FieldElement
from .gateset import Gateset, builtin, load_gateset
from .optimizer import BeamConfig, DeviceModel, apply_max, cost, fidelity, max_beam
from .synthesizer import RewriteRule, SynthConfig, load_rules, save_rules, synth_eq, synthesize
from .verifier import Pif, pit_check, reverify_classes

__all__ = [
    "BeamConfig", "Circuit", "DeviceModel", "FieldElement", "GateInstance", "Gateset", "Pif", "RewriteRule",
    "SynthConfig", "apply_max", "builtin", "canonical_hash", "cost", "emit_qasm", "fidelity", "load_gateset",
    "load_rules", "max_beam", "parse_qasm", "pit_check", "reverify_classes", "save_rules", "synth_eq",
    "synthesize",
]
