"""Exergetic port-Hamiltonian systems: compose, validate and simulate thermodynamic networks."""
from .components import (
    EnvironmentComponent,
    IrreversibleComponent,
    ReversibleComponent,
    StorageComponent,
    validate_component,
    validate_irreversible,
    validate_reversible,
)
from .expr import grad, infer_parity, parse
from .interfaces import Interface, PortAttr, build_layout, sum_interfaces
from .modelfile import Model, load_model, parse_model
from .names import Name, Namespace, Package, named_sum
from .patterns import InterconnectionPattern, make_pattern, substitute, validate_pattern
from .quantities import ReferenceEnvironment, default_environment, standard_registry
from .systems import CompositeSystem, assemble, audit, check_wellformed, flatten, simulate

__version__ = "0.1.0"

__all__ = [
    "CompositeSystem",
    "EnvironmentComponent",
    "Interface",
    "InterconnectionPattern",
    "IrreversibleComponent",
    "Model",
    "Name",
    "Namespace",
    "Package",
    "PortAttr",
    "ReferenceEnvironment",
    "ReversibleComponent",
    "StorageComponent",
    "assemble",
    "audit",
    "build_layout",
    "check_wellformed",
    "default_environment",
    "flatten",
    "grad",
    "infer_parity",
    "load_model",
    "make_pattern",
    "named_sum",
    "parse",
    "parse_model",
    "simulate",
    "standard_registry",
    "substitute",
    "sum_interfaces",
    "validate_component",
    "validate_irreversible",
    "validate_pattern",
    "validate_reversible",
]
