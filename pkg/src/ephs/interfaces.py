"""Interfaces (packages of port attributes) and their coordinate layouts."""
from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from typing import Optional

from .names import Name, Package, named_sum
from .quantities import Quantity, QuantityRegistry, UnknownQuantity

POWER = "power"
STATE = "state"


@dataclass(frozen=True)
class PortAttr:
    quantity: Quantity
    kind: str = POWER

    def __post_init__(self):
        if self.kind not in (POWER, STATE):
            raise ValueError(f"port kind must be 'power' or 'state', got {self.kind!r}")

    @property
    def is_power(self) -> bool:
        return self.kind == POWER

    @property
    def dim(self) -> int:
        return self.quantity.dim

    def __str__(self) -> str:
        return f"{self.quantity.label} {self.kind}"


class Interface(Package):
    """A package of :class:`PortAttr`."""

    __slots__ = ()

    @property
    def power_ports(self) -> list[Name]:
        return [n for n, a in self.items() if a.is_power]

    @property
    def state_ports(self) -> list[Name]:
        return [n for n, a in self.items() if not a.is_power]


def sum_interfaces(parts: Mapping) -> Interface:
    return Interface(named_sum(parts).items())


def is_subinterface(a: Interface, b: Interface) -> bool:
    return all(n in b and b[n] == attr for n, attr in a.items())


@dataclass(frozen=True)
class PortLayout:
    """Offsets of each port into the flat state vector ``x`` and into the
    flow/effort vectors ``f`` and ``e`` (power ports only)."""

    x_slices: dict
    fe_slices: dict
    dim_x: int
    dim_fe: int

    def x_of(self, vec, port):
        return vec[self.x_slices[port]]

    def fe_of(self, vec, port):
        return vec[self.fe_slices[port]]


def build_layout(iface: Interface, registry: Optional[QuantityRegistry] = None) -> PortLayout:
    x_slices, fe_slices = {}, {}
    nx = nfe = 0
    for name, attr in iface.items():
        if registry is not None and registry.get(attr.quantity.label) != attr.quantity:
            raise UnknownQuantity(attr.quantity.label)
        d = attr.dim
        x_slices[name] = slice(nx, nx + d)
        nx += d
        if attr.is_power:
            fe_slices[name] = slice(nfe, nfe + d)
            nfe += d
    return PortLayout(x_slices, fe_slices, nx, nfe)
