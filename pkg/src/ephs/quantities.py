"""Physical quantities, their parities and the exergy reference environment."""
from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from typing import Optional

from .names import Name, NameLike, Package, as_name

ENTROPY = "entropy"


class UnknownQuantity(KeyError):
    def __str__(self) -> str:
        return f"unknown quantity {self.args[0]!r}"


class UnknownRefPort(KeyError):
    def __str__(self) -> str:
        return f"reference environment has no port {self.args[0]}"


class InvalidEnvironment(ValueError):
    """Raised for an ill-formed reference environment."""


@dataclass(frozen=True)
class StateSpace:
    """Real coordinate space of the given dimension."""

    dimension: int = 1

    def __post_init__(self):
        if not isinstance(self.dimension, int) or self.dimension < 1:
            raise ValueError(f"state space dimension must be a positive integer, got {self.dimension!r}")

    def __str__(self) -> str:
        return "R" if self.dimension == 1 else f"R^{self.dimension}"


@dataclass(frozen=True)
class Quantity:
    label: str
    space: StateSpace = StateSpace(1)
    parity: int = 1

    def __post_init__(self):
        if self.parity not in (1, -1):
            raise ValueError(f"parity of {self.label} must be +1 or -1, got {self.parity!r}")

    @property
    def dim(self) -> int:
        return self.space.dimension

    def __str__(self) -> str:
        return self.label


class QuantityRegistry(Mapping):
    """Quantities by label."""

    def __init__(self, quantities: Iterable[Quantity] = ()):
        self._by_label: dict[str, Quantity] = {}
        for q in quantities:
            self.register(q)

    def register(self, q: Quantity) -> Quantity:
        old = self._by_label.get(q.label)
        if old is not None and old != q:
            raise ValueError(f"quantity {q.label} already registered as {old}")
        self._by_label[q.label] = q
        return q

    def __getitem__(self, label: str) -> Quantity:
        try:
            return self._by_label[label]
        except KeyError:
            raise UnknownQuantity(label) from None

    def __iter__(self):
        return iter(self._by_label)

    def __len__(self) -> int:
        return len(self._by_label)

    def copy(self) -> "QuantityRegistry":
        return QuantityRegistry(self._by_label.values())


# Displacement, entropy, volume, charge and mass are unchanged under time
# reversal; momentum-like quantities and flux linkage flip sign.
STANDARD_QUANTITIES = (
    Quantity("displacement", parity=+1),
    Quantity("momentum", parity=-1),
    Quantity("entropy", parity=+1),
    Quantity("volume", parity=+1),
    Quantity("charge", parity=+1),
    Quantity("flux_linkage", parity=-1),
    Quantity("angular_momentum", parity=-1),
    Quantity("mass", parity=+1),
)


def standard_registry() -> QuantityRegistry:
    return QuantityRegistry(STANDARD_QUANTITIES)


THETA0 = 298.15  # K
PI0 = 101325.0  # Pa, i.e. 1013.25 hPa


@dataclass(frozen=True)
class EnvPort:
    quantity: Quantity
    value: float


class ReferenceEnvironment:
    """Fixed intensive values of the surroundings, one per extensive quantity.

    Every port is a power port over a one-dimensional quantity, no quantity
    appears twice and an entropy port with positive temperature is required.
    """

    def __init__(self, ports: Mapping[NameLike, EnvPort]):
        self.ports: Package = Package(ports)
        seen: dict[str, Name] = {}
        for name, port in self.ports.items():
            q = port.quantity
            if q.dim != 1:
                raise InvalidEnvironment(f"environment port {name} must be one-dimensional, {q.label} is {q.space}")
            if q.label in seen:
                raise InvalidEnvironment(f"quantity {q.label} appears at both {seen[q.label]} and {name}")
            seen[q.label] = name
        self._by_label = seen
        if ENTROPY not in seen:
            raise InvalidEnvironment("reference environment needs an entropy port")
        if not self.ports[seen[ENTROPY]].value > 0:
            raise InvalidEnvironment("reference temperature must be positive")

    @property
    def theta0(self) -> float:
        return self.ports[self._by_label[ENTROPY]].value

    @property
    def entropy_port(self) -> Name:
        return self._by_label[ENTROPY]

    def port_for(self, quantity: Quantity) -> Optional[Name]:
        name = self._by_label.get(quantity.label)
        if name is not None and self.ports[name].quantity == quantity:
            return name
        return None

    def interface(self):
        from .interfaces import Interface, PortAttr

        return Interface((n, PortAttr(p.quantity, "power")) for n, p in self.ports.items())

    def bindings(self) -> dict[str, float]:
        """Symbols usable in component expressions: ``theta0`` and ``env.<port>``."""
        out = {"theta0": self.theta0}
        for n, p in self.ports.items():
            out["env." + str(n)] = p.value
        return out

    def with_values(self, values: Mapping[NameLike, float]) -> "ReferenceEnvironment":
        ports = dict(self.ports.items())
        for k, v in values.items():
            k = as_name(k)
            if k not in ports:
                raise UnknownRefPort(k)
            ports[k] = EnvPort(ports[k].quantity, float(v))
        return ReferenceEnvironment(ports)

    def __eq__(self, other) -> bool:
        return isinstance(other, ReferenceEnvironment) and self.ports == other.ports

    def __repr__(self) -> str:
        body = ", ".join(f"{n}: {p.quantity.label}={p.value}" for n, p in self.ports.items())
        return f"ReferenceEnvironment({body})"


def default_environment(registry: Optional[QuantityRegistry] = None) -> ReferenceEnvironment:
    """Isothermal, isobaric surroundings at 298.15 K and 1013.25 hPa."""
    registry = registry or standard_registry()
    return ReferenceEnvironment({
        "s": EnvPort(registry["entropy"], THETA0),
        "v": EnvPort(registry["volume"], -PI0),
    })


def lambda_of(env: ReferenceEnvironment, quantity: Quantity, ref_port: Optional[NameLike] = None) -> float:
    """Intensive reference value conjugate to ``quantity``, or 0 if none.

    With ``ref_port`` only that environment port is considered.
    """
    if ref_port is not None:
        ref_port = as_name(ref_port)
        if ref_port not in env.ports:
            raise UnknownRefPort(ref_port)
        port = env.ports[ref_port]
        return port.value if port.quantity == quantity else 0.0
    name = env.port_for(quantity)
    return env.ports[name].value if name is not None else 0.0
