"""Interconnection patterns: validity, substitution and junction semantics.

A pattern has inner boxes (a package of interfaces), an outer interface and a
partition of all ports into junctions.  Ports are addressed in the combined
namespace, so ``inner.spring.q`` is port ``q`` of box ``spring`` and
``outer.p`` is the outer port ``p``.
"""
from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .interfaces import Interface, PortAttr, sum_interfaces
from .names import Name, NameLike, Package, as_name, concat

INNER = Name(["inner"])
OUTER = Name(["outer"])


class PatternError(ValueError):
    pass


class NotAPartition(PatternError):
    pass


class NoInnerPort(PatternError):
    def __init__(self, junction):
        self.junction = junction
        super().__init__(f"junction {_fmt(junction)} has no inner port")


class MultipleOuterPorts(PatternError):
    def __init__(self, junction):
        self.junction = junction
        super().__init__(f"junction {_fmt(junction)} has more than one outer port")


class QuantityMismatch(PatternError):
    def __init__(self, junction, ports):
        self.junction = junction
        self.ports = ports
        desc = ", ".join(f"{display(p)}: {q}" for p, q in ports)
        super().__init__(f"junction {_fmt(junction)} mixes quantities ({desc})")


class UnknownBox(PatternError, KeyError):
    def __str__(self):
        return f"unknown box {self.args[0]}"


class UnknownPort(PatternError, KeyError):
    def __str__(self):
        return f"unknown port {self.args[0]}"


class InterfaceMismatch(PatternError):
    def __init__(self, port, expected, found):
        self.port, self.expected, self.found = port, expected, found
        super().__init__(f"interface mismatch at port {port}: expected {expected}, found {found}")


def display(port: Name) -> str:
    """Port name without the inner/outer prefix."""
    return str(port.tail)


def _fmt(junction) -> str:
    return "{" + ", ".join(display(p) for p in sorted(junction)) + "}"


def inner_port(box: NameLike, port: NameLike) -> Name:
    return concat(concat(INNER, as_name(box)), as_name(port))


def outer_port(port: NameLike) -> Name:
    return concat(OUTER, as_name(port))


@dataclass(frozen=True)
class InterconnectionPattern:
    """Construct through :func:`make_pattern` or :func:`validate_pattern`."""

    inner: Package
    outer: Interface
    junctions: tuple

    @property
    def inner_interface(self) -> Interface:
        return sum_interfaces(self.inner)

    @property
    def ports(self) -> Interface:
        """All ports in the combined namespace."""
        return sum_interfaces(Package({INNER: self.inner_interface, OUTER: self.outer}))

    def attr(self, port: Name) -> PortAttr:
        if port[0] == "inner":
            for box, iface in self.inner.items():
                if port[1 : 1 + len(box)] == tuple(box):
                    return iface[Name(port[1 + len(box) :])]
            raise UnknownPort(port)
        return self.outer[port.tail]

    def box_of(self, port: Name) -> Optional[Name]:
        if port[0] != "inner":
            return None
        for box in self.inner:
            if port[1 : 1 + len(box)] == tuple(box):
                return box
        raise UnknownPort(port)

    def junction_of(self, port: NameLike) -> frozenset:
        port = as_name(port)
        for j in self.junctions:
            if port in j:
                return j
        raise UnknownPort(port)

    def partition(self) -> frozenset:
        return frozenset(self.junctions)


def junction_id(junction: Iterable[Name]) -> str:
    return display(min(junction))


def resolve_port(inner: Mapping, outer: Interface, ref: NameLike) -> Name:
    """Resolve a junction member written without the inner/outer prefix."""
    ref = as_name(ref)
    if ref and ref[0] in ("inner", "outer"):
        return ref
    candidates = []
    for box, iface in inner.items():
        if ref[: len(box)] == tuple(box) and Name(ref[len(box) :]) in iface:
            candidates.append(concat(INNER, ref))
    if ref in outer:
        candidates.append(concat(OUTER, ref))
    if not candidates:
        raise UnknownPort(ref)
    if len(candidates) > 1:
        raise PatternError(f"port {ref} is ambiguous; write inner.{ref} or outer.{ref}")
    return candidates[0]


def make_pattern(inner: Mapping, outer: Mapping, junctions: Iterable[Iterable[NameLike]]) -> InterconnectionPattern:
    inner = Package((b, i if isinstance(i, Interface) else Interface(i)) for b, i in inner.items())
    outer = outer if isinstance(outer, Interface) else Interface(outer)
    js = [frozenset(resolve_port(inner, outer, r) for r in j) for j in junctions]
    return validate_pattern(InterconnectionPattern(inner, outer, _sorted_junctions(js)))


def _sorted_junctions(js) -> tuple:
    return tuple(sorted((frozenset(j) for j in js), key=lambda j: min(j) if j else Name()))


def validate_pattern(candidate: InterconnectionPattern) -> InterconnectionPattern:
    ports = candidate.ports
    seen: dict = {}
    for j in candidate.junctions:
        if not j:
            raise NotAPartition("empty junction")
        for p in j:
            if p not in ports:
                raise UnknownPort(p)
            if p in seen:
                raise NotAPartition(f"port {display(p)} appears in more than one junction")
            seen[p] = j
    missing = [p for p in ports if p not in seen]
    if missing:
        raise NotAPartition("ports not attached to any junction: " + ", ".join(display(p) for p in missing))
    for j in candidate.junctions:
        if not any(p[0] == "inner" for p in j):
            raise NoInnerPort(j)
        if sum(p[0] == "outer" for p in j) > 1:
            raise MultipleOuterPorts(j)
        quantities = {ports[p].quantity for p in j}
        if len(quantities) > 1:
            raise QuantityMismatch(j, sorted((p, ports[p].quantity.label) for p in j))
    return InterconnectionPattern(candidate.inner, candidate.outer, _sorted_junctions(candidate.junctions))


class _UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def substitute(
    host: InterconnectionPattern,
    box: NameLike,
    guest: InterconnectionPattern,
    renaming: Optional[Mapping[NameLike, NameLike]] = None,
) -> InterconnectionPattern:
    """Fill inner box ``box`` of ``host`` with ``guest``.

    ``renaming`` maps guest outer ports to ports of the host box (identity
    when omitted).  The box interface disappears and, for each of its ports,
    the host junction and the guest junction it was attached to are merged.
    """
    box = as_name(box)
    if box not in host.inner:
        raise UnknownBox(box)
    box_iface: Interface = host.inner[box]
    rename = {as_name(k): as_name(v) for k, v in (renaming or {}).items()}
    mapped = {o: rename.get(o, o) for o in guest.outer}
    for o, h in mapped.items():
        if h not in box_iface:
            raise InterfaceMismatch(h, None, guest.outer[o])
        if box_iface[h] != guest.outer[o]:
            raise InterfaceMismatch(h, box_iface[h], guest.outer[o])
    hit = set(mapped.values())
    for h, attr in box_iface.items():
        if h not in hit:
            raise InterfaceMismatch(h, attr, None)
    if len(hit) != len(mapped):
        raise PatternError("renaming of guest outer ports is not injective")

    inner = {b: i for b, i in host.inner.items() if b != box}
    for b, iface in guest.inner.items():
        inner[concat(box, b)] = iface

    def lift(p: Name) -> Name:
        # guest inner port -> host-level inner port
        return concat(concat(INNER, box), p.tail)

    uf = _UnionFind()
    boundary = {outer_port(o): inner_port(box, h) for o, h in mapped.items()}
    for j in host.junctions:
        members = sorted(j)
        for p in members:
            uf.find(p)
        for p in members[1:]:
            uf.union(members[0], p)
    for j in guest.junctions:
        members = [boundary[p] if p in boundary else lift(p) for p in j]
        for p in members:
            uf.find(p)
        for p in members[1:]:
            uf.union(members[0], p)

    removed = set(boundary.values())
    groups: dict = {}
    for p in uf.parent:
        if p in removed:
            continue
        groups.setdefault(uf.find(p), set()).add(p)
    return validate_pattern(InterconnectionPattern(Package(inner), host.outer, _sorted_junctions(groups.values())))


# --- semantics ---------------------------------------------------------------

@dataclass(frozen=True)
class Junction:
    id: str
    members: frozenset
    quantity: object
    dim: int
    inner_power: tuple
    outer_power: tuple
    state_members: tuple

    @property
    def power_members(self) -> tuple:
        return self.inner_power + self.outer_power

    def equations(self) -> list[str]:
        lines = []
        names = [display(p) for p in self.state_members]
        if len(names) > 1:
            lines.append(" = ".join(f"{n}.x" for n in names))
        power = [display(p) for p in self.power_members]
        if len(power) > 1:
            lines.append(" = ".join(f"{n}.e" for n in power))
        if power:
            lhs = " + ".join(f"{display(p)}.f" for p in self.inner_power) or "0"
            rhs = " + ".join(f"{display(p)}.f" for p in self.outer_power) or "0"
            lines.append(f"{lhs} = {rhs}")
        return lines


@dataclass(frozen=True)
class JunctionRelation:
    junctions: tuple

    def equations(self) -> list[str]:
        return [line for j in self.junctions for line in j.equations()]

    def power_residuals(self, efforts: Mapping, flows: Mapping) -> np.ndarray:
        """Per junction, inner minus outer power for the given port variables."""
        out = []
        for j in self.junctions:
            p_in = sum(float(np.dot(efforts[p], flows[p])) for p in j.inner_power)
            p_out = sum(float(np.dot(efforts[p], flows[p])) for p in j.outer_power)
            out.append(p_in - p_out)
        return np.array(out)


def junction_relation(pattern: InterconnectionPattern) -> JunctionRelation:
    ports = pattern.ports
    records = []
    for j in pattern.junctions:
        members = sorted(j)
        attr = ports[members[0]]
        inner_power = tuple(p for p in members if p[0] == "inner" and ports[p].is_power)
        outer_power = tuple(p for p in members if p[0] == "outer" and ports[p].is_power)
        records.append(Junction(junction_id(j), j, attr.quantity, attr.dim, inner_power, outer_power, tuple(members)))
    return JunctionRelation(tuple(records))


def port_variables(port: Name, attr: PortAttr) -> list[str]:
    names = []
    kinds = ("x", "f", "e") if attr.is_power else ("x",)
    for k in kinds:
        if attr.dim == 1:
            names.append(f"{port}.{k}")
        else:
            names.extend(f"{port}.{k}[{i}]" for i in range(attr.dim))
    return names


class LinearRelation:
    """The subspace ``{v : A v = 0}`` over named scalar variables."""

    def __init__(self, variables: Iterable[str], matrix=None):
        self.variables = list(variables)
        self.index = {v: i for i, v in enumerate(self.variables)}
        if len(self.index) != len(self.variables):
            raise ValueError("duplicate variables")
        n = len(self.variables)
        self.matrix = np.zeros((0, n)) if matrix is None else np.asarray(matrix, dtype=float).reshape(-1, n)

    def rename(self, mapping: Mapping[str, str]) -> "LinearRelation":
        return LinearRelation([mapping.get(v, v) for v in self.variables], self.matrix)

    def join(self, other: "LinearRelation") -> "LinearRelation":
        """Constraints of both on the union of their variables."""
        variables = list(self.variables) + [v for v in other.variables if v not in self.index]
        out = LinearRelation(variables)
        return LinearRelation(variables, np.vstack([out._embed(self), out._embed(other)]))

    def _embed(self, rel: "LinearRelation") -> np.ndarray:
        m = np.zeros((rel.matrix.shape[0], len(self.variables)))
        for j, v in enumerate(rel.variables):
            m[:, self.index[v]] = rel.matrix[:, j]
        return m

    def project(self, keep: Iterable[str]) -> "LinearRelation":
        """Existentially eliminate every variable not in ``keep``."""
        keep = list(keep)
        drop = [v for v in self.variables if v not in set(keep)]
        a_keep = self.matrix[:, [self.index[v] for v in keep]]
        if not drop:
            return LinearRelation(keep, a_keep)
        a_drop = self.matrix[:, [self.index[v] for v in drop]]
        # v is in the projection iff a_keep v lies in the range of a_drop.
        complement = scipy.linalg.null_space(a_drop.T)
        return LinearRelation(keep, complement.T @ a_keep)

    def compose(self, other: "LinearRelation", shared: Iterable[str]) -> "LinearRelation":
        shared = set(shared)
        joined = self.join(other)
        return joined.project([v for v in joined.variables if v not in shared])

    def reorder(self, variables: Iterable[str]) -> "LinearRelation":
        variables = list(variables)
        if set(variables) != set(self.variables):
            raise ValueError("reorder needs the same variable set")
        return LinearRelation(variables, self.matrix[:, [self.index[v] for v in variables]])

    def vector(self, values: Mapping[str, float]) -> np.ndarray:
        return np.array([values[v] for v in self.variables], dtype=float)

    def residual(self, values) -> float:
        v = self.vector(values) if isinstance(values, Mapping) else np.asarray(values, dtype=float)
        if self.matrix.shape[0] == 0:
            return 0.0
        return float(np.max(np.abs(self.matrix @ v)))

    def contains(self, values, tol: float = 1e-9) -> bool:
        v = self.vector(values) if isinstance(values, Mapping) else np.asarray(values, dtype=float)
        scale = 1.0 + float(np.max(np.abs(v))) if v.size else 1.0
        return self.residual(v) <= tol * scale * max(1.0, float(np.abs(self.matrix).max(initial=0.0)))

    def basis(self) -> np.ndarray:
        if self.matrix.shape[0] == 0:
            return np.eye(len(self.variables))
        return scipy.linalg.null_space(self.matrix)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        b = self.basis()
        return b @ rng.standard_normal(b.shape[1])

    def same_subspace(self, other: "LinearRelation", tol: float = 1e-9) -> bool:
        other = other.reorder(self.variables)
        b1, b2 = self.basis(), other.basis()
        if b1.shape[1] != b2.shape[1]:
            return False
        return all(other.residual(col) <= tol for col in b1.T) and all(self.residual(col) <= tol for col in b2.T)


def pattern_relation(pattern: InterconnectionPattern) -> LinearRelation:
    """The junction equations as a linear relation on all port variables."""
    ports = pattern.ports
    variables = [v for p, a in ports.items() for v in port_variables(p, a)]
    rel = LinearRelation(variables)
    rows = []

    def coord(port, kind, i, dim):
        return rel.index[f"{port}.{kind}" if dim == 1 else f"{port}.{kind}[{i}]"]

    for j in junction_relation(pattern).junctions:
        d = j.dim
        for kind, members in (("x", j.state_members), ("e", j.power_members)):
            for a, b in zip(members, members[1:]):
                for i in range(d):
                    row = np.zeros(len(variables))
                    row[coord(a, kind, i, d)] = 1.0
                    row[coord(b, kind, i, d)] = -1.0
                    rows.append(row)
        if j.power_members:
            for i in range(d):
                row = np.zeros(len(variables))
                for p in j.inner_power:
                    row[coord(p, "f", i, d)] += 1.0
                for p in j.outer_power:
                    row[coord(p, "f", i, d)] -= 1.0
                rows.append(row)
    return LinearRelation(variables, np.array(rows) if rows else None)


def equation_listing(pattern: InterconnectionPattern) -> list[str]:
    return junction_relation(pattern).equations()


def to_dot(pattern: InterconnectionPattern, name: str = "pattern") -> str:
    """Graphviz source: boxes as circles, junctions as points, state ports dashed."""
    lines = [f'graph "{name}" {{', "  node [fontsize=10];"]
    for box in pattern.inner:
        lines.append(f'  "box:{box}" [shape=circle, label="{box}"];')
    for j in junction_relation(pattern).junctions:
        jid = f"junction:{j.id}"
        lines.append(f'  "{jid}" [shape=point, xlabel="{j.quantity.label}"];')
        for p in sorted(j.members):
            style = "" if pattern.attr(p).is_power else ", style=dashed"
            if p[0] == "inner":
                box = pattern.box_of(p)
                local = Name(p[1 + len(box) :])
                lines.append(f'  "box:{box}" -- "{jid}" [label="{local}"{style}];')
            else:
                lines.append(f'  "outer:{p.tail}" [shape=plaintext, label="{p.tail}"];')
                lines.append(f'  "outer:{p.tail}" -- "{jid}" [label="{p.tail}"{style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
