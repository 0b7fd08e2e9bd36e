"""Textual model format: parsing, pretty-printing and name resolution.

A model file is a sequence of declarations::

    quantity heat dim 1 parity +1
    environment { port s quantity entropy value 298.15 }
    interface damper_if { p : momentum  s : entropy }
    storage coil { ports { b_s : flux_linkage } params { L = 1 } energy b_s.x^2 / (2*L) }
    reversible em { ports { q : charge  b_s : flux_linkage } x1 { q b_s } L [[0, 1], [-1, 0]] }
    irreversible loss { ports { ... } params { ... } M [[...], [...]] }
    environment_component env { ports { s : entropy } }
    pattern stator { box em : em  outer { q : charge } junction { em.q, q } ... }
    system motor = motor_pattern with { stator = stator, rotor = rotor }
    simulate motor as run { t_end 50 dt 0.01 init { env.s = 0 } input { q.e = 10 } }

``#`` starts a comment.  Expressions run to the end of the line (or to a
closing brace); matrix entries are separated by commas.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .components import (
    Component,
    EnvironmentComponent,
    IrreversibleComponent,
    ReversibleComponent,
    StorageComponent,
)
from .expr import Expr, ExprError, parse as parse_expr
from .interfaces import Interface, PortAttr
from .names import InvalidName, Name, as_name
from .patterns import InterconnectionPattern, PatternError, make_pattern
from .quantities import (
    EnvPort,
    InvalidEnvironment,
    Quantity,
    ReferenceEnvironment,
    StateSpace,
    default_environment,
    standard_registry,
)


class ModelError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message, self.line, self.col = message, line, col
        super().__init__(f"{line}:{col}: {message}" if line else message)


class ModelSyntaxError(ModelError):
    pass


class ResolutionError(ModelError):
    pass


# --- document structure --------------------------------------------------------

@dataclass(frozen=True)
class QuantityDecl:
    label: str
    dim: int
    parity: int


@dataclass(frozen=True)
class EnvPortDecl:
    name: str
    quantity: str
    value: float


@dataclass(frozen=True)
class PortDecl:
    name: str
    quantity: str
    kind: str = "power"


@dataclass(frozen=True)
class InterfaceDecl:
    name: str
    ports: tuple


@dataclass(frozen=True)
class ComponentDecl:
    name: str
    kind: str
    ports: tuple
    params: tuple = ()
    energy: Optional[Expr] = None
    x1: tuple = ()
    x2: tuple = ()
    L: Optional[tuple] = None
    g: Optional[tuple] = None
    C: Optional[tuple] = None
    M: Optional[tuple] = None


@dataclass(frozen=True)
class PatternDecl:
    name: str
    boxes: tuple
    outer: tuple
    junctions: tuple


@dataclass(frozen=True)
class SystemDecl:
    name: str
    pattern: str
    fillings: tuple = ()


@dataclass(frozen=True)
class SimulationDecl:
    name: str
    system: str
    t_end: float
    dt: float
    init: tuple = ()
    inputs: tuple = ()


@dataclass
class ModelDocument:
    quantities: tuple = ()
    environment: Optional[tuple] = None
    interfaces: tuple = ()
    components: tuple = ()
    patterns: tuple = ()
    systems: tuple = ()
    simulations: tuple = ()
    locations: dict = field(default_factory=dict, compare=False, repr=False)

    def names(self) -> list[str]:
        return [d.name for group in (self.interfaces, self.components, self.patterns, self.systems) for d in group]


# --- parser --------------------------------------------------------------------

_SEG = r"[^\s.,;:=#{}\[\]()<>\"'`+\-*/^]+"
_NAME = re.compile(rf"{_SEG}(?:\.{_SEG})*")
_NUMBER = re.compile(r"[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?")
_SPACE = re.compile(r"(?:\s+|#[^\n]*)+")
_KEYWORDS = ("power", "state")


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def loc(self, pos: Optional[int] = None) -> tuple[int, int]:
        pos = self.pos if pos is None else pos
        line = self.text.count("\n", 0, pos) + 1
        col = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        return line, col

    def error(self, message: str, pos: Optional[int] = None) -> ModelSyntaxError:
        return ModelSyntaxError(message, *self.loc(pos))

    def skip(self) -> None:
        m = _SPACE.match(self.text, self.pos)
        if m:
            self.pos = m.end()

    def at_end(self) -> bool:
        self.skip()
        return self.pos >= len(self.text)

    def peek_char(self) -> str:
        self.skip()
        return self.text[self.pos : self.pos + 1]

    def accept(self, ch: str) -> bool:
        if self.peek_char() == ch:
            self.pos += 1
            return True
        return False

    def expect(self, ch: str) -> None:
        if not self.accept(ch):
            found = self.text[self.pos : self.pos + 1] or "end of file"
            raise self.error(f"expected '{ch}', found '{found}'")

    def peek_word(self) -> Optional[str]:
        self.skip()
        m = _NAME.match(self.text, self.pos)
        return m.group() if m else None

    def word(self, what: str = "name") -> str:
        self.skip()
        m = _NAME.match(self.text, self.pos)
        if not m:
            raise self.error(f"expected {what}")
        self.pos = m.end()
        return m.group()

    def keyword(self, kw: str) -> None:
        start = self.pos
        w = self.word(f"'{kw}'")
        if w != kw:
            raise self.error(f"expected '{kw}', found '{w}'", start)

    def number(self) -> float:
        self.skip()
        m = _NUMBER.match(self.text, self.pos)
        if not m:
            raise self.error("expected a number")
        self.pos = m.end()
        return float(m.group())

    def expression(self, stops: str) -> Expr:
        """Read an expression up to a stop character at bracket depth zero."""
        self.skip()
        start = self.pos
        depth = 0
        i = start
        text = self.text
        while i < len(text):
            ch = text[i]
            if ch in "([":
                depth += 1
            elif ch in ")]":
                if depth == 0 and ch in stops:
                    break
                depth -= 1
            elif depth == 0 and (ch in stops or ch == "#"):
                break
            i += 1
        raw = text[start:i]
        if not raw.strip():
            raise self.error("expected an expression", start)
        try:
            expr = parse_expr(raw)
        except ExprError as exc:
            offset = getattr(exc, "pos", 0) or 0
            raise self.error(f"bad expression: {exc}", start + offset) from None
        self.pos = i
        return expr


def _parse_ports(sc: _Scanner) -> tuple:
    sc.expect("{")
    ports = []
    while not sc.accept("}"):
        name = sc.word("port name")
        sc.expect(":")
        q = sc.word("quantity")
        kind = "power"
        w = sc.peek_word()
        if w in _KEYWORDS:
            save = sc.pos
            sc.word()
            if sc.peek_char() == ":":
                sc.pos = save  # it was the next port's name
            else:
                kind = w
        ports.append(PortDecl(name, q, kind))
        sc.accept(",")
    return tuple(ports)


def _parse_names(sc: _Scanner) -> tuple:
    sc.expect("{")
    out = []
    while not sc.accept("}"):
        out.append(sc.word())
        sc.accept(",")
    return tuple(out)


def _parse_params(sc: _Scanner) -> tuple:
    sc.expect("{")
    out = []
    while not sc.accept("}"):
        k = sc.word("parameter name")
        sc.expect("=")
        out.append((k, sc.number()))
        sc.accept(",")
    return tuple(out)


def _parse_matrix(sc: _Scanner) -> tuple:
    sc.expect("[")
    rows = []
    while not sc.accept("]"):
        sc.expect("[")
        row = []
        if not sc.accept("]"):
            while True:
                row.append(sc.expression(",]"))
                if sc.accept("]"):
                    break
                sc.expect(",")
        rows.append(tuple(row))
        sc.accept(",")
    return tuple(rows)


def _parse_component(sc: _Scanner, kind: str) -> ComponentDecl:
    name = sc.word("component name")
    sc.expect("{")
    fields: dict = {}
    allowed = {
        "storage": {"ports", "params", "energy"},
        "reversible": {"ports", "params", "x1", "x2", "L", "g", "C"},
        "irreversible": {"ports", "params", "M"},
        "environment_component": {"ports"},
    }[kind]
    while not sc.accept("}"):
        start = sc.pos
        key = sc.word("field")
        if key not in allowed:
            raise sc.error(f"unexpected field '{key}' in {kind} {name}", start)
        if key in fields:
            raise sc.error(f"duplicate field '{key}' in {kind} {name}", start)
        if key == "ports":
            fields[key] = _parse_ports(sc)
        elif key == "params":
            fields[key] = _parse_params(sc)
        elif key == "energy":
            fields[key] = sc.expression("}\n")
        elif key in ("x1", "x2"):
            fields[key] = _parse_names(sc)
        else:
            fields[key] = _parse_matrix(sc)
    if "ports" not in fields:
        raise sc.error(f"{kind} {name} declares no ports")
    if kind == "storage" and "energy" not in fields:
        raise sc.error(f"storage {name} needs an energy expression")
    if kind == "irreversible" and "M" not in fields:
        raise sc.error(f"irreversible {name} needs a matrix M")
    if kind == "reversible" and "x1" not in fields:
        raise sc.error(f"reversible {name} needs an x1 split")
    kind = "environment" if kind == "environment_component" else kind
    return ComponentDecl(name, kind, **fields)


def _parse_pattern(sc: _Scanner) -> PatternDecl:
    name = sc.word("pattern name")
    sc.expect("{")
    boxes, outer, junctions = [], None, []
    while not sc.accept("}"):
        start = sc.pos
        key = sc.word()
        if key == "box":
            b = sc.word("box name")
            sc.expect(":")
            boxes.append((b, sc.word("interface, component or system name")))
        elif key == "outer":
            if outer is not None:
                raise sc.error("duplicate outer interface", start)
            outer = _parse_ports(sc)
        elif key == "junction":
            sc.expect("{")
            members = []
            while not sc.accept("}"):
                members.append(sc.word("port name"))
                sc.accept(",")
            junctions.append(tuple(members))
        else:
            raise sc.error(f"unexpected '{key}' in pattern {name}", start)
    return PatternDecl(name, tuple(boxes), outer or (), tuple(junctions))


def _parse_simulation(sc: _Scanner) -> SimulationDecl:
    system = sc.word("system name")
    name = system
    if sc.peek_word() == "as":
        sc.word()
        name = sc.word("configuration name")
    sc.expect("{")
    t_end = dt = None
    init, inputs = [], []
    while not sc.accept("}"):
        start = sc.pos
        key = sc.word()
        if key == "t_end":
            t_end = sc.number()
        elif key == "dt":
            dt = sc.number()
        elif key == "init":
            sc.expect("{")
            while not sc.accept("}"):
                k = sc.word("state name")
                sc.expect("=")
                init.append((k, sc.number()))
                sc.accept(",")
        elif key == "input":
            sc.expect("{")
            while not sc.accept("}"):
                k = sc.word("outer port variable")
                sc.expect("=")
                inputs.append((k, sc.expression("}\n,")))
                sc.accept(",")
        else:
            raise sc.error(f"unexpected '{key}' in simulate block", start)
    if t_end is None or dt is None:
        raise sc.error("simulate block needs t_end and dt")
    return SimulationDecl(name, system, t_end, dt, tuple(init), tuple(inputs))


def parse_model(text: str) -> ModelDocument:
    sc = _Scanner(text)
    doc = ModelDocument()
    groups: dict = {k: [] for k in ("quantities", "interfaces", "components", "patterns", "systems", "simulations")}
    environment = None
    while not sc.at_end():
        start = sc.pos
        kw = sc.word("declaration")
        loc = sc.loc(start)
        if kw == "quantity":
            label = sc.word("quantity label")
            sc.keyword("dim")
            dim = sc.number()
            sc.keyword("parity")
            parity = sc.number()
            if dim != int(dim) or dim < 1:
                raise sc.error("dimension must be a positive integer", start)
            if parity not in (1.0, -1.0):
                raise sc.error("parity must be +1 or -1", start)
            groups["quantities"].append(QuantityDecl(label, int(dim), int(parity)))
            doc.locations[("quantity", label)] = loc
            continue
        if kw == "environment":
            if environment is not None:
                raise sc.error("duplicate environment block", start)
            sc.expect("{")
            ports = []
            while not sc.accept("}"):
                sc.keyword("port")
                n = sc.word("port name")
                sc.keyword("quantity")
                q = sc.word("quantity")
                sc.keyword("value")
                ports.append(EnvPortDecl(n, q, sc.number()))
            environment = tuple(ports)
            doc.locations[("environment", "")] = loc
            continue
        if kw == "interface":
            decl = InterfaceDecl(sc.word("interface name"), _parse_ports(sc))
            group = "interfaces"
        elif kw in ("storage", "reversible", "irreversible", "environment_component"):
            decl = _parse_component(sc, kw)
            group = "components"
        elif kw == "pattern":
            decl = _parse_pattern(sc)
            group = "patterns"
        elif kw == "system":
            name = sc.word("system name")
            sc.expect("=")
            pattern = sc.word("pattern name")
            fillings = []
            if sc.peek_word() == "with":
                sc.word()
                sc.expect("{")
                while not sc.accept("}"):
                    b = sc.word("box name")
                    sc.expect("=")
                    fillings.append((b, sc.word("system name")))
                    sc.accept(",")
            decl = SystemDecl(name, pattern, tuple(fillings))
            group = "systems"
        elif kw == "simulate":
            decl = _parse_simulation(sc)
            if any(s.name == decl.name for s in groups["simulations"]):
                raise sc.error(f"duplicate simulation configuration '{decl.name}'", start)
            groups["simulations"].append(decl)
            doc.locations[("simulation", decl.name)] = loc
            continue
        else:
            raise sc.error(f"unknown declaration '{kw}'", start)
        taken = [d.name for g in ("interfaces", "components", "patterns", "systems") for d in groups[g]]
        if decl.name in taken:
            raise sc.error(f"'{decl.name}' is defined more than once", start)
        groups[group].append(decl)
        doc.locations[(group, decl.name)] = loc
    for k, v in groups.items():
        setattr(doc, k, tuple(v))
    doc.environment = environment
    return doc


# --- pretty printer --------------------------------------------------------------

def _num(v: float) -> str:
    return repr(float(v)) if v != int(v) or abs(v) >= 1e16 else str(int(v))


def _ports(ports) -> str:
    return "{ " + "  ".join(f"{p.name} : {p.quantity}" + (" state" if p.kind == "state" else "") for p in ports) + " }"


def _matrix(rows) -> str:
    return "[" + ", ".join("[" + ", ".join(str(e) for e in r) + "]" for r in rows) + "]"


def format_model(doc: ModelDocument) -> str:
    out = []
    for q in doc.quantities:
        out.append(f"quantity {q.label} dim {q.dim} parity {q.parity:+d}")
    if doc.environment is not None:
        out.append("environment {")
        out.extend(f"  port {p.name} quantity {p.quantity} value {_num(p.value)}" for p in doc.environment)
        out.append("}")
    for i in doc.interfaces:
        out.append(f"interface {i.name} {_ports(i.ports)}")
    for c in doc.components:
        kw = "environment_component" if c.kind == "environment" else c.kind
        out.append(f"{kw} {c.name} {{")
        out.append(f"  ports {_ports(c.ports)}")
        if c.params:
            out.append("  params { " + "  ".join(f"{k} = {_num(v)}" for k, v in c.params) + " }")
        if c.energy is not None:
            out.append(f"  energy {c.energy}")
        if c.kind == "reversible":
            out.append("  x1 { " + " ".join(c.x1) + " }")
            if c.x2:
                out.append("  x2 { " + " ".join(c.x2) + " }")
        for key in ("L", "g", "C", "M"):
            m = getattr(c, key)
            if m is not None:
                out.append(f"  {key} {_matrix(m)}")
        out.append("}")
    for p in doc.patterns:
        out.append(f"pattern {p.name} {{")
        out.extend(f"  box {b} : {r}" for b, r in p.boxes)
        out.append(f"  outer {_ports(p.outer)}")
        out.extend("  junction { " + ", ".join(j) + " }" for j in p.junctions)
        out.append("}")
    for s in doc.systems:
        line = f"system {s.name} = {s.pattern}"
        if s.fillings:
            line += " with { " + ", ".join(f"{b} = {v}" for b, v in s.fillings) + " }"
        out.append(line)
    for s in doc.simulations:
        head = f"simulate {s.system}" + (f" as {s.name}" if s.name != s.system else "")
        out.append(head + " {")
        out.append(f"  t_end {_num(s.t_end)}")
        out.append(f"  dt {_num(s.dt)}")
        if s.init:
            out.append("  init {")
            out.extend(f"    {k} = {_num(v)}" for k, v in s.init)
            out.append("  }")
        if s.inputs:
            out.append("  input {")
            out.extend(f"    {k} = {e}" for k, e in s.inputs)
            out.append("  }")
        out.append("}")
    return "\n".join(out) + ("\n" if out else "")


# --- resolution ------------------------------------------------------------------

class Model:
    """A resolved document: live quantities, environment, components and systems."""

    def __init__(self, doc: ModelDocument):
        self.doc = doc
        self.registry = standard_registry()
        for q in doc.quantities:
            try:
                self.registry.register(Quantity(q.label, StateSpace(q.dim), q.parity))
            except ValueError as exc:
                raise self._err(str(exc), ("quantity", q.label)) from None
        if doc.environment is None:
            self.env = default_environment(self.registry)
        else:
            try:
                self.env = ReferenceEnvironment(
                    {p.name: EnvPort(self._quantity(p.quantity, ("environment", "")), p.value) for p in doc.environment}
                )
            except (InvalidEnvironment, InvalidName) as exc:
                raise self._err(str(exc), ("environment", "")) from None
        self.interfaces = {i.name: self._interface(i.ports, ("interfaces", i.name)) for i in doc.interfaces}
        self.components: dict[str, Component] = {c.name: self._component(c) for c in doc.components}
        self._pattern_decls = {p.name: p for p in doc.patterns}
        self._system_decls = {s.name: s for s in doc.systems}
        self.patterns: dict[str, InterconnectionPattern] = {}
        self.systems: dict = {}
        self._resolving: set = set()
        for p in doc.patterns:
            self.pattern(p.name)
        for s in doc.systems:
            self.system(s.name)
        self.simulations = {s.name: s for s in doc.simulations}
        for s in doc.simulations:
            if s.system not in self.systems and s.system not in self.components:
                raise self._err(f"simulate refers to unknown system '{s.system}'", ("simulation", s.name))

    def _err(self, message: str, key) -> ResolutionError:
        line, col = self.doc.locations.get(key, (0, 0))
        return ResolutionError(message, line, col)

    def _quantity(self, label: str, key) -> Quantity:
        if label not in self.registry:
            raise self._err(f"unknown quantity '{label}'", key)
        return self.registry[label]

    def _interface(self, ports, key) -> Interface:
        try:
            return Interface((p.name, PortAttr(self._quantity(p.quantity, key), p.kind)) for p in ports)
        except (ValueError, InvalidName) as exc:
            if isinstance(exc, ResolutionError):
                raise
            raise self._err(str(exc), key) from None

    def _component(self, c: ComponentDecl) -> Component:
        key = ("components", c.name)
        iface = self._interface(c.ports, key)
        params = dict(c.params)
        try:
            if c.kind == "storage":
                comp = StorageComponent(iface, c.energy, params)
            elif c.kind == "environment":
                comp = EnvironmentComponent(iface, params)
            elif c.kind == "reversible":
                comp = ReversibleComponent(iface, c.x1, c.x2, c.L, c.g, c.C, params)
            else:
                comp = IrreversibleComponent(iface, c.M, params)
            comp.check_symbols(self.env)
        except KeyError as exc:
            raise self._err(f"{c.kind} {c.name}: unknown symbol {exc.args[0]}", key) from None
        except ValueError as exc:
            raise self._err(f"{c.kind} {c.name}: {exc}", key) from None
        return comp

    def _box_interface(self, ref: str, key) -> Interface:
        if ref in self.interfaces:
            return self.interfaces[ref]
        if ref in self.components:
            return self.components[ref].iface
        if ref in self._system_decls:
            return self.system(ref).outer
        if ref in self._pattern_decls:
            return self.pattern(ref).outer
        raise self._err(f"unknown interface, component, system or pattern '{ref}'", key)

    def pattern(self, name: str) -> InterconnectionPattern:
        if name in self.patterns:
            return self.patterns[name]
        if name not in self._pattern_decls:
            raise ResolutionError(f"unknown pattern '{name}'")
        if ("pattern", name) in self._resolving:
            raise self._err(f"pattern '{name}' refers to itself", ("patterns", name))
        self._resolving.add(("pattern", name))
        decl = self._pattern_decls[name]
        key = ("patterns", name)
        boxes = {b: self._box_interface(r, key) for b, r in decl.boxes}
        if len(boxes) != len(decl.boxes):
            raise self._err(f"pattern {name} declares a box twice", key)
        outer = self._interface(decl.outer, key)
        try:
            pat = make_pattern(boxes, outer, decl.junctions)
        except (PatternError, InvalidName) as exc:
            raise self._err(f"pattern {name}: {exc}", key) from None
        self._resolving.discard(("pattern", name))
        self.patterns[name] = pat
        return pat

    def system(self, name: str):
        from .systems import CompositeSystem

        if name in self.systems:
            return self.systems[name]
        if name in self.components:
            return self.components[name]
        if name not in self._system_decls:
            raise ResolutionError(f"unknown system '{name}'")
        key = ("systems", name)
        if ("system", name) in self._resolving:
            raise self._err(f"system '{name}' contains itself", key)
        self._resolving.add(("system", name))
        decl = self._system_decls[name]
        if decl.pattern not in self._pattern_decls:
            raise self._err(f"system {name}: unknown pattern '{decl.pattern}'", key)
        pat = self.pattern(decl.pattern)
        explicit = dict(decl.fillings)
        fillings = {}
        for b, ref in self._pattern_decls[decl.pattern].boxes:
            target = explicit.pop(b, None)
            if target is None:
                if ref in self.interfaces or ref in self._pattern_decls:
                    raise self._err(f"system {name}: box {b} has only an interface and needs a filling", key)
                target = ref
            if target not in self.components and target not in self._system_decls:
                raise self._err(f"system {name}: unknown system '{target}' for box {b}", key)
            fillings[b] = self.system(target)
        if explicit:
            raise self._err(f"system {name}: pattern {decl.pattern} has no box {sorted(explicit)[0]}", key)
        try:
            sys = CompositeSystem.from_pattern(pat, fillings)
        except ValueError as exc:
            raise self._err(f"system {name}: {exc}", key) from None
        self._resolving.discard(("system", name))
        self.systems[name] = sys
        return sys

    def primitive_count(self) -> int:
        return len(self.components)


def load_model(text: str) -> Model:
    return Model(parse_model(text))
