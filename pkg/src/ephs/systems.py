"""Composite systems: flattening, lints, assembly, simulation and audits."""
from __future__ import annotations

import csv
import io
import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .components import (
    Component,
    EnvironmentComponent,
    IrreversibleComponent,
    ReversibleComponent,
    StorageComponent,
    effort_symbols,
    flow_symbols,
    port_symbols,
    state_symbols,
)
from .expr import Expr, compile_many, parse
from .interfaces import Interface
from .names import Name, NameLike, Package, as_name, concat
from .patterns import (
    InterconnectionPattern,
    display,
    junction_relation,
    make_pattern,
    substitute,
)
from .quantities import ReferenceEnvironment, lambda_of

System = Union[Component, "CompositeSystem"]


class NotSimulable(ValueError):
    pass


class NonFiniteState(ArithmeticError):
    pass


class MultipleStorageAtJunction(ValueError):
    def __init__(self, junction):
        self.junction = junction
        super().__init__(
            "junction {" + ", ".join(display(p) for p in sorted(junction)) + "} has more than one storage/environment port"
        )


def interface_of(system: System) -> Interface:
    return system.outer if isinstance(system, CompositeSystem) else system.iface


class CompositeSystem:
    """Boxes of an interconnection pattern filled with systems."""

    def __init__(self, outer: Mapping, subsystems: Mapping[NameLike, System], junctions):
        self.subsystems: Package = Package(subsystems)
        self.pattern = make_pattern({b: interface_of(s) for b, s in self.subsystems.items()}, outer, junctions)

    @classmethod
    def from_pattern(cls, pattern: InterconnectionPattern, fillings: Mapping[NameLike, System]) -> "CompositeSystem":
        fillings = Package(fillings)
        if set(fillings) != set(pattern.inner):
            missing = sorted(set(pattern.inner) - set(fillings))
            extra = sorted(set(fillings) - set(pattern.inner))
            raise ValueError(f"fillings do not match boxes (missing {missing}, unknown {extra})")
        for b, s in fillings.items():
            if interface_of(s) != pattern.inner[b]:
                raise ValueError(f"system filling box {b} has interface {interface_of(s)!r}, expected {pattern.inner[b]!r}")
        self = cls.__new__(cls)
        self.subsystems = fillings
        self.pattern = pattern
        return self

    @property
    def outer(self) -> Interface:
        return self.pattern.outer


@dataclass(frozen=True)
class FlattenedSystem:
    components: Package
    pattern: InterconnectionPattern

    @property
    def outer(self) -> Interface:
        return self.pattern.outer

    @property
    def junctions(self) -> tuple:
        return self.pattern.junctions

    def partition(self) -> frozenset:
        return frozenset(frozenset(display(p) for p in j) for j in self.pattern.junctions)


def flatten(system: System) -> FlattenedSystem:
    """Substitute composite subsystems recursively until only primitives remain."""
    if not isinstance(system, CompositeSystem):
        iface = system.iface
        wrapped = make_pattern({"self": iface}, iface, [[f"inner.self.{p}", f"outer.{p}"] for p in iface])
        return FlattenedSystem(Package({"self": system}), wrapped)
    pattern = system.pattern
    components = {}
    for box, sub in system.subsystems.items():
        if isinstance(sub, CompositeSystem):
            inner = flatten(sub)
            pattern = substitute(pattern, box, inner.pattern)
            for n, c in inner.components.items():
                components[concat(box, n)] = c
        else:
            components[box] = sub
    return FlattenedSystem(Package(components), pattern)


# --- lints -----------------------------------------------------------------------

@dataclass
class Issue:
    severity: str
    message: str
    junction: Optional[frozenset] = None

    def __str__(self) -> str:
        return f"{self.severity}: {self.message}"


@dataclass
class WellformednessReport:
    issues: list = field(default_factory=list)

    @property
    def errors(self) -> list:
        return [i for i in self.issues if i.severity == "error"]

    @property
    def warnings(self) -> list:
        return [i for i in self.issues if i.severity == "warning"]

    @property
    def ok(self) -> bool:
        return not self.errors

    def raise_errors(self) -> None:
        for i in self.errors:
            raise MultipleStorageAtJunction(i.junction)


# quantities whose efforts are velocity-like, so more than two connected
# power ports would not balance
DISPLACEMENT_LIKE = frozenset({"displacement"})


def _component_of(flat: FlattenedSystem, port: Name):
    box = flat.pattern.box_of(port)
    return (box, flat.components[box]) if box is not None else (None, None)


def check_wellformed(flat: FlattenedSystem) -> WellformednessReport:
    report = WellformednessReport()
    for j in flat.pattern.junctions:
        stores = [p for p in j if isinstance(_component_of(flat, p)[1], (StorageComponent, EnvironmentComponent))]
        if len(stores) > 1:
            names = ", ".join(display(p) for p in sorted(stores))
            report.issues.append(Issue("error", f"junction {display(min(j))} connects several storage/environment ports ({names})", j))
        attr = flat.pattern.attr(min(j))
        power = [p for p in j if flat.pattern.attr(p).is_power]
        if attr.quantity.label in DISPLACEMENT_LIKE and len(power) > 2:
            report.issues.append(Issue("warning", f"junction {display(min(j))} connects {len(power)} displacement power ports", j))
    return report


# --- assembly --------------------------------------------------------------------

Signal = Union[float, int, str, Expr, Callable]


def _signal(value: Signal) -> Callable[[float], float]:
    if callable(value) and not isinstance(value, Expr):
        return value
    if isinstance(value, (int, float)):
        v = float(value)
        return lambda t: v
    expr = parse(value) if isinstance(value, str) else value
    extra = expr.symbols() - {"t"}
    if extra:
        raise ValueError(f"input signal {expr} may only depend on t, found {sorted(extra)}")
    fn = compile_many([expr], ["t"])
    return lambda t: fn((t,))[0]


@dataclass
class Evaluation:
    xdot: np.ndarray
    efforts: dict
    flows: dict
    outputs: dict
    E_total: float
    H_total: float
    S_prod_rate: float
    max_power_residual: float
    supplied_exergy: float
    supplied_energy: float
    exergy_balance: float


@dataclass
class _Slot:
    """One junction: where its state, effort and unknown flow come from."""

    id: str
    dim: int
    members: tuple
    x_index: Optional[np.ndarray] = None  # into the global state vector
    x_input: Optional[str] = None
    effort_source: Optional[tuple] = None  # ("storage", name, port) / ("env",) / ("input", key)
    flow_input: Optional[str] = None  # bound outer flow
    outer: Optional[Name] = None
    e_off: int = 0


class AssembledModel:
    """An explicit vector field for a simulable flattened system."""

    def __init__(self, flat: FlattenedSystem, env: ReferenceEnvironment, inputs: Optional[Mapping[str, Signal]] = None):
        self.flat = flat
        self.env = env
        self.theta0 = env.theta0
        inputs = dict(inputs or {})
        pat = flat.pattern
        outer = pat.outer
        for key in inputs:
            port, _, kind = key.rpartition(".")
            if kind not in ("e", "f", "x") or as_name(port) not in outer:
                raise ValueError(f"input {key} does not name an outer port variable")
            if kind in ("e", "f") and not outer[as_name(port)].is_power:
                raise ValueError(f"input {key} binds a power variable of state port {port}")
            if outer[as_name(port)].dim != 1:
                raise ValueError(f"input {key}: only one-dimensional outer ports can be driven")
        for p in outer.power_ports:
            if f"{p}.e" in inputs and f"{p}.f" in inputs:
                raise ValueError(f"outer port {p} binds both effort and flow")
        self.input_keys = sorted(inputs)
        self.signals = {k: _signal(v) for k, v in inputs.items()}

        for name, c in flat.components.items():
            if isinstance(c, ReversibleComponent):
                if c.has_constraints:
                    raise NotSimulable(f"reversible component {name} has constraints")
                if c.x2 or c.has_transformer:
                    raise NotSimulable(f"reversible component {name} is not in pure gyrator form")
            c.check_symbols(env)
            if isinstance(c, EnvironmentComponent) and not c.check_against(env):
                raise NotSimulable(f"environment component {name} is not a subinterface of the reference environment")

        # state layout: storage ports, then one merged state per environment quantity
        self.state_names: list[str] = []
        self.storages: list = []
        storage_slices = {}
        n = 0
        for name, c in flat.components.items():
            if isinstance(c, StorageComponent):
                idx = []
                for p, a in c.iface.items():
                    sl = list(range(n, n + a.dim))
                    storage_slices[(name, p)] = np.array(sl)
                    full = str(concat(name, p))
                    self.state_names.extend([full] if a.dim == 1 else [f"{full}[{i}]" for i in range(a.dim)])
                    idx.extend(sl)
                    n += a.dim
                self.storages.append((name, c, np.array(idx, dtype=int)))
        env_state = {}
        self.env_quantities = []
        for name, c in flat.components.items():
            if isinstance(c, EnvironmentComponent):
                for p, a in c.iface.items():
                    ref = env.port_for(a.quantity)
                    if ref not in env_state:
                        env_state[ref] = n
                        label = f"env.{ref}"
                        if label in self.state_names:
                            raise NotSimulable(f"state name {label} is used by a storage component")
                        self.state_names.append(label)
                        self.env_quantities.append((ref, n, env.ports[ref].value))
                        n += 1
        self.n = n

        # junction slots
        slots = []
        e_off = 0
        for j in junction_relation(pat).junctions:
            slot = _Slot(j.id, j.dim, tuple(sorted(j.members)))
            sources = []
            for p in slot.members:
                if p[0] == "outer":
                    slot.outer = p.tail
                    continue
                box, comp = _component_of(flat, p)
                local = Name(p[1 + len(box):])
                if isinstance(comp, StorageComponent):
                    slot.x_index = storage_slices[(box, local)]
                    sources.append(("storage", box, local))
                elif isinstance(comp, EnvironmentComponent):
                    ref = env.port_for(comp.iface[local].quantity)
                    slot.x_index = np.array([env_state[ref]])
                    sources.append(("env", box, local))
            if slot.outer is not None:
                o = slot.outer
                if f"{o}.x" in inputs:
                    if slot.x_index is not None:
                        raise NotSimulable(f"junction {slot.id}: outer state {o}.x is bound but the junction already has a state")
                    slot.x_input = f"{o}.x"
                if f"{o}.e" in inputs:
                    sources.append(("input", f"{o}.e"))
                elif outer[o].is_power:
                    slot.flow_input = f"{o}.f" if f"{o}.f" in inputs else ""
            has_power = any(pat.attr(p).is_power for p in slot.members)
            if has_power:
                if len(sources) != 1:
                    what = "no effort source" if not sources else "several effort sources"
                    raise NotSimulable(f"junction {slot.id} has {what}")
                slot.effort_source = sources[0]
                slot.e_off = e_off
                e_off += slot.dim
            slots.append(slot)
        self.slots = slots
        self.n_e = e_off
        self._slot_of = {p: s for s in slots for p in s.members}

        # per-component index plans into the junction effort vector
        def eidx(box, port):
            p = concat(concat(Name(["inner"]), box), port)
            s = self._slot_of[p]
            return list(range(s.e_off, s.e_off + s.dim))

        def xsrc(box, port):
            p = concat(concat(Name(["inner"]), box), port)
            s = self._slot_of[p]
            if s.x_index is not None:
                return [("x", int(i)) for i in s.x_index]
            if s.x_input is not None:
                return [("in", s.x_input)] if s.dim == 1 else [("in", f"{s.x_input}[{i}]") for i in range(s.dim)]
            return [None] * s.dim

        self.storage_effort_targets = []
        for name, c, idx in self.storages:
            tgt = []
            for p in c.iface:
                s = self._slot_of[concat(concat(Name(["inner"]), name), p)]
                if s.effort_source == ("storage", name, p):
                    tgt.extend(range(s.e_off, s.e_off + s.dim))
                else:
                    tgt.extend([-1] * s.dim)
            self.storage_effort_targets.append(np.array(tgt, dtype=int))

        # non-source flows: reversible and irreversible ports
        self.dissipative = []
        self.gyrators = []
        flow_cols = []
        for name, c in flat.components.items():
            if isinstance(c, (ReversibleComponent, IrreversibleComponent)):
                ports = c.x1 if isinstance(c, ReversibleComponent) else c.iface.power_ports
                e_index = np.array([i for p in ports for i in eidx(name, p)], dtype=int)
                x_plan = [src for p in c.iface for src in xsrc(name, p)]
                needed = set().union(*(e.symbols() for e in c.expressions())) if c.expressions() else set()
                for sym, src in zip(state_symbols(c.iface), x_plan):
                    if src is None and sym in needed:
                        raise NotSimulable(f"state {sym} of component {name} is not determined by any junction")
                x_plan = [src if src is not None else ("zero",) for src in x_plan]
                start = len(flow_cols)
                for p in ports:
                    slot = self._slot_of[concat(concat(Name(["inner"]), name), p)]
                    for k in range(slot.dim):
                        flow_cols.append((slot, k, name, p))
                entry = (name, c, e_index, x_plan, slice(start, len(flow_cols)))
                (self.gyrators if isinstance(c, ReversibleComponent) else self.dissipative).append(entry)
        self.flow_cols = flow_cols
        self.n_f = len(flow_cols)
        # junction balance: row per effort coordinate, summing component flows
        A = np.zeros((self.n_e, self.n_f))
        for col, (slot, k, _, _) in enumerate(flow_cols):
            A[slot.e_off + k, col] = 1.0
        self.balance = A
        self.lam = {}
        for s in slots:
            if s.effort_source is not None:
                q = pat.attr(s.members[0]).quantity
                self.lam[s.id] = lambda_of(env, q)
        self._plan()

    def _plan(self) -> None:
        """Precompute index arrays and compiled functions for the hot path."""
        self._st = []
        for (name, c, idx), tgt in zip(self.storages, self.storage_effort_targets):
            hfn, efn = c.compiled(self.env)
            mask = tgt >= 0
            self._st.append((hfn, efn, idx, tgt[mask], np.nonzero(mask)[0]))
        self._effort_inputs = [(s.e_off, s.effort_source[1]) for s in self.slots
                               if s.effort_source is not None and s.effort_source[0] == "input"]
        self._flow_inputs = [(s.e_off, s.flow_input) for s in self.slots
                             if s.effort_source is not None and s.effort_source[0] != "input" and s.flow_input]
        P = np.zeros((self.n, self.n_e))
        for s in self.slots:
            if s.effort_source is not None and s.effort_source[0] != "input":
                for k in range(s.dim):
                    P[s.x_index[k], s.e_off + k] = 1.0
        self._to_state = P

        def gatherer(plan):
            pos_x = np.array([i for i, src in enumerate(plan) if src[0] == "x"], dtype=int)
            idx_x = np.array([src[1] for src in plan if src[0] == "x"], dtype=int)
            ins = [(i, src[1]) for i, src in enumerate(plan) if src[0] == "in"]
            n = len(plan)
            if len(pos_x) == n:
                return lambda x, u: x[idx_x]

            def gather(x, u):
                v = np.zeros(n)
                v[pos_x] = x[idx_x]
                for i, key in ins:
                    v[i] = u[key]
                return v

            return gather

        self._gy = [(c.structure_function(self.env), e_index, gatherer(x_plan), cols)
                    for name, c, e_index, x_plan, cols in self.gyrators]
        self._dis = []
        for name, c, e_index, x_plan, cols in self.dissipative:
            self._dis.append((c.compiled(self.env), e_index, gatherer(x_plan), cols))

    # -- evaluation -------------------------------------------------------------

    def _inputs(self, t: float, overrides: Optional[Mapping[str, float]]) -> dict:
        vals = {k: float(fn(t)) for k, fn in self.signals.items()}
        if overrides:
            for k, v in overrides.items():
                if k not in self.signals:
                    raise KeyError(f"{k} is not a bound input")
                vals[k] = float(v)
        return vals

    def _core(self, t, x, u, diagnostics: bool):
        e = np.zeros(self.n_e)
        H = E = 0.0
        for hfn, efn, idx, tgt, src in self._st:
            xs = x[idx]
            h, d = hfn(xs)
            if len(tgt):
                e[tgt] = np.asarray(d, dtype=float)[src]
            if diagnostics:
                H += h
                E += efn(xs)[0]
        for off, key in self._effort_inputs:
            e[off] = u[key]
        F = np.zeros(self.n_f)
        sigma = 0.0
        theta0 = self.theta0
        for Lfn, e_index, gather, cols in self._gy:
            F[cols] = Lfn(gather(x, u)) @ e[e_index]
        for Mfn, e_index, gather, cols in self._dis:
            ee = e[e_index]
            M = Mfn(np.concatenate([ee, gather(x, u)]))
            Me = M @ ee
            F[cols] = Me / theta0
            if diagnostics:
                sigma += float(ee @ Me) / theta0 ** 2
        inner = self.balance @ F
        outer_flow = np.zeros(self.n_e)
        for off, key in self._flow_inputs:
            outer_flow[off] = u[key]
        source_flow = outer_flow - inner
        xdot = self._to_state @ source_flow
        if not diagnostics:
            return xdot, None, None
        outputs = {}
        for s in self.slots:
            if s.effort_source is None:
                continue
            sl = slice(s.e_off, s.e_off + s.dim)
            if s.effort_source[0] == "input":
                source_flow[sl] = 0.0
                outer_flow[sl] = inner[sl]
                outputs[f"{s.outer}.f"] = float(inner[s.e_off]) if s.dim == 1 else inner[sl].copy()
            elif s.outer is not None:
                outputs[f"{s.outer}.e"] = float(e[s.e_off]) if s.dim == 1 else e[sl].copy()
        # power residual per junction: inner power minus outer power
        residual = 0.0
        sup_x = sup_e = 0.0
        dH = 0.0
        for s in self.slots:
            if s.effort_source is None:
                continue
            sl = slice(s.e_off, s.e_off + s.dim)
            ej = e[sl]
            p_in = float(ej @ inner[sl]) + float(ej @ source_flow[sl])
            p_out = float(ej @ outer_flow[sl]) if s.outer is not None else 0.0
            residual = max(residual, abs(p_in - p_out))
            if s.effort_source[0] == "storage":
                dH += float(ej @ source_flow[sl])
            if s.outer is not None and self.flat.outer[s.outer].is_power:
                sup_x += p_out
                sup_e += float((ej + self.lam[s.id]) @ outer_flow[sl])
        for ref, i, lam in self.env_quantities:
            E += lam * x[i]
        destroyed = self.theta0 * sigma
        diag = dict(
            E_total=float(E),
            H_total=float(H),
            S_prod_rate=sigma,
            max_power_residual=residual,
            supplied_exergy=sup_x,
            supplied_energy=sup_e,
            exergy_balance=dH - sup_x + destroyed,
            efforts=e,
            flows=F,
        )
        return xdot, outputs, diag

    def rhs(self, t: float, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = {k: float(fn(t)) for k, fn in self.signals.items()} if self.signals else {}
        return self._core(t, x, u, False)[0]

    def evaluate(self, t: float, x, input_values: Optional[Mapping[str, float]] = None) -> Evaluation:
        x = np.asarray(x, dtype=float)
        u = self._inputs(t, input_values)
        xdot, outputs, d = self._core(t, x, u, True)
        efforts = {}
        for s in self.slots:
            if s.effort_source is None:
                continue
            for p in s.members:
                if self.flat.pattern.attr(p).is_power:
                    efforts[display(p)] = float(d["efforts"][s.e_off]) if s.dim == 1 else d["efforts"][s.e_off : s.e_off + s.dim]
        flows = {}
        for col, (slot, k, name, p) in enumerate(self.flow_cols):
            key = f"{concat(name, p)}" + (f"[{k}]" if slot.dim > 1 else "")
            flows[key] = float(d["flows"][col])
        return Evaluation(
            xdot, efforts, flows, outputs,
            d["E_total"], d["H_total"], d["S_prod_rate"], d["max_power_residual"],
            d["supplied_exergy"], d["supplied_energy"], d["exergy_balance"],
        )

    def initial_state(self, values: Optional[Mapping[str, float]] = None) -> np.ndarray:
        x = np.zeros(self.n)
        for k, v in (values or {}).items():
            if k not in self.state_names:
                raise KeyError(f"unknown state {k}; states are {', '.join(self.state_names)}")
            x[self.state_names.index(k)] = float(v)
        return x

    @property
    def output_names(self) -> list[str]:
        out = []
        for s in self.slots:
            if s.outer is None or s.effort_source is None:
                continue
            out.append(f"{s.outer}.f" if s.effort_source[0] == "input" else f"{s.outer}.e")
        return out


def assemble(flat: FlattenedSystem, env: ReferenceEnvironment, inputs: Optional[Mapping[str, Signal]] = None) -> AssembledModel:
    return AssembledModel(flat, env, inputs)


# --- simulation ------------------------------------------------------------------

DIAGNOSTICS = ("E_total", "H_total", "S_prod_rate", "max_power_residual")


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    state_names: list
    E_total: np.ndarray
    H_total: np.ndarray
    S_prod_rate: np.ndarray
    max_power_residual: np.ndarray
    supplied_exergy: np.ndarray
    supplied_energy: np.ndarray
    exergy_balance: np.ndarray
    outputs: dict

    def __post_init__(self):
        n = len(self.t)
        if self.x.shape[0] != n or any(len(getattr(self, k)) != n for k in DIAGNOSTICS):
            raise ValueError("trajectory rows do not match the time grid")

    def state(self, name: str) -> np.ndarray:
        return self.x[:, self.state_names.index(name)]

    def to_csv(self, target=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", *self.state_names, *DIAGNOSTICS])
        diag = np.column_stack([getattr(self, k) for k in DIAGNOSTICS])
        for i in range(len(self.t)):
            w.writerow([repr(float(v)) for v in (self.t[i], *self.x[i], *diag[i])])
        text = buf.getvalue()
        if target is not None:
            with open(target, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text


def simulate(model: AssembledModel, t_end: float, dt: float, x0=None) -> Trajectory:
    """Classical fixed-step Runge-Kutta of order four."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    steps = int(round(t_end / dt))
    if steps < 0 or not math.isclose(steps * dt, t_end, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError("t_end must be a nonnegative multiple of dt")
    if x0 is None:
        x = np.zeros(model.n)
    elif isinstance(x0, Mapping):
        x = model.initial_state(x0)
    else:
        x = np.array(x0, dtype=float).reshape(model.n)
    t = np.arange(steps + 1) * dt
    X = np.empty((steps + 1, model.n))
    rows = {k: np.empty(steps + 1) for k in ("E_total", "H_total", "S_prod_rate", "max_power_residual",
                                             "supplied_exergy", "supplied_energy", "exergy_balance")}
    outputs = {k: np.empty(steps + 1) for k in model.output_names}
    f = model.rhs
    for i in range(steps + 1):
        if not np.all(np.isfinite(x)):
            raise NonFiniteState(f"state became non-finite at t = {t[i]}")
        X[i] = x
        ti = t[i]
        u = model._inputs(ti, None)
        k1, outs, d = model._core(ti, x, u, True)
        for k in rows:
            rows[k][i] = d[k]
        for k in outputs:
            outputs[k][i] = outs[k]
        if i == steps:
            break
        k2 = f(ti + dt / 2, x + dt / 2 * k1)
        k3 = f(ti + dt / 2, x + dt / 2 * k2)
        k4 = f(ti + dt, x + dt * k3)
        x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return Trajectory(t, X, list(model.state_names), outputs=outputs, **rows)


# --- audits ----------------------------------------------------------------------

@dataclass
class AuditReport:
    max_power_residual: float
    energy_drift: float
    max_exergy_balance: float
    min_entropy_production: float
    max_exergy_increase: float
    isolated: bool

    def lines(self) -> list[str]:
        return [
            f"max junction power residual: {self.max_power_residual:.3e}",
            f"relative energy drift: {self.energy_drift:.3e}",
            f"max exergy balance residual: {self.max_exergy_balance:.3e}",
            f"min entropy production rate: {self.min_entropy_production:.3e}",
            f"max exergy increase per step: {self.max_exergy_increase:.3e}" + (" (isolated)" if self.isolated else ""),
        ]


def audit(model: AssembledModel, traj: Trajectory) -> AuditReport:
    supplied = np.concatenate([[0.0], np.cumsum(np.diff(traj.t) * (traj.supplied_energy[1:] + traj.supplied_energy[:-1]) / 2)])
    drift = traj.E_total - traj.E_total[0] - supplied
    scale = float(np.max(np.abs(traj.E_total))) if len(traj.t) else 0.0
    energy_drift = float(np.max(np.abs(drift))) / scale if scale > 0 else float(np.max(np.abs(drift), initial=0.0))
    dH = np.diff(traj.H_total)
    isolated = not any(k.endswith((".e", ".f")) for k in model.signals)
    return AuditReport(
        max_power_residual=float(np.max(traj.max_power_residual, initial=0.0)),
        energy_drift=energy_drift,
        max_exergy_balance=float(np.max(np.abs(traj.exergy_balance), initial=0.0)),
        min_entropy_production=float(np.min(traj.S_prod_rate, initial=np.inf)) if len(traj.t) else 0.0,
        max_exergy_increase=float(np.max(dH, initial=0.0)),
        isolated=isolated,
    )


# --- listings --------------------------------------------------------------------

def _prefixed(c: Component, name: Name) -> dict:
    ports = list(c.iface)
    out = {}
    for p in ports:
        for kind in ("x", "e", "f"):
            for s in port_symbols(p, c.iface[p].dim, kind):
                out[s] = f"{name}.{s}"
    return out


def component_equations(name: Name, c: Component, env: ReferenceEnvironment) -> list[str]:
    ren = _prefixed(c, name)
    lines = []
    if isinstance(c, StorageComponent):
        h = c.exergy(env).rename(ren)
        for xs, es, fs in zip(state_symbols(c.iface), effort_symbols(c.iface), flow_symbols(c.iface)):
            lines.append(f"d/dt {ren[xs]} = {ren[fs]}")
            lines.append(f"{ren[es]} = d({h})/d({ren[xs]})")
    elif isinstance(c, EnvironmentComponent):
        for xs, es, fs in zip(state_symbols(c.iface), effort_symbols(c.iface), flow_symbols(c.iface)):
            lines.append(f"d/dt {ren[xs]} = {ren[fs]}")
            lines.append(f"{ren[es]} = 0")
    elif isinstance(c, ReversibleComponent):
        e1 = [ren[s] for s in effort_symbols(c.iface, c.x1)]
        f1 = [ren[s] for s in flow_symbols(c.iface, c.x1)]
        e2 = [ren[s] for s in effort_symbols(c.iface, c.x2)]
        f2 = [ren[s] for s in flow_symbols(c.iface, c.x2)]
        for i in range(c.n1):
            terms = []
            if c.L:
                terms += [f"({c.L[i][j].rename(ren)})*{e1[j]}" for j in range(c.n1) if not c.L[i][j].is_zero()]
            if c.g:
                terms += [f"-({c.g[i][k].rename(ren)})*{f2[k]}" for k in range(c.n2) if not c.g[i][k].is_zero()]
            if c.C:
                terms += [f"({c.C[r][i].rename(ren)})*{name}.lambda_c[{r}]" for r in range(c.nc) if not c.C[r][i].is_zero()]
            lines.append(f"{f1[i]} = " + (" + ".join(terms) if terms else "0"))
        for k in range(c.n2):
            terms = [f"({c.g[i][k].rename(ren)})*{e1[i]}" for i in range(c.n1) if c.g and not c.g[i][k].is_zero()]
            lines.append(f"{e2[k]} = " + (" + ".join(terms) if terms else "0"))
        for r in range(c.nc):
            terms = [f"({c.C[r][i].rename(ren)})*{e1[i]}" for i in range(c.n1) if not c.C[r][i].is_zero()]
            lines.append("0 = -(" + (" + ".join(terms) if terms else "0") + ")")
    elif isinstance(c, IrreversibleComponent):
        es = [ren[s] for s in effort_symbols(c.iface)]
        fs = [ren[s] for s in flow_symbols(c.iface)]
        for i in range(c.n):
            terms = [f"({c.M[i][j].rename(ren)})*{es[j]}" for j in range(c.n) if not c.M[i][j].is_zero()]
            lines.append(f"{fs[i]} = (" + (" + ".join(terms) if terms else "0") + ")/theta0")
    return lines


def equation_listing(flat: FlattenedSystem, env: ReferenceEnvironment) -> list[str]:
    """Junction equations followed by every component relation, with hierarchical names."""
    lines = junction_relation(flat.pattern).equations()
    for name, c in flat.components.items():
        lines.extend(component_equations(name, c, env))
    return lines
