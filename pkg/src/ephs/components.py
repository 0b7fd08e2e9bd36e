"""Primitive components and their thermodynamic-consistency validators.

Expressions inside a component refer to its own ports: ``<port>.x`` is the
state and ``<port>.e`` the effort (``<port>.x[i]`` for coordinate ``i`` of a
multi-dimensional quantity).  Parameters are plain identifiers; ``theta0``
and ``env.<port>`` are the reference-environment values.
"""
from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import qmc

from .expr import Const, DomainError, Expr, UnboundSymbol, Var, compile_grad, compile_many, infer_parity
from .interfaces import Interface, is_subinterface
from .names import Name, NameLike, as_name
from .quantities import ENTROPY, ReferenceEnvironment, lambda_of

# condition names used in validation reports
SKEW = "skew_symmetry"
CONSERVATION = "conservation"
PARITY = "time_reversal_parity"
SYMMETRY = "symmetry"
PSD = "nonnegative_definite"
ENERGY = "energy_conservation"
NON_ENTROPY = "non_entropy_conservation"
ANTI_PARITY = "anti_time_reversal_parity"
SUBINTERFACE = "subinterface"
DOMAIN = "domain"

ENTROPY_MARGIN = 1.0  # keep theta0 + s.e at least this far above zero when sampling
DEFAULT_BOUNDS = (-5.0, 5.0)


class ComponentError(ValueError):
    pass


def port_symbols(port: Name, dim: int, kind: str) -> list[str]:
    if dim == 1:
        return [f"{port}.{kind}"]
    return [f"{port}.{kind}[{i}]" for i in range(dim)]


def state_symbols(iface: Interface) -> list[str]:
    return [s for p, a in iface.items() for s in port_symbols(p, a.dim, "x")]


def effort_symbols(iface: Interface, ports: Optional[Sequence[Name]] = None) -> list[str]:
    ports = iface.power_ports if ports is None else ports
    return [s for p in ports for s in port_symbols(p, iface[p].dim, "e")]


def flow_symbols(iface: Interface, ports: Optional[Sequence[Name]] = None) -> list[str]:
    ports = iface.power_ports if ports is None else ports
    return [s for p in ports for s in port_symbols(p, iface[p].dim, "f")]


def symbol_parities(iface: Interface, params: Mapping[str, float], env: Optional[ReferenceEnvironment] = None) -> dict:
    """States and efforts inherit the parity of their quantity; constants are even."""
    out = {k: 1 for k in params}
    out["theta0"] = 1
    if env is not None:
        out.update({k: 1 for k in env.bindings()})
    for p, a in iface.items():
        for kind in ("x", "e"):
            for s in port_symbols(p, a.dim, kind):
                out[s] = a.quantity.parity
    return out


def _coordinate_parities(iface: Interface, ports: Sequence[Name]) -> list[int]:
    return [iface[p].quantity.parity for p in ports for _ in range(iface[p].dim)]


def _lambda_vector(iface: Interface, ports: Sequence[Name], env: ReferenceEnvironment, ref_port=None) -> np.ndarray:
    out = []
    for p in ports:
        a = iface[p]
        out.extend([lambda_of(env, a.quantity, ref_port)] * a.dim)
    return np.array(out, dtype=float)


def _constants(params: Mapping[str, float], env: ReferenceEnvironment) -> dict:
    out = dict(env.bindings())
    out.update(params)
    return out


def _bind(expr: Expr, consts: Mapping[str, float]) -> Expr:
    used = expr.symbols() & set(consts)
    return expr.substitute({k: Const(float(consts[k])) for k in used}) if used else expr


def _as_matrix(rows, nrows: int, ncols: int, what: str) -> Optional[tuple]:
    if rows is None:
        return None
    rows = tuple(tuple(Const(float(v)) if not isinstance(v, Expr) else v for v in r) for r in rows)
    if nrows == 0 and len(rows) == 0:
        return rows
    if len(rows) != nrows or any(len(r) != ncols for r in rows):
        shape = (len(rows), len(rows[0]) if rows else 0)
        raise ComponentError(f"{what} must be {nrows}x{ncols}, got {shape[0]}x{shape[1]}")
    return rows


class Component:
    kind = "component"

    def __init__(self, iface: Interface, params: Optional[Mapping[str, float]] = None):
        self.iface = iface if isinstance(iface, Interface) else Interface(iface)
        self.params = dict(params or {})

    def expressions(self) -> list[Expr]:
        return []

    def allowed_symbols(self, env: ReferenceEnvironment) -> set:
        return set(self.params) | set(env.bindings())

    def check_symbols(self, env: ReferenceEnvironment) -> None:
        allowed = self.allowed_symbols(env)
        for e in self.expressions():
            missing = sorted(e.symbols() - allowed)
            if missing:
                raise UnboundSymbol(missing[0])


class StorageComponent(Component):
    kind = "storage"

    def __init__(self, iface, energy: Expr, params=None):
        super().__init__(iface, params)
        if self.iface.state_ports:
            raise ComponentError("storage components have power ports only")
        self.energy = energy
        self._cache: dict = {}

    def expressions(self):
        return [self.energy]

    def allowed_symbols(self, env):
        return super().allowed_symbols(env) | set(state_symbols(self.iface))

    def exergy(self, env: ReferenceEnvironment) -> Expr:
        return exergy_from_energy(self, env)

    def compiled(self, env: ReferenceEnvironment):
        """``f(x) -> (H, dH/dx)`` and ``g(x) -> (E,)`` for state vectors ``x``."""
        key = tuple(sorted(env.bindings().items()))
        if key not in self._cache:
            consts = _constants(self.params, env)
            xs = state_symbols(self.iface)
            h = _bind(self.exergy(env), consts)
            e = _bind(self.energy, consts)
            self._cache[key] = (compile_grad(h, xs, xs), compile_many([e], xs))
        return self._cache[key]


class EnvironmentComponent(Component):
    kind = "environment"

    def check_against(self, env: ReferenceEnvironment) -> bool:
        return is_subinterface(self.iface, env.interface())


class ReversibleComponent(Component):
    """Dirac structure in constrained hybrid input-output form.

    The power ports are split into ``x1`` and ``x2``; ``L`` acts on the first
    factor, ``g`` maps the second into the first and ``C`` lists constraints.
    Absent matrices are zero.
    """

    kind = "reversible"

    def __init__(self, iface, x1: Sequence[NameLike], x2: Sequence[NameLike] = (), L=None, g=None, C=None, params=None):
        super().__init__(iface, params)
        self.x1 = [as_name(p) for p in x1]
        self.x2 = [as_name(p) for p in x2]
        power = set(self.iface.power_ports)
        split = self.x1 + self.x2
        for p in split:
            if p not in power:
                raise ComponentError(f"{p} in the X1/X2 split is not a power port")
        if len(set(split)) != len(split) or set(split) != power:
            raise ComponentError("x1 and x2 must partition the power ports")
        self.n1 = sum(self.iface[p].dim for p in self.x1)
        self.n2 = sum(self.iface[p].dim for p in self.x2)
        self.L = _as_matrix(L, self.n1, self.n1, "L")
        self.g = _as_matrix(g, self.n1, self.n2, "g")
        nc = len(C) if C is not None else 0
        self.C = _as_matrix(C, nc, self.n1, "C")
        self.nc = nc
        self._cache: dict = {}

    def expressions(self):
        return [e for m in (self.L, self.g, self.C) if m for row in m for e in row]

    def allowed_symbols(self, env):
        return super().allowed_symbols(env) | set(state_symbols(self.iface))

    @property
    def has_constraints(self) -> bool:
        return bool(self.C) and any(not e.is_zero() for row in self.C for e in row)

    @property
    def has_transformer(self) -> bool:
        return bool(self.g) and any(not e.is_zero() for row in self.g for e in row)

    def structure_function(self, env: ReferenceEnvironment):
        """``f(x) -> L`` alone, for the simulator's gyrator-only path."""
        key = ("L",) + tuple(sorted(env.bindings().items()))
        if key not in self._cache:
            n1 = self.n1
            if not self.L:
                zero = np.zeros((n1, n1))
                self._cache[key] = lambda x: zero
            else:
                consts = _constants(self.params, env)
                fn = compile_many([_bind(e, consts) for row in self.L for e in row], state_symbols(self.iface))
                self._cache[key] = lambda x: np.array(fn(x), dtype=float).reshape(n1, n1)
        return self._cache[key]

    def compiled(self, env: ReferenceEnvironment):
        """``f(x) -> (L, g, C)`` as arrays, for the state vector of all ports."""
        key = tuple(sorted(env.bindings().items()))
        if key not in self._cache:
            consts = _constants(self.params, env)
            xs = state_symbols(self.iface)
            shapes = [(self.n1, self.n1, self.L), (self.n1, self.n2, self.g), (self.nc, self.n1, self.C)]
            flat = [_bind(e, consts) for _, _, m in shapes if m for row in m for e in row]
            fn = compile_many(flat, xs)

            def matrices(x):
                vals = fn(x)
                out, k = [], 0
                for r, c, m in shapes:
                    if m:
                        out.append(np.array(vals[k : k + r * c], dtype=float).reshape(r, c))
                        k += r * c
                    else:
                        out.append(np.zeros((r, c)))
                return tuple(out)

            self._cache[key] = matrices
        return self._cache[key]


class IrreversibleComponent(Component):
    """Onsager structure ``f = M(e) e / theta0`` over all power ports."""

    kind = "irreversible"

    def __init__(self, iface, M, params=None):
        super().__init__(iface, params)
        self.n = sum(self.iface[p].dim for p in self.iface.power_ports)
        self.M = _as_matrix(M, self.n, self.n, "M")
        self._cache: dict = {}

    def expressions(self):
        return [e for row in self.M for e in row]

    def allowed_symbols(self, env):
        return super().allowed_symbols(env) | set(state_symbols(self.iface)) | set(effort_symbols(self.iface))

    def args(self) -> list[str]:
        return effort_symbols(self.iface) + state_symbols(self.iface)

    def compiled(self, env: ReferenceEnvironment):
        """``f(a) -> M`` where ``a`` stacks efforts then states."""
        key = tuple(sorted(env.bindings().items()))
        if key not in self._cache:
            consts = _constants(self.params, env)
            fn = compile_many([_bind(e, consts) for row in self.M for e in row], self.args())
            n = self.n
            self._cache[key] = lambda a: np.array(fn(a), dtype=float).reshape(n, n)
        return self._cache[key]


# --- semantics -----------------------------------------------------------------

def exergy_from_energy(c: StorageComponent, env: ReferenceEnvironment) -> Expr:
    """``H = E - sum over ports of lambda * x`` for ports matching the environment."""
    h = c.energy
    for p, a in c.iface.items():
        lam = lambda_of(env, a.quantity)
        if lam != 0.0:
            for s in port_symbols(p, a.dim, "x"):
                h = h - Const(lam) * Var(s)
    return h


def storage_semantics(c: StorageComponent, env: ReferenceEnvironment, x) -> tuple[np.ndarray, list[str]]:
    """Efforts ``dH/dx`` at ``x``, and the flow symbols that equal ``dx/dt``."""
    fn, _ = c.compiled(env)
    _, d = fn(np.asarray(x, dtype=float))
    return np.asarray(d, dtype=float), flow_symbols(c.iface)


def environment_semantics(c: EnvironmentComponent, x=None) -> np.ndarray:
    return np.zeros(sum(c.iface[p].dim for p in c.iface.power_ports))


def reversible_flows(c: ReversibleComponent, env: ReferenceEnvironment, e1, f2, lam_c, x):
    """Return ``(f1, e2, -C e1)`` for the hybrid input-output form."""
    L, g, C = c.compiled(env)(np.asarray(x, dtype=float))
    e1 = np.asarray(e1, dtype=float).reshape(c.n1)
    f2 = np.asarray(f2, dtype=float).reshape(c.n2)
    lam_c = np.asarray(lam_c, dtype=float).reshape(c.nc)
    f1 = L @ e1 - g @ f2 + C.T @ lam_c
    e2 = g.T @ e1
    return f1, e2, -(C @ e1)


def irreversible_flows(c: IrreversibleComponent, env: ReferenceEnvironment, e, x) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    M = c.compiled(env)(np.concatenate([e, np.asarray(x, dtype=float)]))
    return M @ e / env.theta0


# --- validation ----------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    condition: str
    message: str
    sample: Optional[dict] = None
    entry: Optional[tuple] = None

    def __str__(self) -> str:
        where = f" at entry {self.entry}" if self.entry is not None else ""
        at = ""
        if self.sample:
            at = " (sample " + ", ".join(f"{k}={v:.6g}" for k, v in self.sample.items()) + ")"
        return f"{self.condition}{where}: {self.message}{at}"


@dataclass
class ValidationReport:
    component: str
    kind: str
    samples: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def conditions(self) -> set:
        return {v.condition for v in self.violations}

    def add(self, v: Violation) -> None:
        # one witness per condition and entry keeps reports readable
        if not any(o.condition == v.condition and o.entry == v.entry for o in self.violations):
            self.violations.append(v)

    def lines(self) -> list[str]:
        if self.ok:
            return [f"{self.component}: ok ({self.kind}, {self.samples} samples)"]
        return [f"{self.component}: {v}" for v in self.violations]


def sample_points(
    symbols: Sequence[str],
    n: int = 64,
    seed: int = 0,
    bounds: Optional[Mapping[str, tuple]] = None,
    lower: Optional[Mapping[str, float]] = None,
) -> np.ndarray:
    """Zero point, unit basis points, then ``n`` scrambled Halton points in the box."""
    d = len(symbols)
    pts = [np.zeros(d)] + list(np.eye(d))
    if d and n > 0:
        lo = np.array([(bounds or {}).get(s, DEFAULT_BOUNDS)[0] for s in symbols], dtype=float)
        hi = np.array([(bounds or {}).get(s, DEFAULT_BOUNDS)[1] for s in symbols], dtype=float)
        u = qmc.Halton(d, scramble=True, seed=seed).random(n)
        pts.extend(qmc.scale(u, lo, hi) if d else u)
    out = np.array(pts, dtype=float).reshape(len(pts), d)
    for i, s in enumerate(symbols):
        if lower and s in lower:
            out[:, i] = np.maximum(out[:, i], lower[s])
    return out


def _witness(symbols, point) -> dict:
    return {s: float(v) for s, v in zip(symbols, point)}


def _entropy_lower(iface: Interface, env: ReferenceEnvironment) -> dict:
    out = {}
    for p in iface.power_ports:
        if iface[p].quantity.label == ENTROPY:
            for s in port_symbols(p, iface[p].dim, "e"):
                out[s] = -env.theta0 + ENTROPY_MARGIN
    return out


def _parity_failures(entries, rows, cols, row_par, col_par, parities, nonzero, sign: int, condition: str, report):
    for i in range(rows):
        for j in range(cols):
            if not nonzero[i, j]:
                continue
            pe = infer_parity(entries[i][j], parities)
            if pe is None:
                report.add(Violation(condition, f"parity of {entries[i][j]} is indeterminate", entry=(i, j)))
            elif sign * row_par[i] != pe * col_par[j]:
                report.add(Violation(
                    condition,
                    f"P(entry) = {pe:+d} but row/column parities are {row_par[i]:+d}/{col_par[j]:+d}",
                    entry=(i, j),
                ))


def validate_reversible(
    c: ReversibleComponent,
    env: ReferenceEnvironment,
    samples: int = 64,
    seed: int = 0,
    name: str = "reversible",
    bounds: Optional[Mapping[str, tuple]] = None,
    tol: float = 1e-12,
) -> ValidationReport:
    report = ValidationReport(name, c.kind)
    xs = state_symbols(c.iface)
    pts = sample_points(xs, samples, seed, bounds)
    report.samples = len(pts)
    fn = c.compiled(env)
    lambdas = []
    for ref in env.ports:
        lam = _lambda_vector(c.iface, c.x1, env, ref)
        if np.any(lam):
            lambdas.append((ref, lam))
    nz_L = np.zeros((c.n1, c.n1), dtype=bool)
    nz_g = np.zeros((c.n1, c.n2), dtype=bool)
    for pt in pts:
        try:
            L, g, _ = fn(pt)
        except DomainError as exc:
            report.add(Violation(DOMAIN, str(exc), _witness(xs, pt)))
            continue
        nz_L |= L != 0
        nz_g |= g != 0
        skew = np.abs(L + L.T)
        for i, j in zip(*np.nonzero(skew > tol)):
            if i <= j:
                report.add(Violation(SKEW, f"|L[{i},{j}] + L[{j},{i}]| = {skew[i, j]:.3g}", _witness(xs, pt), (int(i), int(j))))
        for ref, lam in lambdas:
            bound = tol * (1.0 + np.max(np.abs(lam)))
            for label, vec in (("L", L @ lam), ("g^T", g.T @ lam)):
                if vec.size and np.max(np.abs(vec)) > bound:
                    report.add(Violation(
                        CONSERVATION,
                        f"{label} applied to lambda of env port {ref} is {np.max(np.abs(vec)):.3g}, not 0",
                        _witness(xs, pt),
                        (label, str(ref)),
                    ))
    parities = symbol_parities(c.iface, c.params, env)
    p1 = _coordinate_parities(c.iface, c.x1)
    p2 = _coordinate_parities(c.iface, c.x2)
    if c.L:
        _parity_failures(c.L, c.n1, c.n1, p1, p1, parities, nz_L, -1, PARITY, report)
    if c.g:
        _parity_failures(c.g, c.n1, c.n2, p1, p2, parities, nz_g, 1, PARITY, report)
    return report


def validate_irreversible(
    c: IrreversibleComponent,
    env: ReferenceEnvironment,
    samples: int = 64,
    seed: int = 0,
    name: str = "irreversible",
    bounds: Optional[Mapping[str, tuple]] = None,
    tol: float = 1e-12,
    psd_tol: float = 1e-10,
) -> ValidationReport:
    report = ValidationReport(name, c.kind)
    args = c.args()
    pts = sample_points(args, samples, seed, bounds, _entropy_lower(c.iface, env))
    report.samples = len(pts)
    fn = c.compiled(env)
    power = c.iface.power_ports
    n_e = c.n
    lam_all = _lambda_vector(c.iface, power, env)
    non_entropy = []
    for ref, port in env.ports.items():
        if port.quantity.label == ENTROPY:
            continue
        lam = _lambda_vector(c.iface, power, env, ref)
        if np.any(lam):
            non_entropy.append((ref, lam))
    nz = np.zeros((n_e, n_e), dtype=bool)
    for pt in pts:
        w = _witness(args, pt)
        try:
            M = fn(pt)
        except DomainError as exc:
            report.add(Violation(DOMAIN, str(exc), w))
            continue
        e = pt[:n_e]
        nz |= M != 0
        scale = 1.0 + float(np.max(np.abs(M), initial=0.0))
        asym = np.abs(M - M.T)
        for i, j in zip(*np.nonzero(asym > tol * scale)):
            if i < j:
                report.add(Violation(SYMMETRY, f"|M[{i},{j}] - M[{j},{i}]| = {asym[i, j]:.3g}", w, (int(i), int(j))))
        if n_e:
            norm = float(np.linalg.norm(M, 2))
            low = float(np.min(np.linalg.eigvalsh((M + M.T) / 2)))
            if low < -psd_tol * norm:
                report.add(Violation(PSD, f"smallest eigenvalue {low:.3g}", w))
        absolute = lam_all + e
        r = M @ absolute
        if r.size and np.max(np.abs(r)) > tol * (1.0 + np.max(np.abs(absolute))) * scale:
            report.add(Violation(ENERGY, f"|M (lambda + e)| = {np.max(np.abs(r)):.3g}", w))
        for ref, lam in non_entropy:
            r = M @ lam
            if np.max(np.abs(r)) > tol * (1.0 + np.max(np.abs(lam))) * scale:
                report.add(Violation(
                    NON_ENTROPY,
                    f"M applied to lambda of env port {ref} is {np.max(np.abs(r)):.3g}, not 0",
                    w,
                    str(ref),
                ))
    parities = symbol_parities(c.iface, c.params, env)
    pp = _coordinate_parities(c.iface, power)
    _parity_failures(c.M, n_e, n_e, pp, pp, parities, nz, 1, ANTI_PARITY, report)
    return report


def validate_environment(c: EnvironmentComponent, env: ReferenceEnvironment, name: str = "environment") -> ValidationReport:
    report = ValidationReport(name, c.kind, samples=0)
    if not c.check_against(env):
        report.add(Violation(SUBINTERFACE, "interface is not a subinterface of the reference environment"))
    return report


def validate_component(c: Component, env: ReferenceEnvironment, samples: int = 64, seed: int = 0, name: str = "") -> ValidationReport:
    name = name or c.kind
    c.check_symbols(env)
    if isinstance(c, ReversibleComponent):
        return validate_reversible(c, env, samples, seed, name)
    if isinstance(c, IrreversibleComponent):
        return validate_irreversible(c, env, samples, seed, name)
    if isinstance(c, EnvironmentComponent):
        return validate_environment(c, env, name)
    return ValidationReport(name, c.kind)
