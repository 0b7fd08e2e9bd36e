import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ephs.components import (
    ANTI_PARITY,
    CONSERVATION,
    ENERGY,
    NON_ENTROPY,
    PARITY,
    PSD,
    SKEW,
    SUBINTERFACE,
    SYMMETRY,
    EnvironmentComponent,
    environment_semantics,
    exergy_from_energy,
    irreversible_flows,
    reversible_flows,
    sample_points,
    storage_semantics,
    validate_component,
    validate_environment,
    validate_irreversible,
    validate_reversible,
)
from ephs.expr import UnboundSymbol, parse
from ephs.interfaces import Interface, PortAttr
from ephs.modelfile import load_model
from ephs.quantities import default_environment, standard_registry

from conftest import DATA, model_path
from oracles import THETA0, damper_equations

ENV = default_environment()
PI0 = 101325.0


@pytest.fixture(scope="module")
def library():
    return load_model(model_path("library.ephs").read_text())


@pytest.fixture(scope="module")
def mutants():
    return load_model((DATA / "mutants.ephs").read_text())


def test_exergy_examples(library, motor):
    gas = library.components["gas"]
    h = exergy_from_energy(gas, ENV)
    b = {"s.x": 0.3, "v.x": 2.0}
    assert h.eval(b) == pytest.approx(math.exp(0.3) / 2.0 - THETA0 * 0.3 + PI0 * 2.0)
    coil = motor.components["coil_s"]
    assert exergy_from_energy(coil, ENV) == coil.energy
    zero = type(gas)(gas.iface, parse("0"))
    assert exergy_from_energy(zero, ENV).eval(b) == pytest.approx(-THETA0 * 0.3 + PI0 * 2.0)


def test_storage_efforts(library, motor):
    gas = library.components["gas"]
    s, v = 0.3, 2.0
    e, flows = storage_semantics(gas, ENV, [s, v])
    theta = math.exp(s) / v
    pressure = math.exp(s) / v**2
    assert e == pytest.approx([theta - THETA0, -(pressure - PI0)])
    assert flows == ["s.f", "v.f"]
    mass = motor.components["mass"]
    assert storage_semantics(mass, ENV, [3.0])[0] == pytest.approx([3.0])
    assert storage_semantics(mass, ENV, [0.0])[0][0] == 0.0


@given(st.floats(-2, 2), st.floats(0.5, 3))
def test_storage_effort_matches_finite_differences(s, v):
    gas = load_model(model_path("library.ephs").read_text()).components["gas"]
    h = exergy_from_energy(gas, ENV)
    e, _ = storage_semantics(gas, ENV, [s, v])
    step = 1e-6
    fd = [
        (h.eval({"s.x": s + step, "v.x": v}) - h.eval({"s.x": s - step, "v.x": v})) / (2 * step),
        (h.eval({"s.x": s, "v.x": v + step}) - h.eval({"s.x": s, "v.x": v - step})) / (2 * step),
    ]
    assert np.all(np.abs(e - fd) <= 1e-6 * (1 + np.abs(e)))


def test_environment_semantics(library, oscillator):
    assert list(environment_semantics(oscillator.components["env"])) == [0.0]
    assert list(environment_semantics(library.components["env"])) == [0.0, 0.0]
    f = np.array([1.5, -2.0])
    assert float(environment_semantics(library.components["env"]) @ f) == 0.0


def test_environment_must_be_subinterface():
    reg = standard_registry()
    bad = EnvironmentComponent(Interface({"m": PortAttr(reg["momentum"])}))
    assert SUBINTERFACE in validate_environment(bad, ENV).conditions


@pytest.mark.parametrize("name", ["piston"])
def test_textbook_reversible_examples_pass(library, name):
    assert validate_reversible(library.components[name], ENV).ok


def test_motor_components_pass(motor):
    for name, c in motor.components.items():
        report = validate_component(c, motor.env, name=name)
        assert report.ok, report.lines()


@pytest.mark.parametrize("name", ["friction", "heat_transfer"])
def test_textbook_irreversible_examples_pass(library, name):
    assert validate_irreversible(library.components[name], ENV).ok


@pytest.mark.parametrize(
    "name, condition",
    [
        ("non_skew", SKEW),
        ("displacement_gyrator", PARITY),
        ("asymmetric", SYMMETRY),
        ("energy_leak", ENERGY),
        ("negative", PSD),
        ("volume_exchange", NON_ENTROPY),
    ],
)
def test_mutants_fail_with_named_condition(mutants, name, condition):
    report = validate_component(mutants.components[name], mutants.env, name=name)
    assert condition in report.conditions
    assert any(line.startswith(f"{name}: {condition}") for line in report.lines())


def test_asymmetric_mutant_also_breaks_energy(mutants):
    report = validate_component(mutants.components["asymmetric"], mutants.env)
    assert report.conditions == {SYMMETRY, ENERGY}


def test_piston_conservation_is_detected_when_broken(library):
    piston = library.components["piston"]
    broken = type(piston)(piston.iface, ["v1", "v2", "p"], L=[[0, 0, parse("a")], [0, 0, parse("a")], [parse("-a"), parse("-a"), 0]], params=piston.params)
    assert CONSERVATION in validate_reversible(broken, ENV).conditions


def test_anti_parity_is_detected(library):
    friction = library.components["friction"]
    bad = type(friction)(friction.iface, [[parse("1"), parse("1")], [parse("1"), parse("1")]])
    assert ANTI_PARITY in validate_irreversible(bad, ENV).conditions


def test_unbound_symbol_is_reported(library):
    friction = library.components["friction"]
    bad = type(friction)(friction.iface, [[parse("k"), 0], [0, 0]])
    with pytest.raises(UnboundSymbol):
        validate_component(bad, ENV)


def test_reversible_flow_examples(library, motor):
    piston = library.components["piston"]
    pressure1, pressure2, v = 2.0, 3.0, 0.5
    f1, e2, res = reversible_flows(piston, ENV, [-pressure1, pressure2, v], [], [], [0, 0, 0])
    a = 0.01
    assert f1 == pytest.approx([a * v, -a * v, a * pressure1 + a * pressure2])
    assert e2.size == 0 and res.size == 0
    mk = motor.components["mk"]
    # state order is namespace order: b, b_s, p
    b_s, b_e, p_e = 1.7, 0.4, -0.9
    f1, _, _ = reversible_flows(mk, motor.env, [b_e, p_e], [], [], [0.0, b_s, 0.0])
    assert f1 == pytest.approx([b_s * p_e, -b_s * b_e])
    f1, _, _ = reversible_flows(mk, motor.env, [0, 0], [], [], [0.0, b_s, 0.0])
    assert list(f1) == [0.0, 0.0]


def test_irreversible_flow_examples(library):
    friction = library.components["friction"]
    v, theta = 1.3, 310.0
    f = irreversible_flows(friction, ENV, [v, theta - THETA0], [0, 0])
    assert f == pytest.approx([0.2 * v, -0.2 * v**2 / theta], rel=1e-12)
    ht = library.components["heat_transfer"]
    t1, t2 = 320.0, 290.0
    f = irreversible_flows(ht, ENV, [t1 - THETA0, t2 - THETA0], [0, 0])
    assert f == pytest.approx([-0.5 * (t2 - t1) / t1, -0.5 * (t1 - t2) / t2], rel=1e-12)
    assert list(irreversible_flows(friction, ENV, [0.0, 0.0], [0, 0])) == [0.0, 0.0]


def test_equal_temperatures_stop_heat_flow(library):
    ht = library.components["heat_transfer"]
    for t in (200.0, 298.15, 400.0):
        assert np.allclose(irreversible_flows(ht, ENV, [t - THETA0] * 2, [0, 0]), 0.0, atol=1e-15)


def reversible_fixtures(library, motor, oscillator):
    return [library.components["piston"], motor.components["em_s"], motor.components["em_r"],
            motor.components["mk"], oscillator.components["pkc"]]


def test_reversible_power_conservation(library, motor, oscillator):
    rng = np.random.default_rng(5)
    for c in reversible_fixtures(library, motor, oscillator):
        for _ in range(100):
            e1 = rng.uniform(-10, 10, c.n1)
            f2 = rng.uniform(-10, 10, c.n2)
            x = rng.uniform(-10, 10, len(c.iface))
            f1, e2, _ = reversible_flows(c, ENV, e1, f2, [], x)
            power = float(e1 @ f1 + e2 @ f2)
            assert abs(power) <= 1e-12 * (1 + np.abs(e1).max() * np.abs(f1).max())


def test_irreversible_components_destroy_exergy(library, motor):
    comps = [library.components["friction"], library.components["heat_transfer"],
             motor.components["emloss_s"], motor.components["mloss"]]
    for c in comps:
        pts = sample_points(c.args(), 64, seed=1, lower={s: -THETA0 + 1 for s in c.args() if s.startswith("s")})
        for pt in pts:
            e = pt[: c.n]
            f = irreversible_flows(c, ENV, e, pt[c.n :])
            assert e @ f * THETA0 >= -1e-10 * (1 + np.abs(e).max() ** 2)


def test_friction_flow_independent_of_reference_temperature(library):
    friction = library.components["friction"]
    v, theta = 0.7, 350.0
    flows = []
    for theta0 in (100.0, 298.15, 400.0):
        env = ENV.with_values({"s": theta0})
        flows.append(irreversible_flows(friction, env, [v, theta - theta0], [0, 0]))
    for f in flows[1:]:
        assert np.max(np.abs(f - flows[0])) <= 1e-12


def test_damper_formulas_match_oracle(library):
    # friction plus heat transfer at the capacity temperature reproduce the
    # composite entropy balance
    friction, ht = library.components["friction"], library.components["heat_transfer"]
    v, t1, t2 = 0.8, 305.0, 299.0
    mf_f = irreversible_flows(friction, ENV, [v, t1 - THETA0], [0, 0])
    ht_f = irreversible_flows(ht, ENV, [t1 - THETA0, t2 - THETA0], [0, 0])
    ds, pf, sf = damper_equations(v, t1, t2)
    assert -(mf_f[1] + ht_f[0]) == pytest.approx(ds, rel=1e-12)
    assert mf_f[0] == pytest.approx(pf, rel=1e-12)
    assert ht_f[1] == pytest.approx(sf, rel=1e-12)


def test_sampling_is_deterministic_and_covers_basis():
    a = sample_points(["x", "y"], 8, seed=3)
    b = sample_points(["x", "y"], 8, seed=3)
    assert np.array_equal(a, b)
    assert a.shape == (11, 2)
    assert np.array_equal(a[:3], [[0, 0], [1, 0], [0, 1]])
    assert np.all((a >= -5) & (a <= 5))
