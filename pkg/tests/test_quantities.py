import pytest

from ephs.quantities import (
    EnvPort,
    InvalidEnvironment,
    Quantity,
    StateSpace,
    QuantityRegistry,
    ReferenceEnvironment,
    UnknownQuantity,
    UnknownRefPort,
    default_environment,
    lambda_of,
    standard_registry,
)

REG = standard_registry()


def test_standard_parities():
    expected = {
        "displacement": 1, "momentum": -1, "entropy": 1, "volume": 1,
        "charge": 1, "flux_linkage": -1, "angular_momentum": -1, "mass": 1,
    }
    assert {label: q.parity for label, q in REG.items()} == expected


def test_lambda_of_examples():
    env = default_environment()
    assert lambda_of(env, REG["entropy"]) == 298.15
    assert lambda_of(env, REG["momentum"]) == 0.0
    assert lambda_of(env, REG["volume"], ref_port="s") == 0.0
    assert lambda_of(env, REG["volume"]) == -101325.0
    with pytest.raises(UnknownRefPort):
        lambda_of(env, REG["volume"], ref_port="nope")


def test_lambda_of_total_over_registry():
    env = default_environment()
    for q in REG.values():
        value = lambda_of(env, q)
        assert (value == 0.0) == (env.port_for(q) is None)


def test_environment_invariants():
    with pytest.raises(InvalidEnvironment):
        ReferenceEnvironment({"v": EnvPort(REG["volume"], 1.0)})
    with pytest.raises(InvalidEnvironment):
        ReferenceEnvironment({"s": EnvPort(REG["entropy"], 0.0)})
    with pytest.raises(InvalidEnvironment):
        ReferenceEnvironment({"s": EnvPort(REG["entropy"], 300.0), "t": EnvPort(REG["entropy"], 300.0)})
    wide = Quantity("position", StateSpace(2))
    with pytest.raises(InvalidEnvironment):
        ReferenceEnvironment({"s": EnvPort(REG["entropy"], 300.0), "x": EnvPort(wide, 0.0)})


def test_with_values_overrides():
    env = default_environment().with_values({"s": 400.0})
    assert env.theta0 == 400.0
    assert env.bindings() == {"theta0": 400.0, "env.s": 400.0, "env.v": -101325.0}


def test_registry_rejects_unknown_and_duplicates():
    reg = QuantityRegistry([Quantity("entropy")])
    with pytest.raises(UnknownQuantity):
        reg["volume"]
    with pytest.raises(ValueError):
        reg.register(Quantity("entropy", parity=-1))
