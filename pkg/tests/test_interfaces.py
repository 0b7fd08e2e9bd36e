from hypothesis import given
from hypothesis import strategies as st

from ephs.interfaces import Interface, PortAttr, build_layout, is_subinterface, sum_interfaces
from ephs.quantities import Quantity, StateSpace, default_environment, standard_registry

REG = standard_registry()
ENTROPY, VOLUME, MOMENTUM = REG["entropy"], REG["volume"], REG["momentum"]


def test_sum_of_gas_and_mass():
    gas = Interface({"s": PortAttr(ENTROPY), "v": PortAttr(VOLUME)})
    mass = Interface({"p": PortAttr(MOMENTUM)})
    total = sum_interfaces({"gas": gas, "mass": mass})
    assert [str(n) for n in total] == ["gas.s", "gas.v", "mass.p"]
    assert total["gas.v"] == PortAttr(VOLUME)
    assert build_layout(total).dim_x == build_layout(gas).dim_x + build_layout(mass).dim_x
    assert len(sum_interfaces({"a": Interface()})) == 0


def test_layout_examples():
    r = Quantity("r")
    iface = Interface({"p1": PortAttr(r), "p2": PortAttr(r), "q": PortAttr(r, "state")})
    layout = build_layout(iface)
    assert (layout.dim_x, layout.dim_fe) == (3, 2)
    empty = build_layout(Interface())
    assert (empty.dim_x, empty.dim_fe) == (0, 0)


def test_motor_inner_layout(motor):
    inner = motor.patterns["motor_pattern"].inner_interface
    layout = build_layout(inner)
    assert (layout.dim_x, layout.dim_fe) == (5, 3)


quantities = st.sampled_from([ENTROPY, VOLUME, MOMENTUM, Quantity("pos", StateSpace(3))])
attrs = st.builds(PortAttr, quantities, st.sampled_from(["power", "state"]))
ifaces = st.dictionaries(st.sampled_from(["a", "b", "c", "d"]), attrs, max_size=4).map(Interface)


@given(st.dictionaries(st.sampled_from(["x", "y", "z.w"]), ifaces, max_size=3))
def test_layout_dims_add_up_over_sums(parts):
    total = build_layout(sum_interfaces(parts))
    assert total.dim_x == sum(build_layout(p).dim_x for p in parts.values())
    assert total.dim_fe == sum(build_layout(p).dim_fe for p in parts.values())


@given(ifaces)
def test_layout_offsets_are_contiguous(iface):
    layout = build_layout(iface)
    end = 0
    for name in iface:
        sl = layout.x_slices[name]
        assert sl.start == end
        end = sl.stop
    assert end == layout.dim_x
    assert set(layout.fe_slices) == set(iface.power_ports)


@given(ifaces, ifaces, ifaces)
def test_subinterface_is_reflexive_and_transitive(a, b, c):
    assert is_subinterface(a, a)
    if is_subinterface(a, b) and is_subinterface(b, c):
        assert is_subinterface(a, c)


def test_environment_interface_contains_entropy_port():
    env_iface = default_environment().interface()
    assert is_subinterface(Interface({"s": PortAttr(ENTROPY)}), env_iface)
    assert not is_subinterface(Interface({"s": PortAttr(ENTROPY, "state")}), env_iface)
