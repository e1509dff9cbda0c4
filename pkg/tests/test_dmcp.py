import pytest
from hypothesis import given, strategies as st

from simdrive.bus import InProcessConference
from simdrive.dmcp import (
    ConfigError, ConfigurationSet, DiscoveryTimeout, DmcpClient, LifecycleState, ModuleDescriptor, PulseMsg,
    Supercomponent, can_transition,
)
from simdrive.serialization import pack

S = 1_000_000


def cfg(**entries):
    return ConfigurationSet({k.replace("__", "."): str(v) for k, v in entries.items()})


# -- filter rule --

def test_filter_by_module_name():
    master = ConfigurationSet({"global.freq": "100", "planner.speedlimit": "12.5", "perception.range": "40"})
    assert dict(master.for_module("planner")) == {"global.freq": "100", "planner.speedlimit": "12.5"}
    assert dict(master.for_module("perception")) == {"global.freq": "100", "perception.range": "40"}


def test_instance_override():
    master = ConfigurationSet({"planner.v": "1", "planner:2.v": "7"})
    assert master.for_module("planner", 2)["planner.v"] == "7"
    assert master.for_module("planner", 1)["planner.v"] == "1"
    assert "planner:2.v" not in master.for_module("planner", 2)


def test_prefix_must_match_whole_name():
    master = ConfigurationSet({"plan.x": "1", "planner.y": "2"})
    assert dict(master.for_module("plan")) == {"plan.x": "1"}


names = st.from_regex(r"[a-z][a-z0-9]{0,6}", fullmatch=True)


@given(st.dictionaries(st.tuples(names, names), st.integers(0, 99).map(str), max_size=12), names,
       st.integers(0, 3))
def test_filter_only_returns_global_or_own_keys(entries, module, inst):
    master = ConfigurationSet({f"{a}.{b}": v for (a, b), v in entries.items()})
    sub = master.for_module(module, inst)
    for k, v in sub.items():
        assert k.startswith("global.") or k.startswith(module + ".")
        assert master[k] == v
    for k in master:
        if k.startswith("global.") or k.startswith(module + "."):
            assert k in sub


# -- configuration files --

def test_parse_config_text():
    c = ConfigurationSet.parse("# comment\n\nsim.seed = 42\nscanner.0.fov=120\n")
    assert c.get_int("sim.seed") == 42
    assert c.get_float("scanner.0.fov") == 120.0
    assert ConfigurationSet.parse(c.dumps()) == c


@pytest.mark.parametrize("text", ["novalue\n", "Bad.Key = 1\n", "a.b = 1\na.b = 2\n", "nodot = 1\n"])
def test_bad_config_text(text):
    with pytest.raises(ConfigError):
        ConfigurationSet.parse(text)


def test_typed_getters():
    c = cfg(a__x="1.5", a__n="abc")
    assert c.get_float("a.missing", 2.0) == 2.0
    with pytest.raises(ConfigError):
        c.get_float("a.missing")
    with pytest.raises(ConfigError):
        c.get_int("a.x")
    with pytest.raises(ConfigError):
        c.get_float("a.n")


# -- lifecycle --

def test_transitions():
    L = LifecycleState
    assert can_transition(L.DISCOVERED, L.CONFIGURED)
    assert can_transition(L.UNRESPONSIVE, L.RUNNING)
    assert not can_transition(L.TERMINATED, L.RUNNING)
    assert not can_transition(L.DISCOVERED, L.RUNNING)


def _setup(master=None, name="planner", inst=0):
    bus = InProcessConference()
    sc = Supercomponent(bus.handle("supercomponent"), master or cfg(global__dmcp__pulseinterval=1.0,
                                                                    planner__speed=5))

    def pump():
        bus.deliver()
        sc.process(0)
        bus.deliver()

    client = DmcpClient(bus.handle(name), ModuleDescriptor(name, inst), pump=pump)
    return bus, sc, client


def test_discovery_delivers_subset():
    bus, sc, client = _setup()
    got = client.discover(0)
    assert dict(got) == {"global.dmcp.pulseinterval": "1.0", "planner.speed": "5"}
    assert client.state is LifecycleState.CONFIGURED
    assert sc.state_of(client.descriptor) is LifecycleState.CONFIGURED


def test_discovery_timeout_refuses_to_start():
    bus = InProcessConference()
    client = DmcpClient(bus.handle("lonely"), ModuleDescriptor("lonely"), pump=bus.deliver)
    with pytest.raises(DiscoveryTimeout):
        client.discover()
    with pytest.raises(RuntimeError):
        client.pulse(0)


def test_three_missed_pulses_mark_unresponsive():
    bus, sc, client = _setup()
    client.discover(0)
    client.pulse(0)
    bus.deliver()
    sc.process(0)
    assert sc.state_of(client.descriptor) is LifecycleState.RUNNING
    sc.process(2 * S + 999_999)
    assert sc.state_of(client.descriptor) is LifecycleState.RUNNING
    sc.process(3 * S)  # a single supervision check suffices
    assert sc.state_of(client.descriptor) is LifecycleState.UNRESPONSIVE
    client.pulse(3 * S + 10)
    bus.deliver()
    sc.process(3 * S + 10)
    assert sc.state_of(client.descriptor) is LifecycleState.RUNNING


def test_timeout_pulses_configurable():
    bus, sc, client = _setup(cfg(global__dmcp__pulseinterval=0.5, global__dmcp__timeoutpulses=2))
    client.discover(0)
    client.pulse(0)
    bus.deliver()
    sc.process(S - 1)
    assert sc.state_of(client.descriptor) is LifecycleState.RUNNING
    sc.process(S)
    assert sc.state_of(client.descriptor) is LifecycleState.UNRESPONSIVE


def test_terminated_is_final():
    bus, sc, client = _setup()
    client.discover(0)
    client.pulse(0)
    client.pulse(10, LifecycleState.TERMINATED)
    bus.deliver()
    sc.process(10)
    assert sc.state_of(client.descriptor) is LifecycleState.TERMINATED
    sc.process(100 * S)
    assert sc.state_of(client.descriptor) is LifecycleState.TERMINATED


def test_unknown_pulses_are_ignored():
    bus, sc, client = _setup()
    h = bus.handle("stray")
    h.send(pack(PulseMsg("ghost", 1, "RUNNING", 0)))
    client.discover(0)
    h.send(pack(PulseMsg("planner", 0, "DANCING", 0)))
    bus.deliver()
    sc.process(0)
    assert sc.state_of(ModuleDescriptor("ghost", 1)) is None
    assert sc.state_of(client.descriptor) is LifecycleState.CONFIGURED


def test_instances_are_separate():
    master = cfg(planner__v=1, **{"planner:2.v": 7})
    bus, sc, one = _setup(master, inst=1)
    one.discover(0)
    two = DmcpClient(bus.handle("p2"), ModuleDescriptor("planner", 2), pump=one.pump)
    assert two.discover(0)["planner.v"] == "7"
    assert one.config["planner.v"] == "1"
