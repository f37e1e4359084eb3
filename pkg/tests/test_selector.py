import json
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import cheapest_type
from safs.analysis import ImageManifest, analyze_images
from safs.kinds import PRICE_ORDER, Consistency, OsKind, ServerType
from safs.selector import (
    MissingRequirement,
    RULE_TYPE,
    RequirementsFormatError,
    Rule,
    SelectionConfig,
    ServerRequirements,
    Unsatisfiable,
    parse_requirements,
    propose_structure,
    select_server_type,
    size_bucket,
)
from safs.template import parse_abstract

LAMP = ImageManifest("lamp-img", OsKind.NORMAL_LINUX, ("Apache 2.2", "Tomcat 7.0"))
MYSQL = ImageManifest("mysql-img", OsKind.NORMAL_LINUX, ("MySQL 5.0",))


def req(**kw):
    kw.setdefault("server", "s")
    kw.setdefault("os_kind", "normal_linux")
    return ServerRequirements(**kw)


def test_strong_db_goes_baremetal(model):
    d = select_server_type(req(required_throughput_index=900), model)
    assert d.chosen is ServerType.BAREMETAL and d.rule_fired is Rule.PERF_BAREMETAL


def test_non_linux_goes_vm(model):
    d = select_server_type(req(os_kind="non_linux", required_throughput_index=100), model)
    assert d.chosen is ServerType.VM and d.rule_fired is Rule.OS_VM


def test_normal_linux_goes_container(model):
    d = select_server_type(req(required_throughput_index=100), model)
    assert d.chosen is ServerType.CONTAINER and d.rule_fired is Rule.DEFAULT_CONTAINER


def test_eventual_cache_scales_out(model):
    d = select_server_type(
        req(required_throughput_index=1600, consistency="eventual", max_replicas=4), model
    )
    assert d.effective_requirement_index == 400
    assert d.chosen is ServerType.CONTAINER


def test_unsatisfiable(model):
    with pytest.raises(Unsatisfiable) as exc:
        select_server_type(req(server="big", required_throughput_index=1100), model)
    assert exc.value.server == "big"


def test_latency_rule(model):
    d = select_server_type(req(required_throughput_index=10, required_latency_ms=5), model)
    assert d.rule_fired is Rule.LATENCY_BAREMETAL
    assert "configurable default" in d.rationale
    d = select_server_type(req(required_throughput_index=10, required_latency_ms=5),
                           model, SelectionConfig(latency_baremetal_threshold_ms=2))
    assert d.chosen is ServerType.CONTAINER


def test_vm_too_slow_for_custom_linux(model):
    # a VM delivers 600; a custom-Linux server needing 700 cannot be a VM
    d = select_server_type(req(os_kind="custom_linux", required_throughput_index=700), model)
    assert d.chosen is ServerType.BAREMETAL and d.rule_fired is Rule.PERF_BAREMETAL


def test_colocation_lowers_capacity(model):
    cfg = SelectionConfig(planned_colocation=2)
    assert select_server_type(req(required_throughput_index=500), model, cfg).chosen is ServerType.BAREMETAL
    assert select_server_type(req(required_throughput_index=420), model, cfg).chosen is ServerType.CONTAINER


def test_colocation_extrapolation_warning(model):
    d = select_server_type(req(required_throughput_index=10), model, SelectionConfig(planned_colocation=6))
    assert d.chosen is ServerType.CONTAINER and any("extrapolated" in w for w in d.warnings)


def test_missing_os_kind(model):
    with pytest.raises(MissingRequirement):
        select_server_type(ServerRequirements("s"), model)


@pytest.mark.parametrize(
    "kw",
    [
        {"required_throughput_index": -1},
        {"max_replicas": 0},
        {"required_latency_ms": 0},
        {"os_kind": "plan9"},
        {"consistency": "causal"},
    ],
)
def test_requirement_validation(kw):
    with pytest.raises((RequirementsFormatError, ValueError)):
        req(**kw)


def test_parse_requirements():
    reqs = parse_requirements(json.dumps([
        {"server": "a", "required_throughput_index": 10, "consistency": "eventual", "max_replicas": 2},
    ]))
    assert reqs[0].consistency is Consistency.EVENTUAL and reqs[0].effective_index == 5
    with pytest.raises(RequirementsFormatError):
        parse_requirements('[{"server": "a", "colour": "red"}]')
    with pytest.raises(RequirementsFormatError):
        parse_requirements('[{"server": "a", "os_kind": "plan9"}]')
    with pytest.raises(RequirementsFormatError):
        parse_requirements("{")


@pytest.mark.parametrize(
    "index, bucket",
    [(0, "small"), (333, "small"), (1000 / 3, "small"), (334, "medium"),
     (666, "medium"), (2000 / 3, "medium"), (667, "large"), (1000, "large")],
)
def test_size_bucket(index, bucket):
    assert size_bucket(index, 1000.0) == bucket


def test_propose_web3(web3_text, catalog, model):
    t = parse_abstract(web3_text)
    profiles = analyze_images(t, [LAMP, MYSQL], catalog)
    reqs = [req(server="web_ap", required_throughput_index=200),
            req(server="db", required_throughput_index=900)]
    p = propose_structure(t, reqs, profiles, model)
    # oracle: web_ap fits a container, 200 <= 1000/3; db exceeds 750, 900 > 2000/3
    assert dict(p.assignments) == {"web_ap": "container.small", "db": "baremetal.large"}
    assert "lb" not in p.assignments
    assert [d.server for d in p.decisions] == ["db", "web_ap"]


def test_propose_all_minimal(web3_text, catalog, model):
    t = parse_abstract(web3_text)
    profiles = analyze_images(t, [LAMP, MYSQL], catalog)
    reqs = [ServerRequirements("web_ap"), ServerRequirements("db")]
    p = propose_structure(t, reqs, profiles, model)
    assert set(p.assignments.values()) == {"container.small"}


def test_propose_missing_requirement(web3_text, catalog, model):
    t = parse_abstract(web3_text)
    profiles = analyze_images(t, [LAMP, MYSQL], catalog)
    with pytest.raises(MissingRequirement):
        propose_structure(t, [req(server="db")], profiles, model)


def test_propose_os_from_requirement_overrides_manifest(web3_text, catalog, model):
    t = parse_abstract(web3_text)
    profiles = analyze_images(t, [LAMP, MYSQL], catalog)
    reqs = [req(server="web_ap", os_kind="non_linux"), ServerRequirements("db")]
    p = propose_structure(t, reqs, profiles, model)
    assert p.assignments["web_ap"] == "vm.small" and p.assignments["db"] == "container.small"


def test_propose_rejects_stray_and_duplicate(web3_text, catalog, model):
    t = parse_abstract(web3_text)
    profiles = analyze_images(t, [LAMP, MYSQL], catalog)
    base = [ServerRequirements("web_ap"), ServerRequirements("db")]
    with pytest.raises(RequirementsFormatError):
        propose_structure(t, base + [ServerRequirements("lb")], profiles, model)
    with pytest.raises(RequirementsFormatError):
        propose_structure(t, base + [ServerRequirements("db")], profiles, model)


def test_propose_unsatisfiable_names_server(web3_text, catalog, model):
    t = parse_abstract(web3_text)
    profiles = analyze_images(t, [LAMP, MYSQL], catalog)
    reqs = [ServerRequirements("web_ap"), ServerRequirements("db", required_throughput_index=5000)]
    with pytest.raises(Unsatisfiable, match="'db'"):
        propose_structure(t, reqs, profiles, model)


requirements = st.builds(
    ServerRequirements,
    server=st.just("s"),
    os_kind=st.sampled_from(list(OsKind)),
    required_throughput_index=st.floats(min_value=0, max_value=1000),
    required_latency_ms=st.none() | st.floats(min_value=0.1, max_value=100),
    consistency=st.sampled_from(list(Consistency)),
    max_replicas=st.integers(min_value=1, max_value=8),
)


@given(requirements)
def test_matches_oracle(model, r):
    d = select_server_type(r, model)
    expected = cheapest_type(r.os_kind.value, r.consistency.value, r.max_replicas,
                             r.required_throughput_index, r.required_latency_ms)
    assert (d.chosen.value, d.rule_fired.value) == expected


@given(requirements)
def test_cheapest_sufficient(model, r):
    d = select_server_type(r, model)
    if d.chosen is ServerType.CONTAINER:
        assert d.effective_requirement_index <= 750 and r.os_kind is OsKind.NORMAL_LINUX
    assert RULE_TYPE[d.rule_fired] is d.chosen


@given(requirements, st.floats(min_value=0, max_value=1000))
def test_monotone_in_throughput(model, r, extra):
    higher = replace(r, required_throughput_index=r.required_throughput_index + extra)
    low = select_server_type(r, model).chosen
    try:
        high = select_server_type(higher, model).chosen
    except Unsatisfiable:
        return
    assert PRICE_ORDER.index(high) >= PRICE_ORDER.index(low)


@given(requirements, st.integers(min_value=1, max_value=8))
def test_replicas_ignored_when_strong(model, r, replicas):
    strong = replace(r, consistency=Consistency.STRONG)
    assert select_server_type(strong, model) == select_server_type(
        replace(strong, max_replicas=replicas), model
    )
