import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import SOFTWARE_ROWS, expected_server_tests
from safs.analysis import ImageManifest, analyze_images
from safs.environment import DeployedEnvironment, DeployedResource, Endpoint, Tenant
from safs.extractor import (
    PlanItem,
    Scope,
    TestPlan,
    UnresolvedTarget,
    extract_test_plan,
    resolve_test_targets,
)
from safs.kinds import OsKind, ServerType
from safs.template import SERVER, AbstractTemplate, Resource, build_topology, parse_abstract

DB_TESTS = {"Table CRUD", "character garbling check", "Access by phpMyAdmin"}


def profiles_for(catalog, layout):
    t = AbstractTemplate(
        1, {s: Resource(SERVER, image="img", software_override=tuple(sw)) for s, sw in layout.items()}
    )
    return analyze_images(t, {}, catalog)


def env_for(names, tenant="t1"):
    return DeployedEnvironment(
        Tenant(tenant),
        {n: DeployedResource(Endpoint(n, f"{n}.sim", 9000 + i), ServerType.CONTAINER)
         for i, n in enumerate(sorted(names))},
    )


def test_mysql_server(catalog):
    plan = extract_test_plan(profiles_for(catalog, {"db": ["MySQL 5.0"]}), [], catalog)
    assert {i.test.name for i in plan} == DB_TESTS
    assert all(i.scope is Scope.SERVER and i.server == "db" for i in plan)


def test_prefix_resolved_software_gets_group_tests(catalog):
    plan = extract_test_plan(profiles_for(catalog, {"db": ["MySQL 5.6"]}), [], catalog)
    assert {i.test.name for i in plan} == DB_TESTS


def test_pattern_adds_environment_test(catalog):
    profiles = profiles_for(catalog, {"w": ["Apache 2.2", "Tomcat 7.0"], "db": ["MySQL 5.0"]})
    plan = extract_test_plan(profiles, ["Web 3-tier"], catalog)
    env_items = [i for i in plan if i.scope is Scope.ENVIRONMENT]
    assert [i.test.name for i in env_items] == ["TPC-C benchmark test"]
    assert env_items[0].participants == ("db", "w")
    assert {i.test.name for i in plan if i.scope is Scope.SERVER} == DB_TESTS


def test_unknown_software_only(catalog):
    assert len(extract_test_plan(profiles_for(catalog, {"a": ["Redis 3.0"]}), [], catalog)) == 0


def test_two_mysql_servers(catalog):
    layout = {"db1": ["MySQL 5.0"], "db2": ["MySQL 5.0"]}
    plan = extract_test_plan(profiles_for(catalog, layout), [], catalog)
    assert {(i.server, i.test.name) for i in plan} == expected_server_tests(layout)
    assert len(plan) == 6
    assert "TPC-C benchmark test" not in {i.test.name for i in plan}


def test_same_test_from_two_software_dedups(catalog):
    plan = extract_test_plan(profiles_for(catalog, {"db": ["MySQL 5.0", "MySQL 4.0", "Oracle11g"]}), [], catalog)
    assert sorted(i.test.name for i in plan) == sorted(DB_TESTS)


def test_plan_uniqueness_enforced(catalog):
    item = extract_test_plan(profiles_for(catalog, {"db": ["MySQL 5.0"]}), [], catalog).items[0]
    with pytest.raises(ValueError):
        TestPlan((item, item))


@given(
    st.dictionaries(
        st.sampled_from(["a", "b", "c", "d"]),
        st.lists(st.sampled_from(sorted(SOFTWARE_ROWS) + ["MySQL 5.6", "Redis 3.0"]), max_size=4),
        min_size=1,
    ),
    st.booleans(),
)
def test_tier_completeness(catalog, layout, with_pattern):
    oracle_layout = {s: [("MySQL 5.0" if sw == "MySQL 5.6" else sw) for sw in v] for s, v in layout.items()}
    plan = extract_test_plan(profiles_for(catalog, layout), ["Web 3-tier"] if with_pattern else [], catalog)
    server_pairs = {(i.server, i.test.name) for i in plan if i.scope is Scope.SERVER}
    assert server_pairs == expected_server_tests(oracle_layout)
    env = [i for i in plan if i.scope is Scope.ENVIRONMENT]
    assert [i.test.name for i in env] == (["TPC-C benchmark test"] if with_pattern else [])


# -- targets ---------------------------------------------------------------


def web3(catalog, web3_text):
    t = parse_abstract(web3_text)
    manifests = [
        ImageManifest("lamp-img", OsKind.NORMAL_LINUX, ("Apache 2.2", "Tomcat 7.0", "MySQL 5.0")),
        ImageManifest("mysql-img", OsKind.NORMAL_LINUX, ("MySQL 5.0",)),
    ]
    profiles = analyze_images(t, manifests, catalog)
    return t, build_topology(t), profiles


def test_lb_targeting(catalog, web3_text):
    t, g, profiles = web3(catalog, web3_text)
    env = env_for(t.resources)
    plan = resolve_test_targets(extract_test_plan(profiles, ["Web 3-tier"], catalog), g, env, profiles)
    for item in plan:
        if item.server == "web_ap":
            assert item.targets == (env.endpoint("lb"),)
        elif item.server == "db":
            assert item.targets == (env.endpoint("db"),)
        else:
            assert item.scope is Scope.ENVIRONMENT and item.targets == (env.endpoint("lb"),)


def test_resolution_idempotent(catalog, web3_text):
    t, g, profiles = web3(catalog, web3_text)
    env = env_for(t.resources)
    once = resolve_test_targets(extract_test_plan(profiles, ["Web 3-tier"], catalog), g, env, profiles)
    assert resolve_test_targets(once, g, env, profiles) == once


def test_environment_entry_without_lb(catalog):
    layout = {"a_db": ["MySQL 5.0"], "b_web": ["Apache 2.2"], "c_web": ["Apache 2.1", "Tomcat 7.0"]}
    profiles = profiles_for(catalog, layout)
    t = AbstractTemplate(1, {s: Resource(SERVER, image="img") for s in layout})
    g, env = build_topology(t), env_for(layout)
    plan = resolve_test_targets(extract_test_plan(profiles, ["Web 3-tier"], catalog), g, env, profiles)
    [env_item] = [i for i in plan if i.scope is Scope.ENVIRONMENT]
    assert env_item.targets == (env.endpoint("b_web"),)
    plan = resolve_test_targets(extract_test_plan(profiles, ["Web 3-tier"], catalog), g, env)
    [env_item] = [i for i in plan if i.scope is Scope.ENVIRONMENT]
    assert [e.resource for e in env_item.targets] == ["a_db", "b_web", "c_web"]


def test_unresolved_target(catalog, web3_text):
    t, g, profiles = web3(catalog, web3_text)
    env = env_for(["web_ap", "lb"])
    with pytest.raises(UnresolvedTarget):
        resolve_test_targets(extract_test_plan(profiles, [], catalog), g, env, profiles)
    ghost = PlanItem(extract_test_plan(profiles, [], catalog).items[0].test, Scope.SERVER, "ghost", "x")
    with pytest.raises(UnresolvedTarget):
        resolve_test_targets(TestPlan((ghost,)), g, env_for(t.resources), profiles)


def test_plan_to_dict(catalog, web3_text):
    t, g, profiles = web3(catalog, web3_text)
    env = env_for(t.resources)
    plan = resolve_test_targets(extract_test_plan(profiles, ["Web 3-tier"], catalog), g, env, profiles)
    items = plan.to_dict()["items"]
    assert {i["test"]["name"] for i in items} == DB_TESTS | {"TPC-C benchmark test"}
    assert all(i["targets"] for i in items)
