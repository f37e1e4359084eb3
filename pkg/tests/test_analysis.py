import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import canonical
from safs.analysis import (
    ImageManifest,
    ManifestFormatError,
    MissingManifest,
    analyze_images,
    infer_deployment_config,
    load_manifests,
    parse_manifests,
)
from safs.catalog import Provenance
from safs.kinds import OsKind
from safs.template import SERVER, AbstractTemplate, Resource, build_topology, parse_abstract

LAMP = ImageManifest("lamp-img", OsKind.NORMAL_LINUX, ("Apache 2.2", "Tomcat 7.0"))
MYSQL = ImageManifest("mysql-img", OsKind.NORMAL_LINUX, ("MySQL 5.0",))
FG_SOFTWARE = {"Web": "Apache 2.2", "AP": "Tomcat 7.0", "DB": "MySQL 5.0"}


def servers_template(software_by_server):
    return AbstractTemplate(
        1,
        {s: Resource(SERVER, image="img", software_override=tuple(sw)) for s, sw in software_by_server.items()},
    )


def test_lamp_profile(catalog):
    t = AbstractTemplate(1, {"web": Resource(SERVER, image="lamp-img")})
    [p] = analyze_images(t, [LAMP], catalog)
    assert p.server == "web" and p.os_kind is OsKind.NORMAL_LINUX
    assert [(r.function_group, r.software_group) for r in p.resolved] == [("Web", "Apache"), ("AP", "Tomcat")]
    assert all(r.provenance is Provenance.EXACT for r in p.resolved)


def test_empty_software(catalog):
    t = AbstractTemplate(1, {"a": Resource(SERVER, image="bare")})
    [p] = analyze_images(t, [ImageManifest("bare", OsKind.NON_LINUX)], catalog)
    assert p.resolved == () and p.function_groups == frozenset()


def test_missing_manifest(catalog):
    t = AbstractTemplate(1, {"a": Resource(SERVER, image="who")})
    with pytest.raises(MissingManifest):
        analyze_images(t, [LAMP], catalog)


def test_override_wins(catalog):
    t = AbstractTemplate(1, {
        "a": Resource(SERVER, image="lamp-img", software_override=("MySQL 5.6",)),
        "b": Resource(SERVER, image="unknown-img", software_override=()),
    })
    a, b = analyze_images(t, {"lamp-img": LAMP}, catalog)
    assert a.software == ("MySQL 5.6",) and a.os_kind is OsKind.NORMAL_LINUX
    assert a.resolved[0].provenance is Provenance.PREFIX
    assert b.os_kind is None and b.software == ()


def test_config_two_tier(catalog):
    t = servers_template({"A": ["Apache 2.2", "Tomcat 7.0"], "B": ["MySQL 5.0"]})
    dc = infer_deployment_config(build_topology(t), analyze_images(t, {}, catalog))
    assert dc.groups == frozenset({frozenset({"Web", "AP"}), frozenset({"DB"})})
    assert str(dc) == "{AP, Web}{DB}"


def test_config_single_server(catalog):
    t = servers_template({"A": ["Apache 2.2", "Tomcat 7.0", "MySQL 5.0"]})
    dc = infer_deployment_config(build_topology(t), analyze_images(t, {}, catalog))
    assert dc.to_list() == [["AP", "DB", "Web"]]


def test_config_duplicates_collapse(catalog):
    t = servers_template({"A": ["Apache 2.2"], "B": ["Apache 2.1"]})
    dc = infer_deployment_config(build_topology(t), analyze_images(t, {}, catalog))
    assert canonical(dc.to_list()) == canonical([["Web"], ["Web"]]) == (("Web",),)


def test_config_excludes_os_and_unknown(catalog):
    t = servers_template({"A": ["RHEL 7.0", "Redis 3.0"], "B": ["Windows 8.1", "MySQL 5.0"]})
    dc = infer_deployment_config(build_topology(t), analyze_images(t, {}, catalog))
    assert dc.to_list() == [["DB"]]


def test_config_ignores_loadbalancers(web3_text, catalog):
    t = parse_abstract(web3_text)
    profiles = analyze_images(t, [LAMP, MYSQL], catalog)
    assert str(infer_deployment_config(build_topology(t), profiles)) == "{AP, Web}{DB}"


def test_config_requires_all_profiles(catalog):
    t = servers_template({"A": ["MySQL 5.0"], "B": []})
    profiles = analyze_images(t, {}, catalog)[:1]
    with pytest.raises(ValueError):
        infer_deployment_config(build_topology(t), profiles)


@given(
    st.dictionaries(
        st.sampled_from(["s1", "s2", "s3", "s4"]),
        st.lists(st.sampled_from(sorted(FG_SOFTWARE.values()) + ["Redis 3.0", "RHEL 7.0"]), max_size=4),
        min_size=1,
    ),
    st.randoms(),
)
def test_config_order_invariant(catalog, layout, rnd: random.Random):
    t = servers_template(layout)
    profiles = analyze_images(t, {}, catalog)
    shuffled = list(profiles)
    rnd.shuffle(shuffled)
    g = build_topology(t)
    assert infer_deployment_config(g, profiles) == infer_deployment_config(g, shuffled)


def test_manifest_parsing(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps([
        {"image": "a", "os_kind": "custom_linux", "software": ["X"]},
        {"image": "b", "os_kind": "non_linux"},
    ]))
    m = load_manifests(path)
    assert m["a"].os_kind is OsKind.CUSTOM_LINUX and m["b"].software == ()


@pytest.mark.parametrize(
    "rows",
    [
        [{"image": "a", "os_kind": "beos"}],
        [{"os_kind": "non_linux"}],
        [{"image": "a", "os_kind": "non_linux"}, {"image": "a", "os_kind": "non_linux"}],
        [{"image": "a", "os_kind": "non_linux", "software": "X"}],
        {"image": "a"},
    ],
)
def test_manifest_errors(rows):
    with pytest.raises(ManifestFormatError):
        parse_manifests(json.dumps(rows))
