import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pathml.config import (
    AsDescriptor,
    CampaignConfig,
    IsdAs,
    ServerDescriptor,
    add_as,
    add_server,
    config_from_dict,
    dumps_config,
    load_config,
    remove_as,
    remove_server,
    save_config,
    set_category,
    validate_isd_as,
)
from pathml.errors import (
    DependencyViolation,
    DuplicateAs,
    DuplicateServer,
    InvalidIp,
    IoError,
    IsdOutOfRange,
    MalformedIsdAs,
    PortOutOfRange,
    SchemaError,
    UnknownCategory,
)


def empty():
    return CampaignConfig(validate_isd_as("19-ffaa:0:1301"))


def test_isd_as_parses():
    assert validate_isd_as("17-ffaa:0:1101") == IsdAs(17, "ffaa:0:1101")


def test_isd_zero_out_of_range():
    with pytest.raises(IsdOutOfRange):
        validate_isd_as("0-ffaa:0:1101")


def test_missing_separator():
    with pytest.raises(MalformedIsdAs):
        validate_isd_as("17ffaa:0:1101")


@pytest.mark.parametrize("text", ["", "17-", "-ffaa:0:1", "17-ffaa:0", "17-ffaa:0:1:2", "17-gggg:0:1", "x", "017-1"])
def test_malformed(text):
    with pytest.raises(MalformedIsdAs):
        validate_isd_as(text)


def test_uppercase_hex_normalized():
    assert str(validate_isd_as("19-FFAA:0:1A01")) == "19-ffaa:0:1a01"


def test_slug_roundtrip():
    ia = validate_isd_as("19-ffaa:0:1301")
    assert ia.slug == "19-ffaa-0-1301"
    assert IsdAs.from_slug(ia.slug) == ia


hexgroup = st.integers(0, 0xFFFF).map(lambda v: f"{v:x}")
valid_isd_as = st.one_of(
    st.builds(lambda i, a, b, c: f"{i}-{a}:{b}:{c}", st.integers(1, 65535), hexgroup, hexgroup, hexgroup),
    st.builds(lambda i, n: f"{i}-{n}", st.integers(1, 65535), st.integers(0, 2**32)),
)


@given(valid_isd_as)
def test_isd_as_serialize_parse_identity(text):
    assert str(validate_isd_as(text)) == text
    ia = validate_isd_as(text)
    assert validate_isd_as(str(ia)) == ia


def test_add_as_to_empty():
    cfg = add_as(empty(), AsDescriptor(validate_isd_as("19-ffaa:1:abc"), "10.0.0.5", "remote"))
    assert len(cfg.ases) == 1


def test_duplicate_as_leaves_config_unchanged():
    entry = AsDescriptor(validate_isd_as("19-ffaa:1:abc"), "10.0.0.5", "remote")
    cfg = add_as(empty(), entry)
    before = dumps_config(cfg)
    with pytest.raises(DuplicateAs):
        add_as(cfg, entry)
    assert dumps_config(cfg) == before


def test_invalid_ip():
    with pytest.raises(InvalidIp):
        AsDescriptor(validate_isd_as("19-ffaa:1:abc"), "999.1.1.1", "remote")


def test_add_server():
    ia = validate_isd_as("19-ffaa:1:abc")
    cfg = add_server(empty(), ServerDescriptor(ia, "10.0.0.5", 30100, "bw"))
    assert len(cfg.servers) == 1
    assert cfg.servers_at(ia)[0].address == "10.0.0.5:30100"
    with pytest.raises(DuplicateServer):
        add_server(cfg, ServerDescriptor(ia, "10.0.0.6", 30101, "bw2"))
    assert remove_server(cfg, ia).servers == ()


@pytest.mark.parametrize("port", [0, 65536, -1])
def test_port_out_of_range(port):
    with pytest.raises(PortOutOfRange):
        ServerDescriptor(validate_isd_as("19-ffaa:1:abc"), "10.0.0.5", port, "bw")


def test_remove_as():
    ia = validate_isd_as("19-ffaa:1:abc")
    cfg = add_as(empty(), AsDescriptor(ia, "10.0.0.5", "remote"))
    assert remove_as(cfg, ia).ases == ()


def test_local_as_not_remote():
    cfg = empty()
    with pytest.raises(SchemaError):
        add_as(cfg, AsDescriptor(cfg.local_as, "10.0.0.5", "self"))


def test_set_category():
    cfg = set_category(set_category(empty(), "traceroute", False), "traceroute", True)
    assert cfg.pipeline.enabled["traceroute"] is True


def test_comparer_needs_showpaths():
    cfg = set_category(set_category(empty(), "comparer", False), "showpaths", False)
    with pytest.raises(DependencyViolation):
        set_category(cfg, "comparer", True)


def test_unknown_category():
    with pytest.raises(UnknownCategory):
        set_category(empty(), "pingg", True)


def test_save_load_roundtrip(tmp_path, base_config):
    p = tmp_path / "c.json"
    save_config(base_config, p)
    assert load_config(p) == base_config
    first = p.read_bytes()
    save_config(load_config(p), p)
    assert p.read_bytes() == first


def test_load_bad_isd_as_names_field(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"local_as": "19-ffaa:0:1301", "ases": [{"isd_as": "x", "ip": "10.0.0.1", "name": "a"}]}))
    with pytest.raises(SchemaError, match=r"ases\[0\]\.isd_as"):
        load_config(p)


def test_load_missing_file(tmp_path):
    with pytest.raises(IoError):
        load_config(tmp_path / "nope.json")


def test_load_invalid_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{")
    with pytest.raises(SchemaError):
        load_config(p)


def test_unknown_field_rejected(base_config):
    doc = base_config.to_dict()
    doc["extra"] = 1
    with pytest.raises(SchemaError, match="extra"):
        config_from_dict(doc)


def test_mp_concurrency_fixed(base_config):
    doc = base_config.to_dict()
    doc["pipeline"]["mp_concurrency"] = 3
    with pytest.raises(SchemaError):
        config_from_dict(doc)
