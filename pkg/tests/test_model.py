import json

import pytest

from i4sim import expr as ex
from i4sim.errors import DuplicateNameError, ModelDocumentError
from i4sim.model import model_to_dict, parse_model, serialize_model, validate_model
from i4sim.models import bundled_model_text

from conftest import make_model


class TestParsing:
    def test_minimal_single_stock(self):
        m = make_model(stocks=[{"name": "S", "initial": 1.0}])
        assert len(m.stocks) == 1
        assert m.flows == []
        assert m.stocks[0].name == "S"
        assert m.stocks[0].non_negative is False

    def test_flow_rate_becomes_tree(self):
        m = make_model(
            stocks=[{"name": "a", "initial": 0}, {"name": "b", "initial": 0}],
            flows=[{"name": "f", "from": "a", "to": "b", "rate": "min(a, b)"}],
        )
        assert m.flows[0].rate == ex.Call("min", [ex.Ident("a"), ex.Ident("b")])

    def test_bundled_document_shape(self):
        m = parse_model(bundled_model_text())
        assert len(m.stocks) == 6
        assert len(m.flows) == 6
        assert m.name == "i4-transition"

    def test_malformed_json_reports_position(self):
        with pytest.raises(ModelDocumentError) as e:
            parse_model("{\n  bad\n}")
        assert e.value.line == 2

    def test_missing_required_field(self):
        with pytest.raises(ModelDocumentError):
            parse_model(json.dumps({"name": "x"}))

    def test_duplicate_name_raises(self):
        with pytest.raises(DuplicateNameError):
            make_model(
                stocks=[{"name": "S", "initial": 0}],
                auxiliaries=[{"name": "S", "expr": "1"}],
            )


class TestSerialization:
    def test_fixed_point(self):
        text = bundled_model_text()
        m = parse_model(text)
        out = serialize_model(m)
        assert serialize_model(parse_model(out)) == out

    def test_bundled_document_is_canonical(self):
        assert serialize_model(parse_model(bundled_model_text())) == bundled_model_text()

    def test_dict_round_trip_preserves_structure(self):
        m = parse_model(bundled_model_text())
        d = model_to_dict(m)
        assert [s["name"] for s in d["stocks"]] == m.stock_names()
        assert all(isinstance(f["rate"], str) for f in d["flows"])


class TestValidation:
    def test_bundled_model_is_valid(self):
        assert validate_model(parse_model(bundled_model_text())) == []

    def test_aux_cycle(self):
        m = make_model(
            stocks=[{"name": "S", "initial": 0}],
            auxiliaries=[{"name": "a", "expr": "b"}, {"name": "b", "expr": "a"}],
        )
        diags = [d for d in validate_model(m) if d.kind == "CYCLE"]
        assert len(diags) == 1
        assert "a" in diags[0].message and "b" in diags[0].message

    def test_unresolved_identifier(self):
        m = make_model(
            stocks=[{"name": "S", "initial": 0}],
            auxiliaries=[{"name": "a", "expr": "foo + S"}],
        )
        kinds = {(d.kind, d.name) for d in validate_model(m)}
        assert ("UNRESOLVED_IDENTIFIER", "foo") in kinds

    def test_flow_names_are_not_referenceable(self):
        m = make_model(
            stocks=[{"name": "S", "initial": 1}],
            flows=[{"name": "out", "from": "S", "to": "BOUNDARY", "rate": "S"}],
            auxiliaries=[{"name": "a", "expr": "out * 2"}],
        )
        kinds = {(d.kind, d.name) for d in validate_model(m)}
        assert ("UNRESOLVED_IDENTIFIER", "out") in kinds

    def test_bad_flow_endpoints(self):
        m = make_model(
            stocks=[{"name": "S", "initial": 0}],
            flows=[
                {"name": "f1", "from": "S", "to": "S", "rate": "1"},
                {"name": "f2", "from": "BOUNDARY", "to": "BOUNDARY", "rate": "1"},
                {"name": "f3", "from": "S", "to": "nope", "rate": "1"},
            ],
        )
        by_name = {d.name: d for d in validate_model(m) if d.kind == "BAD_FLOW_ENDPOINTS"}
        assert set(by_name) == {"f1", "f2", "f3"}

    def test_negative_initial_on_non_negative_stock(self):
        m = make_model(stocks=[{"name": "S", "initial": -1, "non_negative": True}])
        assert any(d.kind == "NEGATIVE_INITIAL" for d in validate_model(m))

    def test_reserved_time_name(self):
        m = make_model(stocks=[{"name": "time", "initial": 0}])
        assert any(d.kind == "RESERVED_NAME" for d in validate_model(m))

    def test_bad_time_config(self):
        m = make_model(time={"start": 5, "stop": 5, "dt": 1})
        assert any(d.kind == "BAD_TIME_CONFIG" for d in validate_model(m))
        m = make_model(time={"start": 0, "stop": 1, "dt": 2})
        assert any(d.kind == "BAD_TIME_CONFIG" for d in validate_model(m))

    def test_unknown_lookup_table(self):
        m = make_model(
            stocks=[{"name": "S", "initial": 0}],
            auxiliaries=[{"name": "a", "expr": "lookup(tbl, S)"}],
        )
        assert any(d.kind == "UNKNOWN_LOOKUP" and d.name == "tbl" for d in validate_model(m))

    def test_bad_lookup_table(self):
        m = make_model(
            stocks=[{"name": "S", "initial": 0}],
            lookups={"one": [[0, 0]], "dup": [[0, 0], [0, 1]]},
        )
        bad = {d.name for d in validate_model(m) if d.kind == "BAD_LOOKUP"}
        assert bad == {"one", "dup"}

    def test_param_out_of_bounds(self):
        m = make_model(
            stocks=[{"name": "S", "initial": 0}],
            parameters={"p": {"value": 5, "min": 0, "max": 1}},
        )
        assert any(d.kind == "PARAM_OUT_OF_BOUNDS" for d in validate_model(m))

    def test_bad_smooth_tau(self):
        m = make_model(
            stocks=[{"name": "S", "initial": 0}],
            auxiliaries=[{"name": "a", "expr": "smooth(S, 0)"}],
        )
        assert any(d.kind == "BAD_SMOOTH_TAU" for d in validate_model(m))

    def test_diagnostics_deterministic_order(self):
        m = make_model(
            stocks=[{"name": "S", "initial": 0}],
            auxiliaries=[
                {"name": "z", "expr": "zz"},
                {"name": "a", "expr": "aa"},
            ],
        )
        assert validate_model(m) == validate_model(m)
        names = [d.name for d in validate_model(m)]
        assert names == sorted(names)
