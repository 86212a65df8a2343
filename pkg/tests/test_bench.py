from __future__ import annotations

import csv
import io
import json

import pytest

from vanetauth import bench
from vanetauth.errors import IoFailure
from vanetauth.primitives import OpCounter


def test_instrumented_counts():
    p = bench.count_auth_ops("proposed")
    assert p["OBU"] == OpCounter(hash_ops=3, enc_ops=1)
    assert p["RSU"] == OpCounter()
    assert p["TA"] == OpCounter(hash_ops=4, enc_ops=1)
    assert bench.count_auth_ops("baseline", "TA") == OpCounter(exp_ops=3, hash_ops=6, xor_ops=2)
    assert bench.count_auth_ops("baseline", "OBU") == OpCounter(exp_ops=3, hash_ops=5, xor_ops=1)


def test_counts_stable_across_seeds():
    runs = [bench.count_auth_ops("baseline", modulus_bits=64, seed=s) for s in range(5)]
    assert all(r == runs[0] for r in runs)


def test_count_formula_agreement():
    for scheme in bench.IMPLEMENTED:
        counts = bench.count_auth_ops(scheme)
        assert counts == bench.FORMULAS[scheme]


def test_unimplemented_scheme_rejected():
    with pytest.raises(ValueError):
        bench.count_auth_ops("ecc_reglist")


def test_reference_evaluation():
    rows = {(r.scheme, r.role): r for r in bench.build_table(bench.REFERENCE_COSTS)}
    assert rows[("proposed", "OBU")].formula_ms == pytest.approx(0.21)
    assert rows[("proposed", "TA")].formula_ms == pytest.approx(0.24)
    assert rows[("ecc_reglist", "OBU")].formula_ms == pytest.approx(3 * 20.23 + 7 * 0.03)
    assert rows[("ecc_reglist", "OBU")].note == "printed 60 ms"
    assert rows[("baseline", "OBU")].note == ""


def test_zero_costs():
    zero = bench.PrimitiveCosts(0, 0, 0, 0, 0)
    assert all(r.formula_ms == 0 for r in bench.build_table(zero))


def test_negative_cost_rejected():
    with pytest.raises(ValueError):
        bench.PrimitiveCosts(-1, 0, 0, 0, 0)


def test_table_shape_and_sources():
    rows = bench.build_table(bench.REFERENCE_COSTS)
    assert len(rows) == 12
    for r in rows:
        assert r.source == ("instrumented" if r.scheme in bench.IMPLEMENTED else "formula-only")
    assert len(bench.build_table(bench.REFERENCE_COSTS, include_reference_rows=False)) == 6


def test_csv_emit_and_round_trip(tmp_path):
    rows = bench.build_table(bench.REFERENCE_COSTS, measured={"proposed": {"OBU": 0.5}})
    out = tmp_path / "t.csv"
    bench.emit_results(rows, "csv", out)
    text = out.read_text()
    lines = text.splitlines()
    assert len(lines) == 13
    assert lines[0] == ",".join(bench.CSV_COLUMNS)
    back = bench.parse_results(text)
    assert [r.to_json() for r in back] == [r.to_json() for r in bench._sorted(rows)]
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert [(p["scheme"], p["role"]) for p in parsed[:3]] == [("baseline", r) for r in bench.ROLES]


def test_json_mirrors_csv(tmp_path):
    rows = bench.build_table(bench.REFERENCE_COSTS)
    data = json.loads(bench.render_results(rows, "json"))
    assert len(data) == 12 and set(data[0]) == set(bench.CSV_COLUMNS)
    assert [r.to_json() for r in bench.parse_results(bench.render_results(rows, "json"), "json")] == data


def test_emit_errors(tmp_path):
    rows = bench.build_table(bench.REFERENCE_COSTS)
    with pytest.raises(IoFailure):
        bench.emit_results(rows, "csv", tmp_path / "missing" / "x.csv")
    with pytest.raises(ValueError):
        bench.emit_results([], "csv", tmp_path / "x.csv")


def test_plot_data():
    pd = dict(bench.plot_data(bench.build_table(bench.REFERENCE_COSTS)))
    assert pd["proposed"] == pytest.approx(0.45)
    assert pd["baseline"] == pytest.approx(28.89)


def test_measure_primitives_needs_iterations():
    with pytest.raises(ValueError):
        bench.measure_primitives(999)


def test_measure_primitives_sanity():
    c = bench.measure_primitives(1000, modulus_bits=2048, warmup=10)
    assert c.t_h_ms > 0 and c.t_enc_ms > 0 and c.t_e_ms > 0
    assert c.t_h_ms < c.t_e_ms
    assert c.samples == 1000 and c.t_m_is_reference
    assert c.t_m_ms == bench.REFERENCE_COSTS.t_m_ms


def test_format_table_mentions_every_row():
    rows = bench.build_table(bench.REFERENCE_COSTS)
    text = bench.format_table(rows)
    assert len(text.splitlines()) == 14 and "(printed 60 ms)" in text
