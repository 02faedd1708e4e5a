"""Command-line contract: exit codes, report lines, stream, translate, bench."""

import io
import json
import sys

import pytest

from sastl.cli import main


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def write_csv(path, rows):
    lines = ["time,location,variable,value"]
    lines += [f"{t},{loc},{var},{'' if v is None else v}" for t, loc, var, v in rows]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def parse_reports(captured: str):
    return [json.loads(line) for line in captured.strip().splitlines() if line]


@pytest.fixture
def hospital_fixture(tmp_path):
    """Two hospitals, three sensors, five samples, one violating hour."""
    graph = write_json(tmp_path / "graph.json", {
        "nodes": ["h1", "h2", "s1", "s2", "s3"],
        "edges": [
            {"a": "h1", "b": "s1", "w": 100},
            {"a": "h1", "b": "s2", "w": 200},
            {"a": "h2", "b": "s3", "w": 300},
            {"a": "h1", "b": "h2", "w": 1000},
        ],
    })
    labels = write_json(tmp_path / "labels.json", {"h1": ["Hospital"], "h2": ["Hospital"]})
    series = {"s1": [51, 49, 40, 30, 11], "s2": [80, 30, 20, 10, 30],
              "s3": [40, 30, 20, 10, 30]}
    signal = write_csv(
        tmp_path / "signal.csv",
        [(t, loc, "AQI", vs[t]) for loc, vs in series.items() for t in range(5)],
    )
    reqs = write_json(tmp_path / "reqs.json", {
        "requirements": [{
            "name": "hospital-aqi",
            "formula": "everywhere[0,inf; Hospital]( G[0,4]("
                       " A{avg}[0,500; true](AQI < 50) & A{max}[0,500; true](AQI < 80) ) )",
            "anchors": {"locations": ["h1"], "times": [0.0]},
        }],
    })
    return reqs, signal, graph, labels


class TestCheck:
    def test_violation_exits_one(self, hospital_fixture, capsys):
        assert main(["check", *hospital_fixture]) == 1
        reports = parse_reports(capsys.readouterr().out)
        assert len(reports) == 1
        r = reports[0]
        assert r["v"] == 1 and r["requirement"] == "hospital-aqi"
        assert r["satisfied"] is False and r["verdict_sign"] == -1

    def test_all_satisfied_exits_zero(self, tmp_path, capsys):
        graph = write_json(tmp_path / "g.json",
                           {"nodes": ["a", "b"], "edges": [{"a": "a", "b": "b", "w": 1}]})
        labels = write_json(tmp_path / "l.json", {})
        signal = write_csv(tmp_path / "s.csv",
                           [(t, loc, "x", 1.0) for t in range(3) for loc in ("a", "b")])
        reqs = write_json(tmp_path / "r.json", {
            "requirements": [{"name": "pos", "formula": "G[0,2](x > 0)",
                              "anchors": {"times": [0.0]}}],
        })
        assert main(["check", reqs, signal, graph, labels]) == 0
        reports = parse_reports(capsys.readouterr().out)
        assert len(reports) == 2 and all(r["satisfied"] for r in reports)

    def test_empty_label_domain_is_vacuously_satisfied(self, tmp_path, capsys):
        # the lone School node sits disconnected, so every anchored band is empty
        graph = write_json(tmp_path / "g.json", {"nodes": ["s1", "far"], "edges": []})
        labels = write_json(tmp_path / "l.json", {"far": ["School"]})
        signal = write_csv(tmp_path / "s.csv", [(0, "s1", "AQI", 99.0)])
        reqs = write_json(tmp_path / "r.json", {
            "requirements": [{"name": "school-aqi",
                              "formula": "everywhere[0,inf; School](AQI < 50)",
                              "anchors": {"locations": ["s1"]}}],
        })
        assert main(["check", reqs, signal, graph, labels]) == 0
        reports = parse_reports(capsys.readouterr().out)
        assert reports and all(r["vacuous"] for r in reports)
        assert all(r["robustness"] == "inf" for r in reports)

    def test_reorder_flag_changes_counters_not_reports(self, tmp_path, capsys):
        graph = write_json(tmp_path / "g.json", {
            "nodes": [f"n{i}" for i in range(6)],
            "edges": [{"a": f"n{i}", "b": f"n{i+1}", "w": 1} for i in range(5)],
        })
        labels = write_json(tmp_path / "l.json", {})
        signal = write_csv(tmp_path / "s.csv", [(0, f"n{i}", "x", 5.0) for i in range(6)])
        reqs = write_json(tmp_path / "r.json", {
            "requirements": [{
                "name": "guarded",
                "formula": "(C{min}[0,inf; true](x < 1000) > 0) & x > 1000000",
                "anchors": {"locations": ["n0"], "times": [0.0]},
            }],
        })
        args = ["check", reqs, signal, graph, labels, "--counters"]
        assert main(args) == 1
        default = parse_reports(capsys.readouterr().out)
        assert main(args + ["--no-reorder"]) == 1
        standard = parse_reports(capsys.readouterr().out)

        strip = lambda r: {k: v for k, v in r.items() if k != "eval_counters"}
        assert [strip(r) for r in default] == [strip(r) for r in standard]
        assert default[0]["eval_counters"] != standard[0]["eval_counters"]

        # under Boolean-only evaluation the counters isolate the reordering:
        # the false guard short-circuits all spatial work
        bargs = args + ["--boolean-only"]
        assert main(bargs) == 1
        default_b = parse_reports(capsys.readouterr().out)
        assert main(bargs + ["--no-reorder"]) == 1
        standard_b = parse_reports(capsys.readouterr().out)
        assert default_b[0]["eval_counters"]["descan_calls"] == 0
        assert standard_b[0]["eval_counters"]["descan_calls"] >= 1

    def test_boolean_only_line_shape(self, hospital_fixture, capsys):
        assert main(["check", *hospital_fixture, "--boolean-only"]) == 1
        r = parse_reports(capsys.readouterr().out)[0]
        assert "robustness" not in r and r["satisfied"] is False

    def test_validation_failure_names_the_file(self, hospital_fixture, tmp_path, capsys):
        reqs, _, graph, labels = hospital_fixture
        rogue = write_csv(tmp_path / "rogue.csv", [(0, "elsewhere", "AQI", 1.0)])
        assert main(["check", reqs, rogue, graph, labels]) == 2
        assert "rogue.csv" in capsys.readouterr().err

    def test_unknown_proposition_fails_validation(self, hospital_fixture, tmp_path, capsys):
        reqs_path = tmp_path / "bad.json"
        write_json(reqs_path, {
            "requirements": [{"name": "zoo", "formula": "somewhere[0,inf; Zoo](AQI < 50)"}],
        })
        _, signal, graph, labels = hospital_fixture
        assert main(["check", str(reqs_path), signal, graph, labels]) == 2
        assert "Zoo" in capsys.readouterr().err

    def test_formula_syntax_error_exits_two_with_position(self, hospital_fixture, tmp_path, capsys):
        reqs_path = tmp_path / "syntax.json"
        write_json(reqs_path, {"requirements": [{"name": "bad", "formula": "x >"}]})
        _, signal, graph, labels = hospital_fixture
        assert main(["check", str(reqs_path), signal, graph, labels]) == 2
        err = capsys.readouterr().err
        assert "syntax.json" in err and "line" in err

    def test_index_cache_reused_across_runs(self, hospital_fixture, tmp_path, capsys):
        cache = tmp_path / "cache"
        args = ["check", *hospital_fixture, "--index-cache", str(cache)]
        assert main(args) == 1
        first = parse_reports(capsys.readouterr().out)
        assert len(list(cache.glob("distances-*.npz"))) == 1
        assert main(args) == 1
        assert parse_reports(capsys.readouterr().out) == first
        assert len(list(cache.glob("distances-*.npz"))) == 1


class TestStream:
    def deployment(self, tmp_path):
        graph = write_json(tmp_path / "g.json",
                           {"nodes": ["a", "b"], "edges": [{"a": "a", "b": "b", "w": 1}]})
        labels = write_json(tmp_path / "l.json", {})
        reqs = write_json(tmp_path / "r.json", {
            "requirements": [{"name": "pos", "formula": "G[0,1](x > 0)"}],
        })
        return reqs, graph, labels

    def records(self):
        rows = []
        for t in range(4):
            for loc in ("a", "b"):
                rows.append({"t": float(t), "location": loc, "variable": "x",
                             "value": 1.0 if (t, loc) != (2, "b") else -3.0})
        return rows

    def test_stdin_stream_matches_offline_check(self, tmp_path, capsys, monkeypatch):
        reqs, graph, labels = self.deployment(tmp_path)
        signal = write_csv(
            tmp_path / "s.csv",
            [(r["t"], r["location"], r["variable"], r["value"]) for r in self.records()],
        )
        assert main(["check", reqs, signal, graph, labels]) == 1
        offline = parse_reports(capsys.readouterr().out)

        lines = "\n".join(json.dumps(r) for r in self.records()) + "\n"
        monkeypatch.setattr(sys, "stdin", io.StringIO(lines))
        assert main(["stream", reqs, graph, labels, "--step", "1"]) == 1
        online = parse_reports(capsys.readouterr().out)

        key = lambda r: (r["requirement"], r["anchor_time"], r["anchor_location"])
        assert sorted(online, key=key) == sorted(offline, key=key)

    def test_out_of_order_record_skipped_not_fatal(self, tmp_path, capsys, monkeypatch):
        reqs, graph, labels = self.deployment(tmp_path)
        rows = self.records()
        rows.insert(3, {"t": -5.0, "location": "a", "variable": "x", "value": 1.0})
        rows.insert(5, "this is not json")
        lines = "\n".join(r if isinstance(r, str) else json.dumps(r) for r in rows) + "\n"
        monkeypatch.setattr(sys, "stdin", io.StringIO(lines))
        code = main(["stream", reqs, graph, labels, "--step", "1"])
        captured = capsys.readouterr()
        assert code == 1  # the violation still surfaced
        assert "2 record(s) skipped" in captured.err


class TestTranslate:
    def test_prints_formula_text(self, tmp_path, capsys):
        template = write_json(tmp_path / "t.json", {
            "constants": {"GOOD": 50},
            "default_horizon": 3,
            "templates": [{
                "aggregation": "average", "entity": "air", "radius": 1,
                "pois": "Park", "comparison": "above", "parameter": "GOOD",
            }],
        })
        assert main(["translate", template]) == 0
        out = capsys.readouterr().out.strip()
        assert out.startswith("everywhere[0.0,inf; Park](G[0.0,3.0](A{avg}")
        from sastl import parse_sastl

        parse_sastl(out)  # canonical text re-parses

    def test_check_against_labels(self, tmp_path, capsys):
        labels = write_json(tmp_path / "l.json", {"p1": ["Park"]})
        template = write_json(tmp_path / "t.json", {
            "templates": [{"entity": "air", "comparison": "above", "parameter": 10,
                           "pois": "Zoo"}],
        })
        assert main(["translate", template, "--check", "--labels", labels]) == 2
        assert "Zoo" in capsys.readouterr().err

    def test_slot_error_names_the_field(self, tmp_path, capsys):
        template = write_json(tmp_path / "t.json", {"templates": [{"entity": "air"}]})
        assert main(["translate", template]) == 2
        assert "comparison" in capsys.readouterr().err


class TestBench:
    def test_tiny_smoke_equal_results(self, tmp_path, capsys):
        reqs = write_json(tmp_path / "r.json", {
            "requirements": [
                {"name": "spatial", "formula": "C{avg}[0,inf; true](G[0,5](pm < 150)) > 0.5",
                 "anchors": {"locations": ["n00"], "times": [0.0]}},
            ],
        })
        code = main([
            "bench", reqs, "--nodes", "16", "--samples", "10", "--seed", "3",
            "--modes", "standard,reordered,parallel2", "--repeats", "1",
            "--csv", str(tmp_path / "out.csv"),
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "spatial" in out and "standard" in out
        csv_text = (tmp_path / "out.csv").read_text()
        assert csv_text.startswith("requirement,mode,median_seconds")
