import json

import pytest

from dronenav import evaluation as ev
from dronenav.fields import build_cost_field, oracle_cheapest_cost
from dronenav.llm import ProviderProfile
from dronenav.mapping import GridCoord, parse_map, serialize_map


class TestGenerateScenario:
    def test_deterministic(self):
        a = ev.generate_scenario(0, 20, 20, 3)
        b = ev.generate_scenario(0, 20, 20, 3)
        assert a == b

    def test_large_grid(self):
        s = ev.generate_scenario(3, 40, 40, 10)
        assert len(s.map.obstacles) == 10
        rects = [(ob.x1, ob.y1, ob.x2, ob.y2) for ob in s.map.obstacles]
        for i, a in enumerate(rects):
            for b in rects[i + 1:]:
                disjoint = (a[2] < b[0] or b[2] < a[0]
                            or a[3] < b[1] or b[3] < a[1])
                assert disjoint
        field = build_cost_field(s.map)
        assert oracle_cheapest_cost(field, s.map.start, s.map.end) \
            == s.reference_path.total_cost

    def test_obstacle_sides_in_range(self):
        s = ev.generate_scenario(5, 30, 30, 8)
        for ob in s.map.obstacles:
            assert 1 <= ob.x2 - ob.x1 + 1 <= 5
            assert 1 <= ob.y2 - ob.y1 + 1 <= 5
            assert not ob.contains(s.map.start)
            assert not ob.contains(s.map.end)

    def test_reference_path_is_optimal(self):
        s = ev.generate_scenario(12, 25, 25, 5)
        field = build_cost_field(s.map)
        assert s.reference_path.total_cost == oracle_cheapest_cost(
            field, s.map.start, s.map.end)

    def test_impossible_placement(self):
        with pytest.raises(ev.PlacementExhausted):
            ev.generate_scenario(0, 2, 2, 4)


class TestScenarioFixtures:
    def test_reference_scenario_fixture(self, reference_scenario):
        s = reference_scenario
        assert s.lunch_break_target == "school"
        assert s.flock_anchor == GridCoord(13, 15)
        assert len(s.reference_path) == 39
        assert s.reference_path.total_cost == 38.0
        field = build_cost_field(s.map)
        assert oracle_cheapest_cost(field, s.map.start, s.map.end) == 38.0

    def test_save_load_round_trip(self, tmp_path):
        s = ev.generate_scenario(9, 20, 20, 3)
        ev.save_scenario(s, tmp_path / "m.json", tmp_path / "s.json")
        loaded = ev.load_scenario(tmp_path / "s.json")
        assert loaded == s
        # the map fixture alone is valid wire schema
        parse_map((tmp_path / "m.json").read_text())


class TestJudge:
    def test_oracle_transcript_all_pass(self, reference_scenario):
        transcript = ev.oracle_transcript(reference_scenario)
        results = ev.judge(transcript, reference_scenario)
        assert [r.verdict for r in results] == [ev.PASS] * 5
        assert all(r.detail == "" for r in results)

    def test_oracle_transcript_generated_scenario(self):
        s = ev.generate_scenario(21, 40, 40, 10)
        results = ev.judge(ev.oracle_transcript(s), s)
        assert [r.verdict for r in results] == [ev.PASS] * 5

    def test_corrupted_step3_shape(self, reference_scenario):
        transcript = ev.oracle_transcript(reference_scenario, corrupt=True)
        results = ev.judge(transcript, reference_scenario)
        assert results[1].verdict == ev.FORMAT_ERROR
        assert [results[0].verdict] + [r.verdict for r in results[2:]] \
            == [ev.PASS] * 4

    def test_unmodified_map_is_semantic_error(self, reference_scenario):
        replies = ev.perfect_replies(reference_scenario)
        replies[2] = ("Nothing changed:\n```json\n"
                      + serialize_map(reference_scenario.map) + "\n```")
        transcript = self._transcript(replies, reference_scenario)
        results = ev.judge(transcript, reference_scenario)
        assert results[1].verdict == ev.SEMANTIC_ERROR

    def test_commands_short_of_goal(self, reference_scenario):
        replies = ev.perfect_replies(reference_scenario)
        lines = replies[5].splitlines()
        for i in range(len(lines) - 1, -1, -1):
            if lines[i].startswith("forward"):
                n = int(lines[i].split()[1])
                lines[i] = f"forward {n - 1}" if n > 1 else "hover"
                break
        replies[5] = "\n".join(lines)
        results = ev.judge(self._transcript(replies, reference_scenario),
                           reference_scenario)
        assert results[4].verdict == ev.SEMANTIC_ERROR
        assert "ends at" in results[4].detail

    def test_dropped_original_obstacle(self, reference_scenario):
        grid = reference_scenario.map
        pruned = type(grid)(grid.width, grid.height, grid.start, grid.end,
                            grid.obstacles[1:])
        modified = pruned.with_obstacles(
            [ev.lunch_zone_obstacle(reference_scenario)])
        replies = ev.perfect_replies(reference_scenario)
        replies[2] = "```json\n" + serialize_map(modified) + "\n```"
        results = ev.judge(self._transcript(replies, reference_scenario),
                           reference_scenario)
        assert results[1].verdict == ev.SEMANTIC_ERROR
        assert "dropped" in results[1].detail

    def test_flock_region_too_large(self, reference_scenario):
        from dronenav.mapping import Obstacle
        huge = Obstacle("bird flock", 7, 9, 19, 19, kind="contextual")
        modified = reference_scenario.map.with_obstacles([huge])
        replies = ev.perfect_replies(reference_scenario)
        replies[3] = "```json\n" + serialize_map(modified) + "\n```"
        results = ev.judge(self._transcript(replies, reference_scenario),
                           reference_scenario)
        assert results[2].verdict == ev.SEMANTIC_ERROR

    def test_missing_labels_in_analysis(self, reference_scenario):
        replies = ev.perfect_replies(reference_scenario)
        replies[0] = "A 20 by 20 grid with some obstacles."
        results = ev.judge(self._transcript(replies, reference_scenario),
                           reference_scenario)
        assert results[0].verdict == ev.SEMANTIC_ERROR

    def test_judging_is_deterministic(self, reference_scenario):
        transcript = ev.oracle_transcript(reference_scenario, corrupt=True)
        first = ev.judge(transcript, reference_scenario)
        second = ev.judge(transcript, reference_scenario)
        assert first == second

    def test_provider_failures_become_provider_verdicts(self, reference_scenario):
        from dronenav.llm import ProviderTimeout
        replies = ev.perfect_replies(reference_scenario)
        replies[2] = ProviderTimeout("gateway fell over")
        replies[4] = ProviderTimeout("gateway still down")
        results = ev.judge(self._transcript(replies, reference_scenario),
                           reference_scenario)
        assert results[1].verdict == ev.PROVIDER_ERROR
        assert results[3].verdict == ev.PROVIDER_ERROR
        assert results[0].verdict == ev.PASS
        assert results[2].verdict == ev.PASS
        report = ev.EvalReport(ev.scenario_meta(reference_scenario),
                               (ev.ReportRow("m", tuple(results)),))
        assert "Provider" in ev.emit_report(report)

    @staticmethod
    def _transcript(replies, scenario):
        from dronenav.llm import ChatSession, ScriptedProvider, run_protocol
        profile = ProviderProfile(id="t", endpoint="mock:", model_id="t",
                                  context_tokens=10 ** 6)
        return run_protocol(ChatSession(profile, ScriptedProvider(replies)),
                            scenario)


class TestReports:
    def _report(self, reference_scenario, corrupt=False):
        transcript = ev.oracle_transcript(reference_scenario, corrupt=corrupt)
        row = ev.ReportRow("model-a",
                           tuple(ev.judge(transcript, reference_scenario)))
        return ev.EvalReport(ev.scenario_meta(reference_scenario), (row,))

    def test_all_pass_row(self, reference_scenario):
        text = ev.emit_report(self._report(reference_scenario))
        assert "| model-a | ✓ | ✓ | ✓ | ✓ | ✓ |" in text

    def test_format_error_in_column_two(self, reference_scenario):
        text = ev.emit_report(self._report(reference_scenario, corrupt=True))
        assert "| model-a | ✓ | Format | ✓ | ✓ | ✓ |" in text

    def test_json_round_trip(self, reference_scenario):
        report = self._report(reference_scenario, corrupt=True)
        as_json = ev.emit_report(report, "json")
        again = ev.report_from_json(as_json)
        assert ev.emit_report(again) == ev.emit_report(report)
        assert ev.emit_report(again, "json") == as_json

    def test_five_results_enforced(self):
        with pytest.raises(ValueError):
            ev.ReportRow("m", (ev.CriterionResult(1, ev.PASS),))


class TestOverrides:
    def test_override_applied(self, reference_scenario, tmp_path):
        transcript = ev.oracle_transcript(reference_scenario, corrupt=True)
        report = ev.EvalReport(
            ev.scenario_meta(reference_scenario),
            (ev.ReportRow("m", tuple(ev.judge(transcript, reference_scenario))),))
        overrides_file = tmp_path / "overrides.json"
        overrides_file.write_text(json.dumps({"overrides": [{
            "model": "m", "scenario": reference_scenario.name,
            "criterion": 2, "verdict": "pass",
            "note": "human judged the truncated map acceptable"}]}))
        adjusted = ev.apply_overrides(report,
                                      ev.load_overrides(overrides_file))
        assert adjusted.rows[0].results[1].verdict == ev.PASS
        # untouched criteria keep their verdicts
        assert adjusted.rows[0].results[0].verdict == ev.PASS


class TestBenchmark:
    def test_mock_pair(self, reference_scenario):
        profiles = [
            ProviderProfile(id="good", endpoint="mock:perfect",
                            model_id="good", context_tokens=10 ** 6),
            ProviderProfile(id="bad", endpoint="mock:corrupt-step3",
                            model_id="bad", context_tokens=10 ** 6),
        ]
        report = ev.run_benchmark(profiles, reference_scenario)
        assert [row.model_id for row in report.rows] == ["bad", "good"]
        bad, good = report.rows
        assert [r.verdict for r in good.results] == [ev.PASS] * 5
        assert bad.results[1].verdict == ev.FORMAT_ERROR

    def test_record_then_replay(self, tmp_path, reference_scenario):
        profiles = [ProviderProfile(id="good", endpoint="mock:perfect",
                                    model_id="good", context_tokens=10 ** 6)]
        recorded = ev.run_benchmark(profiles, reference_scenario,
                                    record_dir=tmp_path)
        assert (tmp_path / "good.jsonl").exists()
        replayed = ev.run_benchmark(profiles, reference_scenario,
                                    replay_dir=tmp_path)
        assert ev.emit_report(replayed, "json") == ev.emit_report(recorded, "json")
