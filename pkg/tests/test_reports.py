import pytest

from bladeqc import (
    ArmComparison,
    InspectionStore,
    NotFoundError,
    ValidationError,
    arm_comparison,
    conversion_table,
    export_report,
    productivity_report,
)
from bladeqc.reports import (
    format_minutes,
    format_misses,
    format_percent,
    parse_structured_report,
    round_half_up,
)
from bladeqc.workflow import Arm

from fixtures_qc import build_conversion_job, build_productivity_job, find_job_id, manifest_for


class TestFormatting:
    def test_round_half_up(self):
        assert round_half_up(97.25, 1) == 97.3
        assert round_half_up(95.8333, 1) == 95.8
        assert round_half_up(0.00725, 4) == 0.0073

    def test_percent_strings(self):
        assert format_percent(97.3) == "97.3%"
        assert format_percent(100.0) == "100%"
        assert format_percent(95.8) == "95.8%"
        assert format_percent(None) == "n/a"

    def test_pinned_precisions(self):
        assert format_minutes(0.2049999) == "0.205"
        assert format_misses(0.0072) == "0.0072"


class TestConversionTable:
    def test_rows_match_expected(self, conversion_fixture_store):
        store, job_ids = conversion_fixture_store
        rows = conversion_table(store, job_ids=job_ids)
        observed = [(r.n_annotations, r.n_from_clues, format_percent(r.pct_converted)) for r in rows]
        assert observed == [
            (183, 178, "97.3%"),
            (192, 184, "95.8%"),
            (124, 124, "100%"),
            (192, 184, "95.8%"),
            (192, 184, "95.8%"),
        ]

    def test_percentages_are_exact_values(self, conversion_fixture_store):
        store, job_ids = conversion_fixture_store
        rows = conversion_table(store, job_ids=job_ids)
        assert [r.pct_converted for r in rows] == [97.3, 95.8, 100.0, 95.8, 95.8]

    def test_zero_annotation_job_has_no_percentage(self):
        store = InspectionStore(salt="zero", clock=lambda: 0)
        job_id = find_job_id("zero", Arm.TREATMENT, "zero")
        build_conversion_job(store, job_id, 0, 0)
        rows = conversion_table(store)
        assert rows[0].pct_converted is None
        assert rows[0].n_annotations == 0

    def test_unfinished_job_rejected_when_requested(self):
        store = InspectionStore(salt="unfin", clock=lambda: 0)
        store.ingest_job(manifest_for("jobU", ["u1"]))
        with pytest.raises(ValidationError):
            conversion_table(store, job_ids=["jobU"])
        # and silently excluded from the default selection
        assert conversion_table(store) == []

    def test_monotone_in_clue_count(self):
        values = []
        for n_from_clues in (10, 12, 14):
            store = InspectionStore(salt="mono", clock=lambda: 0)
            job_id = find_job_id("mono", Arm.TREATMENT, "mono")
            build_conversion_job(store, job_id, 20, n_from_clues)
            values.append(conversion_table(store)[0].pct_converted)
        assert values == sorted(values)
        assert all(0 <= v <= 100 for v in values)


class TestProductivityReport:
    def test_productivity_values_exact(self, productivity_fixture_store):
        control = productivity_report(productivity_fixture_store, "control")
        treatment = productivity_report(productivity_fixture_store, "treatment")
        assert format_minutes(control.avg_qc1_min_per_picture) == "0.212"
        assert format_minutes(control.avg_qc2_min_per_picture) == "0.090"
        assert format_misses(control.avg_missed_per_inspection) == "0.0080"
        assert format_minutes(treatment.avg_qc1_min_per_picture) == "0.205"
        assert format_minutes(treatment.avg_qc2_min_per_picture) == "0.086"
        assert format_misses(treatment.avg_missed_per_inspection) == "0.0072"

    def test_single_image_six_seconds(self):
        store = InspectionStore(salt="six", clock=lambda: 0)
        job_id = find_job_id("six", Arm.CONTROL, "six")
        store.ingest_job(manifest_for(job_id, ["s1"]))
        store.open_qc1("s1", timestamp=0)
        store.close_qc1("s1", timestamp=6000)
        store.complete_qc1("s1")
        store.complete_qc2("s1")  # zero QC2 screen time
        report = productivity_report(store, Arm.CONTROL)
        assert report.avg_qc1_min_per_picture == pytest.approx(0.1)
        assert report.avg_qc2_min_per_picture == 0.0
        assert report.avg_missed_per_inspection == 0.0

    def test_empty_selection_errors(self):
        store = InspectionStore(salt="none", clock=lambda: 0)
        with pytest.raises(NotFoundError):
            productivity_report(store, "control")

    def test_non_terminal_job_rejected_when_requested(self, productivity_fixture_store):
        store = InspectionStore(salt="part", clock=lambda: 0)
        job_id = find_job_id("part", Arm.CONTROL, "part")
        store.ingest_job(manifest_for(job_id, ["p1"]))
        with pytest.raises(ValidationError):
            productivity_report(store, "control", job_ids=[job_id])

    def test_union_equals_weighted_combination(self):
        store = InspectionStore(salt="comb", clock=lambda: 0)
        a = find_job_id("combA", Arm.CONTROL, "comb")
        b = find_job_id("combB", Arm.CONTROL, "comb")
        build_productivity_job(store, a, 2, 12000, 6000, n_missed=1)
        build_productivity_job(store, b, 3, 30000, 3000, n_missed=0)
        ra = productivity_report(store, "control", job_ids=[a])
        rb = productivity_report(store, "control", job_ids=[b])
        rall = productivity_report(store, "control")
        combined_qc1 = (
            ra.avg_qc1_min_per_picture * ra.n_pictures + rb.avg_qc1_min_per_picture * rb.n_pictures
        ) / (ra.n_pictures + rb.n_pictures)
        assert rall.avg_qc1_min_per_picture == pytest.approx(combined_qc1)
        combined_missed = (
            ra.avg_missed_per_inspection * ra.n_inspections
            + rb.avg_missed_per_inspection * rb.n_inspections
        ) / (ra.n_inspections + rb.n_inspections)
        assert rall.avg_missed_per_inspection == pytest.approx(combined_missed)


class TestArmComparison:
    def test_arm_deltas(self, productivity_fixture_store):
        cmp = arm_comparison(productivity_fixture_store)
        deltas = cmp.deltas
        assert format_minutes(deltas["avg_qc1_min_per_picture"]) == "-0.007"
        assert format_minutes(deltas["avg_qc2_min_per_picture"]) == "-0.004"
        assert format_misses(deltas["avg_missed_per_inspection"]) == "-0.0008"

    def test_consistent_with_individual_reports(self, productivity_fixture_store):
        cmp = arm_comparison(productivity_fixture_store)
        assert cmp.control == productivity_report(productivity_fixture_store, "control")
        assert cmp.treatment == productivity_report(productivity_fixture_store, "treatment")

    def test_identical_arms_zero_deltas(self):
        store = InspectionStore(salt="zero-delta", clock=lambda: 0)
        c = find_job_id("zdC", Arm.CONTROL, "zero-delta")
        t = find_job_id("zdT", Arm.TREATMENT, "zero-delta")
        build_productivity_job(store, c, 2, 9000, 3000)
        build_productivity_job(store, t, 2, 9000, 3000)
        deltas = arm_comparison(store).deltas
        assert all(v == pytest.approx(0.0) for v in deltas.values())

    def test_empty_arm_named(self):
        store = InspectionStore(salt="half", clock=lambda: 0)
        t = find_job_id("halfT", Arm.TREATMENT, "half")
        build_productivity_job(store, t, 1, 9000, 3000)
        with pytest.raises(NotFoundError, match="control"):
            arm_comparison(store)


class TestExport:
    def test_conversion_table_layout(self, conversion_fixture_store):
        store, job_ids = conversion_fixture_store
        rows = conversion_table(store, job_ids=job_ids)
        text = export_report(rows, format="tabular")
        lines = text.splitlines()
        assert "Annotations" in lines[0] and "% converted" in lines[0]
        assert len(lines) == 2 + len(rows)
        assert lines[2].split() == [job_ids[0], "183", "178", "97.3%"]
        assert lines[4].split()[-1] == "100%"

    def test_empty_rows_header_only(self):
        text = export_report([], format="tabular")
        assert len(text.splitlines()) == 2

    def test_structured_round_trip_conversion(self, conversion_fixture_store):
        store, job_ids = conversion_fixture_store
        rows = conversion_table(store, job_ids=job_ids)
        again = parse_structured_report(export_report(rows, format="structured"))
        assert again == rows

    def test_structured_round_trip_productivity(self, productivity_fixture_store):
        report = productivity_report(productivity_fixture_store, "treatment")
        again = parse_structured_report(export_report(report, format="structured"))
        assert again == report

    def test_structured_round_trip_comparison(self, productivity_fixture_store):
        cmp = arm_comparison(productivity_fixture_store)
        again = parse_structured_report(export_report(cmp, format="structured"))
        assert isinstance(again, ArmComparison)
        assert again.control == cmp.control and again.treatment == cmp.treatment

    def test_tabular_pins_formats(self, productivity_fixture_store):
        text = export_report(arm_comparison(productivity_fixture_store), format="tabular")
        assert "0.212" in text and "0.0072" in text and "-0.007" in text

    def test_unknown_format_rejected(self, productivity_fixture_store):
        with pytest.raises(ValidationError):
            export_report(productivity_report(productivity_fixture_store, "control"), format="yaml")


class TestReplayConsistency:
    def test_reports_pure_over_replay(self, conversion_fixture_store):
        store, job_ids = conversion_fixture_store
        records = [r for j in store.journals.values() for r in j]
        replayed = InspectionStore.replay_records(records)
        assert conversion_table(replayed, job_ids=job_ids) == conversion_table(store, job_ids=job_ids)
