"""Command-line surface: ingestion, depth reports, experiments, round trips."""
import json

import numpy as np
import pytest

from wsdepth import EmptyGroup, IngestManifest, NonFiniteValue, ParseError, ingest
from wsdepth.cli import main


def write(path, text):
    path.write_text(text)
    return str(path)


@pytest.fixture
def small_csv(tmp_path):
    rng = np.random.default_rng(3)
    lines = ["group,x0,x1"]
    for gid in range(4):
        for _ in range(6):
            x = rng.normal(size=2) + gid
            lines.append(f"g{gid},{float(x[0])!r},{float(x[1])!r}")
    return write(tmp_path / "small.csv", "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# ingest
# ---------------------------------------------------------------------------


def test_ingest_groups_rows_by_id(tmp_path):
    path = write(
        tmp_path / "tiny.csv",
        "group,x0,x1\na,0,0\na,1,1\na,2,2\nb,5,5\nb,6,6\nb,7,7\n",
    )
    named = ingest(IngestManifest(path=path, group_col="group"))
    assert [gid for gid, _ in named] == ["a", "b"]
    for _, cloud in named:
        assert cloud.m == 3 and cloud.d == 2
        assert cloud.is_uniform


def test_ingest_header_only_file_raises(tmp_path):
    path = write(tmp_path / "empty.csv", "group,x0,x1\n")
    with pytest.raises(EmptyGroup):
        ingest(IngestManifest(path=path, group_col="group"))


def test_ingest_reports_parse_position(tmp_path):
    path = write(tmp_path / "bad.csv", "group,x0\na,1.0\na,oops\n")
    with pytest.raises(ParseError, match="3"):
        ingest(IngestManifest(path=path, group_col="group"))


def test_ingest_rejects_non_finite(tmp_path):
    path = write(tmp_path / "inf.csv", "group,x0\na,1.0\na,inf\n")
    with pytest.raises(NonFiniteValue):
        ingest(IngestManifest(path=path, group_col="group"))


def test_ingest_headerless_and_column_selection(tmp_path):
    path = write(tmp_path / "raw.tsv", "a\t1.0\t9\nb\t2.0\t9\nb\t3.0\t9\n")
    named = ingest(
        IngestManifest(
            path=path,
            group_col="0",
            coord_cols=(1,),
            delimiter="\t",
            has_header=False,
        )
    )
    assert [gid for gid, _ in named] == ["a", "b"]
    assert named[1][1].m == 2 and named[1][1].d == 1


def test_ingest_unequal_group_sizes(tmp_path):
    path = write(tmp_path / "uneven.csv", "group,x0\na,1\na,2\na,3\nb,9\n")
    named = ingest(IngestManifest(path=path, group_col="group"))
    assert named[0][1].m == 3
    assert named[1][1].m == 1


# ---------------------------------------------------------------------------
# depth command
# ---------------------------------------------------------------------------


def read_records(path):
    with open(path) as handle:
        return [json.loads(line) for line in handle]


def test_cmd_depth_writes_records(small_csv, tmp_path):
    out = str(tmp_path / "report.jsonl")
    code = main(
        ["depth", "--input", small_csv, "--group-col", "group",
         "--threshold", "0.25", "--out", out]
    )
    assert code == 0
    records = read_records(out)
    assert [r["id"] for r in records] == ["g0", "g1", "g2", "g3"]
    assert sorted(r["rank"] for r in records) == [1, 2, 3, 4]
    assert sum(r["flagged"] for r in records) == 1  # ceil(0.25 * 4)
    for r in records:
        assert 0.0 <= r["depth"] <= 1.0


def test_cmd_depth_two_groups_yield_zero_depths(tmp_path):
    path = write(
        tmp_path / "two.csv",
        "group,x0\na,0\na,1\nb,5\nb,6\n",
    )
    out = str(tmp_path / "two.jsonl")
    assert main(["depth", "--input", path, "--group-col", "group", "--out", out]) == 0
    assert [r["depth"] for r in read_records(out)] == [0.0, 0.0]


@pytest.mark.parametrize(
    "method", ["wsd", "wsd-discrete", "lens", "metric-spatial", "kernel-spatial"]
)
def test_cmd_depth_supports_every_method(method, small_csv, tmp_path):
    out = str(tmp_path / f"{method}.jsonl")
    code = main(
        ["depth", "--input", small_csv, "--group-col", "group",
         "--method", method, "--out", out]
    )
    assert code == 0
    assert len(read_records(out)) == 4


def test_cmd_depth_unknown_method_is_usage_error(small_csv, tmp_path, capsys):
    code = main(
        ["depth", "--input", small_csv, "--group-col", "group",
         "--method", "nope", "--out", str(tmp_path / "x")]
    )
    assert code == 1
    assert "unknown method" in capsys.readouterr().err


def test_cmd_depth_missing_file_is_ingest_error(tmp_path, capsys):
    code = main(
        ["depth", "--input", str(tmp_path / "absent.csv"), "--out",
         str(tmp_path / "x")]
    )
    assert code == 2


def test_cmd_depth_numerical_error_exit_code(tmp_path, capsys):
    path = write(tmp_path / "two.csv", "group,x0\na,0\nb,5\n")
    code = main(
        ["depth", "--input", path, "--group-col", "group", "--method", "lens",
         "--out", str(tmp_path / "x")]
    )
    assert code == 3


def test_climate_shaped_ingestion_flags_eight(tmp_path):
    # 150 groups x 40 rows x 12 columns, 5% threshold -> ceil(7.5) = 8 flags
    rng = np.random.default_rng(12)
    lines = ["group," + ",".join(f"x{k}" for k in range(12))]
    for gid in range(150):
        center = rng.normal(size=12)
        for _ in range(40):
            row = center + rng.normal(size=12)
            lines.append(f"y{gid:03d}," + ",".join(repr(float(v)) for v in row))
    path = write(tmp_path / "climate.csv", "\n".join(lines) + "\n")

    named = ingest(IngestManifest(path=path, group_col="group"))
    assert len(named) == 150
    assert all(c.m == 40 and c.d == 12 for _, c in named)

    out = str(tmp_path / "climate.jsonl")
    code = main(
        ["depth", "--input", path, "--group-col", "group",
         "--threshold", "0.05", "--out", out]
    )
    assert code == 0
    records = read_records(out)
    assert len(records) == 150
    assert sum(r["flagged"] for r in records) == 8


# ---------------------------------------------------------------------------
# sample command and round trip
# ---------------------------------------------------------------------------


def test_sample_round_trip_reproduces_clouds_exactly(tmp_path):
    from wsdepth import ExperimentConfig, sample_two_stage

    dump = str(tmp_path / "dump.csv")
    code = main(
        ["sample", "--experiment", "consistency", "--case", "3",
         "--n", "6", "--m", "15", "--seed", "99", "--out", dump]
    )
    assert code == 0
    named = ingest(IngestManifest(path=dump, group_col="group"))
    data = sample_two_stage(
        ExperimentConfig(experiment="consistency", case=3, n=6, m=15, seed=99)
    )
    assert len(named) == 6
    for (gid, cloud), reference in zip(named, data.clouds):
        np.testing.assert_array_equal(cloud.points, reference.points)


def test_sample_includes_planted_outliers(tmp_path):
    dump = str(tmp_path / "out.csv")
    code = main(
        ["sample", "--experiment", "outliers", "--case", "1",
         "--n", "4", "--m", "8", "--seed", "5", "--out", dump]
    )
    assert code == 0
    named = ingest(IngestManifest(path=dump, group_col="group"))
    assert len(named) == 10  # 4 regular + 6 planted


# ---------------------------------------------------------------------------
# experiment command
# ---------------------------------------------------------------------------


def test_cmd_experiment_consistency_case2(tmp_path):
    out = str(tmp_path / "table.tsv")
    code = main(
        ["experiment", "--experiment", "consistency", "--case", "2",
         "--n", "10", "--m", "30", "--reps", "2", "--seed", "1", "--out", out]
    )
    assert code == 0
    lines = open(out).read().splitlines()
    assert lines[0].split("\t") == [
        "parameter", "analytic", "mean_empirical", "sd_empirical", "repetitions"
    ]
    assert len(lines) == 3
    summary = json.load(open(out + ".summary.json"))
    assert summary["analytic_values"] == [0.5, 0.5]
    assert summary["experiment"] == "consistency"


def test_cmd_experiment_outliers_summary(tmp_path):
    out = str(tmp_path / "out.tsv")
    code = main(
        ["experiment", "--experiment", "outliers", "--case", "2",
         "--n", "10", "--m", "25", "--reps", "1", "--seed", "3",
         "--threshold", "0.2", "--out", out]
    )
    assert code == 0
    summary = json.load(open(out + ".summary.json"))
    assert 0.0 <= summary["recovery_fraction"] <= 1.0


def test_cmd_experiment_location_equivalence_table(tmp_path):
    out = str(tmp_path / "loc.tsv")
    code = main(
        ["experiment", "--experiment", "location_equivalence", "--case", "4",
         "--n", "8", "--m", "30", "--reps", "1", "--seed", "2", "--out", out]
    )
    assert code == 0
    lines = open(out).read().splitlines()
    assert lines[0] == "cloud\twsd\tlocation_depth"
    assert len(lines) == 9
    summary = json.load(open(out + ".summary.json"))
    assert -1.0 <= summary["rank_correlation_min"] <= 1.0


def test_cmd_experiment_kernel_comparison_table(tmp_path):
    out = str(tmp_path / "kc.tsv")
    code = main(
        ["experiment", "--experiment", "kernel_comparison", "--case", "2",
         "--n", "6", "--m", "25", "--reps", "1", "--seed", "2", "--out", out]
    )
    assert code == 0
    lines = open(out).read().splitlines()
    assert lines[0] == "cloud\twsd\tkernel_depth\texotic"
    assert len(lines) == 11  # 6 regular + 4 exotic
    summary = json.load(open(out + ".summary.json"))
    assert 0.0 <= summary["wsd_bottom_fraction"] <= 1.0


def test_cmd_depth_named_coordinate_subset(tmp_path):
    path = write(
        tmp_path / "named.csv",
        "group,x0,junk,x1\na,0,9,0\na,1,9,1\nb,5,9,5\nb,6,9,6\nc,2,9,3\nc,3,9,2\n",
    )
    out = str(tmp_path / "named.jsonl")
    code = main(
        ["depth", "--input", path, "--group-col", "group",
         "--coord-cols", "x0,x1", "--out", out]
    )
    assert code == 0
    assert len(read_records(out)) == 3


def test_cmd_experiment_invalid_config_is_usage_error(tmp_path, capsys):
    code = main(
        ["experiment", "--experiment", "consistency", "--case", "2",
         "--n", "10", "--m", "30", "--reps", "0", "--seed", "1",
         "--out", str(tmp_path / "x")]
    )
    assert code == 1
    code = main(
        ["experiment", "--experiment", "bogus", "--out", str(tmp_path / "x")]
    )
    assert code == 1


def test_usage_error_exit_code_is_one(capsys):
    assert main(["depth"]) == 1  # missing required flags
    assert main(["bogus"]) == 1


def test_outputs_byte_identical_across_thread_counts(small_csv, tmp_path):
    reports = []
    for threads in (1, 4):
        out = tmp_path / f"t{threads}.jsonl"
        main(
            ["depth", "--input", small_csv, "--group-col", "group",
             "--threads", str(threads), "--out", str(out)]
        )
        reports.append(out.read_bytes())
    assert reports[0] == reports[1]
