import json
from pathlib import Path

import numpy as np
import pytest

from vidseg.cli import main
from vidseg.errors import ConfigurationError, IngestionError
from vidseg.ingest import SynthConfig, generate_synthetic_case, write_synth_case
from vidseg.pipeline import (
    PipelineConfig,
    cluster_dump,
    discover_sequences,
    evaluate,
    run_pipeline,
    run_sequence,
)


def _materialize(tmp_path, name="seq", seed=0, n=12, drop=0.25, size=64):
    cfg = SynthConfig(
        n_frames=n, width=size, height=size, drop_fraction=drop, name=name
    )
    case = generate_synthetic_case(cfg, seed=seed)
    return case, write_synth_case(case, tmp_path)


def _strip_timing(obj):
    if isinstance(obj, dict):
        return {k: _strip_timing(v) for k, v in obj.items() if k != "timing"}
    if isinstance(obj, list):
        return [_strip_timing(v) for v in obj]
    return obj


class TestConfig:
    def test_defaults_match_reference_constants(self):
        cfg = PipelineConfig()
        assert cfg.k == 5
        assert cfg.tau_binarize == 0.2
        assert cfg.min_frac == 0.6
        assert cfg.p == 10
        assert cfg.effective_grabcut().donor_count == 10

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            PipelineConfig(k=0)
        with pytest.raises(ConfigurationError):
            PipelineConfig(tau_binarize=1.0)
        with pytest.raises(ConfigurationError):
            PipelineConfig(recall_mode="nope")
        with pytest.raises(ConfigurationError):
            PipelineConfig(jobs=0)

    def test_from_mapping_nested(self):
        cfg = PipelineConfig.from_mapping(
            {"k": 3, "grabcut": {"gamma": 10.0}, "tracker": {"search_radius": 8}}
        )
        assert cfg.k == 3
        assert cfg.grabcut.gamma == 10.0
        assert cfg.tracker.search_radius == 8

    def test_from_mapping_rejects_unknown_keys(self):
        with pytest.raises(ConfigurationError):
            PipelineConfig.from_mapping({"bogus": 1})

    def test_from_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"seed": 9, "p": 4}))
        cfg = PipelineConfig.from_file(path)
        assert cfg.seed == 9 and cfg.p == 4
        with pytest.raises(ConfigurationError):
            PipelineConfig.from_file(tmp_path / "missing.json")


class TestRunSequence:
    def test_writes_all_masks_and_summary(self, tmp_path):
        case, seq_dir = _materialize(tmp_path / "in", seed=1)
        out = tmp_path / "out" / "seq"
        entry = run_sequence(seq_dir, out, PipelineConfig(seed=1))
        n = len(case.sequence)
        assert entry["frames"] == n
        assert entry["filled_frames"] == sorted(case.dropped_frames)
        assert entry["error"] is None
        for i in range(n):
            assert (out / f"{i:05d}.png").is_file()
        stats = entry["cluster_stats"]
        assert stats["foreground_cluster"] >= 0
        assert sum(stats["cluster_sizes"]) == stats["records"]
        for stage in ("load_s", "premask_s", "cluster_s", "fill_s", "write_s"):
            assert entry["timing"][stage] >= 0.0
            assert entry["timing"]["per_frame_s"][stage] >= 0.0

    def test_output_masks_match_frame_dimensions(self, tmp_path):
        from vidseg.ingest import load_binary_mask

        case, seq_dir = _materialize(tmp_path / "in", seed=2, n=6, drop=0.0)
        out = tmp_path / "out" / "seq"
        run_sequence(seq_dir, out, PipelineConfig(seed=2))
        for i in range(6):
            m = load_binary_mask(out / f"{i:05d}.png")
            assert (m.width, m.height) == (64, 64)

    def test_no_drops_means_no_fills_and_cluster_unions(self, tmp_path):
        from vidseg.ingest import load_binary_mask
        from vidseg.premask import binarize

        case, seq_dir = _materialize(tmp_path / "in", seed=10, n=6, drop=0.0)
        out = tmp_path / "out" / "seq"
        entry = run_sequence(seq_dir, out, PipelineConfig(seed=10))
        assert entry["filled_frames"] == []
        # Every written mask is that frame's foreground-cluster union: here
        # one object proposal per frame (the generator's top-scored one).
        for i in range(6):
            written = load_binary_mask(out / f"{i:05d}.png")
            expected = binarize(case.proposals[i].proposals[0].score_map, 0.2)
            assert np.array_equal(written.bits, expected.bits)


class TestRunPipeline:
    def test_discovery_modes(self, tmp_path):
        _, seq_dir = _materialize(tmp_path / "in", name="a")
        assert discover_sequences(tmp_path / "in") == [seq_dir]
        assert discover_sequences(seq_dir) == [seq_dir]
        with pytest.raises(IngestionError):
            discover_sequences(tmp_path / "in" / "a" / "frames" / "nope")

    def test_batch_isolation(self, tmp_path):
        _materialize(tmp_path / "in", name="good", seed=3)
        bad = tmp_path / "in" / "bad" / "frames"
        bad.mkdir(parents=True)  # frames dir exists but is empty
        summary = run_pipeline(PipelineConfig(seed=3), tmp_path / "in", tmp_path / "out")
        assert summary["failures"] == 1
        by_name = {e["name"]: e for e in summary["sequences"]}
        assert by_name["good"]["error"] is None
        assert by_name["bad"]["error"]["error"] == "ingestion"

    def test_determinism_across_jobs(self, tmp_path):
        _materialize(tmp_path / "in", name="a", seed=4)
        _materialize(tmp_path / "in", name="b", seed=5)
        cfg1 = PipelineConfig(seed=11, jobs=1)
        cfg2 = PipelineConfig(seed=11, jobs=2)
        s1 = run_pipeline(cfg1, tmp_path / "in", tmp_path / "out1")
        s2 = run_pipeline(cfg2, tmp_path / "in", tmp_path / "out2")
        for seq in ("a", "b"):
            for p1 in sorted((tmp_path / "out1" / seq).glob("*.png")):
                p2 = tmp_path / "out2" / seq / p1.name
                assert p1.read_bytes() == p2.read_bytes()
        d1, d2 = _strip_timing(s1), _strip_timing(s2)
        d1["config"]["jobs"] = d2["config"]["jobs"] = None
        assert d1 == d2


class TestEvaluate:
    def test_perfect_predictions(self, tmp_path):
        case, seq_dir = _materialize(tmp_path / "in", seed=6, n=8, drop=0.0)
        pred = tmp_path / "pred" / "seq"
        pred.mkdir(parents=True)
        from vidseg.ingest import write_binary_mask

        for i, gt in enumerate(case.ground_truth):
            write_binary_mask(gt, pred / f"{i:05d}.png")
        report = evaluate(tmp_path / "pred", tmp_path / "in", PipelineConfig())
        from vidseg.metrics import j_decay, j_mean

        assert j_mean(report) == 1.0
        assert j_decay(report) == 0.0

    def test_missing_predictions_score_zero(self, tmp_path):
        case, _ = _materialize(tmp_path / "in", seed=7, n=6, drop=0.0)
        (tmp_path / "pred").mkdir()
        report = evaluate(tmp_path / "pred", tmp_path / "in", PipelineConfig())
        from vidseg.metrics import j_mean

        assert j_mean(report) == 0.0

    def test_exclude_endpoints(self, tmp_path):
        case, _ = _materialize(tmp_path / "in", seed=8, n=6, drop=0.0)
        (tmp_path / "pred").mkdir()
        cfg = PipelineConfig(exclude_endpoints=True)
        report = evaluate(tmp_path / "pred", tmp_path / "in", cfg)
        assert len(report.sequences[0].per_frame_j) == 4

    def test_constructed_decay(self, tmp_path):
        # Build gt/pred pairs with known per-frame J = 0.9, 0.8, 0.7, 0.6.
        from vidseg.core import BinaryMask
        from vidseg.ingest import write_binary_mask
        from vidseg.metrics import j_decay

        gt_dir = tmp_path / "gt" / "seq" / "gt"
        pred_dir = tmp_path / "pred" / "seq"
        gt_dir.mkdir(parents=True)
        pred_dir.mkdir(parents=True)
        for i, j in enumerate([0.9, 0.8, 0.7, 0.6]):
            gt_bits = np.zeros((1, 100), dtype=np.uint8)
            gt_bits[0, :100] = 1
            k = int(round(100 * j))  # pred = first k pixels: J = k/100
            pred_bits = np.zeros((1, 100), dtype=np.uint8)
            pred_bits[0, :k] = 1
            write_binary_mask(BinaryMask(gt_bits), gt_dir / f"{i:05d}.png")
            write_binary_mask(BinaryMask(pred_bits), pred_dir / f"{i:05d}.png")
        report = evaluate(tmp_path / "pred", tmp_path / "gt", PipelineConfig())
        assert j_decay(report) == pytest.approx(0.3, abs=1e-12)


class TestClusterDump:
    def test_dump_shape(self, tmp_path):
        _, seq_dir = _materialize(tmp_path / "in", seed=9, n=6, drop=0.0)
        dump = cluster_dump(seq_dir, PipelineConfig(seed=9))
        assert dump["frames"] == 6
        assert dump["n_clusters"] >= 1
        assert dump["foreground_cluster"] is not None
        assert len(dump["records"]) == sum(1 for _ in dump["records"])
        assert all(r["label"] >= 0 for r in dump["records"])


class TestCli:
    def test_synth_run_eval_round_trip(self, tmp_path, capsys):
        root = tmp_path / "case"
        rc = main(
            [
                "synth",
                "--output",
                str(root),
                "--seed",
                "2",
                "--n-frames",
                "8",
                "--width",
                "48",
                "--height",
                "48",
                "--drop-fraction",
                "0.25",
            ]
        )
        assert rc == 0
        rc = main(
            ["run", "--input", str(root), "--output", str(tmp_path / "out"), "--seed", "2"]
        )
        assert rc == 0
        rc = main(
            [
                "eval",
                "--input",
                str(tmp_path / "out"),
                "--gt",
                str(root),
                "--output",
                str(tmp_path / "rep"),
            ]
        )
        assert rc == 0
        report = json.loads((tmp_path / "rep" / "report.json").read_text())
        assert report["j_mean"] > 0.5
        assert (tmp_path / "rep" / "report.csv").is_file()

    def test_configuration_error_exit_code(self, tmp_path, capsys):
        rc = main(
            ["run", "--input", str(tmp_path), "--output", str(tmp_path / "o"), "--k", "0"]
        )
        assert rc == 2
        err = capsys.readouterr().err
        assert json.loads(err.strip().splitlines()[-1])["error"] == "configuration"

    def test_ingestion_error_exit_code(self, tmp_path, capsys):
        rc = main(
            ["run", "--input", str(tmp_path / "void"), "--output", str(tmp_path / "o")]
        )
        assert rc == 3
        err = capsys.readouterr().err
        assert json.loads(err.strip().splitlines()[-1])["error"] == "ingestion"

    def test_pipeline_failure_exit_code(self, tmp_path, capsys):
        # min_frac = 0.99 cannot be met by the foreground cluster when
        # frames were dropped, so selection fails.
        root = tmp_path / "case"
        main(
            [
                "synth",
                "--output",
                str(root),
                "--seed",
                "3",
                "--n-frames",
                "8",
                "--width",
                "48",
                "--height",
                "48",
                "--drop-fraction",
                "0.5",
            ]
        )
        rc = main(
            [
                "run",
                "--input",
                str(root),
                "--output",
                str(tmp_path / "out"),
                "--min-frac",
                "0.99",
            ]
        )
        assert rc == 4
        err = capsys.readouterr().err
        assert json.loads(err.strip().splitlines()[-1])["error"] == "cluster-selection-failed"

    def test_flags_override_config_file(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"seed": 1, "k": 3}))
        root = tmp_path / "case"
        main(
            [
                "synth",
                "--output",
                str(root),
                "--seed",
                "4",
                "--n-frames",
                "6",
                "--width",
                "48",
                "--height",
                "48",
            ]
        )
        rc = main(
            [
                "cluster-dump",
                "--input",
                str(root / "synth"),
                "--config",
                str(cfg_path),
                "--k",
                "2",
                "--output",
                str(tmp_path / "dump.json"),
            ]
        )
        assert rc == 0
        dump = json.loads((tmp_path / "dump.json").read_text())
        # k=2 retains at most 2 proposals per frame (flag beat the file's 3)
        per_frame = {}
        for r in dump["records"]:
            per_frame[r["frame"]] = per_frame.get(r["frame"], 0) + 1
        assert max(per_frame.values()) <= 2
