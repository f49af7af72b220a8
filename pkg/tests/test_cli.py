"""Command-line interface: exit codes, outputs, and determinism."""

from __future__ import annotations

import json

import pytest

from pausebench.cli import main
from pausebench.enrichment import DISFLUENCY_TOKEN
from pausebench.neuralcore import load_model
from pausebench.synthcohort import CohortSpec, cohort_spec_to_json, generate_cohort
from pausebench.tensorio import load_manifest


def write_transcript(path, subject_id="s01", gap=0.8, disfluent=False):
    doc = {
        "subject_id": subject_id,
        "test": "PDT",
        "segments": [
            {
                "words": [
                    {"text": "der", "start": 0.10, "end": 0.40, "disfluent": disfluent},
                    {"text": "Hund", "start": 0.40 + gap, "end": 0.80 + gap},
                ]
            }
        ],
    }
    path.write_text(json.dumps(doc), encoding="utf-8")


@pytest.fixture(scope="module")
def small_cohort(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli-cohort")
    spec = CohortSpec(
        seed=21, count_nc=6, count_mci=6, count_ad=0, delta=3.0, mean_words=6.0
    )
    return generate_cohort(spec, root)


class TestEnrichCommand:
    def test_happy_path(self, tmp_path, capsys):
        in_dir = tmp_path / "in"
        out_dir = tmp_path / "out"
        in_dir.mkdir()
        write_transcript(in_dir / "s01.json")
        write_transcript(in_dir / "s02.json", subject_id="s02", gap=0.3)
        code = main(["enrich", "--in", str(in_dir), "--scheme", "p3",
                     "--out", str(out_dir)])
        assert code == 0
        text = (out_dir / "s01.txt").read_text(encoding="utf-8")
        assert text.rstrip("\n") == "der [P3.2] Hund"
        captured = capsys.readouterr()
        assert "[config]" in captured.out
        assert "2" in captured.out  # file count in the summary

    def test_disfluency_scheme(self, tmp_path):
        in_dir = tmp_path / "in"
        out_dir = tmp_path / "out"
        in_dir.mkdir()
        write_transcript(in_dir / "s01.json", disfluent=True)
        code = main(["enrich", "--in", str(in_dir), "--scheme", "p3-disfl",
                     "--out", str(out_dir)])
        assert code == 0
        assert DISFLUENCY_TOKEN in (out_dir / "s01.txt").read_text(encoding="utf-8")

    def test_malformed_input_leaves_output_untouched(self, tmp_path, capsys):
        in_dir = tmp_path / "in"
        out_dir = tmp_path / "out"
        in_dir.mkdir()
        write_transcript(in_dir / "a.json")
        (in_dir / "b.json").write_text("{not json", encoding="utf-8")
        code = main(["enrich", "--in", str(in_dir), "--scheme", "p1",
                     "--out", str(out_dir)])
        assert code == 2
        assert "b.json" in capsys.readouterr().err
        assert not out_dir.exists() or not list(out_dir.iterdir())

    def test_empty_input_dir(self, tmp_path):
        in_dir = tmp_path / "in"
        in_dir.mkdir()
        code = main(["enrich", "--in", str(in_dir), "--scheme", "p1",
                     "--out", str(tmp_path / "out")])
        assert code == 2


class TestSynthCommand:
    def test_generates_loadable_cohort(self, tmp_path, capsys):
        spec = CohortSpec(seed=2, count_nc=5, count_mci=5, count_ad=0, mean_words=6.0)
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(cohort_spec_to_json(spec), encoding="utf-8")
        out = tmp_path / "cohort"
        code = main(["synth", "--spec", str(spec_path), "--out", str(out)])
        assert code == 0
        manifest = load_manifest(out / "manifest.json")
        assert len(manifest.records) == 10
        assert "generated 10 subjects" in capsys.readouterr().out

    def test_bad_spec_is_a_parse_error(self, tmp_path):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text('{"seed": "abc"}', encoding="utf-8")
        code = main(["synth", "--spec", str(spec_path), "--out", str(tmp_path / "c")])
        assert code == 2


class TestTrainCommand:
    def test_writes_loadable_model(self, small_cohort, tmp_path):
        model_path = tmp_path / "model.pemm"
        code = main([
            "train", "--manifest", str(small_cohort.manifest_path),
            "--task", "nc-mci", "--mode", "self-text", "--seed", "0",
            "--out", str(model_path),
        ])
        assert code == 0
        params, hp = load_model(model_path)
        assert params.d_model == 768
        assert hp.class_weights == (1.0, 1.0)  # balanced cohort

    def test_degenerate_task_exit_code(self, small_cohort, tmp_path):
        # cohort has no AD subjects, so mci-ad training has one class
        code = main([
            "train", "--manifest", str(small_cohort.manifest_path),
            "--task", "mci-ad", "--mode", "self-text", "--seed", "0",
            "--out", str(tmp_path / "m.pemm"),
        ])
        assert code == 4


class TestCvCommand:
    def test_reports_are_byte_identical(self, small_cohort, tmp_path, capsys):
        paths = [tmp_path / "r1.json", tmp_path / "r2.json"]
        for p in paths:
            code = main([
                "cv", "--manifest", str(small_cohort.manifest_path),
                "--task", "nc-mci", "--mode", "self-text", "--seed", "1",
                "--report", str(p),
            ])
            assert code == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()
        out = capsys.readouterr().out
        assert "mean" in out

    def test_missing_audio_is_manifest_error(self, small_cohort, tmp_path):
        doc = json.loads(small_cohort.manifest_path.read_text(encoding="utf-8"))
        for rec in doc["records"]:
            rec["audio_matrix_path"] = None
            for key in ("text_matrix_path", "enriched_transcript_path"):
                rec[key] = str((small_cohort.manifest_path.parent / rec[key]).resolve())
        manifest_path = tmp_path / "manifest.json"
        manifest_path.write_text(json.dumps(doc), encoding="utf-8")
        code = main([
            "cv", "--manifest", str(manifest_path),
            "--task", "nc-mci", "--mode", "cross", "--seed", "0",
            "--report", str(tmp_path / "r.json"),
        ])
        assert code == 3


class TestGradCheckCommand:
    def test_passes_with_explicit_seed(self, capsys):
        assert main(["grad-check", "--seed", "7"]) == 0
        assert "max relative error" in capsys.readouterr().out

    def test_seed_from_environment(self, monkeypatch, capsys):
        monkeypatch.setenv("PAUSEBENCH_SEED", "11")
        assert main(["grad-check"]) == 0
        assert "seed=11" in capsys.readouterr().out

    def test_invalid_environment_seed(self, monkeypatch):
        monkeypatch.setenv("PAUSEBENCH_SEED", "eleven")
        assert main(["grad-check"]) == 2


class TestInspectCommand:
    def test_matrix(self, small_cohort, capsys):
        rec = small_cohort.manifest.records[0]
        assert main(["inspect", str(rec.text_matrix_path)]) == 0
        out = capsys.readouterr().out
        assert "768" in out

    def test_manifest(self, small_cohort, capsys):
        assert main(["inspect", str(small_cohort.manifest_path)]) == 0
        out = capsys.readouterr().out
        assert "12" in out

    def test_model(self, small_cohort, tmp_path, capsys):
        model_path = tmp_path / "model.pemm"
        main([
            "train", "--manifest", str(small_cohort.manifest_path),
            "--task", "nc-mci", "--mode", "self-text", "--seed", "0",
            "--out", str(model_path),
        ])
        capsys.readouterr()
        assert main(["inspect", str(model_path)]) == 0
        out = capsys.readouterr().out
        assert "768" in out and "512" in out

    def test_missing_file(self, tmp_path):
        assert main(["inspect", str(tmp_path / "nope.pemb")]) == 1


class TestArgumentErrors:
    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as exc:
            main(["enrich", "--bogus", "x"])
        assert exc.value.code == 2

    def test_missing_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_unknown_scheme_flag(self):
        with pytest.raises(SystemExit) as exc:
            main(["enrich", "--in", "x", "--scheme", "p9", "--out", "y"])
        assert exc.value.code == 2
