"""End-to-end CLI integration on a small synthetic dataset.

Each subcommand runs against real files in a tmp dir; reruns with identical
arguments must reproduce the primary outputs byte for byte.
"""

import json
import shutil
import subprocess
import sys

import pytest

from capsulewardrobe.cli import main

pytestmark = pytest.mark.usefixtures("workdir")


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli")
    rc = main(
        [
            "synth",
            "--out-dir",
            str(path / "data"),
            "--k",
            "3",
            "--v",
            "30",
            "--layers",
            "3",
            "--per-layer",
            "10",
            "--docs",
            "120",
            "--outfits",
            "30",
            "--seed",
            "11",
        ]
    )
    assert rc == 0
    rc = main(
        [
            "fit",
            "--corpus",
            str(path / "data" / "corpus.json"),
            "--k",
            "3",
            "--variant",
            "ctm",
            "--iterations",
            "60",
            "--burn-in",
            "20",
            "--seed",
            "5",
            "--out",
            str(path / "model.json"),
        ]
    )
    assert rc == 0
    return path


def rerun_identical(args, out_paths):
    """Run twice; primary outputs must match byte for byte."""
    assert main(list(args)) == 0
    first = {p: p.read_bytes() for p in out_paths}
    assert main(list(args)) == 0
    for p in out_paths:
        assert p.read_bytes() == first[p], f"output {p} changed between reruns"


class TestFitAndScore:
    def test_fit_rerun_byte_identical(self, workdir):
        out = workdir / "model2.json"
        args = [
            "fit",
            "--corpus", str(workdir / "data" / "corpus.json"),
            "--k", "3",
            "--variant", "lda",
            "--iterations", "40",
            "--burn-in", "20",
            "--seed", "6",
            "--out", str(out),
        ]
        rerun_identical(args, [out])
        payload = json.loads(out.read_text())
        assert payload["variant"] == "lda"
        assert sorted(payload) == ["K", "V", "alpha", "beta", "phi", "variant", "vocab"]

    def test_score(self, workdir):
        docs = workdir / "docs.json"
        corpus = json.loads((workdir / "data" / "corpus.json").read_text())
        docs.write_text(json.dumps({"documents": corpus["documents"][:8]}))
        out = workdir / "scores.json"
        args = [
            "score",
            "--model", str(workdir / "model.json"),
            "--docs", str(docs),
            "--threshold", "-4.0",
            "--seed", "3",
            "--out", str(out),
        ]
        rerun_identical(args, [out])
        payload = json.loads(out.read_text())
        assert len(payload["scores"]) == 8
        assert all(row["step"] in (0, 1) for row in payload["scores"])


class TestCapsule:
    @pytest.mark.parametrize("algo", ["iterative", "naive", "optimal", "mmr", "kmedoids"])
    def test_each_algorithm(self, workdir, algo):
        out = workdir / f"capsule_{algo}.json"
        trace = workdir / f"trace_{algo}.json"
        args = [
            "capsule",
            "--catalog", str(workdir / "data" / "catalog.json"),
            "--model", str(workdir / "model.json"),
            "--t", "3",
            "--algo", algo,
            "--threshold", "-3.6",
            "--seed", "2",
            "--threads", "1",
            "--out", str(out),
            "--trace", str(trace),
        ]
        outputs = [out] + ([trace] if algo in ("iterative", "naive") else [])
        rerun_identical(args, outputs)
        payload = json.loads(out.read_text())
        assert [len(ids) for ids in payload["selections"]] == [3, 3, 3]
        assert payload["objective"]["n_outfits"] == 27

    def test_reference_shape_12_pieces(self, workdir):
        # t=4 over 3 layers gives 12 ids and 64 combinations
        out = workdir / "capsule_ref.json"
        assert main([
            "capsule",
            "--catalog", str(workdir / "data" / "catalog.json"),
            "--model", str(workdir / "model.json"),
            "--t", "4",
            "--algo", "iterative",
            "--seed", "2",
            "--out", str(out),
        ]) == 0
        payload = json.loads(out.read_text())
        assert sum(len(ids) for ids in payload["selections"]) == 12
        assert payload["objective"]["n_outfits"] == 64

    def test_seed_outfit_pinning(self, workdir):
        catalog = json.loads((workdir / "data" / "catalog.json").read_text())
        pin = catalog["garments"][0]["id"]
        out = workdir / "capsule_pin.json"
        assert main([
            "capsule",
            "--catalog", str(workdir / "data" / "catalog.json"),
            "--model", str(workdir / "model.json"),
            "--t", "3",
            "--algo", "iterative",
            "--seed-outfit", pin,
            "--seed", "2",
            "--out", str(out),
        ]) == 0
        payload = json.loads(out.read_text())
        assert pin in payload["selections"][0]

    def test_layer_restriction(self, workdir):
        out = workdir / "capsule_layers.json"
        assert main([
            "capsule",
            "--catalog", str(workdir / "data" / "catalog.json"),
            "--model", str(workdir / "model.json"),
            "--t", "2",
            "--layers", "outer,lower",
            "--algo", "naive",
            "--seed", "2",
            "--out", str(out),
        ]) == 0
        payload = json.loads(out.read_text())
        assert [len(ids) for ids in payload["selections"]] == [2, 0, 2]

    def test_mmr_ignores_seed_outfit(self, workdir):
        catalog = json.loads((workdir / "data" / "catalog.json").read_text())
        pins = [catalog["garments"][0]["id"], catalog["garments"][25]["id"]]
        outs = []
        for tag, pin in (("a", pins[0]), ("b", pins[1])):
            out = workdir / f"mmr_{tag}.json"
            assert main([
                "capsule",
                "--catalog", str(workdir / "data" / "catalog.json"),
                "--model", str(workdir / "model.json"),
                "--t", "3",
                "--algo", "mmr",
                "--mmr-lambda", "0.5",
                "--seed-outfit", pin,
                "--seed", "2",
                "--out", str(out),
            ]) == 0
            outs.append(json.loads(out.read_text())["selections"])
        assert outs[0] == outs[1]


class TestPersonalize:
    def test_weights_and_capsule(self, workdir):
        user = workdir / "user.json"
        corpus = json.loads((workdir / "data" / "corpus.json").read_text())
        user.write_text(json.dumps({"documents": corpus["documents"][:10]}))
        wout = workdir / "weights.json"
        cout = workdir / "pcapsule.json"
        args = [
            "personalize",
            "--model", str(workdir / "model.json"),
            "--user-outfits", str(user),
            "--catalog", str(workdir / "data" / "catalog.json"),
            "--t", "3",
            "--seed", "4",
            "--out", str(wout),
            "--capsule-out", str(cout),
        ]
        rerun_identical(args, [wout, cout])
        weights = json.loads(wout.read_text())["weights"]
        assert len(weights) == 3
        assert sum(weights) == pytest.approx(1.0, abs=1e-9)
        assert all(w >= 0 for w in weights)


class TestEval:
    def test_compat_generates_negatives(self, workdir):
        out = workdir / "evalc.json"
        csv = workdir / "pr.csv"
        args = [
            "eval", "compat",
            "--labeled", str(workdir / "data" / "labeled.json"),
            "--model", str(workdir / "model.json"),
            "--ratio", "5",
            "--seed", "1",
            "--out", str(out),
            "--pr-csv", str(csv),
        ]
        rerun_identical(args, [out, csv])
        payload = json.loads(out.read_text())
        assert payload["counts"]["negatives"] == 5 * payload["counts"]["positives"]
        assert 0.0 <= payload["average_precision"] <= 1.0
        lines = csv.read_text().strip().splitlines()
        assert lines[0] == "precision,recall"
        assert len(lines) > 2

    def test_eval_capsule(self, workdir):
        out = workdir / "evalcap.json"
        args = [
            "eval", "capsule",
            "--capsule", str(workdir / "capsule_iterative.json"),
            "--gold", str(workdir / "data" / "labeled.json"),
            "--catalog", str(workdir / "data" / "catalog.json"),
            "--out", str(out),
        ]
        rerun_identical(args, [out])
        payload = json.loads(out.read_text())
        assert payload["compatibility_distance"] >= 0
        assert payload["versatility_distance"] >= 0


class TestBench:
    def test_small_bench(self, workdir):
        out = workdir / "bench.json"
        args = [
            "bench",
            "--sizes", "5",
            "--t", "2",
            "--seeds", "0..1",
            "--m", "3",
            "--out", str(out),
        ]
        rerun_identical(args, [out])
        payload = json.loads(out.read_text())
        rows = payload["sizes"]["5"]["rows"]
        assert len(rows) == 2
        for row in rows:
            assert row["iterative"]["objective"] <= row["optimal"]["objective"] + 1e-9
        # volatile timing data lives in its own sidecar
        assert "timing" not in payload["sizes"]["5"]
        timings = json.loads((workdir / "bench.json.timings.json").read_text())
        assert "timing" in timings["sizes"]["5"]


class TestErrors:
    def test_usage_error_exit_2(self, workdir):
        proc = subprocess.run(
            [sys.executable, "-m", "capsulewardrobe.cli", "capsule", "--nope"],
            capture_output=True,
        )
        assert proc.returncode == 2

    def test_validation_error_exit_3(self, workdir, capsys):
        rc = main([
            "capsule",
            "--catalog", str(workdir / "data" / "catalog.json"),
            "--model", str(workdir / "model.json"),
            "--t", "99",
            "--out", str(workdir / "nope.json"),
        ])
        assert rc == 3
        record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert record["error"]["type"] == "ValidationError"

    def test_budget_error_exit_4(self, workdir, capsys):
        rc = main([
            "capsule",
            "--catalog", str(workdir / "data" / "catalog.json"),
            "--model", str(workdir / "model.json"),
            "--t", "3",
            "--algo", "optimal",
            "--capsule-budget", "10",
            "--out", str(workdir / "nope.json"),
        ])
        assert rc == 4
        record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert record["error"]["type"] == "BudgetExceededError"
        assert record["error"]["required"] > 10

    def test_missing_file_exit_3(self, workdir, capsys):
        rc = main([
            "score",
            "--model", str(workdir / "missing.json"),
            "--docs", str(workdir / "missing2.json"),
            "--out", str(workdir / "nope.json"),
        ])
        assert rc == 3


class TestThreadInvariance:
    def test_threads_do_not_change_results(self, workdir):
        outs = []
        for threads in ("1", "4"):
            out = workdir / f"cap_threads_{threads}.json"
            assert main([
                "capsule",
                "--catalog", str(workdir / "data" / "catalog.json"),
                "--model", str(workdir / "model.json"),
                "--t", "3",
                "--algo", "iterative",
                "--threads", threads,
                "--seed", "2",
                "--out", str(out),
            ]) == 0
            payload = json.loads(out.read_text())
            payload["manifest"]["config"].pop("threads")
            payload["manifest"]["config"].pop("out")
            outs.append(payload)
        assert outs[0] == outs[1]
