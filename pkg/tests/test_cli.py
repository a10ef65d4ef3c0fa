import json

import numpy as np
import pytest

from vrnmf import SyntheticSpec, mrsa_matched, recovery_curve, synth_generate
from vrnmf.cli import main
from vrnmf.io import read_json, read_matrix, write_json, write_matrix


@pytest.fixture
def endmembers(tmp_path):
    rng = np.random.default_rng(100)
    w = rng.uniform(0.1, 1.0, (12, 3))
    path = tmp_path / "W.csv"
    write_matrix(path, w)
    return path, w


@pytest.fixture
def separable_input(tmp_path, endmembers):
    _, w = endmembers
    rng = np.random.default_rng(101)
    h_mix = rng.dirichlet(np.ones(3), 57).T * 0.9
    h = np.concatenate([np.eye(3), h_mix], axis=1)[:, rng.permutation(60)]
    x = w @ h
    path = tmp_path / "X.csv"
    write_matrix(path, x)
    return path, x


class TestUnmix:
    def test_happy_path_writes_artifacts(self, tmp_path, separable_input, endmembers):
        x_path, x = separable_input
        w_path, _ = endmembers
        out = tmp_path / "run1"
        code = main(["unmix", "--input", str(x_path), "--rank", "3",
                     "--regularizer", "det", "--lambda", "0", "--max-iter", "20",
                     "--wtrue", str(w_path), "--out", str(out)])
        assert code == 0
        for name in ("W.csv", "H.csv", "manifest.json", "trace.csv"):
            assert (out / name).exists()
        manifest = read_json(out / "manifest.json")
        assert manifest["results"]["relative_fit_percent"] <= 1e-4  # percent
        assert manifest["results"]["mrsa"] <= 1e-6
        assert manifest["config"]["lambda"] == 0.0
        assert manifest["tool_version"]
        w = read_matrix(out / "W.csv")
        h = read_matrix(out / "H.csv")
        assert w.shape == (12, 3) and h.shape == (3, 60)
        trace_lines = (out / "trace.csv").read_text().splitlines()
        assert trace_lines[0] == "iteration,fit,volume,total,seconds"
        assert len(trace_lines) == 22  # header + iterations 0..20

    def test_missing_rank_exits_2(self, separable_input, tmp_path):
        x_path, _ = separable_input
        assert main(["unmix", "--input", str(x_path), "--out", str(tmp_path / "o")]) == 2

    def test_missing_input_exits_3(self, tmp_path):
        code = main(["unmix", "--input", str(tmp_path / "absent.csv"), "--rank", "2",
                     "--out", str(tmp_path / "o")])
        assert code == 3

    def test_bad_rank_exits_2(self, separable_input, tmp_path):
        x_path, _ = separable_input
        code = main(["unmix", "--input", str(x_path), "--rank", "99",
                     "--out", str(tmp_path / "o")])
        assert code == 2

    def test_reproducible_manifest_mrsa(self, tmp_path, separable_input, endmembers):
        x_path, _ = separable_input
        w_path, _ = endmembers
        scores = []
        for name in ("a", "b"):
            out = tmp_path / name
            code = main(["unmix", "--input", str(x_path), "--rank", "3",
                         "--regularizer", "logdet", "--lambda", "0.001",
                         "--max-iter", "15", "--seed", "7",
                         "--wtrue", str(w_path), "--out", str(out)])
            assert code == 0
            scores.append(read_json(out / "manifest.json")["results"]["mrsa"])
        assert abs(scores[0] - scores[1]) <= 1e-9


class TestSynth:
    def test_happy_path_and_byte_reproducibility(self, tmp_path, endmembers):
        w_path, w = endmembers
        outs = []
        for name in ("d1", "d2"):
            out = tmp_path / name
            code = main(["synth", "--endmembers", str(w_path), "--n", "200",
                         "--purity", "0.9,0.8,0.7", "--alpha", "0.1",
                         "--sigma", "0.001", "--seed", "42", "--out", str(out)])
            assert code == 0
            outs.append(out)
        for name in ("X.csv", "Htrue.csv", "spec.json"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

    def test_infeasible_purity_exits_4(self, tmp_path, endmembers):
        w_path, _ = endmembers
        code = main(["synth", "--endmembers", str(w_path), "--n", "50",
                     "--purity", "0.2,0.2,0.2", "--out", str(tmp_path / "d")])
        assert code == 4

    def test_purity_length_mismatch_exits_2(self, tmp_path, endmembers):
        w_path, _ = endmembers
        code = main(["synth", "--endmembers", str(w_path), "--n", "50",
                     "--purity", "0.9,0.8", "--out", str(tmp_path / "d")])
        assert code == 2

    def test_sigma_zero_matches_offline_product(self, tmp_path, endmembers):
        w_path, w = endmembers
        out = tmp_path / "d"
        code = main(["synth", "--endmembers", str(w_path), "--n", "80",
                     "--purity", "0.9,0.8,0.7", "--sigma", "0",
                     "--seed", "5", "--out", str(out)])
        assert code == 0
        x = read_matrix(out / "X.csv")
        h = read_matrix(out / "Htrue.csv")
        assert np.max(np.abs(x - w @ h)) <= 1e-12


class TestTune:
    def test_tune_writes_result_matching_library(self, tmp_path, endmembers):
        w_path, w = endmembers
        spec = SyntheticSpec(w_true=w, n=100, p=np.full(3, 0.8),
                             dirichlet_alpha=0.1, noise_sigma=0.0, seed=3)
        x, _ = synth_generate(spec)
        x_path = tmp_path / "X.csv"
        write_matrix(x_path, x)
        out = tmp_path / "t"
        code = main(["tune", "--input", str(x_path), "--wtrue", str(w_path),
                     "--rank", "3", "--regularizer", "det", "--max-iter", "20",
                     "--w-inner-iter", "15", "--out", str(out)])
        assert code == 0
        payload = read_json(out / "tune.json")
        res = payload["results"]
        assert 1e-6 <= res["lambda_tilde"] <= 0.5
        assert res["bisection_rounds"] <= 20
        values = dict((lt, v) for lt, v in res["evaluations"])
        assert values[res["lambda_tilde"]] == res["mrsa"]

        from vrnmf import Regularizer, SolverConfig, VolumeKind, tune_lambda
        cfg = SolverConfig(reg=Regularizer(VolumeKind.DET), outer_iters=20,
                           w_inner_iters=15, trace_every=1)
        lib = tune_lambda(x, w, 3, cfg)
        assert lib.mrsa == pytest.approx(res["mrsa"], abs=1e-12)
        assert lib.lambda_tilde == res["lambda_tilde"]

    def test_missing_file_exits_3(self, tmp_path, endmembers):
        w_path, _ = endmembers
        code = main(["tune", "--input", str(tmp_path / "nope.csv"),
                     "--wtrue", str(w_path), "--rank", "3", "--out", str(tmp_path / "t")])
        assert code == 3


class TestScore:
    def test_identical_prints_zero(self, tmp_path, endmembers, capsys):
        w_path, _ = endmembers
        assert main(["score", "--w", str(w_path), "--wtrue", str(w_path)]) == 0
        assert capsys.readouterr().out.strip() == "0.000000"

    def test_permuted_columns_print_zero(self, tmp_path, endmembers, capsys):
        w_path, w = endmembers
        perm_path = tmp_path / "Wp.csv"
        write_matrix(perm_path, w[:, ::-1])
        assert main(["score", "--w", str(perm_path), "--wtrue", str(w_path)]) == 0
        assert capsys.readouterr().out.strip() == "0.000000"

    def test_matches_library_score(self, tmp_path, endmembers, capsys):
        w_path, w = endmembers
        rng = np.random.default_rng(200)
        w2 = w + 0.05 * rng.normal(0.0, 1.0, w.shape)
        w2_path = tmp_path / "W2.csv"
        write_matrix(w2_path, np.abs(w2))
        assert main(["score", "--w", str(w2_path), "--wtrue", str(w_path)]) == 0
        printed = float(capsys.readouterr().out.strip())
        expected, _ = mrsa_matched(np.abs(w2), w)
        assert printed == pytest.approx(expected, abs=5e-7)

    def test_shape_mismatch_exits_2(self, tmp_path, endmembers):
        w_path, _ = endmembers
        small = tmp_path / "small.csv"
        write_matrix(small, np.ones((3, 2)))
        assert main(["score", "--w", str(small), "--wtrue", str(w_path)]) == 2

    def test_curve_and_segment_outputs(self, tmp_path, endmembers, capsys):
        w_path, w = endmembers
        h = np.random.default_rng(7).dirichlet(np.ones(3), 24).T
        h_path = tmp_path / "H.csv"
        write_matrix(h_path, h)
        curve_path = tmp_path / "curve.csv"
        seg_path = tmp_path / "seg.txt"
        ppm_path = tmp_path / "seg.ppm"
        code = main(["score", "--w", str(w_path), "--wtrue", str(w_path),
                     "--curve", str(curve_path), "--thresholds", "0.5,1,2",
                     "--h", str(h_path), "--segment", str(seg_path),
                     "--width", "6", "--height", "4", "--ppm", str(ppm_path)])
        assert code == 0
        lines = curve_path.read_text().splitlines()
        assert lines[0] == "threshold,fraction"
        assert len(lines) == 4
        seg = [[int(v) for v in row.split()] for row in seg_path.read_text().splitlines()]
        assert len(seg) == 4 and len(seg[0]) == 6
        assert ppm_path.read_text().startswith("P3\n6 4\n255")

    def test_segment_without_h_exits_2(self, tmp_path, endmembers):
        w_path, _ = endmembers
        code = main(["score", "--w", str(w_path), "--wtrue", str(w_path),
                     "--segment", str(tmp_path / "seg.txt")])
        assert code == 2


class TestBench:
    def write_config(self, tmp_path, w_path, **overrides):
        conf = {
            "endmembers": str(w_path),
            "n": 60,
            "alpha": 0.1,
            "purities": [[0.9, 0.8, 0.7], [0.8, 0.75, 0.7]],
            "sigmas": [0.0, 0.001],
            "seeds": [1],
            "regularizers": ["det"],
            "outer_iters": 10,
            "h_max_iters": 80,
            "w_inner_iters": 10,
            "lambda_tilde": 0.01,
        }
        conf.update(overrides)
        path = tmp_path / "bench.json"
        write_json(path, conf)
        return path

    def test_micro_sweep_produces_manifests_and_aggregate(self, tmp_path, endmembers):
        w_path, _ = endmembers
        conf = self.write_config(tmp_path, w_path)
        out = tmp_path / "bench"
        assert main(["bench", "--config", str(conf), "--out", str(out)]) == 0
        cells = sorted((out / "cells").iterdir())
        assert len(cells) == 4  # 2 purities x 2 sigmas x 1 seed x 1 regularizer
        for cell in cells:
            assert (cell / "manifest.json").exists()
        lines = (out / "aggregate.csv").read_text().splitlines()
        assert len(lines) == 5  # header + 4 cells
        header = lines[0].split(",")
        assert header[:6] == ["cell", "regularizer", "purity", "sigma", "seed", "mrsa"]

    def test_aggregate_scores_match_recovery_curve_recount(self, tmp_path, endmembers):
        w_path, _ = endmembers
        conf = self.write_config(tmp_path, w_path)
        out = tmp_path / "bench"
        assert main(["bench", "--config", str(conf), "--out", str(out)]) == 0
        rows = (out / "aggregate.csv").read_text().splitlines()[1:]
        scores = [float(r.split(",")[5]) for r in rows]
        thresholds = [0.5, 1.0, 5.0, 50.0]
        curve = recovery_curve(scores, thresholds)
        for t, frac in curve:
            assert frac == sum(1 for s in scores if s < t) / len(scores)

    def test_missing_config_keys_exit_2(self, tmp_path, endmembers):
        w_path, _ = endmembers
        path = tmp_path / "bench.json"
        write_json(path, {"endmembers": str(w_path)})
        assert main(["bench", "--config", str(path), "--out", str(tmp_path / "b")]) == 2

    def test_missing_config_file_exits_3(self, tmp_path):
        code = main(["bench", "--config", str(tmp_path / "absent.json"),
                     "--out", str(tmp_path / "b")])
        assert code == 3

    def test_all_cells_failing_exits_5(self, tmp_path, endmembers, monkeypatch):
        w_path, _ = endmembers
        # rank-collapsing configuration: infeasible purity for every cell
        conf = self.write_config(tmp_path, w_path, purities=[[0.34, 0.34, 0.34]],
                                 sigmas=[0.0])
        out = tmp_path / "bench"
        assert main(["bench", "--config", str(conf), "--out", str(out)]) == 5
        rows = (out / "aggregate.csv").read_text().splitlines()[1:]
        assert all("failed" in r for r in rows)


class TestVersionFlag:
    def test_version_exits_zero(self, capsys):
        assert main(["--version"]) == 0
        assert "vrnmf" in capsys.readouterr().out
