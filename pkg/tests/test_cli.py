"""Command-line flows: generate, extract, verify, bench, bound-experiment."""

import json

import numpy as np
import pytest

from netpeel.cli import main
from netpeel.oracle.generate import generate_two_layer
from netpeel.oracle.nets import AffineMap, Neuron, TwoLayerNet, eval_two_layer
from netpeel.oracle.serialize import load_net, save_net


def _generate(tmp_path, name, *args):
    path = tmp_path / name
    code = main(["generate", "--out", str(path), *args])
    assert code == 0
    return path


# ------------------------------------------------------------------ generate


def test_generate_writes_the_requested_width(tmp_path):
    path = _generate(tmp_path, "net.json", "--depth", "2", "--d", "3",
                     "--d1", "4", "--seed", "1")
    doc = json.loads(path.read_text())
    assert doc["depth"] == 2
    assert doc["d1"] == 4
    assert len(doc["W"]) == 4 * 3


def test_generate_is_deterministic(tmp_path):
    a = _generate(tmp_path, "a.json", "--d", "3", "--d1", "4", "--seed", "1")
    b = _generate(tmp_path, "b.json", "--d", "3", "--d1", "4", "--seed", "1")
    assert a.read_bytes() == b.read_bytes()


def test_generate_rejects_wide_first_layer_before_writing(tmp_path):
    path = tmp_path / "bad.json"
    code = main(["generate", "--depth", "3", "--d", "2", "--d1", "5",
                 "--out", str(path)])
    assert code == 2
    assert not path.exists()


def test_generated_file_reloads_to_the_same_function(tmp_path):
    path = _generate(tmp_path, "net.json", "--d", "3", "--d1", "4", "--seed", "1")
    reloaded = load_net(path)
    direct = generate_two_layer(3, 4, np.random.default_rng(1))
    for x in np.random.default_rng(0).uniform(0.0, 10.0, size=(100, 3)):
        assert eval_two_layer(reloaded, x) == eval_two_layer(direct, x)


# ------------------------------------------------------------------- extract


def test_extract_report_verifies_against_the_truth(tmp_path):
    net = _generate(tmp_path, "net.json", "--d", "2", "--d1", "3", "--seed", "5")
    report = tmp_path / "report.json"
    assert main(["extract", "--input", str(net), "--out", str(report)]) == 0
    assert main(["verify", "--truth", str(net), "--candidate", str(report),
                 "--tau", "1e-6"]) == 0


def test_extract_depth3_end_to_end(tmp_path):
    net = _generate(tmp_path, "net3.json", "--depth", "3", "--d", "3",
                    "--d1", "2", "--d2", "6", "--seed", "2")
    report = tmp_path / "report3.json"
    assert main(["extract", "--input", str(net), "--out", str(report)]) == 0
    assert main(["verify", "--truth", str(net), "--candidate", str(report)]) == 0


def test_extract_accounts_every_query(tmp_path):
    net = _generate(tmp_path, "net.json", "--d", "2", "--d1", "3", "--seed", "5")
    report = tmp_path / "report.json"
    assert main(["extract", "--input", str(net), "--out", str(report)]) == 0
    doc = json.loads(report.read_text())
    assert doc["total_queries"] == sum(doc["phase_queries"].values())
    assert doc["total_queries"] > 0
    assert doc["parameter_reads"] == 0


def test_extract_is_deterministic_apart_from_timing(tmp_path):
    net = _generate(tmp_path, "net.json", "--d", "2", "--d1", "3", "--seed", "5")
    docs = []
    for name in ("r1.json", "r2.json"):
        report = tmp_path / name
        assert main(["extract", "--input", str(net), "--out", str(report)]) == 0
        doc = json.loads(report.read_text())
        doc.pop("seconds")
        docs.append(doc)
    assert docs[0] == docs[1]


def test_extract_fails_gracefully_on_an_unresolvable_kink(tmp_path):
    """A unit bending less than the probe resolution reads as degenerate."""
    net = TwoLayerNet(
        d=1,
        neurons=(Neuron(np.array([6e-5]), -6e-5, 1),),
        skip=AffineMap(np.array([1.0]), 0.0),
    )
    path = tmp_path / "flat.json"
    save_net(path, net)
    code = main(["extract", "--input", str(path), "--delta", "0.01",
                 "--out", str(tmp_path / "report.json")])
    assert code == 3


def test_extract_budget_exhaustion_exit_code(tmp_path):
    net = _generate(tmp_path, "net.json", "--d", "2", "--d1", "3", "--seed", "5")
    code = main(["extract", "--input", str(net), "--d1-max", "1",
                 "--out", str(tmp_path / "report.json")])
    assert code == 4


def test_extract_missing_input_is_a_usage_error(tmp_path):
    code = main(["extract", "--input", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "report.json")])
    assert code == 2


# -------------------------------------------------------------------- verify


def test_verify_file_against_itself(tmp_path, capsys):
    net = _generate(tmp_path, "net.json", "--d", "2", "--d1", "3", "--seed", "5")
    assert main(["verify", "--truth", str(net), "--candidate", str(net)]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "0.000e+00" in out


def test_verify_flags_a_perturbed_copy(tmp_path):
    path = _generate(tmp_path, "net.json", "--d", "2", "--d1", "3", "--seed", "5")
    net = load_net(path)
    bumped = net.neurons[0]
    perturbed = TwoLayerNet(
        d=net.d,
        neurons=(Neuron(bumped.w, bumped.b + 1e-3, bumped.sign), *net.neurons[1:]),
        skip=net.skip,
    )
    other = tmp_path / "perturbed.json"
    save_net(other, perturbed)
    code = main(["verify", "--truth", str(path), "--candidate", str(other),
                 "--tau", "1e-6"])
    assert code == 1


def test_verify_dimension_mismatch_is_a_usage_error(tmp_path):
    a = _generate(tmp_path, "a.json", "--d", "2", "--d1", "2", "--seed", "0")
    b = _generate(tmp_path, "b.json", "--d", "3", "--d1", "2", "--seed", "0")
    assert main(["verify", "--truth", str(a), "--candidate", str(b)]) == 2


# ------------------------------------------------------- bench and bound


def test_bench_writes_csv_and_fits(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    code = main(["bench", "--depth", "2", "--d-list", "2", "--d1-list", "2,3",
                 "--deltas", "1e-4", "--seeds", "0", "--out", str(out)])
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 3
    assert "fit: queries ~" in capsys.readouterr().out


def test_bound_experiment_reports_and_saves(tmp_path, capsys):
    out = tmp_path / "bound.csv"
    code = main(["bound-experiment", "--d", "2", "--d1", "8",
                 "--trials", "200", "--out", str(out)])
    assert code == 0
    assert out.exists()
    assert "bound" in capsys.readouterr().out


# --------------------------------------------------------------- bad usage


def test_missing_required_flag_is_a_usage_error():
    assert main(["extract"]) == 2


def test_unknown_command_is_a_usage_error():
    assert main(["frobnicate"]) == 2
