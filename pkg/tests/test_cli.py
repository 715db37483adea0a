import csv
import io
import json
import re
import sys

import numpy as np
import pytest

from toric_spectra import cli
from toric_spectra.polytope import cube, dump_polytope, hirzebruch, interval, simplex

# the operations named by the engines' public interface
ENGINE_OPERATIONS = [
    "load_polytope", "lattice_distances", "lattice_points", "vertex_chart", "shift",
    "integrate", "integrate_log", "integrate_face", "superlevel_volume",
    "phi", "argmax_phi", "log_c", "kernel_eval", "transform", "section_norm", "localization_ratio",
    "hessian_det", "laplace_normalization", "pointwise_norm_asymptotic", "extract_expansion", "model_P1",
    "pinched_average", "tau_coefficients", "riemann_sum", "em_sum", "em_error_report",
    "spectral_density", "pair", "eigensection_average", "moment", "distribution_function",
    "asymptotic_pairing",
]


@pytest.fixture
def files(tmp_path):
    out = {}
    for name, P in (("interval", interval()), ("square", cube(2)), ("simplex2", simplex(2)),
                    ("hirzebruch", hirzebruch())):
        path = tmp_path / f"{name}.json"
        path.write_text(dump_polytope(P))
        out[name] = str(path)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"dim": 2, "facets": [{"normal": [-1, 0], "offset": 0},
                                                    {"normal": [0, -1], "offset": 0},
                                                    {"normal": [1, 2], "offset": 2}]}))
    out["bad"] = str(bad)
    garbled = tmp_path / "garbled.json"
    garbled.write_text("{not json")
    out["garbled"] = str(garbled)
    return out


def _run(capsys, argv):
    code = cli.run(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _table(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.reader(io.StringIO("\n".join(body))))


def test_validate_reports_delzant(files, capsys):
    code, out, err = _run(capsys, ["validate", "--polytope", files["simplex2"]])
    assert code == 0
    assert "delzant: true, vertices: 3" in err
    rows = dict(_table(out)[1:])
    assert rows["delzant"] == "true" and rows["vertices"] == "3"
    assert float(rows["boundary_lattice_measure"]) == pytest.approx(3.0)


def test_density_profile(files, capsys):
    code, out, _ = _run(capsys, ["density", "--polytope", files["interval"], "--N", "10", "--grid", "101"])
    assert code == 0
    rows = _table(out)
    assert rows[0] == ["y1", "density"] and len(rows) == 102
    assert np.allclose([float(r[1]) for r in rows[1:]], 11, atol=1e-6)


def test_em_check_square(files, capsys):
    code, out, _ = _run(capsys, ["em-check", "--polytope", files["square"], "--f", "poly:1", "--N", "4",
                                 "--order", "2"])
    assert code == 0
    assert '# riemann_sum_exact_N4: "25/16"' in out
    N, order, rs, es, err = _table(out)[1]
    assert float(rs) == 25 / 16 and abs(float(es) - 25 / 16) <= 1e-9


def test_exit_codes(files, capsys):
    code, _, err = _run(capsys, ["validate", "--polytope", files["bad"]])
    assert code == cli.EXIT_INVALID and "NonDelzantError" in err
    code, _, err = _run(capsys, ["validate", "--polytope", files["garbled"]])
    assert code == cli.EXIT_INVALID and "invalid JSON" in err
    code, _, err = _run(capsys, ["validate", "--polytope", files["square"], "--no-such-flag"])
    assert code == cli.EXIT_USAGE and "usage error" in err
    code, _, err = _run(capsys, ["frobnicate", "--polytope", files["square"]])
    assert code == cli.EXIT_USAGE
    code, _, err = _run(capsys, ["transform", "--polytope", files["square"], "--N", "5", "--x", "2,2",
                                 "--f", "poly:1"])
    assert code == cli.EXIT_INVALID and "outside" in err
    # a tolerance below rounding level cannot be met
    code, _, err = _run(capsys, ["transform", "--polytope", files["square"], "--N", "5", "--x", "1/3,1/3",
                                 "--f", "bump:0.5,0.5:0.3", "--tol", "1e-18"])
    assert code == cli.EXIT_NUMERICAL and "numerical failure" in err
    assert len({cli.EXIT_INVALID, cli.EXIT_NUMERICAL, cli.EXIT_USAGE, cli.EXIT_OK}) == 4


def test_header_and_determinism(files, capsys):
    argv = ["transform", "--polytope", files["hirzebruch"], "--N", "7", "--x", "1/2,1/2", "--f",
            "poly:1*2,0+1*0,1"]
    _, a, err = _run(capsys, argv)
    _, b, _ = _run(capsys, argv)
    assert a == b
    assert re.search(r"# polytope-sha256: [0-9a-f]{64}", a) and "# toric-spectra" in err
    assert "timestamp" not in a
    _, c, _ = _run(capsys, argv + ["--stamp"])
    assert "# timestamp:" in c
    assert _table(c) == _table(a)


def test_full_precision_floats(files, capsys):
    _, out, _ = _run(capsys, ["transform", "--polytope", files["interval"], "--N", "3", "--x", "0.3",
                              "--f", "poly:1*1"])
    value = _table(out)[1][1]
    assert float(value) == pytest.approx((3 * 0.3 + 1) / 5, abs=1e-12)
    assert len(value.replace("0.", "").lstrip("0")) >= 15


def test_json_output_and_file(files, capsys, tmp_path):
    target = tmp_path / "moments.json"
    code, out, _ = _run(capsys, ["moments", "--polytope", files["interval"], "--N", "40", "--k", "20",
                                 "--m", "1,2", "--format", "json", "--out", str(target)])
    assert code == 0 and out == ""
    doc = json.loads(target.read_text())
    assert doc["columns"] == ["m", "value", "prediction", "ratio"]
    assert doc["rows"][1][3] == pytest.approx(1.0, abs=0.05)


def test_threads_flag_and_environment(files, capsys, monkeypatch):
    argv = ["pair", "--polytope", files["simplex2"], "--N", "5"]
    _, a, _ = _run(capsys, argv + ["--threads", "3"])
    monkeypatch.setenv("TORIC_SPECTRA_THREADS", "2")
    _, b, _ = _run(capsys, argv)
    assert _table(a) == _table(b)
    assert float(_table(a)[1][1]) == 21


def _invocations(files):
    sq, iv, s2 = files["square"], files["interval"], files["simplex2"]
    return [
        ["validate", "--polytope", s2],
        ["lattice", "--polytope", s2, "--N", "2"],
        ["kernel-eval", "--polytope", sq, "--N", "6", "--x", "1/2,1/3", "--grid", "3"],
        ["transform", "--polytope", sq, "--N", "6", "--x", "1/2,1/3", "--f", "poly:1*1,1"],
        ["expand", "--polytope", iv, "--x", "0.4", "--f", "poly:1*2", "--model", "orthant", "--order", "2",
         "--N-grid", "20,30,40,60,80"],
        ["expand", "--polytope", iv, "--x", "2/5", "--f", "poly:1*2", "--order", "2",
         "--N-grid", "20,30,40,60,80"],
        ["density", "--polytope", iv, "--N", "4", "--grid", "5"],
        ["pair", "--polytope", iv, "--N", "4", "--cross-check"],
        ["pair", "--polytope", iv, "--N", "4", "--k", "2", "--f", "poly:1*1"],
        ["pair", "--polytope", iv, "--series", "1", "--f", "poly:1*1"],
        ["moments", "--polytope", iv, "--N", "10", "--k", "5"],
        ["distribution", "--polytope", iv, "--N", "6", "--k", "3", "--t-grid", "0,1,2"],
        ["em-check", "--polytope", iv, "--f", "bump:0.5:0.4", "--N", "4"],
        ["em-check", "--polytope", iv, "--f", "poly:1*3", "--N", "4,8", "--all-orders"],
        ["localize", "--polytope", iv, "--x", "1/4", "--g", "bump:0.8:0.1", "--N-grid", "20,40,60"],
        ["pinch", "--polytope", iv, "--x", "1/2", "--N-grid", "50,100,200"],
    ]


def test_every_subcommand_runs(files, capsys):
    seen = set()
    for argv in _invocations(files):
        code, out, err = _run(capsys, argv)
        assert code == 0, (argv, err)
        seen.add(argv[0])
    assert seen == set(cli.COMMANDS)


def test_every_engine_operation_is_reachable(files, capsys):
    listed = set().union(*(ops for _, ops in cli.COMMANDS.values()))
    assert set(ENGINE_OPERATIONS) <= listed
    called = set()

    def profiler(frame, event, arg):
        if event == "call" and "toric_spectra" in frame.f_code.co_filename:
            called.add(frame.f_code.co_name)

    for argv in _invocations(files):
        sys.setprofile(profiler)
        try:
            cli.run(argv)
        finally:
            sys.setprofile(None)
        capsys.readouterr()
    # an operation counts as reached when it, or its log-space form, actually ran
    missing = [op for op in ENGINE_OPERATIONS if op not in called and f"log_{op}" not in called]
    assert not missing
