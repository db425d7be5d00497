import json
import warnings

import numpy as np
import pytest

from jacobilog import critical_indices
from jacobilog.cli import build_parser, main


def run_cli(argv):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return main(argv)


# ---------------------------------------------------------------- parsing


def test_subcommands_exist():
    parser = build_parser()
    minimal = {
        "clt": ["--n", "64", "--z", "0.5", "--samples", "4"],
        "trace": ["--n", "64", "--z", "0.5"],
        "esd": ["--n", "64"],
        "blocks": ["--n", "64", "--z", "0.5"],
        "concentration": ["--in", "w.txt", "--eps", "0.1"],
    }
    for sub, extra in minimal.items():
        args = parser.parse_args([sub] + extra)
        assert args.command == sub


def test_missing_required_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        build_parser().parse_args(["clt", "--n", "64", "--samples", "4"])
    assert exc.value.code == 2
    assert "--z" in capsys.readouterr().err


def test_validation_aggregates_all_problems(capsys):
    code = run_cli(["clt", "--n", "1", "--z", "3.0", "--samples", "1"])
    assert code == 2
    err = capsys.readouterr().err
    assert err.startswith("invalid configuration: ")
    assert err.count(";") >= 2  # n, z, and samples all rejected in one line


def test_threads_env_fallback(monkeypatch):
    monkeypatch.setenv("JACOBILOG_THREADS", "3")
    from jacobilog.cli import _default_threads

    assert _default_threads() == 3
    monkeypatch.setenv("JACOBILOG_THREADS", "junk")
    assert _default_threads() >= 1


# ---------------------------------------------------------------- clt


def test_clt_json_report(tmp_path):
    out = tmp_path / "report.json"
    code = run_cli(["clt", "--beta", "2", "--n", "256", "--z", "1.0",
                    "--samples", "4", "--seed", "1", "--out", str(out)])
    assert code == 0
    obj = json.loads(out.read_text())
    assert list(obj.keys()) == [
        "config", "n_samples", "mean", "var", "skew", "kurt",
        "ks_d", "ks_p", "ratio_tail", "diagnostics",
    ]
    assert obj["config"]["n"] == 256
    assert obj["n_samples"] == 4


def test_clt_csv_report(tmp_path):
    out = tmp_path / "report.csv"
    code = run_cli(["clt", "--n", "256", "--z", "1.0", "--samples", "3",
                    "--seed", "1", "--format", "csv", "--out", str(out)])
    assert code == 0
    lines = out.read_text().split("\n")
    assert lines[0] == "replica,w,log_psi_n,delta_end,flags"
    assert len([ln for ln in lines if ln]) == 4


def test_clt_thread_count_invariance(tmp_path):
    outs = []
    for threads in ("1", "8"):
        out = tmp_path / f"r{threads}.json"
        code = run_cli(["clt", "--n", "1024", "--z", "1.0", "--samples", "8",
                        "--seed", "42", "--threads", threads, "--out", str(out)])
        assert code == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


# ---------------------------------------------------------------- trace


def test_trace_row_count_and_regimes(tmp_path):
    n = 512
    out = tmp_path / "trace.csv"
    code = run_cli(["trace", "--n", str(n), "--z", "1.0", "--seed", "3",
                    "--out", str(out)])
    assert code == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "k,u1,u2,s,sign,delta,regime"
    assert len(lines) - 1 == n
    idx = critical_indices(n, 1.0, 4.0)
    regime = {int(ln.split(",")[0]): ln.split(",")[6] for ln in lines[1:]}
    assert regime[idx.k0 - idx.l0] == "scalar"
    assert regime[idx.k0 - idx.l0 + 1] == "transition"
    assert regime[idx.k0 + idx.l0] == "transition"
    assert regime[idx.k0 + idx.l0 + 1] == "oscillatory"


def test_trace_seed_reproducible(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert run_cli(["trace", "--n", "256", "--z", "1.0", "--seed", "9",
                        "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_trace_scalar_sidecar(tmp_path):
    out = tmp_path / "t.csv"
    side = tmp_path / "scalar.csv"
    code = run_cli(["trace", "--n", "512", "--z", "1.0", "--seed", "3",
                    "--out", str(out), "--scalar-out", str(side)])
    assert code == 0
    assert side.read_text().startswith("k,delta,delta_bar,Delta_bar\n")


def test_trace_blocks_sidecar(tmp_path):
    out = tmp_path / "t.csv"
    side = tmp_path / "blocks.csv"
    code = run_cli(["trace", "--n", "65536", "--z", "1.0", "--kappa", "4",
                    "--seed", "3", "--out", str(out), "--blocks-out", str(side)])
    assert code == 0
    assert side.read_text().startswith("i,l_i,t_log,eps_i,delta_residue,advanced\n")


# ---------------------------------------------------------------- esd


def test_esd_default_grid(tmp_path):
    out = tmp_path / "esd.csv"
    code = run_cli(["esd", "--n", "256", "--seed", "4", "--format", "csv",
                    "--out", str(out)])
    assert code == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "x,esd,semicircle"
    assert len(lines) - 1 == 101
    assert float(lines[1].split(",")[0]) == -2.5
    assert float(lines[-1].split(",")[0]) == 2.5


def test_esd_custom_grid(tmp_path):
    out = tmp_path / "esd.json"
    code = run_cli(["esd", "--n", "128", "--seed", "4", "--grid-points", "11",
                    "--grid-lo", "-2", "--grid-hi", "2", "--out", str(out)])
    assert code == 0
    obj = json.loads(out.read_text())
    assert len(obj["grid"]) == 11


# ---------------------------------------------------------------- blocks


def test_blocks_dry_run(tmp_path):
    out = tmp_path / "sched.csv"
    code = run_cli(["blocks", "--n", "65536", "--z", "1.0", "--kappa", "4",
                    "--dry-run", "--out", str(out)])
    assert code == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "i,hl_i,j_i"
    assert len(lines) > 5
    hl = [int(ln.split(",")[1]) for ln in lines[1:]]
    assert all(a <= b for a, b in zip(hl, hl[1:]))


def test_blocks_run(tmp_path):
    out = tmp_path / "blocks.csv"
    code = run_cli(["blocks", "--n", "65536", "--z", "1.0", "--kappa", "4",
                    "--seed", "5", "--out", str(out)])
    assert code == 0
    assert out.read_text().startswith("i,l_i,t_log,eps_i,delta_residue,advanced\n")


# ---------------------------------------------------------------- concentration


def test_concentration_constant_file(tmp_path, capsys):
    data = tmp_path / "w.txt"
    data.write_text("1.5\n" * 40)
    code = run_cli(["concentration", "--in", str(data), "--eps", "0.1",
                    "--format", "csv"])
    assert code == 0
    outp = capsys.readouterr().out
    assert outp.startswith("eps,n,q\n")
    assert outp.strip().split("\n")[1].split(",")[2] == "1"


def test_concentration_json(tmp_path):
    data = tmp_path / "w.txt"
    rng = np.random.default_rng(0)
    data.write_text("\n".join("%.17g" % x for x in rng.standard_normal(500)) + "\n")
    out = tmp_path / "q.json"
    code = run_cli(["concentration", "--in", str(data), "--eps", "0.25",
                    "--out", str(out)])
    assert code == 0
    obj = json.loads(out.read_text())
    assert obj["n"] == 500
    assert 0.0 < obj["q"] <= 1.0


# ---------------------------------------------------------------- errors


def test_runtime_error_exits_3(tmp_path, capsys):
    code = run_cli(["esd", "--n", "64", "--seed", "1",
                    "--out", str(tmp_path / "no" / "such" / "dir" / "x.json")])
    assert code == 3
    assert capsys.readouterr().err.startswith("error: ")


def test_missing_input_file_exits_3(capsys):
    code = run_cli(["concentration", "--in", "/definitely/not/here.txt",
                    "--eps", "0.1"])
    assert code == 3


def test_blocks_degenerate_schedule_exits_3(capsys):
    # n small enough that the schedule cannot be built at kappa = 4
    code = run_cli(["blocks", "--n", "4096", "--z", "1.0", "--kappa", "4",
                    "--dry-run"])
    assert code == 3
    assert "error: " in capsys.readouterr().err
