"""CLI grammar, exit codes, and output shapes."""

import os

from fairex.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_OK, main

MC_TINY = """\
[scenario]
name = mc-tiny
kind = montecarlo

[montecarlo]
iters = 2000
depths = 1,2
hedges = 0,1
fixed_depth = 2
"""

OUT_TINY = """\
[scenario]
name = out-tiny
kind = outbound

[tree]
n = 20

[workload]
n_messages = 200
"""


def write(tmp_path, text, name="s.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_run_success(tmp_path, capsys):
    path = write(tmp_path, MC_TINY)
    assert main(["run", path, "--out-base", str(tmp_path / "out")]) == EXIT_OK
    assert "ok ->" in capsys.readouterr().out
    assert os.path.exists(str(tmp_path / "out" / "mc-tiny" / "summary.csv"))


def test_run_missing_file_exit_config(tmp_path, capsys):
    rc = main(["run", str(tmp_path / "nope.ini")])
    assert rc == EXIT_CONFIG
    assert "config error:" in capsys.readouterr().err


def test_run_unknown_key_exit_config(tmp_path, capsys):
    path = write(tmp_path, MC_TINY + "\n[experiment]\nbogus = 1\n")
    rc = main(["run", path, "--out-base", str(tmp_path / "out")])
    assert rc == EXIT_CONFIG
    assert "[experiment] bogus" in capsys.readouterr().err


def test_run_failed_check_exit_check(tmp_path, capsys):
    text = """\
[scenario]
name = trend-fail
kind = fair_trend

[experiment]
n_list = 10
p_fair_floor = 101.0

[workload]
n_messages = 200
"""
    rc = main(["run", write(tmp_path, text), "--out-base", str(tmp_path / "out")])
    assert rc == EXIT_CHECK
    assert "check failed:" in capsys.readouterr().err


def test_run_set_override(tmp_path):
    path = write(tmp_path, MC_TINY)
    rc = main(
        ["run", path, "--set", "montecarlo.iters=1000", "--out-base", str(tmp_path / "out")]
    )
    assert rc == EXIT_OK
    resolved = open(str(tmp_path / "out" / "mc-tiny" / "resolved.ini")).read()
    assert "iters = 1000" in resolved


def test_run_parallel_jobs(tmp_path):
    a = write(tmp_path, MC_TINY, "a.ini")
    b = write(tmp_path, MC_TINY.replace("mc-tiny", "mc-tiny2"), "b.ini")
    rc = main(["run", a, b, "--jobs", "2", "--out-base", str(tmp_path / "out")])
    assert rc == EXIT_OK
    assert os.path.exists(str(tmp_path / "out" / "mc-tiny" / "summary.csv"))
    assert os.path.exists(str(tmp_path / "out" / "mc-tiny2" / "summary.csv"))


def test_compare_flat_and_header(tmp_path, capsys):
    path = write(tmp_path, OUT_TINY)
    assert main(["run", path, "--out-base", str(tmp_path / "a")]) == EXIT_OK
    assert main(["run", path, "--out-base", str(tmp_path / "b")]) == EXIT_OK
    capsys.readouterr()
    rc = main(
        [
            "compare",
            str(tmp_path / "a" / "out-tiny"),
            str(tmp_path / "b" / "out-tiny"),
            "--metric",
            "oml",
        ]
    )
    assert rc == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "metric,delta_p50,delta_p90,delta_p99,sign"
    assert out[1] == "oml,0,0,0,flat"


def test_compare_hash_mismatch_exit_config(tmp_path, capsys):
    path = write(tmp_path, OUT_TINY)
    assert main(["run", path, "--out-base", str(tmp_path / "a")]) == EXIT_OK
    rc = main(
        ["run", path, "--set", "scenario.seed=9", "--out-base", str(tmp_path / "b")]
    )
    assert rc == EXIT_OK
    rc = main(
        [
            "compare",
            str(tmp_path / "a" / "out-tiny"),
            str(tmp_path / "b" / "out-tiny"),
            "--metric",
            "oml",
        ]
    )
    assert rc == EXIT_CONFIG
    assert "refusing" in capsys.readouterr().err


def test_montecarlo_stdout_cdf(capsys):
    rc = main(["montecarlo", "--depth", "2", "--hedge", "1", "--iters", "2000"])
    assert rc == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "latency_us,cum_prob"
    rows = [tuple(float(v) for v in ln.split(",")) for ln in lines[1:]]
    assert len(rows) > 10
    assert rows[-1][1] == 1.0
    assert all(b[1] >= a[1] for a, b in zip(rows, rows[1:]))


def test_montecarlo_outfile(tmp_path, capsys):
    dst = str(tmp_path / "cdf.csv")
    rc = main(["montecarlo", "--iters", "2000", "--out", dst])
    assert rc == EXIT_OK
    first = open(dst).readline().strip()
    assert first == "latency_us,cum_prob"
