import subprocess
import sys

import pytest

from h2curl import cli


def _run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_int_list():
    assert cli.parse_int_list("16,24,32") == [16, 24, 32]
    assert cli.parse_int_list("2..5") == [2, 3, 4, 5]
    assert cli.parse_int_list("2..3, 8") == [2, 3, 8]
    for bad in ("", "5..2", "a,b", "1..x"):
        with pytest.raises(cli.UsageError):
            cli.parse_int_list(bad)


def test_verify_element_rect(capsys):
    code, out, _ = _run(["verify-element", "--shape", "rect", "--k", "3"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith(f"# {cli.SCHEMA} command=verify-element")
    assert lines[1] == "check,value,threshold,pass"
    assert any(s.startswith("appendix_permutation,") for s in lines)
    assert "FAIL" not in out


def test_verify_element_tri_records_mismatch(capsys):
    code, out, _ = _run(["verify-element", "--shape", "tri", "--k", "4"], capsys)
    assert code == 0
    assert "appendix_mismatch_rows" in out and "appendix_alt_mismatch_rows" in out


def test_order_too_low_is_usage_error(capsys):
    code, _, err = _run(["verify-element", "--shape", "tri", "--k", "3"], capsys)
    assert code == 2 and "k >= 4" in err
    code, _, _ = _run(["solve-example1", "--shape", "rect", "--k", "2", "--n", "2,4"], capsys)
    assert code == 2


def test_bad_arguments(capsys):
    assert _run(["solve-lshape", "--levels", "1..3", "--kappa", "0.7"], capsys)[0] == 2
    assert _run(["solve-lshape", "--levels", "1,3"], capsys)[0] == 2
    assert _run(["interp-study", "--shape", "rect", "--k", "3", "--n", "8,4"], capsys)[0] == 2
    assert _run(["dof-table", "--k", "1..3", "--n", "2"], capsys)[0] == 2
    assert _run(["dof-table", "--k", "2", "--n", "2", "--threads", "0"], capsys)[0] == 2
    with pytest.raises(SystemExit):
        cli.main(["no-such-command"])


def test_dof_table(capsys):
    code, out, _ = _run(["dof-table", "--k", "2..5", "--n", "10"], capsys)
    assert code == 0
    rows = [s for s in out.splitlines() if not s.startswith("#")]
    assert rows[0] == "k_table,k_def,N,M1,delta1,M2,delta2"
    assert len(rows) == 5
    assert "# check delta1_positive: PASS" in out


def test_dof_table_build(capsys):
    code, out, _ = _run(["dof-table", "--k", "3", "--n", "2..3", "--build"], capsys)
    assert code == 0 and "# check built_totals: PASS" in out


def test_interp_study_csv_and_markdown(capsys, tmp_path):
    argv = ["interp-study", "--shape", "rect", "--k", "3", "--n", "32,64", "--threads", "1"]
    code, out, _ = _run(argv, capsys)
    assert code == 0
    header = out.splitlines()[1].split(",")
    assert header == ["h", "n_dofs", "l2_err", "l2_rate", "curl_err", "curl_rate", "curlcurl_err", "curlcurl_rate"]
    target = tmp_path / "out.csv"
    assert cli.main(argv + ["-o", str(target)]) == 0
    assert target.read_text() == out
    code, md, _ = _run(argv + ["--markdown"], capsys)
    assert code == 0 and md.splitlines()[2].startswith("| h | n_dofs")


def test_failed_check_exit_status(capsys):
    code, out, _ = _run(["interp-study", "--shape", "rect", "--k", "3", "--n", "4,8", "--tol", "0.001"], capsys)
    assert code == 1 and "FAIL" in out


def test_solve_example1_small(capsys):
    code, out, _ = _run(["solve-example1", "--shape", "rect", "--k", "3", "--n", "16,24,32"], capsys)
    assert code == 0
    assert "# check l2_last_rate: PASS" in out and "# check p_zero: PASS" in out and "# check constraint: PASS" in out


def test_solve_lshape_small(capsys):
    code, out, _ = _run(["solve-lshape", "--levels", "0..2", "--kappa", "0.5"], capsys)
    assert code == 0
    rows = [s for s in out.splitlines() if not s.startswith("#")]
    assert rows[0].startswith("n,n_cells,n_dofs,l2_diff")
    assert len(rows) == 3 and rows[1].startswith("0,6,")


def test_deterministic_output(capsys, monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "1")
    argv = ["solve-example1", "--shape", "tri", "--k", "4", "--n", "2,4"]
    first = _run(argv, capsys)
    second = _run(argv, capsys)
    assert first == second


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "h2curl", "dof-table", "--k", "2", "--n", "2"],
                       capture_output=True, text=True, check=False)
    assert r.returncode == 0 and ",122," in r.stdout
