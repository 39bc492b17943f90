import json
import subprocess
import sys
import textwrap

import pytest

from covlap import cli

BASE = """\
seed = 3
algebra = {algebra}
sigma = {sigma}
output_dir = {out}

[grid]
L = 2.0
n = {n}

[potential]
kind = {potential}

[source]
kind = {source}
"""


def scenario(tmp_path, name="s.cfg", extra="", algebra="su2", sigma="0.5", n=13, potential="bumps",
             source="manufactured"):
    path = tmp_path / name
    path.write_text(BASE.format(algebra=algebra, sigma=sigma, out=tmp_path / "out", n=n,
                                potential=potential, source=source) + textwrap.dedent(extra))
    return path


def load(tmp_path, name):
    return json.loads((tmp_path / "out" / name).read_text())


def strip_times(obj):
    if isinstance(obj, dict):
        return {k: strip_times(v) for k, v in obj.items() if not k.endswith("wall_time_s")}
    if isinstance(obj, list):
        return [strip_times(v) for v in obj]
    return obj


def test_zero_source_abelian_solve(tmp_path):
    cfg = scenario(tmp_path, algebra="u1", potential="zero", source="zero", n=7)
    assert cli.main(["solve", str(cfg)]) == 0
    rep = load(tmp_path, "solve_report.json")
    assert rep["converged"] and rep["report"]["iterations"] == 0
    assert (tmp_path / "out" / "Z.gfld").exists()


def test_manufactured_solve_reports_error(tmp_path):
    cfg = scenario(tmp_path, extra="[output]\ncsv = true\n")
    assert cli.main(["solve", str(cfg)]) == 0
    rep = load(tmp_path, "solve_report.json")
    assert rep["norms"]["relative_error"] < 1e-9
    assert rep["config"]["algebra"] == "su2" and rep["command"] == "solve"
    assert (tmp_path / "out" / "Z.csv").read_text().count("\n") == 13**3 + 1


@pytest.mark.parametrize("body,needle", [
    ("sigma = 0", "sigma"),
    ("sigma = 1.5", "sigma"),
    ("algebra = so5", "algebra"),
    ("[grid]\nn = 2", "grid.n"),
    ("[checks]\nnames = poincare, banana", "banana"),
])
def test_configuration_errors_exit_2(tmp_path, capsys, body, needle):
    text = scenario(tmp_path).read_text()
    key = body.split(" =")[0].split("\n")[-1]
    lines = [ln for ln in text.splitlines() if not ln.startswith(f"{key} =")]
    if body.startswith("["):
        section, setting = body.split("\n")
        idx = lines.index(section) if section in lines else None
        if idx is None:
            lines += ["", section, setting]
        else:
            lines.insert(idx + 1, setting)
    else:
        lines.insert(0, body)
    path = tmp_path / "bad.cfg"
    path.write_text("\n".join(lines) + "\n")
    cmd = "verify" if "names" in body else "solve"
    assert cli.main([cmd, str(path)]) == 2
    assert needle in capsys.readouterr().err


def test_missing_file_exits_2(tmp_path, capsys):
    assert cli.main(["solve", str(tmp_path / "nope.cfg")]) == 2
    assert "nope.cfg" in capsys.readouterr().err


def test_nonconvergence_exits_3(tmp_path):
    cfg = scenario(tmp_path, extra="[solver]\nmax_iter = 2\n")
    assert cli.main(["solve", str(cfg)]) == 3
    assert load(tmp_path, "solve_report.json")["converged"] is False


def test_gurka_opic_at_sigma_zero_is_expected_negative(tmp_path):
    cfg = scenario(tmp_path, extra="[checks]\nnames = gurka_opic\ngurka_opic.sigma = 0\n")
    assert cli.main(["verify", str(cfg)]) == 0
    rep = load(tmp_path, "check_gurka_opic.json")["report"]
    assert rep["passed"] and rep["empirical_constant"] == "inf"


def test_coercivity_at_sigma_one_has_zero_margin(tmp_path):
    cfg = scenario(tmp_path, sigma="1.0", extra="[checks]\nnames = coercivity\nfamily.samples = 4\n")
    assert cli.main(["verify", str(cfg)]) == 0
    assert load(tmp_path, "check_coercivity.json")["report"]["details"]["min_relative_margin"] == 0.0


def test_verify_artifacts_are_byte_stable(tmp_path):
    extra = "[checks]\nnames = poincare, ginibre_velo, mollified_curvature\nfamily.samples = 3\n"
    cfg = scenario(tmp_path, extra=extra)
    assert cli.main(["verify", str(cfg)]) == 0
    first = {p.name: p.read_bytes() for p in (tmp_path / "out").glob("*.json")}
    assert set(first) == {"check_poincare.json", "check_ginibre_velo.json", "check_mollified_curvature.json",
                          "verify_summary.json"}
    assert cli.main(["verify", str(cfg)]) == 0
    assert first == {p.name: p.read_bytes() for p in (tmp_path / "out").glob("*.json")}


def test_solve_artifacts_stable_apart_from_wall_time(tmp_path):
    cfg = scenario(tmp_path)
    cli.main(["solve", str(cfg)])
    a = load(tmp_path, "solve_report.json")
    cli.main(["solve", str(cfg)])
    b = load(tmp_path, "solve_report.json")
    assert strip_times(a) == strip_times(b)


def test_seed_override_changes_result(tmp_path):
    cfg = scenario(tmp_path)
    cli.main(["solve", str(cfg)])
    a = load(tmp_path, "solve_report.json")
    cli.main(["solve", str(cfg), "--seed", "4"])
    b = load(tmp_path, "solve_report.json")
    assert b["config"]["seed"] == 4
    assert a["norms"]["source_condition_norm"] != b["norms"]["source_condition_norm"]


def test_bench_rows(tmp_path):
    cfg = scenario(tmp_path, extra="[bench]\ngrids = 7, 9\nrepeats = 2\n")
    assert cli.main(["bench", str(cfg)]) == 0
    rows = load(tmp_path, "bench.json")["rows"]
    assert [r["n"] for r in rows] == [7, 9]
    assert all(r["converged"] and r["apply_wall_time_s"] > 0 for r in rows)


def test_thread_limit_env(tmp_path, monkeypatch):
    cfg = scenario(tmp_path, algebra="u1", potential="zero", source="zero", n=7)
    monkeypatch.setenv("COVLAP_THREADS", "1")
    assert cli.main(["solve", str(cfg)]) == 0
    monkeypatch.setenv("COVLAP_THREADS", "zero")
    assert cli.main(["solve", str(cfg)]) == 2


def test_module_entry_point(tmp_path):
    cfg = scenario(tmp_path, algebra="u1", potential="zero", source="zero", n=7)
    proc = subprocess.run([sys.executable, "-m", "covlap", "solve", str(cfg)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
