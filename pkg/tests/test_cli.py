import json
import subprocess
import sys

from eqcheck.cli import run

from conftest import CORPUS


def run_cli(args, capsys):
    code = run(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def corpus_file(name: str) -> str:
    return str(CORPUS / name)


def test_corpus_exits_zero(capsys):
    code, out, _ = run_cli(["check", corpus_file("section2.eq")], capsys)
    assert code == 0
    assert "OK" in out


def test_mutation_exits_one_with_json_record(capsys):
    code, out, _ = run_cli(
        ["check", corpus_file("mutations/singletonP_wrong_step.eq"), "--json"], capsys)
    assert code == 1
    records = json.loads(out)
    failed = [r for r in records if r["status"] != "proved"]
    assert len(failed) == 1
    rec = failed[0]
    assert rec["decl"] == "singletonP" and rec["kind"] == "chain-step"
    assert rec["goal"] and rec["facts"]
    assert set(rec) == {"file", "decl", "id", "kind", "span", "status",
                        "goal", "facts", "message"}
    assert set(rec["span"]) == {"line", "col", "end_line", "end_col"}


def test_missing_file_exits_two(capsys):
    code, _, err = run_cli(["check", "does-not-exist.eq"], capsys)
    assert code == 2
    assert "cannot read" in err


def test_parse_error_exits_two(tmp_path, capsys):
    bad = tmp_path / "bad.eq"
    bad.write_text("f : Int ->\n")
    code, _, err = run_cli(["check", str(bad)], capsys)
    assert code == 2


def test_type_error_exits_two(tmp_path, capsys):
    bad = tmp_path / "bad.eq"
    bad.write_text("f : x:Int -> List Int\nf x = Cons 1 2\n")
    code, _, err = run_cli(["check", str(bad)], capsys)
    assert code == 2


def test_bad_flags_exit_two(capsys):
    code, _, _ = run_cli(["check", corpus_file("section2.eq"), "--jobs", "0"], capsys)
    assert code == 2


def test_human_output_shows_failing_step_sides(tmp_path, capsys):
    code, out, _ = run_cli(
        ["check", corpus_file("mutations/singletonP_wrong_step.eq")], capsys)
    assert code == 1
    assert "append [] (x : [])" in out and "x : x : []" in out


def test_ple_default_flag(tmp_path, capsys):
    src = (CORPUS / "mutations/rightIdP_no_ple.eq").read_text()
    f = tmp_path / "noply.eq"
    f.write_text(src)
    code1, _, _ = run_cli(["check", str(f)], capsys)
    code2, _, _ = run_cli(["check", str(f), "--ple-default"], capsys)
    assert code1 == 1 and code2 == 0


def test_json_byte_identical_across_runs_and_jobs(capsys):
    args = ["check", corpus_file("section5.eq"), "--json"]
    _, out1, _ = run_cli(args, capsys)
    _, out2, _ = run_cli(args, capsys)
    _, out4, _ = run_cli(args + ["--jobs", "4"], capsys)
    assert out1 == out2 == out4


def test_dump_facts(capsys):
    code, out, _ = run_cli(
        ["check", corpus_file("section2.eq"), "--dump-facts", "singletonP/c0/step1"],
        capsys)
    assert code == 0
    assert out.startswith("obligation singletonP/c0/step1")
    assert "facts:" in out and "goal:" in out
    assert "reverse (x : []) == append (reverse []) (x : [])" in out


def test_color_env_var_never(capsys, monkeypatch):
    monkeypatch.setenv("EQCHECK_COLOR", "never")
    _, out, _ = run_cli(["check", corpus_file("section2.eq")], capsys)
    assert "\x1b[" not in out


def test_color_env_var_always(capsys, monkeypatch):
    monkeypatch.setenv("EQCHECK_COLOR", "always")
    _, out, _ = run_cli(["check", corpus_file("section2.eq")], capsys)
    assert "\x1b[32m" in out


def test_console_script_installed():
    proc = subprocess.run(
        [sys.executable, "-m", "eqcheck.cli"],
        input="", capture_output=True, text=True)
    # argparse usage error: missing subcommand
    assert proc.returncode == 2
