import io
import json
import shutil
import subprocess
import sys

import pytest

from symtensor import cli
from symtensor.cli import EXIT_COMMAND, EXIT_IO, EXIT_OK, EXIT_SCHEMA, Shell, UsageError, run_script

SETUP = """\
# defining metrics
new-coordinates Cartesian t x y z
new-coordinates Spherical t r θ φ
transform-add Cartesian Spherical 'x -> r*sin(θ)*cos(φ), y -> r*sin(θ)*sin(φ), z -> r*cos(θ)'
new-metric Minkowski Cartesian 'diag(-1, 1, 1, 1)' η
set-reserved M
new-metric Schwarzschild Spherical 'diag(-(1-2*M/r), 1/(1-2*M/r), r^2, r^2*sin(θ)^2)'
""".splitlines()


def make_shell():
    out = []
    sh = Shell(out=out.append)
    return sh, out


def run(lines):
    sh, out = make_shell()
    err = io.StringIO()
    code = run_script(sh, lines, err)
    return code, "\n".join(out), err.getvalue()


def test_list_schwarzschild_script():
    code, out, err = run(SETUP + ["list Schwarzschild"])
    assert code == EXIT_OK and err == ""
    listing = out.split("Schwarzschild:\n", 1)[1].splitlines()
    assert listing == ["g_tt = 2*M/r - 1", "g_rr = 1/(1 - 2*M/r)", "g_θθ = r^2", "g_φφ = r^2*sin(θ)^2"]


def test_empty_script():
    assert run([]) == (EXIT_OK, "", "")
    assert run(["# only a comment", ""])[0] == EXIT_OK


def test_free_index_mismatch_fails():
    code, _, err = run(SETUP + ["""calc '"Minkowski"["μν"] + "Schwarzschild"["αβ"]'"""])
    assert code == EXIT_COMMAND
    assert err.startswith(f"line {len(SETUP) + 1}: FreeIndexMismatch")


def test_show_in_spherical():
    code, out, _ = run(SETUP + ["show Minkowski Spherical"])
    rows = out.split("η_μν(t, r, θ, φ) =\n", 1)[1].splitlines()
    assert rows[0].split() == ["[", "-1", "0", "0", "0", "]"]
    assert rows[3].split()[-2] == "r^2*sin(θ)^2"


def test_four_velocity_norm_and_rename():
    script = SETUP + [
        "new-tensor FourVelocity Minkowski Cartesian '{1}' '[1/sqrt(1-v^2), v/sqrt(1-v^2), 0, 0]' u",
        "rename FourVelocity 4-Velocity",
        """calc '"4-Velocity"["μ"]."4-Velocity"["μ"]' --id Norm""",
        "show Norm",
    ]
    code, out, _ = run(script)
    assert code == EXIT_OK
    assert out.splitlines()[-1] == "□(t, x, y, z) = -1"


def test_repl_continues_after_errors():
    sh, out = make_shell()
    err = io.StringIO()
    commands = SETUP + [
        "new-tensor FourVelocity Minkowski Cartesian '{1}' '[1, 0, 0, 0]' u",
        "rename FourVelocity 4-Velocity",
        "show FourVelocity",
        "frobnicate",
        "list Minkowski",
    ]
    assert cli.repl(sh, io.StringIO("\n".join(commands) + "\n"), err) == EXIT_OK
    messages = err.getvalue().splitlines()
    assert messages[0] == 'UnknownId: The tensor "FourVelocity" does not exist.'
    assert messages[1].startswith("UsageError: unknown command")
    assert out[-1] == "Minkowski:\nη_tt = -η_xx = -η_yy = -η_zz = -1"


def test_set_parallel_reports_workers():
    _, out, _ = run(["set-parallel on 3", "set-parallel off"])
    assert out.splitlines() == ["Parallelization on: 3 workers.", "Parallelization off."]


def test_usage_errors():
    sh, _ = make_shell()
    with pytest.raises(UsageError):
        sh.execute("new-metric OnlyAnId")
    with pytest.raises(UsageError):
        sh.execute("calc '\"A\"[\"μ\"]' --bogus 1")
    with pytest.raises(UsageError):
        sh.execute("set-format html")


def test_curvature_and_geodesic_verbs():
    code, out, _ = run(SETUP + [
        "christoffel Schwarzschild",
        "list SchwarzschildChristoffel",
        "ricci Schwarzschild",
        "list SchwarzschildRicciTensor",
        "volume-element Schwarzschild",
        "geodesic-lagrangian Minkowski",
        "activate MinkowskiGeodesicFromLagrangian",
    ])
    assert code == EXIT_OK
    assert "Γ^r_θθ = 2*M - r" in out
    assert "SchwarzschildRicciTensor:\nNo non-zero elements." in out
    assert "-r^4*sin(θ)^2" in out
    assert out.splitlines()[-4:] == ["0^t = ẗ", "0^x = -ẍ", "0^y = -ÿ", "0^z = -z̈"]


def test_latex_changes_rendering_only(tmp_path):
    plain, latex = tmp_path / "plain.ogre.json", tmp_path / "latex.ogre.json"
    body = SETUP + ["christoffel Schwarzschild", "show Minkowski Spherical", "list SchwarzschildChristoffel"]
    assert run(body + [f"save {plain}"])[0] == EXIT_OK
    code, out, _ = run(["set-format latex"] + body + [f"save {latex}"])
    assert code == EXIT_OK and r"\begin{pmatrix}" in out
    assert plain.read_text(encoding="utf-8") == latex.read_text(encoding="utf-8")


def test_save_load_round_trip(tmp_path):
    path = tmp_path / "s.ogre.json"
    run(SETUP + ["christoffel Schwarzschild", f"save {path}"])
    code, out, _ = run([f"load {path}", "list SchwarzschildChristoffel"])
    assert code == EXIT_OK and "Γ^r_tt" in out


def test_exit_codes_from_main(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(sys, "stdin", io.StringIO(""))
    assert cli.main(["--script", "-"]) == EXIT_OK
    assert cli.main(["--script", str(tmp_path / "missing.txt")]) == EXIT_IO
    bad = tmp_path / "bad.ogre.json"
    bad.write_text(json.dumps({"$options": {"FormatVersion": "2.0"}}), encoding="utf-8")
    assert cli.main(["--load", str(bad), "--script", "-"]) == EXIT_SCHEMA
    script = tmp_path / "fail.txt"
    script.write_text("delete Nothing\n", encoding="utf-8")
    assert cli.main(["--script", str(script)]) == EXIT_COMMAND
    assert "line 1: UnknownId" in capsys.readouterr().err


def test_assume_flag(tmp_path, capsys):
    script = tmp_path / "assume.txt"
    script.write_text("\n".join(SETUP[1:5] + [
        "new-tensor d Minkowski Cartesian '{}' 'sqrt(x^2+y^2+z^2)' d",
        "show d Spherical",
    ]) + "\n", encoding="utf-8")
    assert cli.main(["--assume", "r >= 0", "--script", str(script)]) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[-1] == "d(t, r, θ, φ) = r"


@pytest.mark.skipif(shutil.which("symtensor") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["symtensor", "--script", "-"], input="\n".join(SETUP + ["list Minkowski"]),
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert proc.stdout.rstrip().endswith("η_tt = -η_xx = -η_yy = -η_zz = -1")
