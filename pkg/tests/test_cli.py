import json

import pytest

from deformam.cli import ConfigError, RunConfig, dump_config, main, parse_config_text


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_verify_default_is_strict(capsys):
    code, out, _ = run(capsys, "verify-algebra")
    data = json.loads(out)
    assert code == 1 and data["ok"] is False
    failing = [r["identity_id"] for r in data["identities"] if r["must_pass"] and r["status"] != "exact_match"]
    assert failing == ["ladder_ell2"]


def test_verify_quaternion_right(capsys):
    code, out, _ = run(
        capsys, "verify-algebra", "--flavor", "quat_right", "--w", "dx*x,dy*y,dz*z", "--ids", "right_algebra,right_h"
    )
    data = json.loads(out)
    assert code == 0
    assert [r["identity_id"] for r in data["identities"]] == ["right_algebra", "right_h"]


def test_verify_csv_and_md(capsys):
    code, out, _ = run(capsys, "verify-algebra", "--ids", "diag_algebra,ladder_l3", "--format", "csv")
    assert code == 0
    assert out.splitlines()[0] == "identity_id,must_pass,status,matched_readings,citation"
    code, out, _ = run(capsys, "verify-algebra", "--ids", "diag_algebra", "--format", "md")
    assert code == 0 and "diag_algebra" in out


@pytest.mark.parametrize(
    "argv",
    [
        ("verify-algebra", "--s", "eps1*x,,"),
        ("verify-algebra", "--ids", "no_such_identity"),
        ("parse", "x*(Dy"),
        ("perturb", "--lambda", "1", "--m", "2"),
        ("perturb", "--lambda", "3", "--lmax", "4"),
        ("expect", "--checks", "bogus"),
        ("no-such-command",),
    ],
)
def test_usage_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2


def test_parse_error_position(capsys):
    _, _, err = run(capsys, "parse", "x*(Dy")
    assert "position 5" in err


def test_parse_canonical(capsys):
    code, out, _ = run(capsys, "parse", "Dx*x", "--format", "md")
    assert code == 0 and out.strip() == "(1) + (1)*x*Dx"
    data = json.loads(run(capsys, "parse", "Dx*x")[1])
    assert data["canonical"] == "(1) + (1)*x*Dx" and data["terms"] == 2


def test_perturb_csv(capsys):
    code, out, _ = run(capsys, "perturb", "--lambda", "1", "--format", "csv")
    assert code == 0
    rows = dict(line.split(",") for line in out.splitlines()[1:])
    assert float(rows["3"]) == pytest.approx(-0.04, abs=1e-10)
    assert "1" not in rows


def test_perturb_trivial(capsys):
    code, out, _ = run(capsys, "perturb", "--lambda", "0")
    data = json.loads(out)
    assert code == 0 and data["kappa"] == 0
    assert all(v == 0 for v in data["C"].values())


def test_config_round_trip(tmp_path, capsys):
    cfg = RunConfig(command="perturb", lambda_=2, m=1, lmax=8, format="csv")
    parsed = parse_config_text(dump_config(cfg))
    assert parsed["lambda_"] == 2 and parsed["lmax"] == 8 and parsed["format"] == "csv"
    path = tmp_path / "run.cfg"
    path.write_text("# overrides\nlambda = 1\nformat = csv\n")
    code, out, _ = run(capsys, "perturb", "--lambda", "3", "--config", str(path))
    assert code == 0 and out.startswith("lambda_prime,C")
    path.write_text("colour = blue\n")
    code, _, err = run(capsys, "perturb", "--config", str(path))
    assert code == 2 and "colour" in err
    with pytest.raises(ConfigError):
        parse_config_text("no equals sign here")


def test_output_file_and_determinism(tmp_path, capsys):
    outs = []
    for n in range(2):
        target = tmp_path / f"out{n}.json"
        assert main(["verify-algebra", "--ids", "diag_algebra,ladder_ell2", "--out", str(target)]) in (0, 1)
        outs.append(target.read_bytes())
    assert outs[0] == outs[1]
    a = run(capsys, "perturb", "--lambda", "2", "--m", "1", "--format", "json")[1]
    b = run(capsys, "perturb", "--lambda", "2", "--m", "1", "--format", "json")[1]
    assert a == b


def test_expect_l3_and_shift(capsys):
    code, out, _ = run(capsys, "expect", "--checks", "l3,shift")
    data = json.loads(out)
    assert code == 0 and data["ok"]
    shifts = {r["check"]: r["shift"] for r in data["checks"] if r["check"].startswith("shift")}
    assert shifts["shift l+"] == pytest.approx(1.0, abs=1e-10)
    assert shifts["shift l-"] == pytest.approx(-1.0, abs=1e-10)
