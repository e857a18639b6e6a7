import json

import pytest

from keps import cli


def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _summary(outdir):
    lines = (outdir / "run.log").read_text().splitlines()
    return json.loads(lines[lines.index("# summary") + 1])


def test_validate_uniform(tmp_path, capsys):
    assert cli.main(["validate", "--config", _write(tmp_path, "init.preset = uniform\n")]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "validation passed" in out and "c0=4" in out


def test_validate_rejects_low_k(tmp_path, capsys):
    code = cli.main(["validate", "--config", _write(tmp_path, "init.k0 = 0.05\n")])
    assert code == cli.EXIT_INPUT
    assert "0 < m < k₀" in capsys.readouterr().err


@pytest.mark.parametrize("text", ["grid.nope = 1\n", "time.dt = fast\n", "init.preset = vortex\n",
                                  "params.mu_e = 9\n"])
def test_config_errors_exit_2(tmp_path, text):
    assert cli.main(["validate", "--config", _write(tmp_path, text)]) == cli.EXIT_INPUT


def test_missing_config_and_bad_flags(tmp_path):
    assert cli.main(["validate", "--config", str(tmp_path / "absent.cfg")]) == cli.EXIT_INPUT
    with pytest.raises(SystemExit) as info:
        cli.main(["run", "--threads", "0"])
    assert info.value.code == 2


def test_estimate_prints_ladder(tmp_path, capsys):
    cfg = _write(tmp_path, "init.preset = uniform\nparams.gamma = 1\n")
    assert cli.main(["estimate", "--config", cfg]) == cli.EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    ladder = [line.split(" ")[0].split("=", 1) for line in lines if "log10_" in line]
    assert [k for k, _ in ladder] == ["c0", "c1", "c2", "c5", "c6", "c3", "c4", "T"]
    values = dict(ladder)
    assert values["c0"] == "4" and values["c1"] == "262144"


def test_estimate_bounds(tmp_path, capsys):
    # the product term is far below any float bound, so T1 = 1e-30 leaves it in charge
    cfg = _write(tmp_path, "init.preset = uniform\n")
    assert cli.main(["estimate", "--config", cfg]) == cli.EXIT_OK
    plain = capsys.readouterr().out.splitlines()[-1]
    assert cli.main(["estimate", "--config", cfg, "--t1", "1e-30"]) == cli.EXIT_OK
    assert capsys.readouterr().out.splitlines()[-1] == plain
    assert cli.main(["estimate", "--config", cfg, "--t2", "-1"]) == cli.EXIT_INPUT


def _run_cfg(tmp_path, extra=""):
    return _write(tmp_path, "init.preset = decay\ngrid.n = 8\ntime.t_end = 0.02\ntime.dt = 0.01\n"
                            "picard.window = none\n" + extra)


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["run", "--config", _run_cfg(tmp_path), "--output", str(out)]) == cli.EXIT_OK
    for name in ("run.log", "picard.csv", "norms.csv", "snapshots/k_000002.txt", "snapshots/u_000000.txt"):
        assert (out / name).exists(), name
    summary = _summary(out)
    assert summary["status"] == "ok" and summary["steps"] == 2
    assert summary["max_mass_drift"] == 0.0
    log = (out / "run.log").read_text()
    assert "init.preset = decay" in log and "step=2 " in log
    assert "final contraction ratio" in capsys.readouterr().out


def test_run_is_deterministic(tmp_path):
    outs = []
    for i, threads in enumerate(("1", "3")):
        out = tmp_path / f"o{i}"
        cfg = _write(tmp_path, "init.preset = shear\ngrid.n = 16\ntime.t_end = 0.01\ntime.dt = 0.005\n")
        assert cli.main(["run", "--config", cfg, "--output", str(out), "--threads", threads]) == 0
        outs.append(out)
    for name in ("picard.csv", "norms.csv", "snapshots/rho_000002.txt"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_restart_from_snapshots(tmp_path):
    out = tmp_path / "first"
    assert cli.main(["run", "--config", _run_cfg(tmp_path), "--output", str(out)]) == 0
    files = ",".join(str(out / "snapshots" / f"{n}_000002.txt") for n in ("rho", "u", "h", "k", "eps"))
    cfg = _write(tmp_path, f"grid.n = 8\ninit.files = {files}\n", "again.cfg")
    assert cli.main(["validate", "--config", cfg]) == 0
    wrong = _write(tmp_path, f"grid.n = 9\ninit.files = {files}\n", "wrong.cfg")
    assert cli.main(["validate", "--config", wrong]) == cli.EXIT_INPUT


def test_decay_without_dissipation_is_exact(tmp_path, capsys):
    out = tmp_path / "d"
    cfg = _run_cfg(tmp_path, "init.eps0 = 0\n")
    assert cli.main(["decay", "--config", cfg, "--output", str(out)]) == 0
    s = _summary(out)
    assert s["decay_max_rel_err_k"] == 0.0 and s["decay_max_rel_err_eps"] == 0.0
    assert (out / "decay.csv").read_text().splitlines()[0] == "t,k,k_exact,eps,eps_exact,rel_err_k,rel_err_eps"


def test_decay_tolerance_breach(tmp_path):
    out = tmp_path / "d"
    cfg = _run_cfg(tmp_path, "decay.tol_per_dt = 1e-6\n")
    assert cli.main(["decay", "--config", cfg, "--output", str(out)]) == cli.EXIT_RUN
    assert _summary(out)["status"] == "tolerance_breach"


def test_decay_requires_homogeneous_preset(tmp_path):
    assert cli.main(["decay", "--config", _write(tmp_path, "init.preset = shear\n")]) == cli.EXIT_INPUT


def test_unconverged_run_exits_3(tmp_path):
    out = tmp_path / "u"
    cfg = _run_cfg(tmp_path, "picard.max_outer = 2\npicard.tol = 1e-30\n")
    assert cli.main(["run", "--config", cfg, "--output", str(out)]) == cli.EXIT_RUN
    assert _summary(out)["status"] == "not_converged"


def test_solver_error_exits_3(tmp_path, capsys):
    out = tmp_path / "c"
    cfg = _write(tmp_path, "init.preset = shear\ngrid.n = 16\ngrid.dim = 1\ninit.amplitude = 40\n"
                           "time.dt = 0.05\ntime.t_end = 0.1\n")
    assert cli.main(["run", "--config", cfg, "--output", str(out)]) == cli.EXIT_RUN
    assert "CflViolation" in capsys.readouterr().err
    assert _summary(out)["status"] == "solver_error"


@pytest.mark.slow
def test_oversized_horizon_exits_3(tmp_path, capsys):
    # a strong shear over a long horizon drives later Picard passes out of the admissible region
    out = tmp_path / "big"
    cfg = _write(tmp_path, "init.preset = shear\ninit.amplitude = 2\ntime.t_end = 1\ngrid.dim = 1\n"
                           "grid.n = 64\ntime.dt = 1e-3\n")
    assert cli.main(["run", "--config", cfg, "--output", str(out)]) == cli.EXIT_RUN
    assert "PicardDiverged" in capsys.readouterr().err or _summary(out)["status"] == "picard_diverged"
    assert _summary(out)["status"] == "picard_diverged"
    assert (out / "picard.csv").read_text().startswith("iter,sup_phi,int_h1,ratio\n")
