import subprocess
import sys

import pytest

from wavefrac.cli import main
from wavefrac.config import parse_config
from wavefrac.output import read_trace, read_vtu_counts


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["run", "--preset", "subcritical-smoke", "--override", "time.t_end=0.1",
                 "--override", "output.vtu=true", "--override", "output.interval=0.05",
                 "--output", str(out)])
    assert code == 0
    rows = read_trace(out / "trace.csv")
    assert rows[-1]["t"] == pytest.approx(0.1)
    vtus = sorted(out.glob("*.vtu"))
    assert len(vtus) == 3
    assert read_vtu_counts(vtus[0]) == (33 * 3, 32 * 2)
    saved = parse_config((out / "config.txt").read_text())
    assert saved.time.t_end == 0.1
    assert "no cracked nodes" in capsys.readouterr().out


def test_pilot_write_records_amplitude(tmp_path, capsys):
    cfg = tmp_path / "bar.cfg"
    cfg.write_text("# calibration run\ngeometry.level = 4\npulse.amplitude_minus = -1.0\n"
                   "time.dt_el = 0.004\ntime.dt_pf = 0.004\npilot.t_end = 0.5\n")
    assert main(["pilot", str(cfg), "--preset", "curved-bar-2d-calibrated", "--write"]) == 0
    text = cfg.read_text()
    assert text.startswith("# calibration run")
    parsed = parse_config(text)
    assert parsed.pulse.amplitude_minus < 0 and parsed.pulse.amplitude_minus != -1.0
    assert text.count("pulse.amplitude_minus") == 1
    assert "pulse.amplitude_minus =" in capsys.readouterr().out


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("geometry.level = 6\nmaterial.mu = -3\n")
    assert main(["run", str(bad), "--output", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "line 2" in err


def test_missing_config_file(tmp_path):
    assert main(["run", str(tmp_path / "nope.cfg")]) == 2


def test_unknown_override_key(tmp_path):
    assert main(["run", "--preset", "subcritical-smoke", "--override", "time.bogus=1",
                 "--output", str(tmp_path)]) == 2


def test_verify_1d_small(tmp_path, capsys):
    code = main(["verify-1d", "--preset", "quasi-1d-strip", "--override", "verify.levels=5,6",
                 "--override", "verify.t_end=0.3",
                 "--override", "verify.wave_speed_times=0.2,0.25", "--output", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "observed orders" in out and "wave speed" in out
    assert (tmp_path / "verify_1d.csv").exists()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "wavefrac", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "verify-1d" in res.stdout
