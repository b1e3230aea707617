import math

import pytest
from hypothesis import given, strategies as st

from wavefrac.config import (PRESETS, ConfigError, RunConfig, load_config, parse_config, preset,
                             serialize, validate)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_are_valid(name):
    validate(preset(name))


def test_published_preset_constants():
    c = preset("curved-bar-2d")
    assert (c.material.mu, c.material.lam, c.material.rho, c.material.reg_factor) == (1.0, 2.0, 1.0, 1e-7)
    assert (c.phase.sigma_c, c.phase.M_geom, c.phase.l_c, c.phase.s_min) == (27.0, 0.01, 0.0005, 0.01)
    assert (c.pulse.width_minus, c.pulse.width_plus, c.pulse.t_init) == (0.3, 0.3, 0.24)
    assert c.amplitude_plus == pytest.approx(1.05 * c.pulse.amplitude_minus)
    assert (c.pulse.shift_plus, c.pulse.shift_minus) == (1.25, -1.03)
    assert (c.time.dt_el, c.time.dt_pf) == (0.001, 0.0005)
    assert c.geometry.kind == "curved-bar" and c.geometry.level == 8
    assert c.geometry_map().grid_shape(8) == (256, 16)


def test_empty_text_keeps_preset():
    base = preset("quasi-1d-strip")
    assert parse_config("", base) == base
    assert load_config("", "quasi-1d-strip") == base


def test_invariant_violation_names_key_and_line():
    with pytest.raises(ConfigError) as err:
        parse_config("# comment\nmaterial.mu = -1\n")
    assert "material.mu" in str(err.value) and err.value.line == 2
    with pytest.raises(ConfigError, match="dt_pf"):
        parse_config("time.dt_el = 0.001\ntime.dt_pf = 0.002")
    with pytest.raises(ConfigError, match="t_end"):
        parse_config("time.t_end = 0")


@pytest.mark.parametrize("text,line,fragment", [
    ("material.mu = 1\nmaterial.nu = 0.3", 2, "unknown key"),
    ("physics.mu = 1", 1, "unknown section"),
    ("material.mu = one", 1, "cannot read"),
    ("geometry.level = 6.5", 1, "cannot read"),
    ("phase.enabled = maybe", 1, "cannot read"),
    ("material.mu 1", 1, "expected"),
    ("mu = 1", 1, "section.name"),
    ("material.mu = 1\nmaterial.mu = 2", 2, "duplicate"),
    ("material.lam = 2", 1, "unknown key"),
    ("material.mu = nan", 1, "cannot read"),
])
def test_located_errors(text, line, fragment):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.line == line
    assert fragment in str(err.value)


def test_lambda_alias_and_overrides():
    cfg = load_config("material.lambda = 3.5", "curved-bar-2d", ["time.t_end=0.5", "phase.enabled = false"])
    assert cfg.material.lam == 3.5 and cfg.time.t_end == 0.5 and cfg.phase.enabled is False
    with pytest.raises(ConfigError):
        load_config("", None, ["time.t_end"])


def test_level_must_resolve_the_bar_width():
    with pytest.raises(ConfigError, match="geometry.level"):
        parse_config("geometry.level = 3")


configs = st.builds(
    dict,
    mu=st.floats(0.1, 10), lam=st.floats(-0.05, 10), rho=st.floats(0.1, 10),
    tau=st.floats(1e-5, 1), sigma=st.floats(0.1, 100), level=st.integers(4, 9),
    dt_el=st.floats(1e-4, 1e-2), ratio=st.floats(0.01, 1), enabled=st.booleans(),
    directory=st.text("abcxyz_/-", min_size=1, max_size=12))


@given(configs)
def test_round_trip(p):
    text = (f"material.mu = {p['mu']!r}\nmaterial.lambda = {p['lam']!r}\nmaterial.rho = {p['rho']!r}\n"
            f"phase.tau_r = {p['tau']!r}\nphase.sigma_c = {p['sigma']!r}\ngeometry.level = {p['level']}\n"
            f"time.dt_el = {p['dt_el']!r}\ntime.dt_pf = {p['dt_el'] * p['ratio']!r}\n"
            f"phase.enabled = {p['enabled']}\noutput.directory = {p['directory']}\n")
    cfg = parse_config(text)
    again = parse_config(serialize(cfg))
    assert again == cfg
    assert serialize(again) == serialize(cfg)


@given(st.text(max_size=200))
def test_parsing_is_total(text):
    try:
        cfg = parse_config(text)
    except ConfigError:
        return
    assert isinstance(cfg, RunConfig)
    validate(cfg)


@given(st.lists(st.sampled_from(["material.mu", "time.t_end", "geometry.level", "phase.s_min",
                                 "pulse.width_minus", "output.vtu", "bogus.key"]), max_size=4),
       st.lists(st.sampled_from(["1", "-1", "0", "x", "true", "0.5", "1e9"]), min_size=4, max_size=4))
def test_parsing_is_total_on_plausible_lines(keys, values):
    text = "\n".join(f"{k} = {v}" for k, v in zip(keys, values))
    try:
        validate(parse_config(text))
    except ConfigError as err:
        assert err.line is not None


def test_unknown_preset():
    with pytest.raises(ConfigError):
        preset("nope")


def test_float_formatting_round_trip_is_exact():
    cfg = RunConfig()
    cfg.pulse.amplitude_minus = -1617480.6123456789
    assert parse_config(serialize(cfg)).pulse.amplitude_minus == cfg.pulse.amplitude_minus
    assert math.isfinite(cfg.amplitude_plus)
