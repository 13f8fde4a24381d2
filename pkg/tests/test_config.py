import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmx.config import ConfigError, ScenarioConfig, config_from_dict, emit_config, parse_config, validate
from qmx.grid import DEFAULT_CELL_CAP
from qmx.scenarios import PRESETS, build_scenario, list_scenarios, preset_config


def test_minimal_config_uses_preset():
    cfg = parse_config('[scenario]\nname = "kerr_pulse"\n')
    assert cfg.law.kind == "kerr" and cfg.law.vartheta == 1.0
    assert cfg.grid.cells == [16, 16, 16]
    assert cfg.solver.m == 3 and cfg.solver.tau == 0.05


def test_override_and_error_paths():
    cfg = parse_config('[scenario]\nname = "vacuum_pulse"\n[solver]\ncfl = 0.25\n')
    assert cfg.solver.cfl == 0.25
    with pytest.raises(ConfigError) as err:
        parse_config('[scenario]\nname = "vacuum_pulse"\n[solver]\ncfl = 1.5\n')
    assert err.value.path == "solver.cfl" and "solver.cfl" in str(err.value)
    with pytest.raises(ConfigError) as err:
        parse_config('[scenario]\nname = "vacuum_pulse"\n[solver]\nbogus = 1\n')
    assert err.value.path == "solver.bogus"
    with pytest.raises(ConfigError) as err:
        parse_config('[scenario]\nname = "vacuum_pulse"\n[grid]\ncells = [8, "x", 8]\n')
    assert err.value.path.startswith("grid.cells")
    with pytest.raises(ConfigError) as err:
        parse_config("[solver]\nm = 2\n")
    assert err.value.path == "scenario.name"
    with pytest.raises(ConfigError) as err:
        parse_config('[scenario]\nname = "nope"\n')
    assert err.value.path == "scenario.name"
    with pytest.raises(ConfigError):
        parse_config("[scenario\n")


def test_bad_values_are_named():
    base = preset_config("kerr_pulse")
    for doc, path in [({"law": {"kind": "glass"}}, "law.kind"),
                      ({"solver": {"m": 0}}, "solver.m"),
                      ({"grid": {"boundary": ["pec_bottom_open_top", "periodic", "periodic"]}}, "grid.boundary"),
                      ({"data": {"preset": "dust"}}, "data.preset"),
                      ({"solver": {"horizon": -1.0}}, "solver.horizon")]:
        with pytest.raises(ConfigError) as err:
            config_from_dict(base, doc)
        assert err.value.path == path


def test_presets_listed_and_valid():
    names = [n for n, _ in list_scenarios()]
    assert len(names) >= 9 and set(names) == set(PRESETS)
    for name in names:
        cfg = validate(preset_config(name))
        assert cfg.name == name
        cells = cfg.grid.cells[0] * cfg.grid.cells[1] * cfg.grid.cells[2]
        assert cells <= DEFAULT_CELL_CAP
        sc = build_scenario(cfg)
        assert sc.grid.cells == tuple(cfg.grid.cells)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_round_trip(name):
    cfg = preset_config(name)
    assert parse_config(emit_config(cfg)) == cfg


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 1.0), st.integers(1, 3), st.floats(1e-3, 0.2))
def test_round_trip_property(cfl, m, tau):
    cfg = config_from_dict(preset_config("kerr_pulse"), {"solver": {"cfl": cfl, "m": m, "tau": tau}})
    assert parse_config(emit_config(cfg)) == cfg


def test_default_dataclass_is_plain():
    cfg = ScenarioConfig()
    assert cfg.name == "" and cfg.to_dict()["grid"]["cells"] == [16, 16, 16]
