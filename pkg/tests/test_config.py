import numpy as np
import pytest

from acil import config as cfg

MINIMAL = """
[scenario]
system = delta_wing
blf = quartic_ratio:2
x0 = 1, 0.1
"""


def test_builtin_scenarios_load_and_build():
    assert {"deltawing", "minefield", "counterexample"} <= set(cfg.builtin_scenarios())
    for name in cfg.builtin_scenarios():
        sim = cfg.build(cfg.load(name))
        assert sim.dt == 1e-3


def test_minimal_file_uses_defaults():
    v = cfg.parse_text(MINIMAL)
    sim = cfg.build(v)
    assert np.array_equal(sim.scenario.x0, [1.0, 0.1])
    assert np.array_equal(sim.scenario.W_a0, np.zeros(4))
    assert sim.hyperparams.k == 0.02 and sim.hyperparams.n_points == 20
    assert sim.horizon == 20.0
    low, high = sim.scenario.box
    assert np.array_equal(high, [2.0, 2.0]) and np.array_equal(low, [-2.0, -2.0])


def test_deltawing_file_values():
    sim = cfg.build(cfg.load("deltawing"))
    hp = sim.hyperparams
    assert (hp.eta_c1, hp.eta_c2, hp.eta_a1, hp.eta_a2, hp.nu, hp.beta) == (0.1, 1, 0.1, 1, 5, 0.01)
    assert hp.gamma0 == 10 and hp.k == 0.02 and hp.k_sb == 0.2
    assert sim.scenario.c_b == 0.075


def test_vector_lists():
    v = cfg.parse_text(MINIMAL + "[compare]\ninitial_conditions = 1, 0.1; -1, 1 # comment\n")
    assert [x.tolist() for x in v["initial_conditions"]] == [[1.0, 0.1], [-1.0, 1.0]]


@pytest.mark.parametrize("text,match", [
    (MINIMAL + "[bogus]\na = 1\n", "unknown section"),
    (MINIMAL + "[sim]\nwarp = 9\n", "unknown key"),
    (MINIMAL + "[sim]\nk = 1\n", "belongs to"),
    (MINIMAL + "[sim]\ndt = fast\n", "dt"),
    ("[scenario\n", "config"),
])
def test_parse_errors(text, match):
    with pytest.raises(cfg.ConfigError, match=match):
        cfg.parse_text(text)


def test_overrides():
    v = cfg.parse_text(MINIMAL)
    out = cfg.apply_overrides(v, ["dt=1e-4", "softplus.k=0.5", "x0=0.5,0.5"])
    assert out["dt"] == 1e-4 and out["k"] == 0.5 and out["x0"].tolist() == [0.5, 0.5]
    assert v["dt"] == 1e-3
    for bad, match in [("warp=1", "unknown key"), ("sim.k=1", "belongs"), ("dt", "key=value"),
                       ("horizon=soon", "horizon")]:
        with pytest.raises(cfg.ConfigError, match=match):
            cfg.apply_overrides(v, [bad])


@pytest.mark.parametrize("override,match", [
    ("system=glider", "system"),
    ("blf=hexagon:1", "blf"),
    ("blf=ball_log:1,2", "blf"),
    ("basis=cubic", "basis"),
    ("controller=bang_bang", "controller"),
    ("dt=-1", "dt"),
    ("x0=3,0", "safe set"),
    ("W_a0=1,2", "W_a0"),
    ("actor_rho_power=3", "actor_rho_power"),
    ("id_gain_mode=magic", "id_gain_mode"),
])
def test_build_errors_name_the_key(override, match):
    v = cfg.apply_overrides(cfg.parse_text(MINIMAL), [override])
    with pytest.raises(cfg.ConfigError, match=match):
        cfg.build(v)


def test_missing_required_key():
    with pytest.raises(cfg.ConfigError, match="x0"):
        cfg.build(cfg.parse_text("[scenario]\nsystem = delta_wing\nblf = quartic_ratio:2\n"))


def test_system_arguments():
    v = cfg.apply_overrides(cfg.parse_text(MINIMAL), ["system=scalar_linear:2,0.5", "blf=ball_log:1",
                                                      "x0=0.2"])
    sim = cfg.build(v)
    assert sim.scenario.model.theta_true.tolist() == [2.0]
    assert sim.scenario.basis.name == "scalar_quadratic"


def test_obstacle_file_relative_to_config(tmp_path):
    (tmp_path / "mines.txt").write_text("3 3\n-4 2\n")
    path = tmp_path / "robot.cfg"
    path.write_text("[scenario]\nsystem = minefield_robot\nblf = minefield:10\n"
                    "obstacles = mines.txt\nx0 = 4, 6\n")
    sim = cfg.build(cfg.load(path))
    b = sim.scenario.barrier
    assert not b.contains(np.array([3.0, 3.5]))
    assert np.isclose(b.value(np.zeros(2)), 1 / 17 + 1 / 19)


def test_missing_config_file():
    with pytest.raises(cfg.ConfigError, match="not found"):
        cfg.load("no_such_scenario")


def test_output_dir_precedence(monkeypatch):
    v = cfg.parse_text(MINIMAL)
    monkeypatch.delenv(cfg.OUT_ENV, raising=False)
    assert str(cfg.output_dir(v)) == "out"
    monkeypatch.setenv(cfg.OUT_ENV, "/tmp/env_out")
    assert str(cfg.output_dir(v)) == "/tmp/env_out"
    assert str(cfg.output_dir(v, "flag_out")) == "flag_out"


def test_sweepable_keys():
    assert "k" in cfg.SWEEPABLE and "c_b" in cfg.SWEEPABLE
    assert "extrapolation" not in cfg.SWEEPABLE
