"""Config grammar: parsing, line-anchored errors, round-trips, accessors."""

import pytest

import kclattice as kc
from kclattice import ConfigError, RunConfig


GOOD = """\
[problem]
a = 1.0
b = 0.5
alpha = 1.5
radius = 6
mode = periodic

[potential]
kind = periodic
tau = 3
table = 5 6 7 6 7 8 7 8 9 6 7 8 7 8 9 8 9 10 7 8 9 8 9 10 9 10 11

[nonlinearity]
coefficient = 2.0
exponent = 3.0
theta = 5.5

[solver]
seed = 7
max_iterations = 500

[kernel]
table_radius = 6

[output]
directory = out
solution_format = binary

[verify]
radii = 3 4 5

[sweep]
parameter = b
values = 0.0 0.5 1.0
"""


def test_defaults_round_trip():
    cfg = RunConfig.defaults()
    again = RunConfig.from_text(cfg.to_text())
    assert again == cfg


def test_custom_round_trip():
    cfg = RunConfig.from_text(GOOD)
    again = RunConfig.from_text(cfg.to_text())
    assert again == cfg
    assert cfg.alpha == 1.5
    assert cfg.mode == kc.PERIODIC
    assert cfg.tau == 3
    assert cfg.theta == 5.5
    assert cfg.sweep_parameter == "b"
    assert cfg.sweep_values == (0.0, 0.5, 1.0)


def test_from_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(GOOD)
    cfg = RunConfig.from_file(path)
    assert cfg.radius == 6
    with pytest.raises(OSError):
        RunConfig.from_file(tmp_path / "missing.cfg")


def test_comments_and_blank_lines_ignored():
    text = "# leading comment\n\n[problem]\n; semicolon comment\nradius = 5\n"
    cfg = RunConfig.from_text(text)
    assert cfg.radius == 5


def test_unknown_section_is_anchored():
    with pytest.raises(ConfigError) as err:
        RunConfig.from_text("[problem]\nradius = 4\n\n[extras]\nx = 1\n", path="my.cfg")
    assert str(err.value).startswith("my.cfg:4:")
    assert "extras" in str(err.value)


def test_unknown_key_is_anchored():
    with pytest.raises(ConfigError) as err:
        RunConfig.from_text("[problem]\nradiu = 4\n", path="my.cfg")
    assert str(err.value).startswith("my.cfg:2:")
    assert "radiu" in str(err.value)


def test_duplicate_section_rejected():
    with pytest.raises(ConfigError) as err:
        RunConfig.from_text("[problem]\nradius = 4\n[problem]\na = 1\n")
    assert ":3:" in str(err.value)


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError) as err:
        RunConfig.from_text("[problem]\nradius = 4\nradius = 5\n")
    assert ":3:" in str(err.value)


def test_key_outside_section_rejected():
    with pytest.raises(ConfigError) as err:
        RunConfig.from_text("radius = 4\n")
    assert ":1:" in str(err.value)


def test_malformed_line_rejected():
    with pytest.raises(ConfigError) as err:
        RunConfig.from_text("[problem]\nthis is not a key value pair\n")
    assert ":2:" in str(err.value)


def test_bad_number_is_anchored():
    with pytest.raises(ConfigError) as err:
        RunConfig.from_text("[problem]\nalpha = fast\n", path="p.cfg")
    assert str(err.value).startswith("p.cfg:2:")


def test_bad_choice_is_anchored():
    with pytest.raises(ConfigError) as err:
        RunConfig.from_text("[problem]\nmode = reflecting\n")
    assert ":2:" in str(err.value)
    assert "reflecting" in str(err.value)


def test_semantic_error_anchors_to_offending_key():
    with pytest.raises(ConfigError) as err:
        RunConfig.from_text("[problem]\nradius = -2\n", path="bad.cfg")
    assert str(err.value).startswith("bad.cfg:2:")
    with pytest.raises(ConfigError) as err:
        RunConfig.from_text("[nonlinearity]\nexponent = 1.5\n", path="bad.cfg")
    assert str(err.value).startswith("bad.cfg:2:")
    with pytest.raises(ConfigError) as err:
        RunConfig.from_text("[problem]\nalpha = 3.5\n", path="bad.cfg")
    assert str(err.value).startswith("bad.cfg:2:")


def test_periodic_potential_semantic_errors():
    # table length must be tau^3
    with pytest.raises(ConfigError):
        RunConfig.from_text("[potential]\nkind = periodic\ntau = 2\ntable = 1 2 3\n")
    # periodic potential entries must stay positive
    with pytest.raises(ConfigError):
        RunConfig.from_text(
            "[potential]\nkind = periodic\ntau = 1\ntable = 0.0\n"
        )


def test_sweep_validation():
    with pytest.raises(ConfigError) as err:
        RunConfig.from_text("[sweep]\nparameter = gamma\nvalues = 1 2\n")
    assert "gamma" in str(err.value)
    with pytest.raises(ConfigError):
        RunConfig.from_text("[sweep]\nparameter = b\n")


def test_verify_radii_validation():
    with pytest.raises(ConfigError):
        RunConfig.from_text("[verify]\nradii = 6 4\n")
    with pytest.raises(ConfigError):
        RunConfig.from_text("[verify]\nradii = 5\n")


def test_file_start_requires_path():
    with pytest.raises(ConfigError):
        RunConfig.from_text("[solver]\ninitial_guess = file\n")
    cfg = RunConfig.from_text("[solver]\ninitial_guess = file\ninitial_file = u.field\n")
    assert cfg.initial_guess == kc.FILE_START
    with pytest.raises(ValueError):
        cfg.solve_config()  # the field itself was never loaded


def test_problem_spec_accessors():
    cfg = RunConfig.from_text(GOOD)
    spec = cfg.problem_spec()
    assert spec.box.radius == 6
    assert spec.box.mode == kc.PERIODIC
    assert spec.alpha == 1.5
    assert spec.b == 0.5
    assert spec.potential.kind == kc.PERIODIC_POTENTIAL
    assert spec.potential.tau == 3
    assert spec.nonlinearity.coefficient == 2.0
    assert spec.nonlinearity.theta == 5.5


def test_solve_config_accessor_and_seed_override():
    cfg = RunConfig.from_text(GOOD)
    sc = cfg.solve_config()
    assert sc.seed == 7
    assert sc.max_iterations == 500
    assert cfg.solve_config(seed=99).seed == 99
    assert cfg.with_seed(99).seed == 99
    assert cfg.with_seed(99).radius == cfg.radius


def test_table_radius_defaults():
    dirichlet = RunConfig.from_text("[problem]\nradius = 5\n")
    assert dirichlet.solve_table_radius() == 10
    periodic = RunConfig.from_text("[problem]\nradius = 5\nmode = periodic\n")
    assert periodic.solve_table_radius() == 5
    explicit = RunConfig.from_text("[problem]\nradius = 5\n\n[kernel]\ntable_radius = 14\n")
    assert explicit.solve_table_radius() == 14
    # verify needs to cover its own radii ladder too
    cfg = RunConfig.from_text("[problem]\nradius = 4\n\n[verify]\nradii = 4 6 8 10\n")
    assert cfg.verify_table_radius() == 20


def test_constant_and_coercive_potentials():
    const = RunConfig.from_text("[potential]\nkind = constant\nv0 = 2.0\n")
    assert const.potential_spec().kind == kc.CONSTANT
    assert const.potential_spec().v0 == 2.0
    coer = RunConfig.from_text(
        "[potential]\nkind = coercive\nv0 = 1.5\nrate = 0.5\npower = 1.0\ncenter = 1 0 -1\n"
    )
    pot = coer.potential_spec()
    assert pot.kind == kc.COERCIVE
    assert pot.center == (1, 0, -1)
    assert pot.value((1, 0, -1)) == 1.5
