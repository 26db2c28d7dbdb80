import math

import pytest

from smanakov.config import (
    PRESETS,
    RunConfig,
    apply_scale,
    config_from_mapping,
    emit_config,
    parse_config,
    preset,
)
from smanakov.errors import DivisibilityError, ValidationError

MINIMAL = 'experiment = "strong"\ntime.T = 1.0\ntime.N = [64, 128]\ntime.N_ref = 1024\n'


def test_strong_fig1_preset():
    c = preset("strong-fig1")
    assert c.problem.gamma == 1.0
    assert c.problem.half_width == 50.0
    assert c.grid().dx == pytest.approx(0.05)
    assert c.problem.backend == "fd" and c.problem.boundary == "dirichlet"
    assert c.time.T == 1.0
    assert c.time.N == [2**k for k in range(10, 17)]
    assert c.time.N_ref == 2**18
    assert c.sampling.samples == 300


def test_defaults_filled():
    c = parse_config(MINIMAL)
    assert c.problem.dispersion == 0.5
    assert c.solver.blowup_threshold == 500.0
    assert c.solver.tol == 1e-12
    assert c.solver.max_iter == 100


def test_missing_horizon():
    with pytest.raises(ValidationError) as err:
        parse_config('experiment = "strong"\ntime.N = [4]\ntime.N_ref = 8\n')
    assert err.value.key == "time.T"


def test_divisibility():
    with pytest.raises(DivisibilityError):
        parse_config('experiment = "strong"\ntime.T = 1.0\ntime.N = [3]\ntime.N_ref = 262144\n')


@pytest.mark.parametrize("line,key", [
    ("problem.backend = \"fem\"", "problem.backend"),
    ("problem.bogus = 1", "problem.bogus"),
    ("sampling.samples = 0", "sampling.samples"),
    ("solver.schemes = [\"RK4\"]", "solver.schemes"),
    ("problem.num_points = 100", "problem.num_points"),
    ("problem.boundary = \"dirichlet\"", "problem.boundary"),
    ("problem.gamma = \"one\"", "problem.gamma"),
])
def test_bad_values_name_their_key(line, key):
    with pytest.raises(ValidationError) as err:
        parse_config(MINIMAL + line + "\n")
    assert err.value.key == key


def test_nested_sections_and_dx():
    c = config_from_mapping({"experiment": "drift", "time": {"T": 2.0, "N": [16]},
                             "problem": {"backend": "fd", "half_width": 50.0, "dx": 0.2}})
    assert c.problem.num_points == 500 and c.problem.boundary == "dirichlet"


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_roundtrip(name):
    c = preset(name)
    assert parse_config(emit_config(c)) == c


def test_roundtrip_with_initial_params():
    text = MINIMAL + 'initial.kind = "soliton_sum"\ninitial.solitons = [{eta = 2.0}, {eta = 1.0, kappa = 0.5}]\n'
    c = parse_config(text)
    assert parse_config(emit_config(c)) == c
    assert "0.1" in emit_config(parse_config(MINIMAL + "problem.gamma = 0.1\n"))


def test_apply_scale():
    c = apply_scale(preset("strong-fig1"), 32)
    assert c.time.N == [32, 64, 128, 256, 512, 1024, 2048]
    assert c.time.N_ref == 8192
    assert c.sampling.samples == math.ceil(300 / 32)
    assert c.scale == 32
    assert preset("strong-fig1").scale == 1  # original untouched
    with pytest.raises(DivisibilityError):
        apply_scale(preset("strong-desk"), 3)


def test_unknown_preset():
    with pytest.raises(ValidationError):
        preset("fig99")


def test_default_runconfig_is_single_trajectory():
    assert RunConfig().experiment == "single-trajectory"
