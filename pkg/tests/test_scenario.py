import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from competing_sir.model import validate
from competing_sir.scenario import (
    ParseError,
    Scenario,
    ScenarioValidationError,
    dumps_scenario,
    load_bundled,
    loads_scenario,
    parse_scenario,
    write_scenario,
)

from conftest import (
    EUROPE_B_COVID,
    EUROPE_B_FLU,
    EUROPE_C_COVID,
    EUROPE_C_FLU,
    EUROPE_GAMMA_COVID,
    EUROPE_GAMMA_FLU,
    EUROPE_LABELS,
    EUROPE_X0_COVID,
    EUROPE_X0_FLU,
    random_config,
)

MINIMAL = """\
schema_version: 1
name: tiny
n: 2
m: 1
h: 0.5
horizon: 10
viruses:
  - B: [[0.1, 0.2], [0.0, 0.3]]
    gamma: [0.4, 0.5]
    c: [1.0, 0.5]
    x0: [0.1, 0.0]
"""


def test_europe_tables_exact(europe):
    cfg = europe.config
    assert (cfg.n, cfg.m, cfg.h) == (5, 2, 1.0)
    assert list(cfg.labels) == EUROPE_LABELS
    covid, flu = cfg.viruses
    assert np.array_equal(covid.B, EUROPE_B_COVID)
    assert np.array_equal(covid.gamma, EUROPE_GAMMA_COVID)
    assert np.array_equal(covid.c, EUROPE_C_COVID)
    assert np.array_equal(flu.B, EUROPE_B_FLU)
    assert np.array_equal(flu.gamma, EUROPE_GAMMA_FLU)
    assert np.array_equal(flu.c, EUROPE_C_FLU)
    assert np.array_equal(cfg.initial.x, [EUROPE_X0_COVID, EUROPE_X0_FLU])
    assert np.array_equal(cfg.initial.r, np.zeros(5))
    assert np.array_equal(cfg.initial.s, 1.0 - cfg.initial.x.sum(axis=0))


def test_europe_observer_defaults(europe):
    assert europe.has_observer_block
    assert europe.observer.L == 0.5
    assert europe.observer.x_hat0 == "split"
    assert europe.observer.error_threshold == 1e-6


def test_defaults_when_optional_fields_missing():
    sc = loads_scenario(MINIMAL)
    cfg = sc.config
    assert cfg.labels == ["node1", "node2"]
    assert cfg.virus_labels == ["virus1"]
    assert np.array_equal(cfg.initial.r, [0.0, 0.0])
    assert np.array_equal(cfg.initial.s, [0.9, 1.0])
    assert not sc.has_observer_block and sc.observer.L == 0.5


def test_round_trip_bundled(europe, tmp_path):
    again = loads_scenario(dumps_scenario(europe))
    assert again == europe
    path = tmp_path / "copy.scenario"
    write_scenario(europe, path)
    assert parse_scenario(path) == europe


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 5), m=st.integers(1, 3))
def test_round_trip_random(seed, n, m):
    from competing_sir.model import VirusParams

    cfg = random_config(np.random.default_rng(seed), n, m, horizon=17)
    # emitted files always carry labels, so give the config explicit ones
    cfg = cfg.replace(node_labels=tuple(cfg.labels),
                      viruses=tuple(VirusParams(B=v.B, gamma=v.gamma, c=v.c, label=lab)
                                    for v, lab in zip(cfg.viruses, cfg.virus_labels)))
    sc = Scenario(name="rand", config=cfg, explicit_s0=True, explicit_r0=True)
    assert loads_scenario(dumps_scenario(sc)) == sc


def test_bad_block_shape_names_field():
    text = load_bundled_text().replace("      - [0.06, 0.0, 0.04, 0.14, 0.09]\n", "", 1)
    with pytest.raises(ParseError, match="expected 5x5 matrix") as exc:
        loads_scenario(text)
    assert exc.value.field == "viruses[0].B"
    assert exc.value.line is not None


def test_ragged_row_and_bad_number():
    text = MINIMAL.replace("[0.0, 0.3]", "[0.0]")
    with pytest.raises(ParseError, match="row 1"):
        loads_scenario(text)
    text = MINIMAL.replace("gamma: [0.4, 0.5]", "gamma: [0.4, fast]")
    with pytest.raises(ParseError) as exc:
        loads_scenario(text)
    assert exc.value.field == "viruses[0].gamma[1]"


@pytest.mark.parametrize("edit, field", [
    (("schema_version: 1", "schema_version: 2"), "schema_version"),
    (("m: 1", "m: 2"), "viruses"),
    (("horizon: 10\n", ""), "horizon"),
    (("    x0: [0.1, 0.0]\n", ""), "viruses[0].x0"),
])
def test_structural_errors(edit, field):
    with pytest.raises(ParseError) as exc:
        loads_scenario(MINIMAL.replace(*edit))
    assert exc.value.field == field


def test_not_yaml_mapping():
    with pytest.raises(ParseError):
        loads_scenario("- 1\n- 2\n")
    with pytest.raises(ParseError):
        loads_scenario("n: [1, 2\n")


def test_validation_error_path():
    text = MINIMAL.replace("h: 0.5", "h: 4.0")
    with pytest.raises(ScenarioValidationError) as exc:
        loads_scenario(text)
    assert {v.assumption for v in exc.value.violations} == {3}
    sc = loads_scenario(text, check=False)
    assert sc.config.h == 4.0


def test_europe_rate_assumption_by_step(europe):
    assert validate(europe.config) == []
    bad = validate(europe.config.replace(h=2.0))
    assert bad and all(v.assumption == 3 for v in bad)


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        parse_scenario("/nonexistent/none.scenario")


def load_bundled_text():
    from importlib import resources

    return (resources.files("competing_sir") / "data" / "europe.scenario").read_text()


def test_bundled_name_resolves():
    assert load_bundled().name == "europe"
    assert parse_scenario("europe").config == load_bundled().config
