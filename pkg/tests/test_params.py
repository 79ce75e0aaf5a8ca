import pytest

from utils.errors import ConfigParseError, InterconnectError, ValidationError
from utils.params import (
    CONFIG_KEYS,
    ErrorRates,
    OperationTimes,
    ThresholdPolicy,
    dump_config,
    load_config,
    load_config_file,
    noiseless,
    with_uniform_error_rate,
)


def test_defaults_match_ion_trap_table(defaults):
    assert defaults.times.t_tprt == 122.0
    assert defaults.times.t_mv == 0.2
    assert defaults.times.t_cb == 0.002
    assert defaults.errors.p_mv == 1e-6
    assert defaults.threshold.f_min == pytest.approx(1 - 7.5e-5)
    assert defaults.f_zero == 1.0


def test_dump_then_load_is_identity(defaults):
    custom = with_uniform_error_rate(defaults, 3.3e-6)
    assert load_config(dump_config(custom)) == custom
    assert load_config(dump_config(defaults)) == defaults


def test_omitted_keys_keep_defaults(defaults):
    params = load_config("# faster movement\nt_mv = 0.1\n\np_2q = 1e-6  # noisier gates\n")
    assert params.times.t_mv == 0.1
    assert params.errors.p_2q == 1e-6
    assert params.times.t_tprt == defaults.times.t_tprt
    assert params.threshold == defaults.threshold


def test_load_config_file(tmp_path):
    path = tmp_path / "params.txt"
    path.write_text("f_min = 0.999\n")
    assert load_config_file(str(path)).threshold.f_min == 0.999


@pytest.mark.parametrize("text, line_number", [
    ("t_mv = 0.1\nbogus = 3\n", 2),
    ("t_mv 0.1\n", 1),
    ("t_mv = fast\n", 1),
    ("t_mv = 0.1\n\nt_mv = 0.2\n", 3),
])
def test_malformed_documents_report_the_line(text, line_number):
    with pytest.raises(ConfigParseError) as exc:
        load_config(text)
    assert exc.value.line_number == line_number


@pytest.mark.parametrize("text", [
    "p_2q = 1.5", "p_mv = 1.0", "p_ms = -0.1", "t_gen = 0", "t_cb = -1", "f_min = 1.0",
])
def test_out_of_range_values_rejected(text):
    with pytest.raises(ValidationError):
        load_config(text)


def test_errors_are_value_errors():
    with pytest.raises(ValueError):
        ErrorRates(p_1q=2.0)
    assert issubclass(ConfigParseError, InterconnectError)


def test_types_validate_directly():
    with pytest.raises(ValidationError):
        OperationTimes(t_mv=float("nan"))
    with pytest.raises(ValidationError):
        ThresholdPolicy(0.0)


def test_uniform_and_noiseless_helpers(defaults):
    rates = with_uniform_error_rate(defaults, 1e-5).errors
    assert rates == ErrorRates(1e-5, 1e-5, 1e-5, 1e-5)
    assert noiseless().errors == ErrorRates(0.0, 0.0, 0.0, 0.0)
    assert "f_zero" in CONFIG_KEYS and "t_prfy" in CONFIG_KEYS
