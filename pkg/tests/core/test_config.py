import tomli
import pytest

from dtnlab.config import (
    DEFAULT_CONFIG,
    DtnlabConfig,
    find_config_file,
    load_config,
    save_config,
    thread_count,
)
from dtnlab.errors import ParameterError


class TestOverrides:
    def test_dotted_keys(self):
        """Test overrides addressed by section."""
        config = DEFAULT_CONFIG.with_overrides({"trend.stable_rtol": "0.05", "solver.dense_limit": 10})
        assert config.trend.stable_rtol == 0.05
        assert config.solver.dense_limit == 10
        assert DEFAULT_CONFIG.trend.stable_rtol == 0.10

    def test_bare_keys_are_tolerances(self):
        """Test that bare keys address the tolerances section."""
        config = DEFAULT_CONFIG.with_overrides({"eigen_residual": 1e-6})
        assert config.tolerances.eigen_residual == 1e-6

    def test_integral_values_for_int_settings(self):
        """Test that integral floats and strings are accepted for integer settings."""
        config = DEFAULT_CONFIG.with_overrides({"trend.consecutive": 3.0, "solver.max_iterations": "700"})
        assert config.trend.consecutive == 3
        assert isinstance(config.trend.consecutive, int)
        assert config.solver.max_iterations == 700

    def test_sequence_settings(self):
        """Test lists and comma-separated strings for the time grid."""
        from_list = DEFAULT_CONFIG.with_overrides({"semigroup.times": [0.5, 2]})
        assert from_list.semigroup.times == (0.5, 2.0)
        from_string = DEFAULT_CONFIG.with_overrides({"semigroup.times": "0.1, 1,10"})
        assert from_string.semigroup.times == (0.1, 1.0, 10.0)

    @pytest.mark.parametrize(
        "overrides,message",
        [
            ({"trend.consecutive": 2.5}, "expected an integer"),
            ({"solver.max_iterations": "1e3x"}, "expected a number"),
            ({"solver.dense_limit": True}, "expected a number"),
            ({"semigroup.times": []}, "nonempty list"),
            ({"semigroup.times": 3.0}, "nonempty list"),
            ({"semigroup.times": "0.1,fast"}, "expected a number"),
        ],
    )
    def test_rejected_values(self, overrides, message):
        """Test that values are not truncated or coerced element-unaware."""
        with pytest.raises(ParameterError, match=message):
            DEFAULT_CONFIG.with_overrides(overrides)

    @pytest.mark.parametrize(
        "overrides",
        [{"nope": 1}, {"trend.nope": 1}, {"missing.stable_rtol": 1}, {"solver.dense_limit": "many"}],
    )
    def test_invalid(self, overrides):
        """Test that unknown keys and invalid values are rejected."""
        with pytest.raises(ParameterError):
            DEFAULT_CONFIG.with_overrides(overrides)


class TestLoading:
    def test_defaults_without_file(self, temp_workspace, monkeypatch):
        """Test that the defaults apply when no config file exists."""
        monkeypatch.chdir(temp_workspace)
        assert find_config_file() is None
        assert load_config() == DEFAULT_CONFIG

    def test_dtnlab_toml(self, temp_workspace, monkeypatch):
        """Test loading the [dtnlab] table of dtnlab.toml."""
        (temp_workspace / "dtnlab.toml").write_text("[dtnlab.trend]\nconsecutive = 3\n")
        monkeypatch.chdir(temp_workspace)
        assert load_config().trend.consecutive == 3

    def test_pyproject_tool_table(self, temp_workspace, monkeypatch):
        """Test loading the [tool.dtnlab] table of pyproject.toml."""
        (temp_workspace / "pyproject.toml").write_text(
            '[project]\nname = "x"\n\n[tool.dtnlab.solver]\ndense_limit = 50\n'
        )
        monkeypatch.chdir(temp_workspace)
        assert find_config_file() == temp_workspace / "pyproject.toml"
        assert load_config().solver.dense_limit == 50

    def test_pyproject_without_table(self, temp_workspace, monkeypatch):
        """Test that a pyproject.toml without a dtnlab table is skipped."""
        (temp_workspace / "pyproject.toml").write_text('[project]\nname = "x"\n')
        monkeypatch.chdir(temp_workspace)
        assert find_config_file() is None

    def test_missing_explicit_file(self, temp_workspace):
        """Test that an explicit missing file is an error."""
        with pytest.raises(ParameterError):
            load_config(temp_workspace / "absent.toml")

    def test_invalid_toml(self, temp_workspace):
        """Test that malformed TOML is reported."""
        path = temp_workspace / "dtnlab.toml"
        path.write_text("[dtnlab\n")
        with pytest.raises(ParameterError, match="invalid TOML"):
            load_config(path)

    def test_save_and_reload(self, temp_workspace):
        """Test that a saved config loads back unchanged."""
        config = DEFAULT_CONFIG.with_overrides({"trend.diverging_factor": 2.0})
        path = temp_workspace / "out" / "dtnlab.toml"
        save_config(config, path)
        assert tomli.loads(path.read_text())["dtnlab"]["trend"]["diverging_factor"] == 2.0
        assert load_config(path) == config


class TestThreads:
    def test_default(self, monkeypatch):
        monkeypatch.delenv("DTNLAB_THREADS", raising=False)
        assert thread_count() == 1

    def test_from_environment(self, monkeypatch):
        monkeypatch.setenv("DTNLAB_THREADS", "4")
        assert thread_count() == 4

    def test_invalid_value(self, monkeypatch):
        """Test that an invalid value falls back to one thread."""
        monkeypatch.setenv("DTNLAB_THREADS", "lots")
        assert thread_count() == 1


def test_config_is_frozen():
    """Test that configurations are immutable."""
    with pytest.raises(AttributeError):
        DtnlabConfig().trend.stable_rtol = 1.0
