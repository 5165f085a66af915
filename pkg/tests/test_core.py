import pytest

from conjulab.core.config import Settings, get_settings, validate_settings
from conjulab.core.exceptions import (
    AdmissibilityError, BudgetInfeasibleError, ConfigurationError, ConjulabError,
    IncompatibleVectorsError, NotHyperbolicError, NotInvertibleError
)


class TestSettings:

    def test_defaults_validate(self):
        assert validate_settings(Settings()) is True

    def test_cached_instance(self):
        assert get_settings() is get_settings()

    def test_every_problem_is_listed(self):
        bad = Settings(MAX_K=0, NUMERIC_SLACK=-1.0, T_GRID_FRACTIONS=[0.5, 1.5], MAX_ORBIT_LOG10=0.0)
        with pytest.raises(ConfigurationError) as info:
            validate_settings(bad)
        message = str(info.value)
        assert "MAX_K" in message
        assert "NUMERIC_SLACK" in message
        assert "T_GRID_FRACTIONS" in message
        assert "MAX_ORBIT_LOG10" in message

    def test_log_level_from_environment(self, monkeypatch):
        monkeypatch.setenv("CONJULAB_LOG", "DEBUG")
        assert Settings().LOG_LEVEL == "DEBUG"


class TestExceptions:

    @pytest.mark.parametrize("error", [
        ConfigurationError, IncompatibleVectorsError, NotHyperbolicError, NotInvertibleError, AdmissibilityError
    ])
    def test_configuration_family_exits_with_two(self, error):
        assert issubclass(error, ConjulabError)
        assert error("x").exit_code == 2

    def test_budget_exits_with_three(self):
        assert BudgetInfeasibleError("x").exit_code == 3
