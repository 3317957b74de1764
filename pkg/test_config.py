"""
Tests for settings loading from the environment and .env files
"""
from app.config import Settings


def test_defaults():
    config = Settings(_env_file=None)
    assert config.NODAL_GRID == 64
    assert config.DIMENSION_LOWER < 1.0 < config.DIMENSION_UPPER


def test_dotenv_file_overrides(tmp_path):
    env_file = tmp_path / ".env"
    env_file.write_text("BELTRAMI_NODAL_GRID=96\nBELTRAMI_LOG_LEVEL=DEBUG\n", encoding="utf-8")
    config = Settings(_env_file=str(env_file))
    assert config.NODAL_GRID == 96
    assert config.LOG_LEVEL == "DEBUG"


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("BELTRAMI_RECURRENCE_HORIZON", "400")
    assert Settings(_env_file=None).RECURRENCE_HORIZON == 400.0
