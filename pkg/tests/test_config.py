"""Tests for configuration management."""

import json

import pytest

from gbede import config


class TestConfig:
    """Tests for stored settings."""

    def test_defaults_without_file(self):
        """Test the defaults apply when nothing is stored."""
        assert config.load_config() == {}
        assert config.get_tolerance() == 1e-10
        assert config.get_replications() == 2000
        assert config.get_seed() == 20240607
        assert config.get_workers() == 1
        assert config.get_grid_points() == 9

    def test_set_and_get(self, isolated_config):
        """Test a stored value overrides the default."""
        config.set_setting("replications", "500")
        config.set_setting("tolerance", 1e-8)

        assert config.get_replications() == 500
        assert config.get_tolerance() == 1e-8
        assert json.loads(isolated_config.read_text())["replications"] == 500

    @pytest.mark.parametrize(
        ("key", "value"),
        [
            ("tolerance", "2"),
            ("tolerance", "abc"),
            ("seed", "-1"),
            ("grid_points", "1"),
            ("workers", "0"),
        ],
    )
    def test_invalid_values(self, key, value):
        """Test out-of-range and unparsable values."""
        with pytest.raises(ValueError, match="Invalid"):
            config.set_setting(key, value)

    def test_unknown_key(self):
        """Test an unknown setting name."""
        with pytest.raises(ValueError, match="Unknown setting"):
            config.set_setting("colour", "blue")

    def test_corrupt_file(self, isolated_config):
        """Test an unreadable file falls back to the defaults."""
        isolated_config.parent.mkdir(parents=True)
        isolated_config.write_text("{not json")

        assert config.load_config() == {}
        assert config.get_seed() == 20240607

    def test_non_dict_file(self, isolated_config):
        """Test a JSON list is ignored."""
        isolated_config.parent.mkdir(parents=True)
        isolated_config.write_text("[1, 2]")

        assert config.load_config() == {}

    def test_reset_one(self):
        """Test resetting one key keeps the others."""
        config.set_setting("seed", "7")
        config.set_setting("workers", "4")
        config.reset_setting("seed")

        assert config.get_seed() == 20240607
        assert config.get_workers() == 4

    def test_reset_all(self):
        """Test resetting everything."""
        config.set_setting("workers", "4")
        config.reset_setting()

        assert config.load_config() == {}
