"""Tests for the __main__ module."""

import pytest
from unittest.mock import patch

from hopfduet.__main__ import main


class TestMainModule:
    """Test the __main__ entry point."""

    @patch("hopfduet.__main__.run")
    def test_main_normal_execution(self, mock_run):
        """Exit code of the command becomes the process exit code."""
        mock_run.return_value = 0

        with pytest.raises(SystemExit) as exc_info:
            main()

        assert exc_info.value.code == 0
        mock_run.assert_called_once()

    @pytest.mark.parametrize("code", [1, 2, 3])
    @patch("hopfduet.__main__.run")
    def test_main_failure_codes(self, mock_run, code):
        """Non-zero codes from the command are propagated."""
        mock_run.return_value = code

        with pytest.raises(SystemExit) as exc_info:
            main()

        assert exc_info.value.code == code

    @patch("hopfduet.__main__.run")
    def test_main_keyboard_interrupt(self, mock_run):
        """An interrupt outside the command loop exits with 130."""
        mock_run.side_effect = KeyboardInterrupt()

        with pytest.raises(SystemExit) as exc_info:
            main()

        assert exc_info.value.code == 130

    def test_main_module_import(self):
        """The module exposes main and the command runner."""
        import hopfduet.__main__

        assert hasattr(hopfduet.__main__, "main")
        assert hasattr(hopfduet.__main__, "run")
