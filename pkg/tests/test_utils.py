"""Tests for utility functions."""

import logging
import math

import pytest

from fsi_thinwall.utils import (
    blob_hash,
    ensure_output_dir,
    fit_rate,
    pairwise_orders,
    run_levels,
    setup_logging,
)


def _square(x):
    return x * x


def test_blob_hash_matches_git():
    """Test blob hashes against git hash-object values."""
    assert blob_hash(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"
    assert blob_hash(b"hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"


def test_pairwise_orders():
    """Test observed orders of consecutive levels."""
    orders = pairwise_orders([0.5, 0.25, 0.125], [4.0, 1.0, 0.25])

    assert orders == pytest.approx([2.0, 2.0])
    assert math.isnan(pairwise_orders([0.5, 0.25], [1.0, 0.0])[0])
    assert pairwise_orders([0.5], [1.0]) == []


def test_fit_rate():
    """Test least-squares rates and their standard error."""
    slope, stderr = fit_rate([0.5, 0.25, 0.125], [2.0, 0.25, 0.03125])
    assert slope == pytest.approx(3.0)
    assert stderr == pytest.approx(0.0, abs=1e-12)

    slope, stderr = fit_rate([0.5, 0.25], [1.0, 0.5])
    assert slope == pytest.approx(1.0)
    assert math.isnan(stderr)


@pytest.mark.parametrize(
    "hs, errors", [([0.5], [1.0]), ([0.5, 0.25], [1.0]), ([0.5, 0.25], [1.0, -1.0])]
)
def test_fit_rate_rejects(hs, errors):
    """Test invalid inputs of the rate fit."""
    with pytest.raises(ValueError):
        fit_rate(hs, errors)


def test_ensure_output_dir(tmp_path):
    """Test directory creation and the file-in-the-way error."""
    out = ensure_output_dir(str(tmp_path / "a" / "b"))
    assert out.is_dir()
    assert ensure_output_dir(str(out)) == out

    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(NotADirectoryError):
        ensure_output_dir(str(blocker))


def test_run_levels_keeps_order():
    """Test serial and pooled level maps."""
    assert run_levels(_square, [3, 1, 2]) == [9, 1, 4]
    assert run_levels(_square, [3, 1, 2], jobs=2) == [9, 1, 4]
    assert run_levels(_square, [], jobs=4) == []


def test_setup_logging(tmp_path):
    """Test level selection, the log file and invalid levels."""
    log_file = tmp_path / "run.log"
    setup_logging("debug", str(log_file))

    assert logging.getLogger().level == logging.DEBUG
    logging.getLogger("fsi_thinwall.test").debug("hello")
    assert "hello" in log_file.read_text()
    with pytest.raises(ValueError, match="Unknown log level"):
        setup_logging("LOUD")
    setup_logging("INFO")
