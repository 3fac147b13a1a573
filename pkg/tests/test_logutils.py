import logging
import os
import time

import psutil
import pytest

from slsito import logutils


@pytest.mark.parametrize(
    "size, expected",
    [
        (10, "10.00 B"),
        (1024, "1.00 KiB"),
        (1536, "1.50 KiB"),
        (3 * 1024**3, "3.00 GiB"),
        (2 * 1024**6, "2048.00 PiB"),
    ],
)
def test_human_readable_size(size, expected):
    assert logutils.human_readable_size(size) == expected


def test_human_readable_size_sign():
    assert logutils.human_readable_size(-2048, indicate_sign=True) == "-2.00 KiB"
    assert logutils.human_readable_size(2048, decimal_places=0, indicate_sign=True) == "+2 KiB"


def test_memory_usage():
    pr = psutil.Process(os.getpid())
    assert logutils.memory_usage(pr) > 0
    assert logutils.log_memory(pr, "test") > 0


def test_log_progress(caplog):
    pr = psutil.Process(os.getpid())
    start = time.time()
    with caplog.at_level(logging.INFO, logger="slsito.logutils"):
        t, used = logutils.log_progress(start, start, 5, 10, pr, 0)
    assert t >= start
    assert used > 0
    assert "[5/10 paths (50.0%)]" in caplog.text


def test_log_progress_quiet(caplog):
    pr = psutil.Process(os.getpid())
    with caplog.at_level(logging.WARNING, logger="slsito.logutils"):
        assert logutils.log_progress(0.0, 1.0, 5, 10, pr, 123) == (1.0, 123)
    assert caplog.text == ""
