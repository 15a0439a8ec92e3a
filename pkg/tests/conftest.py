import sys

import numpy as np
import pytest

from isodub.audio import AudioBuffer, ms_to_samples, tone

SR = 16000


def layout_signal(layout, sr=SR, freq=440.0, amplitude=0.8):
    """Concatenate ("t", ms) tone and ("z", ms) zero segments."""
    parts = []
    for kind, ms in layout:
        if kind == "t":
            parts.append(tone(ms, freq, amplitude, sr))
        else:
            parts.append(np.zeros(ms_to_samples(ms, sr)))
    return AudioBuffer(sr, np.concatenate(parts) if parts else np.zeros(0))


def zero_spans(layout):
    """Ground-truth [start, end) ms of every zero segment."""
    spans, t = [], 0
    for kind, ms in layout:
        if kind == "z":
            spans.append((t, t + ms))
        t += ms
    return spans


@pytest.fixture
def signal():
    return layout_signal


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.summary_lines():
        terminalreporter.write_line(line)
