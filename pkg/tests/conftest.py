import numpy as np
import pytest

from coreprune.activations import Activation
from coreprune.network import ConvLayer, DenseLayer, Flatten, Network

RELU = Activation("relu")


def unit_scales(rng, n, spread):
    """Log-normal per-unit scale factors; spread=0 gives plain iid init."""
    return np.exp(spread * rng.normal(size=n))


def random_dense_net(rng, widths, activation=RELU, bias_scale=0.1, spread=0.0):
    layers = []
    for a, b in zip(widths, widths[1:]):
        W = rng.normal(size=(b, a)) / np.sqrt(a) * unit_scales(rng, b, spread)[:, None]
        layers.append(DenseLayer(W, bias_scale * rng.normal(size=b), activation))
    return Network(layers, (widths[0],))


def random_conv_net(rng, channels, size, k=3, activation=RELU, bias_scale=0.1, dense_out=None,
                    spread=0.0):
    layers = []
    for a, b in zip(channels, channels[1:]):
        K = rng.normal(size=(b, a, k, k)) / np.sqrt(a * k * k)
        K *= unit_scales(rng, b, spread)[:, None, None, None]
        layers.append(ConvLayer(K, bias_scale * rng.normal(size=b), activation))
    if dense_out:
        side = size - (len(channels) - 1) * (k - 1)
        flat = channels[-1] * side * side
        layers += [Flatten(), DenseLayer(rng.normal(size=(dense_out, flat)) / np.sqrt(flat),
                                         np.zeros(dense_out), activation)]
    return Network(layers, (channels[0], size, size))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance report ---------------------------------------------------
# Tests marked ``criterion(number, title)`` get one PASS/FAIL line each in
# the terminal summary, plus any ``details`` they record.

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    number, title = mark.args
    entry = _criteria.setdefault(number, {"title": title, "ok": True, "secs": 0.0, "details": []})
    entry["secs"] += rep.duration
    if rep.failed:
        entry["ok"] = False
    entry["details"] += [v for k, v in rep.user_properties if k == "detail"]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_criteria):
        e = _criteria[number]
        tr.write_line(f"criterion {number}: {'PASS' if e['ok'] else 'FAIL'}  "
                      f"{e['title']}  ({e['secs']:.1f}s)")
        for line in e["details"]:
            tr.write_line(f"    {line}")
