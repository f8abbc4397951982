import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vstates.quadrature import (
    PeriodicGrid,
    QuadratureError,
    adaptive_oracle,
    convolve_singular,
    log_fourier_weights,
    mean_integral,
    product_quadrature,
    singular_fourier_weights,
)
from vstates.specialfn import gamma_fn


def closed_form_weight(alpha: float, m: int) -> float:
    # mean of e^{imy} (4 sin^2(y/2))^(-alpha/2), alpha != 1
    return (-1) ** m * gamma_fn(1 - alpha) / (gamma_fn(1 - alpha / 2 + m) * gamma_fn(1 - alpha / 2 - m))


def test_grid_validation():
    g = PeriodicGrid(8)
    assert np.allclose(np.diff(g.nodes), 2 * np.pi / 8)
    for bad in (7, 2, 0):
        with pytest.raises(ValueError):
            PeriodicGrid(bad)


def test_mean_integral_examples():
    x = PeriodicGrid(64).nodes
    assert mean_integral(np.full(64, 2.5)) == 2.5
    assert abs(mean_integral(np.cos(3 * x))) < 1e-14
    y = PeriodicGrid(256).nodes
    assert mean_integral(1.0 / (1.0 - np.cos(y) + 0.25)) == pytest.approx(4.0 / 3.0, abs=1e-12)


@settings(max_examples=30)
@given(st.lists(st.floats(-1, 1), min_size=1, max_size=15), st.floats(-1, 1))
def test_mean_integral_exact_on_trig_polynomials(coef, c0):
    x = PeriodicGrid(32).nodes
    vals = c0 + sum(c * np.cos((k + 1) * x + 0.3 * k) for k, c in enumerate(coef))
    assert mean_integral(vals) == pytest.approx(c0, abs=1e-14)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 1.5, 1.9])
def test_weights_match_closed_form(alpha):
    w = singular_fourier_weights(alpha, 64).weights
    for m in range(0, 33):
        assert w[m] == pytest.approx(closed_form_weight(alpha, m), abs=1e-11)


def test_weights_at_alpha_one():
    # w_m - w_0 = -(2/pi) sum_{l<=m} 1/(2l - 1)
    w = singular_fourier_weights(1.0, 64).weights
    for m in (1, 5, 20):
        ref = -(2 / math.pi) * sum(1 / (2 * l - 1) for l in range(1, m + 1))
        assert w[m] - w[0] == pytest.approx(ref, abs=1e-11)


def test_weights_symmetric_and_decay():
    w = singular_fourier_weights(0.5, 256).weights
    assert np.array_equal(w[1:], w[1:][::-1])
    ratio = w[64] / w[32]
    assert ratio == pytest.approx(2 ** (0.5 - 1), rel=0.02)


def test_weight_m0_brute_force():
    # graded midpoint rule y = pi u^4 on each half, 10^6 points
    n = 1_000_000
    u = (np.arange(n) + 0.5) / n
    y = np.pi * u ** 4
    vals = (2 * np.sin(y / 2)) ** (-0.5) * 4 * np.pi * u ** 3
    brute = float(np.sum(vals) / n) / np.pi
    assert singular_fourier_weights(0.5, 64).weights[0] == pytest.approx(brute, abs=1e-9)


def test_weights_disk_cache(tmp_path, monkeypatch):
    from vstates import quadrature

    monkeypatch.setenv("VSTATES_CACHE_DIR", str(tmp_path))
    monkeypatch.setattr(quadrature, "_CACHE", {})
    a = singular_fourier_weights(0.7, 32).weights
    assert list(tmp_path.glob("weights_*.npy"))
    monkeypatch.setattr(quadrature, "_CACHE", {})
    b = singular_fourier_weights(0.7, 32).weights
    assert np.array_equal(a, b)


def test_weights_domain():
    with pytest.raises(ValueError):
        singular_fourier_weights(0.0, 64)
    with pytest.raises(ValueError):
        singular_fourier_weights(2.0, 64)


def test_log_weights():
    w = log_fourier_weights(16).weights
    assert w[0] == 0.0
    assert w[3] == pytest.approx(1 / 3)
    assert w[13] == pytest.approx(1 / 3)


def test_convolve_examples():
    sw = singular_fourier_weights(0.5, 64)
    x = PeriodicGrid(64).nodes
    assert np.allclose(convolve_singular(sw, np.ones(64)), sw.weights[0], atol=1e-14)
    assert np.allclose(convolve_singular(sw, np.cos(2 * x)), sw.weights[2] * np.cos(2 * x), atol=1e-10)
    with pytest.raises(ValueError):
        convolve_singular(sw, np.ones(10))


@pytest.mark.parametrize("alpha", [0.5, 1.5])
def test_convolve_against_oracle(alpha):
    M = 64
    sw = singular_fourier_weights(alpha, M)
    x = PeriodicGrid(M).nodes
    g = lambda y: math.exp(math.cos(y)) * (1 + 0.3 * math.sin(2 * y))  # noqa: E731
    conv = convolve_singular(sw, np.array([g(t) for t in x]))
    k = 5
    x0 = x[k]
    # integrate in the offset t = x0 - y so the singular point sits at 0 exactly
    if alpha < 1:
        ref = adaptive_oracle(lambda t: (4 * math.sin(t / 2) ** 2) ** (-alpha / 2) * g(x0 - t),
                              singular_at=0.0, tol=1e-11)
    else:
        # symmetrized cofactor minus its diagonal value vanishes like t^2; the
        # subtraction needs extended precision, so use mpmath's tanh-sinh rule
        mp.mp.dps = 30

        def gm(y):
            return mp.exp(mp.cos(y)) * (1 + mp.mpf("0.3") * mp.sin(2 * y))

        x0m = 2 * mp.pi * k / M
        inner = mp.quad(lambda t: (2 * mp.sin(t / 2)) ** (-alpha)
                        * ((gm(x0m - t) + gm(x0m + t)) / 2 - gm(x0m)), [0, mp.pi])
        ref = float(inner / mp.pi) + sw.weights[0] * g(x0)
    # band-limit error of g at M = 64 is far below the tolerance
    assert conv[k] == pytest.approx(ref, abs=1e-8)


@settings(max_examples=10, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4), st.sampled_from([0.5, 1.0, 1.5]))
def test_convolve_random_bandlimited(coef, alpha):
    M = 32
    sw = singular_fourier_weights(alpha, M)
    x = PeriodicGrid(M).nodes
    g = sum(c * np.cos((k + 1) * x) for k, c in enumerate(coef))
    expect = sum(c * sw.weights[k + 1] * np.cos((k + 1) * x) for k, c in enumerate(coef))
    assert np.allclose(convolve_singular(sw, g), expect, atol=1e-12)


def test_product_quadrature_matches_convolution():
    sw = singular_fourier_weights(0.8, 32)
    x = PeriodicGrid(32).nodes
    g = np.exp(np.sin(x))
    cof = np.broadcast_to(g[None, :], (32, 32))
    assert np.allclose(product_quadrature(sw, cof), convolve_singular(sw, g), atol=1e-13)


def test_oracle_examples():
    assert adaptive_oracle(lambda y: 1.0) == pytest.approx(1.0, abs=1e-14)
    assert adaptive_oracle(lambda y: math.log(1 / math.sin(y / 2) ** 2), singular_at=0.0,
                           tol=1e-12) == pytest.approx(2 * math.log(2), abs=1e-10)
    assert adaptive_oracle(lambda y: math.cos(3 * y) * math.log(1 / math.sin(y / 2) ** 2),
                           singular_at=0.0, tol=1e-12) == pytest.approx(1 / 3, abs=1e-10)


def test_oracle_budget():
    with pytest.raises(QuadratureError):
        adaptive_oracle(lambda y: math.sin(1 / (y + 1e-9)), tol=1e-15, max_intervals=10)
