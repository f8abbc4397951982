import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vstates.contour import FourierPair, SineResidual
from vstates.spectral import (
    LinkViolation,
    SingularBlockError,
    block_precondition,
    det_polynomial,
    det_profile,
    invertible_b_scan,
    linearized_apply,
    m_block,
    omega_star,
    region_conditions,
    region_table,
    speed_star,
    w_star,
)
from vstates.specialfn import c_alpha, lambda_coeff


def brute_omega(N, d):
    # unit point vortices at d e^{2 pi i n/N} about the origin, alpha = 0
    total = 0.0
    for n in range(1, N):
        th = 2 * math.pi * n / N
        total += (1 - math.cos(th)) / (2 * math.pi * d * d * ((1 - math.cos(th)) ** 2 + math.sin(th) ** 2))
    return total


def test_omega_star_examples():
    assert omega_star(0.0, 2, 1.0) == pytest.approx(1 / (4 * math.pi), rel=1e-14)
    for N in range(3, 7):
        assert omega_star(0.0, N, 1.0) == pytest.approx((N - 1) / (4 * math.pi), rel=1e-13)
    a = 0.5
    assert omega_star(a, 2, 1.0) == pytest.approx(a * c_alpha(a) * 2 / (2 * math.pi * 4 ** (1 + a / 2)),
                                                  rel=1e-14)


def test_w_star_examples():
    assert w_star(0.0, 1.0) == pytest.approx(1 / (4 * math.pi), rel=1e-15)
    assert w_star(0.0, 2.0) == pytest.approx(1 / (8 * math.pi), rel=1e-15)
    assert w_star(1.0, 1.0) == pytest.approx(1 / (8 * math.pi), rel=1e-14)
    assert speed_star(0.0, "travelling", 2, 1.0) == w_star(0.0, 1.0)


def test_m_block_examples():
    m1 = m_block(0.0, 0.3, 0.6, 1)
    l = 0.7 * 0.36
    assert np.allclose(m1.entries, [[-l, l], [-1, 1]], atol=1e-15)
    assert m1.det == 0.0
    m2 = m_block(0.0, 0.5, 0.5, 2)
    assert np.allclose(m2.entries, [[0.75, 0.0625], [-0.5, 1.5]], atol=1e-15)
    assert m2.det == pytest.approx(1.15625, abs=1e-15)
    assert m2.scale == 0.5
    a, b = 0.5, 0.4
    blk = m_block(a, 0.2, b, 1)
    lam = lambda_coeff(a, b, 1)
    assert np.allclose(blk.entries, lam * np.array([[-0.8 * b * b, 0.8 * b * b], [-1, 1]]), atol=1e-15)
    assert abs(blk.det) < 1e-16
    assert m_block(a, 0.2, b, 3).scale == 3.0
    with pytest.raises(ValueError):
        m_block(0.0, 0.5, 1.2, 2)


@settings(max_examples=50)
@given(st.floats(-4, 4), st.floats(0.02, 0.98), st.integers(2, 40))
def test_det_polynomial_matches_block(gamma, b, j):
    blk = m_block(0.0, gamma, b, j)
    assert blk.det == pytest.approx(det_polynomial(gamma, b, j), abs=1e-13 * max(1.0, j * j * (1 + abs(gamma)) ** 2))


def test_det_profile_examples():
    assert np.all(det_profile(0.0, 0.5, 0.5, 8) > 0)
    assert np.all(det_profile(0.0, 2.0, 0.9, 8) > 0)
    assert np.all(det_profile(0.5, 0.0, 0.01, 8) < 0)
    with pytest.raises(ValueError):
        det_profile(0.0, 0.5, 0.5, 1)


def test_case_one_lower_bound():
    # for gamma in (0,1), b < sqrt(2)/2: det(M_j) >= D(2) > 0 and increasing in j
    for gamma in (0.1, 0.5, 0.9):
        for b in (0.2, 0.5, 0.7):
            dets = det_profile(0.0, gamma, b, 64)
            assert dets[0] > 0 and np.all(dets >= dets[0])


def test_region_scans():
    grid = np.round(np.arange(0.001, 0.9995, 0.001), 6)
    iv = invertible_b_scan(0.0, 0.5, 64, grid)
    assert iv[0][0] == 0.001 and iv[0][1] >= 0.70
    assert invertible_b_scan(0.0, 2.0, 64, grid) == [(0.001, 0.999)]
    table = region_table(0.0, 0.0, 64, grid)
    assert not table.admissible.any() and "gamma = 0" in table.note
    iv = invertible_b_scan(0.5, 0.0, 64, np.arange(0.001, 0.2, 0.001))
    assert iv and iv[0][0] == pytest.approx(0.001)
    with pytest.raises(ValueError):
        region_table(0.0, 0.5, 8, np.array([0.1, 0.2]))


def test_region_conditions_hold_for_small_b():
    assert region_conditions(0.5, 0.0, 0.005)
    assert not region_conditions(0.5, 0.0, 0.5)


def test_negative_gamma_is_det_only():
    grid = np.arange(0.01, 0.9, 0.001)
    t = region_table(0.0, -0.5, 32, grid)
    assert np.array_equal(t.admissible, t.nonsingular)


def random_pair(rng, J, link):
    a = rng.normal(size=J)
    b = rng.normal(size=J)
    a[0] = link * b[0]
    return FourierPair(a, b)


@pytest.mark.parametrize("alpha,gamma,b", [(0.0, 0.5, 0.5), (0.0, 2.0, 0.8), (0.5, 0.0, 0.3),
                                           (1.0, 0.5, 0.4), (1.5, 0.0, 0.2)])
def test_precondition_inverts_apply(alpha, gamma, b):
    rng = np.random.default_rng(7)
    link = (1 - gamma) * b * b
    h = random_pair(rng, 12, link)
    back = block_precondition(alpha, gamma, b, linearized_apply(alpha, gamma, b, h))
    assert np.allclose(back.a, h.a, atol=1e-12) and np.allclose(back.b, h.b, atol=1e-12)
    c = rng.normal(size=12)
    d = rng.normal(size=12)
    c[0] = link * d[0]
    r = SineResidual(c, d)
    again = linearized_apply(alpha, gamma, b, block_precondition(alpha, gamma, b, r))
    assert np.allclose(again.c, r.c, atol=1e-12) and np.allclose(again.d, r.d, atol=1e-12)
    assert block_precondition(alpha, gamma, b, r).link_defect(link) == pytest.approx(0.0, abs=1e-15)


def test_linearized_apply_examples():
    h = FourierPair([0.0, 1.0], [0.0, 0.0])
    r = linearized_apply(0.0, 0.5, 0.5, h)
    assert r.c[1] == pytest.approx(0.5 * 0.75) and r.d[1] == pytest.approx(0.5 * -0.5)
    z = linearized_apply(0.5, 0.0, 0.3, FourierPair.zeros(4))
    assert not z.c.any() and not z.d.any()


def test_first_mode_inverse_formula():
    gamma, b = 0.5, 0.5
    link = (1 - gamma) * b * b
    r = SineResidual([link * 0.3, 0.0], [0.3, 0.0])
    f = block_precondition(0.0, gamma, b, r)
    k = 0.3 / ((1 - link) * 0.5)
    assert f.b[0] == pytest.approx(k) and f.a[0] == pytest.approx(link * k)


def test_precondition_errors():
    with pytest.raises(LinkViolation):
        block_precondition(0.0, 0.5, 0.5, SineResidual([1e-3, 0.0], [0.0, 0.0]))
    # the alpha = 0 block j = 2 changes sign in b at gamma = -2; bisect to its zero
    gamma = -2.0
    grid = np.linspace(0.05, 0.95, 2000)
    dets = np.array([m_block(0.0, gamma, b, 2).det for b in grid])
    k = int(np.argmax(np.sign(dets[:-1]) != np.sign(dets[1:])))
    lo, hi = grid[k], grid[k + 1]
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if np.sign(m_block(0.0, gamma, mid, 2).det) == np.sign(m_block(0.0, gamma, lo, 2).det):
            lo = mid
        else:
            hi = mid
    link = (1 - gamma) * lo * lo
    with pytest.raises(SingularBlockError, match="j = 2"):
        block_precondition(0.0, gamma, lo, SineResidual([link, 1.0], [1.0, 1.0]))
