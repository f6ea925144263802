import numpy as np
import pytest

from phasornet.errors import NumericError
from phasornet.optim import Adam


def test_zero_gradient_leaves_params_unchanged():
    p = np.array([0.3 + 0.4j, -1.0 + 0j], dtype=np.complex64)
    before = p.copy()
    opt = Adam([p])
    opt.step([p], [np.zeros_like(p)])
    np.testing.assert_array_equal(p, before)


def test_first_step_closed_form():
    # constant scalar gradient g: first update is -lr * g / (|g| + eps*sqrt(1-b2))
    g = 0.37
    p = np.array([1.0])
    opt = Adam([p], lr=0.001)
    opt.step([p], [np.array([g])])
    mhat = g  # (1-b1)g / (1-b1)
    vhat = g * g
    want = 1.0 - 0.001 * mhat / (np.sqrt(vhat) + 1e-8)
    assert p[0] == pytest.approx(want, rel=1e-12)
    # magnitude never exceeds lr*(1+delta)
    assert abs(1.0 - p[0]) <= 0.001 * (1 + 1e-6)


def test_component_independence_complex():
    p = np.array([0.5 + 0.5j], dtype=np.complex128)
    opt = Adam([p])
    opt.step([p], [np.array([0.1 + 0.0j])])
    assert p[0].imag == 0.5  # imaginary part untouched
    assert p[0].real != 0.5


def test_re_im_swap_symmetry():
    rng = np.random.default_rng(0)
    g = rng.normal(size=4) + 1j * rng.normal(size=4)
    p1 = np.ones(4, dtype=np.complex128) * (0.2 + 0.7j)
    p2 = (p1.imag + 1j * p1.real).astype(np.complex128)
    o1, o2 = Adam([p1]), Adam([p2])
    for _ in range(5):
        o1.step([p1], [g])
        o2.step([p2], [g.imag + 1j * g.real])
    np.testing.assert_allclose(p2, p1.imag + 1j * p1.real, rtol=1e-12)


def test_deterministic():
    rng = np.random.default_rng(1)
    g = [rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))]
    results = []
    for _ in range(2):
        p = np.full((3, 3), 1 + 1j, dtype=np.complex128)
        opt = Adam([p])
        for _ in range(10):
            opt.step([p], g)
        results.append(p.copy())
    np.testing.assert_array_equal(results[0], results[1])


def test_nonfinite_gradient_aborts_with_location():
    p = np.ones(3, dtype=np.complex64)
    opt = Adam([p])
    g = np.zeros(3, dtype=np.complex64)
    g[1] = np.nan
    with pytest.raises(NumericError, match="parameter 0"):
        opt.step([p], [g])
