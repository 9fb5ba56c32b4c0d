import numpy as np
import pytest
from scipy.integrate import solve_ivp

from resetfreq.model import ResetElement, SingularResolventError, base_response, clegg, fore
from resetfreq.openloop import hosidf, open_loop_spectrum, theta


@pytest.mark.parametrize("w", [0.1, 1.0, 10.0, 100.0])
def test_clegg_theta_and_describing_function(w):
    ci = clegg()
    assert theta(ci, w)[0, 0] == pytest.approx(4 / np.pi, rel=1e-13)
    assert hosidf(ci, w, 1) == pytest.approx((1 + 4j / np.pi) / (1j * w), rel=1e-13)


def test_identity_reset_is_linear():
    r = fore(5.0, 1.0)
    sp = open_loop_spectrum(r, 2.0, 9)
    np.testing.assert_array_equal(sp.theta, 0.0)
    assert sp.harmonic(1) == pytest.approx(base_response(r.base, 2.0), rel=1e-14)
    np.testing.assert_array_equal(sp.H[1:], 0.0)


def test_even_harmonics_vanish():
    sp = open_loop_spectrum(fore(3.0, 0.2), 1.7, 12)
    assert np.all(sp.H[1::2] == 0)
    assert hosidf(clegg(), 1.0, 2) == 0


def test_partial_reset_approaches_linear():
    h3 = [abs(hosidf(fore(1.0, g), 1.0, 3)) for g in (0.9, 0.99, 0.999)]
    assert h3[0] > h3[1] > h3[2]
    assert abs(hosidf(fore(1.0, 0.999), 1.0, 1) - base_response(fore(1.0, 0).base, 1.0)) < 1e-2


@pytest.mark.parametrize("reset", [clegg(), fore(1.0, 0.0), fore(111 * np.pi, 0.3)])
def test_higher_harmonics_decay(reset):
    for w in (1.0, 30.0, 300.0):
        assert abs(hosidf(reset, w, 9)) < abs(hosidf(reset, w, 3))


def _simulated_harmonics(reset, w, harmonics, periods=30):
    """Integrate the element with resets imposed at k pi / w; quadrature on the last period."""
    A, B, C, D = reset.A_r, reset.B_r[:, 0], reset.C_r[0], reset.D_r
    x = np.zeros(reset.n_r)
    half = np.pi / w
    nodes, wts = np.polynomial.legendre.leggauss(40)
    out = np.zeros(len(harmonics), dtype=complex)
    for k in range(2 * periods):
        a, b = k * half, (k + 1) * half
        sol = solve_ivp(lambda t, z: A @ z + B * np.sin(w * t), (a, b), x, method="DOP853",
                        rtol=1e-12, atol=1e-14, dense_output=True)
        if k >= 2 * periods - 2:
            t = 0.5 * half * nodes + 0.5 * (a + b)
            y = C @ sol.sol(t) + D * np.sin(w * t)
            for i, n in enumerate(harmonics):
                out[i] += 0.5 * half * np.sum(wts * y * np.exp(-1j * n * w * t))
        x = reset.A_rho @ sol.y[:, -1]
    return out * 1j * w / np.pi


@pytest.mark.parametrize("reset,w", [(fore(1.0, 0.0), 1.0), (fore(2.0, 0.5), 0.7),
                                      (ResetElement([[-1, 0.5], [0, -2]], [1, 1], [1, -0.3], 0.1,
                                                    np.diag([0.0, 0.4])), 1.3)])
def test_hosidf_matches_simulated_element(reset, w):
    ref = _simulated_harmonics(reset, w, (1, 3, 5))
    got = np.array([hosidf(reset, w, n) for n in (1, 3, 5)])
    np.testing.assert_allclose(got, ref, rtol=1e-6)


def test_bad_arguments():
    with pytest.raises(ValueError):
        theta(clegg(), 0.0)
    with pytest.raises(ValueError):
        hosidf(clegg(), 1.0, 0)
    # undamped oscillator base with w on its resonance: w^2 I + A_r^2 is singular
    osc = ResetElement([[0, 1], [-4, 0]], [0, 1], [1, 0], 0, np.zeros((2, 2)))
    with pytest.raises(SingularResolventError):
        theta(osc, 2.0)
