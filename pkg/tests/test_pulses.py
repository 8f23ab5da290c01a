import numpy as np
import pytest

from ddfmcw.pulses import (
    PulseBank,
    cp_phase,
    dirichlet,
    dirichlet_derivative_wrt_kp,
    rc,
    rc_derivative_wrt_lp,
    srrc,
)

BETA = 0.15


def test_srrc_unit_energy():
    # Wide bandlimited Riemann sum: step aliasing is zero, only tail truncation remains.
    O, L = 64, 600
    u = np.arange(-L * O, L * O + 1) / O
    a = srrc(u, BETA)
    assert np.sum(a**2) / O == pytest.approx(1.0, abs=1e-9)


def test_srrc_even_symmetry():
    u = np.linspace(0.0, 30.0, 4001)
    assert np.array_equal(srrc(u, BETA), srrc(-u, BETA))


def test_srrc_self_convolution_reproduces_rc():
    # Numerical convolution oracle on a fine grid; the span is wide enough
    # that tail truncation sits below the tolerances.
    from scipy.signal import fftconvolve

    O, L = 32, 600
    u = np.arange(-L * O, L * O + 1) / O
    a = srrc(u, BETA)
    conv = fftconvolve(a, a) / O
    center = len(conv) // 2
    lags = np.arange(-8 * O, 8 * O + 1)
    assert np.max(np.abs(conv[center + lags] - rc(lags / O, BETA))) <= 1e-8
    # Integer multiples of the bin spacing specifically hit the Nyquist zeros.
    ints = np.arange(-8, 9) * O
    assert np.max(np.abs(conv[center + ints] - rc(ints / O, BETA))) <= 1e-9


def test_srrc_continuous_at_singular_points():
    t0 = 1.0 / (4 * BETA)
    for point in (0.0, t0, -t0):
        near = srrc(point + np.array([-1e-9, 1e-9]), BETA)
        assert np.max(np.abs(near - srrc(point, BETA))) < 1e-7


def test_rc_peak_and_nyquist_zeros():
    assert rc(0.0, BETA) == pytest.approx(1.0)
    k = np.arange(1, 40, dtype=float)
    assert np.max(np.abs(rc(k, BETA))) <= 1e-12
    assert np.max(np.abs(rc(-k, BETA))) <= 1e-12


def test_rc_removable_singularity_value():
    t0 = 1.0 / (2 * BETA)
    assert rc(t0, BETA) == pytest.approx((np.pi / 4) * np.sinc(t0), abs=1e-12)
    assert rc(-t0, BETA) == pytest.approx((np.pi / 4) * np.sinc(t0), abs=1e-12)


def test_dirichlet_basic_values():
    assert dirichlet(0.0, 8) == pytest.approx(1.0)
    assert abs(dirichlet(3.0, 8)) <= 1e-12
    direct = np.exp(2j * np.pi * 0.5 * np.arange(4) / 4).sum() / 4
    assert dirichlet(0.5, 4) == pytest.approx(direct, abs=1e-12)


def test_dirichlet_matches_direct_sum_everywhere():
    rng = np.random.default_rng(11)
    for N in (1, 2, 5, 16):
        x = rng.uniform(-3 * N, 3 * N, 300)
        direct = np.exp(2j * np.pi * np.outer(x, np.arange(N)) / N).sum(axis=1) / N
        assert np.max(np.abs(dirichlet(x, N) - direct)) <= 1e-12


def test_dirichlet_periodicity():
    rng = np.random.default_rng(5)
    x = rng.uniform(-20, 20, 500)
    for N in (2, 7, 16):
        assert np.max(np.abs(dirichlet(x + N, N) - dirichlet(x, N))) <= 1e-10


def test_dirichlet_derivative_closed_cases():
    N = 8
    assert dirichlet_derivative_wrt_kp(0.0, N) == pytest.approx(1j * np.pi * (N - 1) / N)
    assert dirichlet_derivative_wrt_kp(0.7, 1) == 0


def test_dirichlet_derivative_matches_finite_differences():
    rng = np.random.default_rng(13)
    h = 1e-6
    for N in (2, 8, 16):
        k = rng.uniform(-N, N, 1000)
        fd = (dirichlet(k + h, N) - dirichlet(k - h, N)) / (2 * h)
        an = dirichlet_derivative_wrt_kp(k, N)
        rel = np.abs(fd - an) / np.maximum(np.abs(fd), 1e-9)
        assert rel.max() <= 1e-5


def test_rc_derivative_wrt_lp_branches():
    Q = 20
    t0 = 1.0 / (2 * BETA)
    # Landing exactly on |l_bar| = 1/(2 beta) hits the declared zero branch.
    assert rc_derivative_wrt_lp(Q, 0, -t0, Q, BETA) == 0.0
    assert rc_derivative_wrt_lp(Q, 0, t0, Q, BETA) == 0.0
    # Symmetric peak: zero slope.
    assert rc_derivative_wrt_lp(Q, 0, 0.0, Q, BETA) == pytest.approx(0.0, abs=1e-12)


def test_rc_derivative_wrt_lp_matches_finite_differences():
    # Oracle: central difference of the tap value w.r.t. l_p. Points within
    # 1e-3 of stationary or singular offsets are excluded; the relative-error
    # criterion is ill-posed where the derivative itself crosses zero.
    Q = 20
    rng = np.random.default_rng(17)
    l_bar = rng.uniform(-Q + 0.5, Q - 0.5, 3000)
    keep = np.abs(l_bar) > 1e-3
    keep &= np.abs(np.abs(l_bar) - 1.0 / (2 * BETA)) > 1e-3
    l_bar = l_bar[keep][:1000]
    d = Q
    floor_lp = 0.0
    l_p = d + floor_lp - Q - l_bar  # solve for l_p giving this offset
    h = 1e-6
    fd = (rc(d + floor_lp - (l_p + h) - Q, BETA) - rc(d + floor_lp - (l_p - h) - Q, BETA)) / (2 * h)
    an = rc_derivative_wrt_lp(d, floor_lp, l_p, Q, BETA)
    rel = np.abs(fd - an) / np.abs(fd)
    assert rel.max() <= 1e-5


def test_cp_phase_three_cases():
    N = 8
    # In-frame taps are unrotated.
    assert cp_phase(m=5, d=2, n_tilde=3, floor_lp=1, M=16, N=N) == 1.0
    # One step before the frame start.
    val = cp_phase(m=0, d=1, n_tilde=1, floor_lp=0, M=16, N=N)
    assert val == pytest.approx(np.exp(-2j * np.pi / N))
    # Past the frame end.
    val = cp_phase(m=17, d=1, n_tilde=2, floor_lp=0, M=16, N=N)
    assert val == pytest.approx(np.exp(2j * np.pi * 2 / N))
    # Zero Doppler index: unit phase in every branch.
    for m in (-3, 5, 40):
        assert cp_phase(m=m, d=0, n_tilde=0, floor_lp=0, M=16, N=N) == 1.0


def test_pulse_bank_tap_tables():
    bank = PulseBank(beta=BETA, Q=20)
    taps = bank.g_taps
    assert taps.shape == (41,)
    assert taps[20] == pytest.approx(1.0)
    assert np.max(np.abs(taps - taps[::-1])) <= 1e-15
    off_center = np.delete(taps, 20)
    assert np.max(np.abs(off_center)) <= 1e-12
    # Table agrees with the continuous sampler at shared points.
    d = np.arange(41) - 20
    assert np.array_equal(taps, bank.rc_sample(d.astype(float)))


def test_pulse_bank_fractional_taps_and_truncation():
    bank = PulseBank(beta=BETA, Q=20)
    t = bank.taps_for_delay(3.0)
    assert t[20] == pytest.approx(1.0)
    assert np.sum(np.abs(t) > 0) == 1
    t = bank.taps_for_delay(2.5)
    assert np.sum(np.abs(t) > 1e-6) > 30
    # Hard zero outside the truncated support.
    assert bank.rc_sample(np.array([20.5, -25.0])).tolist() == [0.0, 0.0]
    assert bank.srrc_sample(np.array([21.0, -30.5])).tolist() == [0.0, 0.0]


def test_pulse_bank_srrc_taps_cached():
    bank = PulseBank(beta=BETA, Q=20)
    taps8 = bank.srrc_taps(8)
    assert taps8.shape == (2 * 20 * 8 + 1,)
    assert bank.srrc_taps(8) is taps8
