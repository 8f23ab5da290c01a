import math

import numpy as np
import pytest

from ddfmcw.params import (
    DDFrame,
    SystemParams,
    desk_params,
    frame_from_vec,
    make_params,
    split_power,
)


def test_default_profile_bandwidth():
    p = make_params(M=256, N=64, T=66.67e-6, f_c=5e9, beta=0.15, Q=20, O=8, l_max=128)
    assert p.bandwidth == pytest.approx(3.84e6, rel=1e-4)
    assert p.delay_resolution == pytest.approx(66.67e-6 / 256)
    assert p.doppler_resolution == pytest.approx(1.0 / (64 * 66.67e-6))


def test_minimal_instance_valid():
    p = make_params(M=2, N=1, T=1.0, f_c=0.0, beta=0.15, Q=1, O=2, l_max=1)
    assert p.M == 2 and p.N == 1


def test_odd_m_rejected():
    with pytest.raises(ValueError, match="even"):
        make_params(M=3, N=4, T=1.0)


def test_lmax_bounds_rejected():
    with pytest.raises(ValueError, match="l_max"):
        make_params(M=16, N=4, T=1.0, l_max=16)
    with pytest.raises(ValueError, match="l_max"):
        make_params(M=16, N=4, T=1.0, l_max=-1)


@pytest.mark.parametrize("bad", [dict(N=0), dict(T=0.0), dict(Q=0), dict(O=1), dict(beta=1.5)])
def test_invalid_scalars_rejected(bad):
    kw = dict(M=16, N=4, T=1.0, f_c=0.0, beta=0.15, Q=4, O=2, l_max=4)
    kw.update(bad)
    with pytest.raises(ValueError):
        make_params(**kw)


def test_json_round_trip_and_hash():
    p = desk_params()
    q = SystemParams.from_json(p.to_json())
    assert q == p
    assert q.hash() == p.hash()
    doc = p.to_json()
    assert '"schema": 1' in doc.replace(",", ", ") or '"schema":1' in doc.replace(" ", "")


def test_json_rejects_unknown_schema():
    p = desk_params()
    doc = p.to_json().replace('"schema": 1', '"schema": 99')
    with pytest.raises(ValueError, match="schema"):
        SystemParams.from_json(doc)


def test_split_power_symmetric():
    alloc = split_power(rho=1.0, total_power=2.0)
    assert alloc.E_c == pytest.approx(1.0)
    assert alloc.E_s == pytest.approx(1.0)


def test_split_power_derived_case():
    # Solve E_c + E_s = 1, E_c/E_s = 10^-0.8 by hand: E_s = 1/(1+rho).
    rho = 10 ** (-0.8)
    alloc = split_power(rho=rho, total_power=1.0)
    assert alloc.E_s == pytest.approx(1.0 / (1.0 + rho), rel=1e-15)
    assert alloc.E_c == pytest.approx(rho / (1.0 + rho), rel=1e-15)
    assert alloc.E_c == pytest.approx(0.1368, abs=5e-5)
    assert alloc.E_s == pytest.approx(0.8632, abs=5e-5)


def test_split_power_rejects_nonpositive():
    with pytest.raises(ValueError):
        split_power(rho=0.0, total_power=1.0)
    with pytest.raises(ValueError):
        split_power(rho=1.0, total_power=0.0)


def test_rho_reconstruction_exact():
    rng = np.random.default_rng(7)
    for _ in range(200):
        rho = float(10.0 ** rng.uniform(-3, 3))
        total = float(10.0 ** rng.uniform(-2, 2))
        alloc = split_power(rho, total)
        assert math.isclose(alloc.rho, rho, rel_tol=4e-16)
        assert math.isclose(alloc.total, total, rel_tol=1e-12)


def test_ddframe_roles_and_energy():
    g = np.arange(8, dtype=np.complex128).reshape(4, 2)
    f = DDFrame(grid=g, role="data")
    assert f.M == 4 and f.N == 2
    assert f.energy() == pytest.approx(np.sum(np.abs(g) ** 2))
    with pytest.raises(ValueError, match="role"):
        DDFrame(grid=g, role="weird")


def test_ddframe_vec_is_column_stacking():
    g = np.array([[1, 3], [2, 4]], dtype=np.complex128)
    f = DDFrame(grid=g)
    assert np.array_equal(f.vec(), np.array([1, 2, 3, 4], dtype=np.complex128))
    back = frame_from_vec(f.vec(), 2, 2)
    assert np.array_equal(back.grid, g)


def test_ddframe_serialization_bit_exact():
    rng = np.random.default_rng(3)
    g = rng.standard_normal((16, 8)) + 1j * rng.standard_normal((16, 8))
    g *= np.pi  # irrational-ish values, no friendly decimals
    f = DDFrame(grid=g, role="received")
    g2 = DDFrame.from_bytes(f.to_bytes())
    assert g2.role == "received"
    assert np.array_equal(g2.grid.view(np.uint8), f.grid.view(np.uint8))


def test_ddframe_immutable():
    f = DDFrame(grid=np.zeros((2, 2), dtype=complex))
    with pytest.raises(ValueError):
        f.grid[0, 0] = 1.0
