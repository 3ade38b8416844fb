import numpy as np
import pytest
from hypothesis import given, strategies as st

from gradspin.lattice import (
    Torus,
    config_kind,
    discrete_laplacian,
    energy_config,
    from_csv,
    from_snapshot,
    laplacian_all,
    neighbor,
    particle_config,
    to_csv,
    to_snapshot,
    total_mass,
)


def test_neighbor_wraps():
    t = Torus(8)
    assert neighbor(t, 7, +1) == 0
    assert neighbor(t, 0, -1) == 7
    assert neighbor(t, 3, +1) == 4
    assert t.neighbor(3, -1) == 2
    with pytest.raises(ValueError):
        neighbor(t, 3, 2)
    with pytest.raises(ValueError):
        Torus(1)


def test_total_mass():
    assert total_mass(particle_config([0, 0, 0])) == 0
    assert total_mass(particle_config([2, 3, 5])) == 10
    assert isinstance(total_mass(particle_config([2, 3, 5])), int)
    assert total_mass(energy_config([0.5, 1.25])) == pytest.approx(1.75)


def test_config_validation():
    with pytest.raises(ValueError):
        energy_config([1.0, -0.1])
    with pytest.raises(ValueError):
        particle_config([1, -1])
    with pytest.raises(ValueError):
        particle_config([1.5, 2.0])
    assert config_kind(energy_config([1.0, 2.0])) == "energy"
    assert config_kind(particle_config([1, 2])) == "particle"


def test_discrete_laplacian_examples():
    eta = np.array([0, 1, 0, 0])
    # N^2 (eta_1 + eta_3 - 2 eta_0) = 16 * 1
    assert discrete_laplacian(eta, 0, 4) == 16
    assert discrete_laplacian(eta, 1, 4) == -32
    assert np.all(laplacian_all(np.full(6, 3.0)) == 0)


@given(st.lists(st.integers(0, 1000), min_size=2, max_size=40), st.lists(st.integers(0, 1000), min_size=2, max_size=40))
def test_laplacian_sums_to_zero_and_is_linear(a, b):
    n = min(len(a), len(b))
    x, y = np.array(a[:n], dtype=float), np.array(b[:n], dtype=float)
    assert abs(laplacian_all(x).sum()) <= 1e-9 * max(1.0, n * n * x.sum())
    assert np.allclose(laplacian_all(2 * x + y), 2 * laplacian_all(x) + laplacian_all(y))


def test_csv_roundtrip_and_format():
    eta = particle_config([3, 0, 7])
    text = to_csv(eta)
    assert text.splitlines()[0] == "site,value"
    assert "\r" not in text
    assert np.array_equal(from_csv(text), eta)
    e = energy_config([0.1, 2.5, 1e-300])
    assert np.array_equal(from_csv(to_csv(e)), e)


@pytest.mark.parametrize("config", [particle_config([1, 2, 3, 4]), energy_config([0.25, 3.0, 1.0 / 3.0])])
def test_snapshot_roundtrip(config):
    blob = to_snapshot(config)
    assert blob[:4] == b"GSPN"
    back = from_snapshot(blob)
    assert back.dtype == config.dtype
    assert np.array_equal(back, config)


def test_snapshot_rejects_corruption():
    blob = to_snapshot(particle_config([1, 2]))
    with pytest.raises(ValueError):
        from_snapshot(b"XXXX" + blob[4:])
    with pytest.raises(ValueError):
        from_snapshot(blob[:-1])
