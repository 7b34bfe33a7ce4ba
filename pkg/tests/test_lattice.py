import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lbstefan.lattice import DistributionField, make_lattice, moment, stream


def isotropic_weights(velocities, classes):
    """Solve sum w = 1, sum w e_x^2 = 1/3, sum w e_x^2 e_y^2 = 1/9 (D2Q9 only)
    for one weight per speed class, independently of the stencil table."""
    v = np.asarray(velocities)
    speed = (v**2).sum(axis=1)
    cls = sorted(set(speed))[:classes]
    rows = [[np.sum(speed == c) for c in cls], [np.sum((v[:, 0] ** 2)[speed == c]) for c in cls]]
    rhs = [1.0, 1.0 / 3.0]
    if classes == 3:
        rows.append([np.sum((v[:, 0] ** 2 * v[:, 1] ** 2)[speed == c]) for c in cls])
        rhs.append(1.0 / 9.0)  # fourth-order isotropy: sum w ex^2 ey^2 = cs^4
    sol = np.linalg.solve(np.array(rows, float), rhs)
    return {c: w for c, w in zip(cls, sol)}


@pytest.mark.parametrize(
    "kind, expected",
    [
        ("D1Q3", {0: 2 / 3, 1: 1 / 6}),
        ("D2Q5", {0: 1 / 3, 1: 1 / 6}),
        ("D2Q9", {0: 4 / 9, 1: 1 / 9, 2: 1 / 36}),
    ],
)
def test_weights_match_isotropy_solution(kind, expected):
    lat = make_lattice(kind)
    oracle = isotropic_weights(lat.velocities, len(expected))
    for c, w in expected.items():
        assert oracle[c] == pytest.approx(w, abs=1e-15)
    speed = (lat.velocities**2).sum(axis=1)
    for i, s in enumerate(speed):
        assert lat.weights[i] == pytest.approx(expected[s], abs=1e-15)


def test_d1q3_layout():
    lat = make_lattice("D1Q3")
    assert lat.velocities.ravel().tolist() == [0, 1, -1]
    assert lat.weights.tolist() == pytest.approx([2 / 3, 1 / 6, 1 / 6])
    assert lat.q == 3 and lat.d == 1


def test_descriptor_invariants(lattice):
    e, w = lattice.velocities, lattice.weights
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(w @ e, 0.0, atol=1e-16)
    assert np.allclose(np.einsum("i,ia,ib->ab", w, e, e), np.eye(lattice.d) / 3, atol=1e-15)
    opp = lattice.opposite
    assert np.array_equal(opp[opp], np.arange(lattice.q))
    assert np.array_equal(e[opp], -e)
    assert np.all(w[opp] == w)


def test_unknown_lattice():
    with pytest.raises(ValueError):
        make_lattice("D3Q19")


def test_moments_of_weights(lattice):
    shape = (4,) * lattice.d
    dist = DistributionField.equilibrium(lattice, np.ones(shape))
    assert np.allclose(moment(dist, 0), 1.0, atol=1e-15)
    assert np.allclose(moment(dist, 1), 0.0, atol=1e-16)
    m2 = moment(dist, 2)
    eye = np.eye(lattice.d).reshape((lattice.d, lattice.d) + (1,) * lattice.d)
    assert np.allclose(m2, eye / 3, atol=1e-15)


def test_moments_of_zero(lattice):
    dist = DistributionField.zeros(lattice, (3,) * lattice.d)
    for k in (0, 1, 2):
        assert np.all(moment(dist, k) == 0)


def test_single_population_moments():
    lat = make_lattice("D2Q5")
    dist = DistributionField.zeros(lat, (3, 3))
    dist.data[lat.index_of((1, 0)), 1, 1] = 1.0
    assert moment(dist, 1)[:, 1, 1].tolist() == [1.0, 0.0]
    assert moment(dist, 2)[:, :, 1, 1].tolist() == [[1.0, 0.0], [0.0, 0.0]]
    assert moment(dist, 0).sum() == 1.0


def test_unsupported_order():
    lat = make_lattice("D1Q3")
    with pytest.raises(ValueError):
        moment(DistributionField.zeros(lat, 4), 3)


def test_stream_reverse_is_identity(lattice, rng):
    data = rng.normal(size=(lattice.q,) + (7,) * lattice.d)
    fwd = stream(data, lattice, periodic=(True,) * lattice.d)
    back = stream(fwd, lattice, periodic=(True,) * lattice.d, reverse=True)
    assert np.array_equal(back, data)


def test_stream_marks_missing_populations():
    lat = make_lattice("D1Q3")
    data = np.arange(15, dtype=float).reshape(3, 5)
    out = stream(data, lat)
    assert np.isnan(out[1, 0]) and np.isnan(out[2, -1])
    assert out[1, 1:].tolist() == data[1, :-1].tolist()
    assert out[2, :-1].tolist() == data[2, 1:].tolist()
    assert out[0].tolist() == data[0].tolist()


def test_stream_mixed_periodicity():
    lat = make_lattice("D2Q9")
    data = np.random.default_rng(1).normal(size=(9, 5, 6))
    out = stream(data, lat, periodic=(True, False))
    i = lat.index_of((1, 1))
    # periodic along x, open along y
    assert np.isnan(out[i][:, 0]).all()
    assert np.array_equal(out[i][:, 1:], np.roll(data[i], 1, axis=0)[:, :-1])


@settings(max_examples=30, deadline=None)
@given(
    kind=st.sampled_from(["D1Q3", "D2Q5", "D2Q9"]),
    a=st.floats(-10, 10),
    b=st.floats(-10, 10),
    seed=st.integers(0, 2**16),
)
def test_moment_is_linear(kind, a, b, seed):
    lat = make_lattice(kind)
    r = np.random.default_rng(seed)
    shape = (lat.q,) + (3,) * lat.d
    f, g = r.normal(size=shape), r.normal(size=shape)
    for k in (0, 1, 2):
        lhs = moment(a * f + b * g, k, lat)
        rhs = a * moment(f, k, lat) + b * moment(g, k, lat)
        assert np.allclose(lhs, rhs, atol=1e-12)
