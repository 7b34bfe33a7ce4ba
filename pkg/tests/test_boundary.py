import numpy as np
import pytest

from lbstefan.boundary import (
    BoundaryError,
    BoundaryPlan,
    BoundarySpec,
    BounceBack,
    DirichletEquilibrium,
    DirichletOnQ,
    NeumannOnQ,
    Periodic,
    apply_dirichlet_equilibrium,
    apply_dirichlet_on_q,
    dirichlet_on_q_target,
    face_names,
)
from lbstefan.enthalpy import phi_delta
from lbstefan.lattice import make_lattice, stream
from lbstefan.schemes import SchemeConfig, initialize_state, step, total_energy

STE = 0.2857


def test_face_names():
    assert face_names(1) == ["x-", "x+"]
    assert face_names(2) == ["x-", "x+", "y-", "y+"]


def test_dirichlet_on_q_example_deep_liquid():
    # constant wall value, phi terms cancel
    q = np.array([[0.3], [np.nan], [0.25]])
    missing = np.array([[False], [True], [False]])
    apply_dirichlet_on_q(q, np.array([0]), missing, missing.astype(float), 1.0, 1.0, STE, 0.005)
    assert q[1, 0] == pytest.approx(1 - 0.55, abs=1e-15)


def test_dirichlet_on_q_target_varying():
    t = dirichlet_on_q_target(0.0, 0.01, STE, 0.01)
    assert t == pytest.approx(0.01 + (0.5 - phi_delta(0.01, 0.01)) / STE)


def test_dirichlet_equilibrium_examples():
    q = np.array([[0.2], [np.nan], [0.1]])
    missing = np.array([[False], [True], [False]])
    apply_dirichlet_equilibrium(q, np.array([0]), missing, missing.astype(float), 0.0, "ILFBM")
    assert q[1, 0] == pytest.approx(-0.3)
    apply_dirichlet_equilibrium(q, np.array([0]), missing, missing.astype(float), 1.0, "EEBM", STE)
    assert q.sum() == pytest.approx(1 + 1 / STE)
    with pytest.raises(BoundaryError):
        apply_dirichlet_equilibrium(q, np.array([0]), missing, missing.astype(float), 1.0, "IREBM")


def test_bounceback_single_population():
    lat = make_lattice("D1Q3")
    spec = BoundarySpec.uniform(1, BounceBack())
    plan = BoundaryPlan.build(spec, lat, (5,))
    omega = np.zeros((3, 5))
    omega[1, 4] = 1.0  # moving right at the last node
    q = stream(omega, lat, plan.periodic)
    plan.fill(q, omega)
    assert q[2, 4] == 1.0
    assert q.sum() == 1.0
    assert np.count_nonzero(q) == 1


def test_bounceback_symmetric_field_unchanged(lattice):
    shape = (6,) * lattice.d
    plan = BoundaryPlan.build(BoundarySpec.uniform(lattice.d, BounceBack()), lattice, shape)
    w = lattice.weights.reshape((-1,) + (1,) * lattice.d)
    omega = w * np.ones(shape)
    q = stream(omega, lattice, plan.periodic)
    plan.fill(q, omega)
    assert np.allclose(q, omega, atol=0)


def test_all_populations_defined_after_fill(lattice):
    d = lattice.d
    shape = (7,) * d
    faces = {name: BounceBack() for name in face_names(d)}
    faces["x-"] = DirichletEquilibrium(1.0)
    plan = BoundaryPlan.build(BoundarySpec(faces), lattice, shape, "EEBM")
    omega = np.random.default_rng(0).random((lattice.q,) + shape)
    q = stream(omega, lattice, plan.periodic)
    plan.fill(q, omega, np.full(len(plan.dir_nodes), 2.0))
    assert np.isfinite(q).all()
    assert np.allclose(q[:, 0].sum(axis=0), 2.0)


def test_neumann_on_q_uniform_field():
    lat = make_lattice("D2Q5")
    shape = (6, 6)
    faces = {"x-": Periodic(), "x+": Periodic(), "y-": BounceBack(), "y+": NeumannOnQ()}
    plan = BoundaryPlan.build(BoundarySpec(faces), lat, shape, "IREBM")
    assert len(plan.neu_nodes) == 6
    omega = lat.weights[:, None, None] * np.full(shape, -0.3)
    q = stream(omega, lat, plan.periodic)
    plan.fill(q, omega)
    assert np.allclose(q, omega, atol=1e-16)


def test_spec_validation():
    with pytest.raises(BoundaryError):
        BoundarySpec({"x-": BounceBack()}).validate(1)
    with pytest.raises(BoundaryError):
        BoundarySpec.uniform(1, DirichletOnQ(1.0)).validate(1, "EEBM")
    with pytest.raises(BoundaryError):
        BoundarySpec.uniform(1, NeumannOnQ()).validate(1, "ILFBM")
    with pytest.raises(BoundaryError):
        BoundarySpec.uniform(1, DirichletEquilibrium(1.0)).validate(1, "IREBM")
    with pytest.raises(BoundaryError):
        BoundarySpec({"x-": Periodic(), "x+": BounceBack()}).validate(1)


def test_mixed_dirichlet_kinds_rejected():
    lat = make_lattice("D1Q3")
    spec = BoundarySpec({"x-": DirichletOnQ(1.0), "x+": DirichletEquilibrium(0.0)})
    with pytest.raises(BoundaryError):
        BoundaryPlan.build(spec, lat, (5,))


def test_corner_dirichlet_neumann_d2q5():
    lat = make_lattice("D2Q5")
    faces = {"x-": DirichletOnQ(-1.0), "x+": NeumannOnQ(), "y-": DirichletOnQ(-1.0), "y+": NeumannOnQ()}
    plan = BoundaryPlan.build(BoundarySpec(faces), lat, (8, 8), "IREBM")
    # corner (0, 7): Dirichlet on x-, Neumann on y+, filled by bounce-back first
    corner = np.ravel_multi_index((0, 7), (8, 8))
    assert corner in plan.dir_nodes
    assert corner in plan.bb_nodes
    assert corner not in plan.neu_nodes
    # corner (7, 7) between two Neumann faces uses bounce-back only
    nn = np.ravel_multi_index((7, 7), (8, 8))
    assert nn in plan.bb_nodes and nn not in plan.neu_nodes and nn not in plan.dir_nodes
    # corner (0, 0): two missing populations sharing the deficit by weight
    k = list(plan.dir_nodes).index(0)
    assert plan.dir_missing[:, k].sum() == 2
    assert np.allclose(plan.dir_fractions[plan.dir_missing[:, k], k], 0.5)


def test_d2q9_dirichlet_fractions_by_weight():
    lat = make_lattice("D2Q9")
    faces = {"x-": DirichletOnQ(1.0), "x+": BounceBack(), "y-": Periodic(), "y+": Periodic()}
    plan = BoundaryPlan.build(BoundarySpec(faces), lat, (5, 5), "IREBM")
    k = 0
    m = plan.dir_missing[:, k]
    assert m.sum() == 3
    assert plan.dir_fractions[m, k] == pytest.approx(np.array([4, 1, 1]) / 6)


def _steady(method, n=21, tau=1.0, steps=8000):
    lat = make_lattice("D1Q3")
    if method == "IREBM":
        faces = {"x-": DirichletOnQ(1.0), "x+": DirichletOnQ(0.0)}
    else:
        faces = {"x-": DirichletEquilibrium(1.0), "x+": DirichletEquilibrium(0.0)}
    plan = BoundaryPlan.build(BoundarySpec(faces), lat, (n,), method)
    theta = np.zeros(n)
    theta[0] = 1.0
    cfg = SchemeConfig(method, tau, STE, delta=0.005)
    state = initialize_state(lat, theta, cfg)
    for _ in range(steps):
        step(state, plan)
    return state


@pytest.mark.parametrize("method", ["EEBM", "ILFBM", "IREBM"])
def test_steady_linear_profile(method):
    state = _steady(method)
    x = np.linspace(0, 1, 21)
    assert np.abs(state.theta - (1 - x)).max() < 1e-6


def test_irebm_dirichlet_wall_exact_every_step():
    lat = make_lattice("D1Q3")
    plan = BoundaryPlan.build(
        BoundarySpec({"x-": DirichletOnQ(1.0), "x+": NeumannOnQ()}), lat, (41,), "IREBM"
    )
    theta = np.full(41, -0.5)
    theta[0] = 1.0
    state = initialize_state(lat, theta, SchemeConfig("IREBM", 0.62, STE, delta=0.005))
    for _ in range(300):
        step(state, plan)
        assert abs(state.theta[0] - 1.0) < 1e-10
        assert abs(state.theta[-1] - state.theta[-2]) < 1e-10


def test_energy_increases_with_hot_wall():
    lat = make_lattice("D1Q3")
    plan = BoundaryPlan.build(
        BoundarySpec({"x-": DirichletOnQ(1.0), "x+": BounceBack()}), lat, (41,), "IREBM"
    )
    theta = np.full(41, -0.5)
    theta[0] = 1.0
    state = initialize_state(lat, theta, SchemeConfig("IREBM", 0.62, STE, delta=0.005))
    energies = []
    for _ in range(200):
        step(state, plan)
        energies.append(total_energy(state))
    assert np.all(np.diff(energies) > 0)
