import itertools
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elastic_fusion.elastic_net import (ElasticParams, RingState, _descend, anneal_solve,
                                        default_params, elastic_energy, elastic_gradient,
                                        extract_tour, initial_ring, swept_area_increment)
from elastic_fusion.instance_io import Instance, generate_instance, tour_length
from elastic_fusion.oracle import solve_held_karp


def central_differences(instance, w, lam, k, h=mpmath.mpf("1e-15")):
    """Central differences of an independent 40-digit evaluation of the energy."""
    with mpmath.workdps(40):
        cities = [(mpmath.mpf(x), mpmath.mpf(y)) for x, y in instance.coords]
        lam, k = mpmath.mpf(lam), mpmath.mpf(k)

        def energy(pts):
            attract = mpmath.fsum(
                mpmath.log(mpmath.fsum(mpmath.exp(-((cx - px) ** 2 + (cy - py) ** 2) / (2 * lam ** 2))
                                       for px, py in pts))
                for cx, cy in cities)
            tension = mpmath.fsum((pts[i][0] - pts[i - 1][0]) ** 2 + (pts[i][1] - pts[i - 1][1]) ** 2
                                  for i in range(len(pts)))
            return -lam ** 2 * attract + k / 2 * tension

        base = [[mpmath.mpf(v) for v in row] for row in w]
        grad = np.zeros_like(w)
        for i, j in np.ndindex(*w.shape):
            up = [row[:] for row in base]
            dn = [row[:] for row in base]
            up[i][j] += h
            dn[i][j] -= h
            grad[i, j] = float((energy(up) - energy(dn)) / (2 * h))
    return grad


def assert_gradient_matches(instance, w, lam, k):
    analytic = elastic_gradient(instance, w, lam, k)
    numeric = central_differences(instance, w, lam, k)
    big = np.abs(analytic) > 1e-8
    rel = np.abs(analytic - numeric)[big] / np.abs(analytic)[big]
    assert rel.max(initial=0.0) <= 1e-6
    assert np.abs(analytic - numeric)[~big].max(initial=0.0) <= 1e-12


# -- energy ---------------------------------------------------------------

def test_energy_single_coincident_node():
    inst = Instance.from_coords([(0, 0)])
    assert elastic_energy(inst, [[0, 0]], 1.0, 3.7) == 0.0


def test_energy_two_coincident_nodes():
    inst = Instance.from_coords([(0, 0)])
    assert elastic_energy(inst, [[0, 0], [0, 0]], 1.0, 1.0) == pytest.approx(-math.log(2), rel=1e-15)


def test_energy_five_city_fixture(five, ring10):
    # frozen from a 50-digit mpmath evaluation
    assert elastic_energy(five, ring10, 0.2, 1.0) == pytest.approx(0.063266925718744744023, rel=1e-12)


def test_energy_survives_extreme_kernel_ratios():
    inst = Instance.from_coords([(0, 0), (1, 0)])
    w = np.array([[30.0, 0.0], [0.0, 37.0]])
    lam = 1.0
    # |xi - w|^2 / lam^2 reaches ~1400 here
    e = elastic_energy(inst, w, lam, 1.0)
    assert math.isfinite(e)
    d2 = ((inst.coords[:, None] - w[None]) ** 2).sum(axis=2)
    attract = sum(0.5 * row.min() - math.log(np.exp(-(row - row.min()) / 2).sum()) for row in d2)
    assert e == pytest.approx(attract + 0.5 * ((w[1] - w[0]) ** 2).sum() * 2, rel=1e-12)


def test_lambda_must_be_positive(five, ring10):
    with pytest.raises(ValueError):
        elastic_energy(five, ring10, 0.0, 1.0)
    with pytest.raises(ValueError):
        elastic_gradient(five, ring10, -1.0, 1.0)


# -- gradient -------------------------------------------------------------

def test_gradient_zero_at_coincident_city():
    inst = Instance.from_coords([(0.4, 0.2)])
    assert np.all(elastic_gradient(inst, [[0.4, 0.2]], 0.5, 1.0) == 0.0)


def test_gradient_matches_frozen_component(five, ring10):
    # frozen: mpmath numerical derivative at 50 digits
    g = elastic_gradient(five, ring10, 0.2, 1.0)
    assert g[0] == pytest.approx([0.10378489481020904071, -0.059628489234637380235], rel=1e-12)


def test_straight_segment_has_no_tension_at_middle():
    inst = Instance.from_coords([(100.0, 0.0)])
    w = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    g = elastic_gradient(inst, w, 0.05, 1.0)
    assert np.allclose(g[1], 0.0, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 10), m=st.integers(3, 25), seed=st.integers(0, 2**32 - 1),
       lam=st.floats(0.1, 1.0), k=st.floats(0.1, 2.0))
def test_gradient_matches_finite_differences(n, m, seed, lam, k):
    rng = np.random.default_rng(seed)
    inst = generate_instance(n, seed, 1.0)
    w = rng.uniform(0, 1, size=(m, 2))
    assert_gradient_matches(inst, w, lam, k)


def test_kernel_step_equals_reference_gradient_step(five, ring10):
    w = ring10.copy()
    _descend(np.ascontiguousarray(five.coords), w, 0.2, 1.0, 0.02, 1)
    expected = ring10 - 0.02 * elastic_gradient(five, ring10, 0.2, 1.0)
    np.testing.assert_allclose(w, expected, rtol=0, atol=1e-14)


@pytest.mark.parametrize("fixture", ["five", "eight"])
@pytest.mark.parametrize("lam_scale", [1.0, 0.3, 0.05])
def test_energy_non_increasing_within_a_stage(request, fixture, lam_scale):
    inst = request.getfixturevalue(fixture)
    p = default_params(inst)
    lam = p.lambda0 * lam_scale
    w = initial_ring(inst, p.m_nodes, 0)
    energies = [elastic_energy(inst, w, lam, p.k_tension)]
    for _ in range(200):
        _descend(np.ascontiguousarray(inst.coords), w, lam, p.k_tension, p.step_size, 1)
        energies.append(elastic_energy(inst, w, lam, p.k_tension))
    steps = np.diff(energies)
    assert np.all(steps <= 1e-12 * np.abs(energies[:-1]).max())


def _ring_along(inst, order, m):
    """m nodes spread uniformly by arclength along the closed polygon."""
    pts = inst.coords[list(order) + [order[0]]]
    seg = np.hypot(*np.diff(pts, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    s = np.arange(m) * cum[-1] / m
    return np.column_stack([np.interp(s, cum, pts[:, 0]), np.interp(s, cum, pts[:, 1])])


def test_zero_range_limit_is_pure_tension(five):
    w = five.coords.copy()
    e = elastic_energy(five, w, 1e-4, 1.0)
    tension = 0.5 * (np.diff(np.vstack([w, w[:1]]), axis=0) ** 2).sum()
    assert e == pytest.approx(tension, abs=1e-7)


def test_zero_range_energy_orders_rings_by_length(five):
    tours = [(0,) + p for p in itertools.permutations(range(1, 5)) if p[0] < p[-1]]
    lengths = [tour_length(five, t) for t in tours]
    energies = [elastic_energy(five, _ring_along(five, t, 2000), 1e-4, 1.0) for t in tours]
    for a, b in itertools.combinations(range(len(tours)), 2):
        if abs(lengths[a] - lengths[b]) > 1e-6:
            assert (energies[a] < energies[b]) == (lengths[a] < lengths[b])


def test_translation_equivariance(five, ring10):
    shift = np.array([12.5, -3.25])
    moved = Instance.from_coords(five.coords + shift)
    assert elastic_energy(moved, ring10 + shift, 0.2, 1.0) == pytest.approx(
        elastic_energy(five, ring10, 0.2, 1.0), abs=1e-12)
    np.testing.assert_allclose(elastic_gradient(moved, ring10 + shift, 0.2, 1.0),
                               elastic_gradient(five, ring10, 0.2, 1.0), atol=1e-12)
    nxt = ring10 - 0.02 * elastic_gradient(five, ring10, 0.2, 1.0)
    assert swept_area_increment(ring10 + shift, nxt + shift) == pytest.approx(
        swept_area_increment(ring10, nxt), abs=1e-12)


# -- swept area -----------------------------------------------------------

def test_no_movement_sweeps_nothing(ring10):
    assert swept_area_increment(ring10, ring10) == 0.0


def test_unit_segment_translation():
    assert swept_area_increment([[0, 0], [1, 0]], [[0, 1], [1, 1]]) == pytest.approx(1.0)


def test_one_step_sweep_matches_shoelace(five, ring10):
    nxt = ring10 - 0.02 * elastic_gradient(five, ring10, 0.2, 1.0)
    # frozen: mpmath shoelace over both triangles of every quad, 50 digits
    assert swept_area_increment(ring10, nxt) == pytest.approx(0.0032413840145901484038, rel=1e-9)


def test_sweep_node_count_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        swept_area_increment(np.zeros((3, 2)), np.zeros((4, 2)))


# -- tour extraction ------------------------------------------------------

def test_cities_on_nodes_follow_ring_order():
    w = np.array([[0, 0], [1, 0], [2, 0], [3, 1], [2, 2], [1, 3], [0, 2]], dtype=float)
    inst = Instance.from_coords([w[5], w[0], w[3]])
    assert extract_tour(inst, RingState(w, 0.1)).order == (1, 2, 0)


def test_shared_node_ordered_by_edge_projection():
    w = np.array([[0, 0], [10, 0], [10, 10], [0, 10]], dtype=float)
    inst = Instance.from_coords([(0.3, -0.05), (0.1, 0.05), (10, 10)])
    assert extract_tour(inst, w).order == (1, 0, 2)
    flipped = w[[0, 3, 2, 1]]
    assert extract_tour(inst, flipped).order == (0, 1, 2)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 12), m=st.integers(1, 30), seed=st.integers(0, 2**32 - 1))
def test_extraction_always_yields_a_permutation(n, m, seed):
    inst = generate_instance(n, seed, 1.0)
    w = np.random.default_rng(seed).normal(size=(m, 2))
    tour = extract_tour(inst, w)
    assert sorted(tour.order) == list(range(n))
    assert tour.length == pytest.approx(tour_length(inst, tour.order), rel=1e-12)


def test_converged_extraction_matches_hand_assignment(eight):
    tr = anneal_solve(eight, seed=0)
    w = tr.final.w.tolist()
    keyed = []
    for c, (x, y) in enumerate(eight.coords.tolist()):
        dists = [(x - a) ** 2 + (y - b) ** 2 for a, b in w]
        node = dists.index(min(dists))
        nx, ny = w[(node + 1) % len(w)]
        proj = (x - w[node][0]) * (nx - w[node][0]) + (y - w[node][1]) * (ny - w[node][1])
        keyed.append((node, proj, c))
    assert tr.tour.order == tuple(c for _, _, c in sorted(keyed))


# -- annealing ------------------------------------------------------------

def test_single_city_collapses():
    inst = Instance.from_coords([(0.3, 0.7)])
    tr = anneal_solve(inst, seed=5)
    assert tr.tour.order == (0,)
    assert tr.tour.length == 0.0
    assert np.abs(tr.final.w - [0.3, 0.7]).max() < 0.05


@pytest.mark.parametrize("seed", range(3))
def test_square_is_solved(square, seed):
    assert anneal_solve(square, seed=seed).tour.length == pytest.approx(4.0, abs=1e-6)


def test_eight_city_runs_reach_the_optimum(eight):
    opt = solve_held_karp(eight).optimal_length
    hits = sum(abs(anneal_solve(eight, seed=s).tour.length - opt) <= 1e-9 for s in range(20))
    assert hits >= 16


def test_trace_invariants(eight):
    tr = anneal_solve(eight, seed=3)
    p = tr.params
    areas = [r.swept_area for r in tr.records]
    assert np.all(np.diff(areas) >= 0)
    assert [r.stage for r in tr.records] == list(range(len(tr.records)))
    last = tr.records[-1]
    assert last.lam <= p.lambda_min or len(tr.records) == p.max_stages \
        or last.max_capture_dist <= p.capture_tol
    assert tr.converged
    assert tr.swept_area == areas[-1]


def test_solver_is_deterministic(eight):
    a, b = anneal_solve(eight, seed=11), anneal_solve(eight, seed=11)
    assert a.records == b.records
    assert a.tour == b.tour
    assert np.array_equal(a.final.w, b.final.w)


def test_non_convergence_is_flagged_not_raised(eight):
    tr = anneal_solve(eight, ElasticParams(max_stages=3), seed=0)
    assert len(tr.records) == 3
    assert tr.non_convergence
    assert sorted(tr.tour.order) == list(range(8))


def test_capture_tolerance_stops_early(eight):
    tr = anneal_solve(eight, ElasticParams(capture_tol=0.2), seed=0)
    assert tr.converged
    assert tr.records[-1].max_capture_dist <= 0.2
    assert tr.records[-1].lam > tr.params.lambda_min


def test_defaults(eight):
    p = default_params(eight)
    assert p.m_nodes == 20
    assert p.lambda0 == pytest.approx(0.5 * eight.bbox_diagonal() / math.sqrt(8))
    assert p.lambda_min == pytest.approx(1e-3 * p.lambda0)
    assert p.capture_tol == p.lambda_min
    assert (p.k_tension, p.lambda_decay, p.steps_per_stage, p.step_size) == (1.0, 0.99, 5, 0.02)


def test_initial_ring_geometry(eight):
    w = initial_ring(eight, 20, 0)
    r = np.hypot(*(w - eight.coords.mean(axis=0)).T)
    radius = 0.1 * eight.bbox_diagonal()
    assert np.all(np.abs(r - radius) <= 2e-3 * radius)
    assert not np.array_equal(w, initial_ring(eight, 20, 1))


@pytest.mark.parametrize("bad", [
    ElasticParams(m_nodes=4), ElasticParams(lambda_decay=1.0), ElasticParams(step_size=0.0),
    ElasticParams(k_tension=-1.0), ElasticParams(steps_per_stage=0),
])
def test_invalid_params(eight, bad):
    with pytest.raises(ValueError):
        anneal_solve(eight, bad, seed=0)
