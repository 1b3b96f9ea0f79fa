import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gasplan.icnn import (
    MAX_HIDDEN,
    Envelope,
    ExtrapolationWarning,
    Hyperplane,
    ReluNet,
    TrainConfig,
    TrainingDivergedError,
    activation_pattern,
    build_envelope,
    cell_boxes,
    enumerate_hyperplanes,
    envelope_eval,
    forward,
    load_net,
    project_weights,
    save_net,
    screen_supporting,
    sign_feasible,
    train_pair,
)


def _net(weights, biases, orientation="convex", output_relu=True):
    return ReluNet(tuple(np.array(w, float) for w in weights), tuple(np.array(b, float) for b in biases),
                   orientation, output_relu)


ABS = _net([[[1.0], [-1.0]], [[1.0, 1.0]]], [[0.0, 0.0], [0.0]])


def _line(m, c):
    return Hyperplane(np.array([float(m)]), float(c))


def _random_net(rng, dim, hidden, orientation):
    W0 = rng.normal(size=(hidden, dim))
    W1 = np.abs(rng.normal(size=(1, hidden)))
    if orientation == "concave":
        W1 = -W1
    return _net([W0, W1], [rng.normal(size=hidden), rng.normal(size=1)], orientation, orientation == "convex")


# ---------------------------------------------------------------------- forward

def test_abs_net_forward():
    assert forward(ABS, -2.0) == 2.0
    assert forward(ABS, 0.0) == 0.0
    assert forward(ABS, np.array([-1.0, 3.0])).tolist() == [1.0, 3.0]


def test_forward_dimension_mismatch():
    with pytest.raises(ValueError):
        forward(ABS, np.ones((4, 2)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["convex", "concave"]))
def test_midpoint_inequality_on_random_sign_feasible_nets(seed, orientation):
    rng = np.random.default_rng(seed)
    net = _random_net(rng, 1, 6, orientation)
    pts = np.sort(rng.uniform(-5, 5, size=(100, 2)), axis=1)
    a, b = pts[:, 0], pts[:, 1]
    mid = forward(net, 0.5 * (a + b))
    chord = 0.5 * (forward(net, a) + forward(net, b))
    if orientation == "convex":
        assert np.all(mid <= chord + 1e-12)
    else:
        assert np.all(mid >= chord - 1e-12)


# ---------------------------------------------------------------------- projection

def test_projection_clamps_negative_hidden_weight():
    net = _net([[[1.0], [2.0]], [[-0.3, 0.7]]], [[0, 0], [0]])
    assert project_weights(net).weights[1].tolist() == [[0.0, 0.7]]


def test_projection_clamps_positive_last_layer_of_concave_net():
    net = _net([[[1.0]], [[0.5]]], [[0], [0]], "concave", False)
    assert project_weights(net).weights[1].tolist() == [[0.0]]


def test_projection_leaves_feasible_net_alone_and_is_idempotent():
    once = project_weights(ABS)
    assert all(np.array_equal(a, b) for a, b in zip(once.weights, ABS.weights))
    rng = np.random.default_rng(1)
    raw = _net([rng.normal(size=(4, 1)), rng.normal(size=(3, 4)), rng.normal(size=(1, 3))],
               [rng.normal(size=4), rng.normal(size=3), rng.normal(size=1)], "concave", False)
    p1 = project_weights(raw)
    p2 = project_weights(p1)
    assert sign_feasible(p1)
    assert all(np.array_equal(a, b) for a, b in zip(p1.weights, p2.weights))
    assert np.array_equal(p1.weights[0], raw.weights[0])


# ---------------------------------------------------------------------- enumeration

def test_abs_net_hyperplanes_by_pattern():
    planes = enumerate_hyperplanes(ABS)
    table = {tuple(p.pattern): (float(p.slope[0]), p.intercept) for p in planes}
    # bits: two hidden units, then the output unit
    assert table[(1, 0, 1)] == (1.0, 0.0)
    assert table[(0, 1, 1)] == (-1.0, 0.0)
    assert table[(0, 0, 1)] == (0.0, 0.0)
    assert table[(1, 1, 1)] == (0.0, 0.0)
    assert all(table[(a, b, 0)] == (0.0, 0.0) for a in (0, 1) for b in (0, 1))


def test_single_neuron_hyperplanes():
    net = _net([[[2.0]], [[1.0]]], [[1.0], [0.0]], output_relu=False)
    planes = {(float(p.slope[0]), p.intercept) for p in enumerate_hyperplanes(net)}
    assert planes == {(0.0, 0.0), (2.0, 1.0)}


def test_enumeration_limit():
    big = _net([np.ones((MAX_HIDDEN, 1)), np.ones((6, MAX_HIDDEN)), np.ones((1, 6))],
               [np.zeros(MAX_HIDDEN), np.zeros(6), np.zeros(1)])
    with pytest.raises(ValueError):
        enumerate_hyperplanes(big)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1, 2]), st.sampled_from(["convex", "concave"]))
def test_pattern_plane_reproduces_forward(seed, dim, orientation):
    rng = np.random.default_rng(seed)
    net = _random_net(rng, dim, 5, orientation)
    planes = enumerate_hyperplanes(net)
    lookup = {tuple(p): k for k, p in enumerate(planes.patterns.tolist())}
    for x in [0.7 * np.ones(dim)] + list(rng.uniform(-3, 3, size=(20, dim))):
        k = lookup[activation_pattern(net, x)]
        assert planes[k](x) == pytest.approx(forward(net, x if dim > 1 else x[0]), abs=1e-12)


# ---------------------------------------------------------------------- screening

def _slopes(env):
    return sorted(float(s[0]) for s in env.planes.slopes)


def test_screen_drops_plane_touching_at_breakpoint():
    env = screen_supporting([_line(1, 0), _line(-1, 0), _line(0, 0)], "convex", [-1], [1])
    assert _slopes(env) == [-1.0, 1.0]


def test_screen_keeps_both_and_breakpoint_at_one():
    env = screen_supporting([_line(1, 0), _line(2, -1)], "convex", [0], [2])
    assert len(env) == 2
    assert envelope_eval(env, 1.0) == 1.0
    assert envelope_eval(env, 2.0) == 3.0
    lo, hi = cell_boxes(env)
    order = np.argsort(env.planes.slopes[:, 0])
    assert hi[order[0], 0] == pytest.approx(1.0) and lo[order[1], 0] == pytest.approx(1.0)


def test_single_plane_kept_with_witness():
    env = screen_supporting([_line(3, 1)], "concave", [-2], [2])
    assert len(env) == 1 and env.witnesses.shape == (1, 1)


def test_abs_envelope_value():
    env = build_envelope(ABS, [-3], [3])
    assert envelope_eval(env, -2.0) == 2.0


def test_concave_screen_uses_min():
    env = screen_supporting([_line(1, 0), _line(-1, 0), _line(0, 5)], "concave", [-2], [2])
    assert _slopes(env) == [-1.0, 1.0]
    assert envelope_eval(env, 1.5) == -1.5


def test_extrapolation_is_flagged():
    env = build_envelope(ABS, [-1], [1])
    with pytest.warns(ExtrapolationWarning):
        assert envelope_eval(env, 4.0) == 4.0


def _check_envelope(net, env, lo, hi, grid_pts):
    exact = forward(net, grid_pts)
    assert np.max(np.abs(envelope_eval(env, grid_pts) - exact)) <= 1e-9
    for k, w in enumerate(env.witnesses):
        rest = Envelope(env.planes[np.delete(np.arange(len(env)), k)], env.orientation, env.lo, env.hi, env.witnesses)
        if len(rest) == 0:
            continue
        assert abs(envelope_eval(rest, w[None, :])[0] - envelope_eval(env, w[None, :])[0]) > 0
    allp = enumerate_hyperplanes(net)
    full = Envelope(allp, env.orientation, env.lo, env.hi, env.witnesses)
    assert np.max(np.abs(envelope_eval(full, grid_pts) - envelope_eval(env, grid_pts))) <= 1e-12


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["convex", "concave"]))
def test_screening_exact_sound_complete_1d(seed, orientation):
    rng = np.random.default_rng(seed)
    net = _random_net(rng, 1, 8, orientation)
    env = build_envelope(net, [-4], [4])
    _check_envelope(net, env, -4, 4, np.linspace(-4, 4, 1000))


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["convex", "concave"]))
def test_screening_exact_sound_complete_2d(seed, orientation):
    rng = np.random.default_rng(seed)
    net = _random_net(rng, 2, 6, orientation)
    lo, hi = np.array([-2.0, 0.5]), np.array([2.0, 1.5])
    env = build_envelope(net, lo, hi)
    g = np.stack(np.meshgrid(np.linspace(lo[0], hi[0], 32), np.linspace(lo[1], hi[1], 32)), -1).reshape(-1, 2)
    _check_envelope(net, env, lo, hi, g)
    # every grid point sits inside the box of a plane active there
    blo, bhi = cell_boxes(env)
    vals = env.planes.values(g)
    active = vals.argmax(1) if orientation == "convex" else vals.argmin(1)
    assert np.all(g >= blo[active] - 1e-9) and np.all(g <= bhi[active] + 1e-9)


# ---------------------------------------------------------------------- training

def _heldout(lo, hi, n):
    step = (hi - lo) / n
    return lo + (np.arange(n) + 0.5) * step


def test_train_config_rejects_bad_values():
    with pytest.raises(ValueError):
        TrainConfig(lo=(1.0,), hi=(1.0,))
    with pytest.raises(ValueError):
        TrainConfig(hidden=MAX_HIDDEN + 1)


def test_train_pair_rejects_zero_width_box():
    with pytest.raises(ValueError):
        train_pair("convex-part", TrainConfig(lo=(0.0,), hi=(0.0,)))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported():
    with pytest.raises(TrainingDivergedError):
        train_pair("convex-part", TrainConfig(learning_rate=1e200, epochs=5, polish_iters=0, prune_tol=0.0))


@pytest.fixture(scope="module")
def scalar_pair():
    return train_pair("convex-part"), train_pair("concave-part")


def test_scalar_convex_part_within_one_percent(scalar_pair):
    net = scalar_pair[0]
    x = _heldout(-10.0, 10.0, 1000)
    err = np.max(np.abs(forward(net, x) - np.maximum(x, 0) ** 2))
    assert err <= 0.01 * 100.0
    assert sign_feasible(net) and max(net.hidden_sizes) <= MAX_HIDDEN


def test_training_is_deterministic(scalar_pair):
    again = train_pair("convex-part")
    assert all(np.array_equal(a, b) for a, b in zip(again.weights, scalar_pair[0].weights))


def test_trained_nets_have_the_right_curvature(scalar_pair):
    x = np.sort(np.random.default_rng(3).uniform(-10, 10, size=(100, 3)), axis=1)
    for net, sgn in zip(scalar_pair, (1, -1)):
        a, b, c = (forward(net, x[:, i]) for i in range(3))
        lam = (x[:, 2] - x[:, 1]) / (x[:, 2] - x[:, 0])
        assert np.all(sgn * (b - (lam * a + (1 - lam) * c)) <= 1e-9)


def test_dyn_convex_part_within_two_percent():
    cfg = TrainConfig(lo=(0.0, 0.4), hi=(10.0, 1.2))
    net = train_pair("dyn-convex", cfg)
    g = np.stack(np.meshgrid(_heldout(0, 10, 32), _heldout(0.4, 1.2, 32)), -1).reshape(-1, 2)
    target = np.maximum(g[:, 0], 0) ** 2 / g[:, 1]
    assert np.max(np.abs(forward(net, g) - target)) <= 0.02 * np.max(np.abs(target))


def test_dyn_target_needs_positive_diameters():
    with pytest.raises(ValueError):
        train_pair("dyn-convex", TrainConfig(lo=(0.0, 0.0), hi=(1.0, 1.0)))


def test_net_document_roundtrip(tmp_path, scalar_pair):
    net = scalar_pair[1]
    save_net(net, tmp_path / "n.json")
    back = load_net(tmp_path / "n.json")
    x = np.linspace(-10, 10, 101)
    assert np.array_equal(forward(back, x), forward(net, x))
    assert back.orientation == "concave" and back.metadata["seed"] == 0 and "final_loss" in back.metadata
