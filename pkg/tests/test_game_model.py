import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alphapotential.game_model import (
    Coefficient,
    GameSpecError,
    LqGameSpec,
    build_lifted_matrices,
    expand_regime_weights,
    general_from_lq,
    make_regime_weights,
    parse_game_spec,
    spec_to_json,
)

BASIC_CONFIG = """
game:
  n_players: 2
  horizon: 1.0
  weights: {mode: matrix, matrix: [[0, 1], [1, 0]]}
  gamma: [1, 1]
  d: [0, 0]
  x0: [0, 0]
  drift: 0.0
  vol: 1.0
  control_bound: 10.0
"""


def make_spec(**overrides):
    base = dict(
        n_players=2,
        horizon=1.0,
        q=[[0.0, 1.0], [1.0, 0.0]],
        gamma=[1.0, 1.0],
        d=[0.0, 0.0],
        x0=[0.0, 0.0],
        a_fn=Coefficient.constant(0.0),
        sigma_fn=Coefficient.constant(1.0),
    )
    base.update(overrides)
    return LqGameSpec(**base)


def test_parse_round_trip_of_explicit_fields():
    spec = parse_game_spec(BASIC_CONFIG)
    assert spec.n_players == 2
    assert spec.horizon == 1.0
    assert np.array_equal(spec.q, [[0, 1], [1, 0]])
    assert np.array_equal(spec.gamma, [1, 1])
    assert spec.control_bound == 10.0
    again = parse_game_spec(spec_to_json(spec))
    assert again == spec


def test_parse_exponential_regime():
    cfg = """
game:
  n_players: 2
  horizon: 1.0
  weights:
    mode: regime
    regime: {kind: exponential, w: [1, 2]}
  gamma: 1.0
  d: 0.0
  x0: 0.0
  vol: 1.0
"""
    spec = parse_game_spec(cfg)
    assert spec.q[0, 1] == pytest.approx(1.0 * math.exp(-1.0))
    assert spec.q[1, 0] == pytest.approx(2.0 * math.exp(-1.0))


def test_parse_negative_gamma_reports_field():
    cfg = BASIC_CONFIG.replace("gamma: [1, 1]", "gamma: [-1, 1]")
    with pytest.raises(GameSpecError, match=r"gamma\[0\]"):
        parse_game_spec(cfg)


@pytest.mark.parametrize(
    "mangle, message",
    [
        (lambda c: c.replace("  horizon: 1.0\n", ""), "game.horizon missing"),
        (lambda c: c.replace("horizon: 1.0", "horizon: -2.0"), "horizon"),
        (lambda c: c.replace("mode: matrix", "mode: nonsense"), "weights.mode"),
    ],
)
def test_parse_schema_violations(mangle, message):
    with pytest.raises(GameSpecError, match=message):
        parse_game_spec(mangle(BASIC_CONFIG))


def test_regime_weights_exponential_n3():
    q = make_regime_weights("exponential", 3, w=[1.0, 1.5, 2.0])
    # hand-evaluated w_i * exp(-|i-j|)
    assert q[0, 2] == pytest.approx(math.exp(-2.0))
    assert q[0, 1] == pytest.approx(math.exp(-1.0))
    assert q[2, 0] == pytest.approx(2.0 * math.exp(-2.0))
    assert np.all(np.diag(q) == 0.0)


def test_regime_weights_power_law_n3():
    q = make_regime_weights("power_law", 3, w=[1.0, 1.5, 2.0], beta=0.5)
    assert q[0, 2] == pytest.approx(1.0 / math.sqrt(2.0))
    assert q[0, 1] == pytest.approx(1.0)
    assert np.all(np.diag(q) == 0.0)


def test_regime_weights_symmetric_constant():
    q = make_regime_weights("symmetric", 2, c=1.0)
    assert np.array_equal(q, [[0.0, 1.0], [1.0, 0.0]])


def test_regime_weights_errors():
    with pytest.raises(GameSpecError, match="beta"):
        make_regime_weights("power_law", 3, w=[1, 2, 3], beta=1.5)
    with pytest.raises(GameSpecError, match="distinct"):
        make_regime_weights("exponential", 3, w=[1.0, 1.0, 2.0])
    with pytest.raises(GameSpecError, match="positive"):
        make_regime_weights("exponential", 2, w=[1.0, -2.0])


def test_expand_regime_weights_pattern_distinct():
    q4 = expand_regime_weights({"kind": "exponential", "w_pattern": {"values": [1.0, 2.0], "jitter": 1e-3}}, 4)
    assert q4.shape == (4, 4)
    q32 = expand_regime_weights({"kind": "exponential", "w_pattern": {"values": [1.0, 2.0], "jitter": 1e-3}}, 32)
    assert q32.shape == (32, 32)


def test_lifted_p_vec_single_player():
    spec = make_spec(n_players=1, q=[[0.0]], gamma=[1.0], d=[2.0], x0=[0.0])
    lifted = build_lifted_matrices(spec)
    # p = -vcat(0_N, gamma_i d_i)
    assert np.array_equal(lifted.p_vec, [0.0, -2.0])


def test_lifted_q_tilde_hand_example():
    spec = make_spec(q=[[0.0, 4.0], [2.0, 0.0]])
    lifted = build_lifted_matrices(spec)
    assert np.allclose(lifted.q_tilde, [[2.0, -2.0], [-1.0, 1.0]])


def test_q_tilde_rows_sum_to_zero_and_symmetry():
    rng = np.random.default_rng(0)
    for _ in range(10):
        n = int(rng.integers(1, 6))
        q = rng.uniform(0, 3, (n, n))
        spec = make_spec(
            n_players=n,
            q=q,
            gamma=rng.uniform(0, 2, n),
            d=rng.normal(size=n),
            x0=rng.normal(size=n),
        )
        lifted = build_lifted_matrices(spec)
        assert np.allclose(lifted.q_tilde @ np.ones(n), 0.0, atol=1e-14)
        assert np.array_equal(lifted.q, lifted.q.T)
        assert np.array_equal(lifted.q_bar, lifted.q_bar.T)
        assert np.allclose(lifted.q[:n, :n], 0.0)
        assert np.allclose(lifted.q[n:, n:], 0.0)


def test_quadratic_form_identity():
    # vcat(x, y)^T Q vcat(x, y) == 2 y^T q_tilde x
    rng = np.random.default_rng(1)
    spec = make_spec(n_players=3, q=rng.uniform(0, 2, (3, 3)), gamma=[1, 1, 1], d=[0, 0, 0], x0=[0, 0, 0])
    lifted = build_lifted_matrices(spec)
    for _ in range(20):
        x, y = rng.normal(size=3), rng.normal(size=3)
        z = np.concatenate([x, y])
        assert z @ lifted.q @ z == pytest.approx(2.0 * y @ lifted.q_tilde @ x, rel=1e-12, abs=1e-12)


def test_i_tilde_block_constants():
    lifted = build_lifted_matrices(make_spec())
    n = 2
    eye = np.eye(n)
    assert np.array_equal(lifted.i_tilde[:, :n], 0.5 * eye)
    assert np.array_equal(lifted.i_tilde[:, n : 2 * n], eye)
    assert np.array_equal(lifted.i_tilde[:, 2 * n : 3 * n], eye / 3.0)
    assert np.array_equal(lifted.i_tilde[:, 3 * n :], 0.5 * eye)


def test_lifted_A_matches_drift():
    spec = make_spec(a_fn=(Coefficient("affine", (0.5, 1.0)), Coefficient.constant(-1.0)))
    lifted = build_lifted_matrices(spec)
    A = lifted.A(0.25)
    assert np.allclose(np.diag(A), [0.75, -1.0, 0.75, -1.0])
    assert np.allclose(A - np.diag(np.diag(A)), 0.0)


def test_symmetric_regime_asymmetry_zero():
    from alphapotential.alpha_bounds import asymmetry_index

    q = make_regime_weights("symmetric", 5, c=2.0)
    assert asymmetry_index(q) == 0.0


def test_spec_diag_q_zeroed_and_immutability():
    spec = make_spec(q=[[3.0, 1.0], [1.0, 5.0]])
    assert spec.q[0, 0] == 0.0 and spec.q[1, 1] == 0.0
    with pytest.raises(ValueError):
        spec.q[0, 1] = 7.0


def test_coefficient_kinds_and_round_trip():
    for coeff, at, want in [
        (Coefficient.constant(2.5), 0.3, 2.5),
        (Coefficient("affine", (1.0, 2.0)), 0.5, 2.0),
        (Coefficient("sinusoid", (1.0, 0.5, math.pi, 0.0)), 0.5, 1.5),
        (Coefficient("tabulated", ((0.0, 1.0), (0.0, 2.0))), 0.25, 0.5),
    ]:
        assert float(coeff(at)) == pytest.approx(want)
        assert Coefficient.from_dict(coeff.to_dict()) == coeff


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=5),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_round_trip_property(n, seed):
    rng = np.random.default_rng(seed)
    spec = make_spec(
        n_players=n,
        q=rng.uniform(0, 2, (n, n)),
        gamma=rng.uniform(0, 2, n),
        d=rng.normal(size=n),
        x0=rng.normal(size=n),
        horizon=float(rng.uniform(0.1, 2.0)),
    )
    assert parse_game_spec(spec_to_json(spec)) == spec


def test_general_from_lq_derivatives_pass_fd_check():
    rng = np.random.default_rng(3)
    spec = make_spec(
        n_players=3,
        q=rng.uniform(0, 2, (3, 3)),
        gamma=[0.5, 1.0, 2.0],
        d=[1.0, -1.0, 0.0],
        x0=[0.0, 0.5, -0.5],
        a_fn=Coefficient("affine", (0.2, -0.1)),
    )
    general_from_lq(spec).check_derivatives(seed=0, n_points=5)
