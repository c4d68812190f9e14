"""Network math, replay mechanics, masked action selection, and training."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frugalnn import dqn
from frugalnn.cluster import kmeans
from frugalnn.data import CostSchedule
from frugalnn.env import Environment
from frugalnn.errors import TrainingDiverged
from frugalnn.synthetic import oracle_pair


def small_net(n_inputs=3, n_actions=4, hidden=(6, 5), seed=0):
    return dqn.QNetwork(n_inputs, n_actions, hidden, np.random.default_rng(seed))


class ConstNet:
    """Duck-typed stand-in whose forward always returns the given Q rows."""

    def __init__(self, q):
        self.q = np.asarray(q, dtype=float)

    def forward(self, x):
        if np.ndim(x) == 1:
            return self.q[0]
        return np.repeat(self.q, np.atleast_2d(x).shape[0] // self.q.shape[0],
                         axis=0) if self.q.shape[0] > 1 else \
            np.tile(self.q, (np.atleast_2d(x).shape[0], 1))


def test_hyper_validation():
    with pytest.raises(ValueError):
        dqn.DqnHyper(gamma=1.5)
    with pytest.raises(ValueError):
        dqn.DqnHyper(eps_decay=0.0)


def test_epsilon_schedule_default_run_length():
    eps = dqn.epsilon_schedule(1.0, 0.999, 4000)
    assert eps == pytest.approx(0.999 ** 4000)
    assert abs(eps - 0.018) < 1e-3


def test_network_shapes_and_init_bounds():
    net = small_net(n_inputs=7, n_actions=3, hidden=(10, 9), seed=4)
    assert net.params["W1"].shape == (7, 10)
    assert net.params["W2"].shape == (10, 9)
    assert net.params["Wv"].shape == (9, 1)
    assert net.params["Wa"].shape == (9, 3)
    for key, fan_in in [("W1", 7), ("b1", 7), ("W2", 10), ("b2", 10),
                        ("Wv", 9), ("bv", 9), ("Wa", 9), ("ba", 9)]:
        assert np.all(np.abs(net.params[key]) <= 1.0 / np.sqrt(fan_in))


def test_dueling_identity():
    # Q = V + A - mean(A) forces mean_a Q(s, a) = V(s)
    net = small_net(n_inputs=5, n_actions=6, seed=1)
    x = np.random.default_rng(2).normal(size=(200, 5))
    Q, V, A, _ = net.forward_full(x)
    assert np.max(np.abs(Q.mean(axis=1) - V[:, 0])) < 1e-12
    assert np.max(np.abs(Q - (V + A - A.mean(axis=1, keepdims=True)))) == 0.0


def test_forward_1d_matches_batch_row():
    net = small_net(seed=3)
    x = np.array([0.2, -1.0, 0.5])
    single = net.forward(x)
    batch = net.forward(np.vstack([x, x]))
    assert single.shape == (4,)
    assert np.array_equal(single, batch[0])


def test_gradients_match_central_differences():
    rng = np.random.default_rng(8)
    net = small_net(n_inputs=3, n_actions=3, hidden=(5, 4), seed=8)
    batch = dqn.Batch(
        states=rng.normal(size=(6, 3)),
        actions=rng.integers(0, 3, size=6),
        rewards=np.zeros(6),
        next_states=np.zeros((6, 3)),
        next_masks=np.ones((6, 3), dtype=bool),
        dones=np.ones(6, dtype=bool),
    )
    targets = rng.normal(size=6)
    _, grads = dqn.td_loss_and_grads(net, batch, targets)
    h = 1e-6
    for key in dqn.PARAM_KEYS:
        w = net.params[key]
        for idx in np.ndindex(w.shape):
            orig = w[idx]
            w[idx] = orig + h
            lp = dqn.td_loss_and_grads(net, batch, targets)[0]
            w[idx] = orig - h
            lm = dqn.td_loss_and_grads(net, batch, targets)[0]
            w[idx] = orig
            numeric = (lp - lm) / (2 * h)
            analytic = grads[key][idx]
            err = abs(analytic - numeric) / max(abs(numeric), abs(analytic), 1e-8)
            assert err < 1e-4, f"{key}{idx}: {analytic} vs {numeric}"


def test_double_target_hand_fixture():
    online = ConstNet([[1.0, 5.0, 3.0]])
    target = ConstNet([[10.0, 20.0, 30.0]])
    batch = dqn.Batch(
        states=np.zeros((2, 2)),
        actions=np.zeros(2, dtype=int),
        rewards=np.array([2.0, 2.0]),
        next_states=np.zeros((2, 2)),
        # action 1 has the best online Q but is masked out, so the online
        # argmax lands on action 2 and the target net prices it at 30
        next_masks=np.array([[True, False, True], [True, False, True]]),
        dones=np.array([False, True]),
    )
    y = dqn.double_target(batch, online, target, gamma=0.5)
    assert y[0] == pytest.approx(2.0 + 0.5 * 30.0)
    assert y[1] == pytest.approx(2.0)


def test_td_loss_value():
    net = ConstNet([[1.0, 3.0]])

    class Wrap:
        n_actions = 2

        def forward_full(self, x):
            Q = np.tile(np.array([[1.0, 3.0]]), (np.atleast_2d(x).shape[0], 1))
            return Q, None, None, None

        def backward(self, cache, dQ):
            return {}

    batch = dqn.Batch(states=np.zeros((2, 1)), actions=np.array([0, 1]),
                      rewards=np.zeros(2), next_states=np.zeros((2, 1)),
                      next_masks=np.ones((2, 2), dtype=bool),
                      dones=np.ones(2, dtype=bool))
    loss, _ = dqn.td_loss_and_grads(Wrap(), batch, np.array([0.0, 0.0]))
    # diffs are (1, 3): mean of squares = 5
    assert loss == pytest.approx(5.0)


def test_replay_ring_overwrites_oldest():
    buf = dqn.ReplayBuffer(capacity=3, n_inputs=1, n_actions=2)
    for i in range(5):
        buf.push(np.array([float(i)]), 0, 0.0, np.array([0.0]),
                 np.array([True, True]), False)
    assert len(buf) == 3
    assert sorted(buf.states[:, 0].tolist()) == [2.0, 3.0, 4.0]


def test_replay_sample_draws_stored_rows():
    buf = dqn.ReplayBuffer(capacity=8, n_inputs=2, n_actions=3)
    for i in range(5):
        buf.push(np.array([i, i]), i % 3, float(i), np.array([i, 0.0]),
                 np.array([True, False, True]), bool(i % 2))
    batch = buf.sample(np.random.default_rng(0), 12)
    assert batch.states.shape == (12, 2)
    assert set(batch.states[:, 0].tolist()) <= {0.0, 1.0, 2.0, 3.0, 4.0}
    for j in range(12):
        i = int(batch.states[j, 0])
        assert batch.actions[j] == i % 3
        assert batch.rewards[j] == float(i)
        assert batch.dones[j] == bool(i % 2)


def test_train_step_rejects_nonfinite_loss():
    net = small_net(seed=0)
    target = net.copy()
    batch = dqn.Batch(states=np.zeros((2, 3)), actions=np.array([0, 1]),
                      rewards=np.array([1e308, 1e308]),
                      next_states=np.zeros((2, 3)),
                      next_masks=np.ones((2, 4), dtype=bool),
                      dones=np.ones(2, dtype=bool))
    with pytest.raises(TrainingDiverged):
        dqn.train_step(net, target, batch, gamma=0.8, lr=0.01)


@given(mask_bits=st.lists(st.booleans(), min_size=1, max_size=6),
       eps=st.floats(0.0, 1.0), seed=st.integers(0, 1000))
@settings(max_examples=150)
def test_act_never_selects_masked_action(mask_bits, eps, seed):
    mask = np.array(mask_bits + [True])  # terminate slot always available
    net = small_net(n_inputs=len(mask_bits), n_actions=mask.size, seed=0)
    state = np.linspace(-1.0, 1.0, len(mask_bits))
    a = dqn.act(net, state, mask, eps, np.random.default_rng(seed))
    assert mask[a]


def test_act_greedy_tie_breaks_to_lowest_index():
    net = ConstNet([[0.0, 0.0, 0.0]])
    assert dqn.act(net, np.zeros(2), np.array([True, True, True]), 0.0) == 0
    assert dqn.act(net, np.zeros(2), np.array([False, True, True]), 0.0) == 1


def test_act_requires_rng_for_exploration():
    net = ConstNet([[0.0, 1.0]])
    with pytest.raises(ValueError):
        dqn.act(net, np.zeros(1), np.array([True, True]), 0.5, None)


def test_act_explores_uniformly_over_available():
    net = ConstNet([[9.0, 0.0, 0.0, 0.0]])
    mask = np.array([False, True, True, True])
    rng = np.random.default_rng(5)
    counts = np.zeros(4, dtype=int)
    for _ in range(600):
        counts[dqn.act(net, np.zeros(3), mask, 1.0, rng)] += 1
    assert counts[0] == 0
    assert np.all(counts[1:] > 120)


def pair_env():
    ds, _ = oracle_pair(seed=0)
    clustering = kmeans(ds.rows, 2, seed=0)
    schedule = CostSchedule(costs=np.array([0.2, 0.3]))
    return Environment(ds.rows, clustering, schedule, alpha=1.0)


def tiny_hyper(seed=0, episodes=40):
    return dqn.DqnHyper(episodes=episodes, lr=0.01, gamma=0.8, eps0=1.0,
                        eps_decay=0.995, hidden=(8, 8), buffer_capacity=500,
                        batch_size=16, sync_interval=25, seed=seed)


def test_train_is_bit_reproducible():
    env = pair_env()
    r1 = dqn.train(env, 0.5, tiny_hyper())
    r2 = dqn.train(env, 0.5, tiny_hyper())
    for key in dqn.PARAM_KEYS:
        assert np.array_equal(r1.network.params[key], r2.network.params[key])
    assert r1.reward_trace == r2.reward_trace
    assert r1.final_epsilon == r2.final_epsilon
    assert r1.train_steps == r2.train_steps


def test_train_epsilon_and_trace_bookkeeping():
    env = pair_env()
    res = dqn.train(env, 0.5, tiny_hyper(episodes=25), trace_every=10)
    assert res.final_epsilon == pytest.approx(0.995 ** 25)
    assert [e for e, _ in res.reward_trace] == [10, 20, 25]
    assert res.train_steps > 0


def test_train_steps_respect_mask_and_budget():
    env = pair_env()
    seen = []

    def observer(state, mask, a_idx, result):
        seen.append((mask[a_idx], result.state.accrued_cost,
                     result.state.budget))

    dqn.train(env, 0.5, tiny_hyper(episodes=30), on_step=observer)
    assert seen
    assert all(ok for ok, _, _ in seen)
    assert all(cost <= budget + 1e-12 for _, cost, budget in seen)


def test_trained_policy_buys_the_deciding_feature():
    # feature 0 alone fixes the cluster ranking; feature 1 is noise costing
    # 0.3, so the optimal policy reveals 0 then stops even though 1 still
    # fits the budget
    env = pair_env()
    budget = 0.5
    res = dqn.train(env, budget, dqn.DqnHyper(
        episodes=800, lr=0.01, gamma=0.8, eps0=1.0, eps_decay=0.995,
        hidden=(16, 16), buffer_capacity=2000, batch_size=32,
        sync_interval=50, seed=0))
    n = env.points.shape[0]
    for i in range(n):
        s = env.reset(i, budget)
        first = dqn.act(res.network, env.encode(s), env.mask(s), 0.0)
        assert first == 0
        r = env.step(s, env.action_from_index(first))
        assert not r.done  # feature 1 still affordable, agent must choose
        second = dqn.act(res.network, env.encode(r.state), env.mask(r.state), 0.0)
        assert env.action_from_index(second).is_terminate


def test_save_load_round_trip(tmp_path):
    net = small_net(seed=6)
    hyper = tiny_hyper(seed=6)
    path = str(tmp_path / "model.npz")
    dqn.save_model(path, net, hyper, meta={"note": "fixture"})
    loaded, hyper2, meta = dqn.load_model(path)
    for key in dqn.PARAM_KEYS:
        assert np.array_equal(loaded.params[key], net.params[key])
    assert hyper2 == hyper
    assert meta == {"note": "fixture"}
    x = np.random.default_rng(0).normal(size=(4, 3))
    assert np.array_equal(loaded.forward(x), net.forward(x))


def test_load_rejects_unknown_version(tmp_path):
    path = str(tmp_path / "bad.npz")
    doc = {"version": 99}
    np.savez(path, __meta__=np.frombuffer(json.dumps(doc).encode(),
                                          dtype=np.uint8))
    with pytest.raises(ValueError):
        dqn.load_model(path)


def test_copy_and_load_from_are_deep():
    net = small_net(seed=7)
    clone = net.copy()
    clone.params["W1"][0, 0] += 1.0
    assert net.params["W1"][0, 0] != clone.params["W1"][0, 0]
    net.load_from(clone)
    assert np.array_equal(net.params["W1"], clone.params["W1"])
