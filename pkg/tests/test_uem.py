import numpy as np
import pytest

from uesr.autodiff import grad_check
from uesr.uem import UEM, UEMBatch, UEMConfig, one_hot, prediction_loss, reconstruction_loss


@pytest.fixture
def uem():
    return UEM(UEMConfig(), np.random.default_rng(0))


def _batch(rng, m=8):
    return UEMBatch(
        prev_obs=rng.uniform(size=(m, 80)),
        prev_action=rng.integers(0, 5, size=m),
        inbox=rng.uniform(size=(m, 10)),
        curr_obs=rng.uniform(size=(m, 80)),
    )


def test_zero_observation_embeds_to_zero(uem):
    assert not uem.embed(np.zeros(80)).any()


def test_embedding_is_pure_and_checks_length(uem):
    o = np.random.default_rng(1).uniform(size=80)
    assert np.array_equal(uem.embed(o), uem.embed(o))
    assert (uem.embed(o) >= 0).all()
    with pytest.raises(ValueError):
        uem.embed(np.zeros(79))


def test_zero_weights_predict_zero(uem):
    for _, p in uem.f.items():
        p.data[...] = 0.0
    assert not uem.predict(np.ones(64), 2, np.ones(10)).any()


def test_prediction_is_stateless(uem):
    rng = np.random.default_rng(2)
    e, inbox = rng.uniform(size=64), rng.uniform(size=10)
    first = uem.predict(e, 3, inbox)
    uem.predict(rng.uniform(size=64), 1, rng.uniform(size=10))
    assert np.array_equal(first, uem.predict(e, 3, inbox))
    with pytest.raises(ValueError):
        uem.predict(np.ones(63), 0, inbox)


def test_unexpectedness_arithmetic():
    rng = np.random.default_rng(3)
    actual = rng.uniform(size=64)
    assert not UEM.unexpectedness(actual, actual).any()
    e1 = np.zeros(64)
    e1[0] = 1.0
    x = UEM.unexpectedness(actual + e1, actual)
    np.testing.assert_allclose(x, e1, atol=1e-15)
    assert np.linalg.norm(x) == pytest.approx(1.0)
    a, b = rng.normal(size=64), rng.normal(size=64)
    x = UEM.unexpectedness(a, b)
    assert abs(np.sqrt(np.sum((a - b) ** 2)) - np.linalg.norm(x)) < 1e-12


def test_prediction_loss_is_the_norm_of_unexpectedness(uem):
    rng = np.random.default_rng(4)
    b = _batch(rng)
    x = uem.surprise(b.prev_obs, b.prev_action, b.inbox, b.curr_obs)
    loss = prediction_loss(uem.f, uem.embed(b.prev_obs), one_hot(b.prev_action, 5), b.inbox, uem.embed(b.curr_obs))
    assert loss.item() == pytest.approx(np.linalg.norm(x, axis=1).mean(), abs=1e-7)


def test_perfect_prediction_has_near_zero_loss(uem):
    g = np.random.default_rng(5).uniform(size=(1, 64))
    for _, p in uem.f.items():
        p.data[...] = 0.0
    loss = prediction_loss(uem.f, g, one_hot([0], 5), np.zeros((1, 10)), np.zeros((1, 64)))
    assert loss.item() == pytest.approx(0.0, abs=1e-4)  # sqrt of the 1e-8 epsilon


def test_zero_encoder_emits_one_half(uem):
    for _, p in uem.ae.items():
        p.data[...] = 0.0
    np.testing.assert_array_equal(uem.encode_message(np.ones(64)), np.full(10, 0.5))


def test_message_elements_in_open_unit_interval(uem):
    xs = np.random.default_rng(6).normal(scale=3.0, size=(500, 64))
    m = uem.encode_message(xs)
    assert m.shape == (500, 10)
    assert (m > 0).all() and (m < 1).all()
    assert uem.decode(m).shape == (500, 64)


def test_update_leaves_g_bitwise_and_moves_f_and_autoencoder(uem):
    rng = np.random.default_rng(7)
    g0 = {k: v.data.copy() for k, v in uem.g.items()}
    f0 = uem.f.snapshot()
    ae0 = uem.ae.snapshot()
    for _ in range(5):
        lp, le = uem.update(_batch(rng))
        assert np.isfinite(lp) and np.isfinite(le)
    for k, v in uem.g.items():
        assert np.array_equal(v.data, g0[k])
        assert v.grad is None
    assert any(not np.array_equal(uem.f[k].data, f0[k]) for k in f0)
    assert any(not np.array_equal(uem.ae[k].data, ae0[k]) for k in ae0)


def test_reconstruction_loss_ignores_f_for_fixed_x(uem):
    x = np.random.default_rng(8).normal(size=(4, 64))
    before = reconstruction_loss(uem.ae, x).item()
    for _, p in uem.f.items():
        p.data += 1.0
    assert reconstruction_loss(uem.ae, x).item() == before


def test_prediction_loss_ignores_autoencoder(uem):
    b = _batch(np.random.default_rng(9))
    args = (uem.embed(b.prev_obs), one_hot(b.prev_action, 5), b.inbox, uem.embed(b.curr_obs))
    before = prediction_loss(uem.f, *args).item()
    for _, p in uem.ae.items():
        p.data += 1.0
    assert prediction_loss(uem.f, *args).item() == before


def test_update_does_not_mix_gradients(uem):
    """An update equals separate steps on each loss: f moves only with L_pred, ae only with L_enc."""
    rng = np.random.default_rng(10)
    b = _batch(rng)
    twin = UEM(UEMConfig(), np.random.default_rng(0))
    uem.update(b)
    # replay on the twin by hand, one loss per parameter set
    from uesr.autodiff import adam_step

    g_prev, g_curr = twin.embed(b.prev_obs), twin.embed(b.curr_obs)
    x = twin.predict(g_prev, b.prev_action, b.inbox) - g_curr
    prediction_loss(twin.f, g_prev, one_hot(b.prev_action, 5), b.inbox, g_curr).backward()
    adam_step(twin.f, twin.optim)
    reconstruction_loss(twin.ae, x).backward()
    adam_step(twin.ae, twin.optim)
    for k in uem.f.names():
        assert np.array_equal(uem.f[k].data, twin.f[k].data)
    for k in uem.ae.names():
        assert np.array_equal(uem.ae[k].data, twin.ae[k].data)


def test_single_sample_gradients():
    rng = np.random.default_rng(11)
    uem = UEM(UEMConfig(hidden=6, obs_size=7, inbox_len=3, ues_len=4), rng)
    o_prev, o_curr = rng.uniform(size=(1, 7)), rng.uniform(size=(1, 7))
    args = (uem.embed(o_prev), one_hot([1], 5), rng.uniform(size=(1, 3)), uem.embed(o_curr))
    assert grad_check(lambda: prediction_loss(uem.f, *args), uem.f, tolerance=1e-5).passed
    x = rng.normal(size=(1, 6))
    assert grad_check(lambda: reconstruction_loss(uem.ae, x), uem.ae, tolerance=1e-5).passed


def test_update_raises_on_nan(uem):
    b = _batch(np.random.default_rng(12))
    bad = b._replace(curr_obs=np.full_like(b.curr_obs, np.nan))
    with pytest.raises(FloatingPointError):
        uem.update(bad)


def test_state_dict_round_trip(uem):
    uem.update(_batch(np.random.default_rng(13)))
    state = uem.state_dict("u/")
    assert any(k.startswith("u/g/") for k in state)
    other = UEM(UEMConfig(), np.random.default_rng(99))
    other.load_state_dict(state, "u/")
    o = np.random.default_rng(14).uniform(size=(3, 80))
    assert np.array_equal(other.embed(o), uem.embed(o))
    assert np.array_equal(other.encode_message(np.ones(64)), uem.encode_message(np.ones(64)))
