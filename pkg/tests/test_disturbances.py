import numpy as np
import pytest

from advsysid.disturbances import (DisturbanceModel, example1_model,
                                   example2_model, iid_gaussian_model,
                                   nondegeneracy_probe, remark1_model,
                                   sample, scripted_model, sign_pos,
                                   symmetry_audit, zero_model)


def draw_many(model, x, n, seed):
    rng = np.random.default_rng(seed)
    ws, flags = [], []
    for _ in range(n):
        w, flag = sample(model, x, rng)
        ws.append(w)
        flags.append(flag)
    return np.array(ws), np.array(flags)


def test_sign_pos_convention():
    assert np.array_equal(sign_pos(np.array([-2.0, 0.0, 3.0])),
                          [-1.0, 1.0, 1.0])


def test_sample_p_zero_always_quiet():
    ws, flags = draw_many(iid_gaussian_model(p=0.0), np.ones(3), 200, seed=0)
    assert not flags.any()
    assert not ws.any()


def test_sample_p_one_always_attacks():
    _, flags = draw_many(iid_gaussian_model(p=1.0), np.ones(2), 200, seed=1)
    assert flags.all()


def test_sample_attack_frequency():
    n = 100_000
    _, flags = draw_many(example1_model(0.7), np.ones(2), n, seed=2)
    assert abs(flags.mean() - 0.7) <= 0.01


def test_sample_deterministic_given_seed():
    model = example2_model(0.4)
    x = np.array([0.5, -1.0])
    a = draw_many(model, x, 50, seed=5)[0]
    b = draw_many(model, x, 50, seed=5)[0]
    assert np.array_equal(a, b)


def test_example1_support_and_sign_bound():
    model = example1_model(0.5)
    rng = np.random.default_rng(3)
    from advsysid.disturbances import _attack_values
    w = _attack_values(model, np.array([0.7, -0.2, 1.5]), 20_000, rng)
    mag = np.abs(w)
    assert np.all((mag >= 1.0) & (mag <= model.beta_bound))
    assert np.all(((mag >= 1.0) & (mag <= 3.0)) | ((mag >= 10.0) & (mag <= 20.0)))


def test_example1_conditional_mean():
    # gamma mixture mean: 0.5*(-2) + 0.5*15 = 6.5, so E[w | attack, x>0] = -6.5
    model = example1_model(0.5)
    rng = np.random.default_rng(4)
    from advsysid.disturbances import _attack_values
    n = 200_000
    w = _attack_values(model, np.array([2.0]), n, rng)
    # mixture std is ~8.6, so a 4-sigma band is ~0.077
    assert w.mean() == pytest.approx(-6.5, abs=0.08)


def test_example1_sign_symmetry():
    audit = symmetry_audit(example1_model(0.7),
                           [np.array([1.0, -2.0]), np.array([-0.3, 0.4])],
                           n=100_000, seed=6)
    assert audit.max_deviation <= 3.0 * np.sqrt(0.25 / 100_000) + 0.01
    assert np.all(audit.freq_zero == 0.0)


def test_example1_shared_gamma_variant():
    model = example1_model(0.5, shared_gamma=True)
    rng = np.random.default_rng(8)
    from advsysid.disturbances import _attack_values
    w = _attack_values(model, np.array([1.0, 1.0, -1.0]), 500, rng)
    # one gamma per step: |w| equal across coordinates
    assert np.allclose(np.abs(w) - np.abs(w[:, :1]), 0.0)


def test_example2_conditional_means():
    model = example2_model(0.45)
    rng = np.random.default_rng(9)
    from advsysid.disturbances import _attack_values
    n = 100_000
    w_pos = _attack_values(model, np.array([3.0]), n, rng)
    w_neg = _attack_values(model, np.array([-3.0]), n, rng)
    se3 = 3.0 * np.sqrt(5.0 / n)
    assert w_pos.mean() == pytest.approx(300.0, abs=se3)
    assert w_neg.mean() == pytest.approx(100.0, abs=se3)
    assert w_pos.var() == pytest.approx(5.0, rel=0.05)


def test_example2_fails_symmetry():
    audit = symmetry_audit(example2_model(0.45), [np.array([1.0, 2.0])],
                           n=10_000, seed=10)
    assert audit.freq_pos.min() > 0.9
    assert audit.max_deviation > 0.9


def test_zero_model_audit_all_zero():
    audit = symmetry_audit(zero_model(), [np.zeros(2)], n=1000, seed=11)
    assert np.all(audit.freq_zero == 1.0)
    assert audit.max_deviation == 0.0


def test_remark1_values():
    model = remark1_model()
    rng = np.random.default_rng(12)
    assert sample(model, np.array([0.3]), rng)[0][0] == -1.0
    assert sample(model, np.array([-0.4]), rng)[0][0] == 1.0
    assert sample(model, np.array([0.0]), rng)[0][0] == -1.0  # sgn(0) := +1


def test_remark1_rejects_vector_state():
    with pytest.raises(ValueError):
        sample(remark1_model(), np.ones(2), np.random.default_rng(0))


def test_model_validation():
    with pytest.raises(ValueError):
        example1_model(0.0)
    with pytest.raises(ValueError):
        example2_model(1.0)
    with pytest.raises(ValueError):
        iid_gaussian_model(p=1.2)
    with pytest.raises(ValueError):
        DisturbanceModel(kind="zero", p=0.5, declared_sigma_w=1.0)
    with pytest.raises(ValueError):
        DisturbanceModel(kind="martian", p=0.5, declared_sigma_w=1.0)


def test_nondegeneracy_probe_gaussian_floor():
    # E[(x+w)(x+w)^T] = x x^T + sigma^2 I: the floor estimate is sigma^2
    sigma = 1.5
    model = iid_gaussian_model(p=0.8, mean=0.0, std=sigma)
    probes = [np.zeros(3), np.array([2.0, -1.0, 0.5])]
    est = nondegeneracy_probe(model, probes, n=60_000, seed=13)
    assert est == pytest.approx(sigma**2, rel=0.05)


def test_nondegeneracy_probe_degenerate_adversary():
    cancel = scripted_model(lambda x, rng: -x, p=1.0, declared_sigma_w=1.0)
    est = nondegeneracy_probe(cancel, [np.array([1.0, 2.0])], n=1000, seed=14)
    assert est == pytest.approx(0.0, abs=1e-12)


def test_nondegeneracy_probe_example2_variance_floor():
    est = nondegeneracy_probe(example2_model(0.45),
                              [np.zeros(4), np.array([1.0, -1.0, 2.0, -2.0])],
                              n=60_000, seed=15)
    assert est >= 4.5
    assert est == pytest.approx(5.0, rel=0.1)


def test_attack_frequency_invariant_all_kinds():
    # empirical attack frequency within 4*sqrt(p(1-p)/n) of p
    n = 20_000
    probes = np.array([0.4, -0.7])
    for model in (example1_model(0.7), example2_model(0.45),
                  iid_gaussian_model(0.3)):
        _, flags = draw_many(model, probes, n, seed=16)
        slack = 4.0 * np.sqrt(model.p * (1 - model.p) / n)
        assert abs(flags.mean() - model.p) <= slack
