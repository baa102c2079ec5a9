import numpy as np

from rwrslab.rng import generator, hash_normal, hash_sign, hash_uniform


def test_hash_uniform_deterministic_and_in_unit_interval():
    sites = np.arange(-500, 500)
    u1 = hash_uniform(42, 3, sites)
    u2 = hash_uniform(42, 3, sites)
    assert np.array_equal(u1, u2)
    assert np.all((u1 > 0) & (u1 < 1))


def test_hash_streams_differ_by_seed_and_tag():
    sites = np.arange(2000)
    a = hash_uniform(1, 3, sites)
    b = hash_uniform(2, 3, sites)
    c = hash_uniform(1, 4, sites)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.1
    assert abs(np.corrcoef(a, c)[0, 1]) < 0.1


def test_hash_sign_is_rademacher():
    s = hash_sign(7, 3, np.arange(4000))
    assert set(np.unique(s)) == {-1.0, 1.0}
    assert abs(s.mean()) < 0.06


def test_hash_normal_moments():
    z = hash_normal(11, 3, np.arange(20000))
    assert abs(z.mean()) < 0.03
    assert abs(z.std() - 1.0) < 0.03


def test_hash_two_dimensional_sites():
    sites = np.array([[0, 0], [0, 1], [1, 0], [-1, 0], [0, -1]])
    u = hash_uniform(5, 3, sites)
    assert len(np.unique(u)) == len(sites)


def test_generator_stream_independence_and_determinism():
    a = generator(9, 1, 0).random(5)
    b = generator(9, 1, 0).random(5)
    c = generator(9, 1, 1).random(5)
    d = generator(9, 2, 0).random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)
