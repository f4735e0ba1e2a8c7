import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from mfl.rng import STREAMS, child_seed, derive_stream, generator

u64 = st.integers(0, 2**64 - 1)


@settings(max_examples=50)
@given(seed=u64, labels=st.lists(st.integers(0, 2**40), max_size=4))
def test_same_inputs_same_key(seed, labels):
    assert derive_stream(seed, *labels) == derive_stream(seed, *labels)
    assert 0 <= derive_stream(seed, *labels) < 2**128


def test_no_collisions_over_a_million_tuples():
    rng = np.random.default_rng(0)
    tuples = {tuple(t) for t in rng.integers(0, 2**31, size=(1_000_000, 4)).tolist()}
    keys = {derive_stream(*t) for t in tuples}
    assert len(keys) == len(tuples)


def test_label_order_and_length_matter():
    assert derive_stream(1, 2, 3) != derive_stream(1, 3, 2)
    assert derive_stream(1, 2) != derive_stream(1, 2, 0)


def test_stream_names_map_to_fixed_labels():
    assert derive_stream(7, "simulate", 0, 1) == derive_stream(7, STREAMS["simulate"], 0, 1)
    assert len(set(STREAMS.values())) == len(STREAMS)


def test_key_is_stable_across_versions():
    # pinned value: changing the mixing function would silently change every artifact
    assert f"{derive_stream(42):032x}" == "101df303916d979c6ce40cb0f4737dde"
    assert f"{derive_stream(0, 1, 0, 0):032x}" == "3a61278c7f61782d3227db9dacf1eff2"


def test_equidistribution_smoke():
    u = generator(123, "verify").random(1_000_000)
    se_mean = np.sqrt(1 / 12 / u.size)
    assert abs(u.mean() - 0.5) <= 4 * se_mean
    # Var of U^2-type estimator: Var((U-1/2)^2) = 1/180
    assert abs(u.var() - 1 / 12) <= 4 * np.sqrt(1 / 180 / u.size)


def test_child_seed_is_u64():
    s = child_seed(5, "sweep", 3)
    assert 0 <= s < 2**64 and s != child_seed(5, "sweep", 4)
