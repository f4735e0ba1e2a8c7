import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mfl import io
from mfl.simulate import ParticlePaths, TimeGrid

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=50, deadline=None)
@given(finite)
def test_fmt_round_trips_every_double(x):
    assert float(io.fmt(x)) == x


def test_fmt_types():
    assert io.fmt(True) == "1" and io.fmt(np.bool_(False)) == "0"
    assert io.fmt(np.int64(7)) == "7"
    assert io.fmt(0.1) == "0.10000000000000001"


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(1, 5), st.integers(1, 2), st.data())
def test_paths_round_trip(tmp_path_factory, N, m, d, data):
    tmp = tmp_path_factory.mktemp("paths")
    grid = TimeGrid(0.7, m)
    reps = []
    for rep in (0, 3):
        values = data.draw(arrays(float, (N, m + 1, d), elements=st.floats(-1e6, 1e6, allow_nan=False)))
        reps.append(ParticlePaths(values, grid, seed=11, rep=rep, model="mckean_ou", theta=(-1.0, 1.0, 0.5)))
    io.write_paths(tmp / "paths", reps)
    back = io.read_paths(tmp / "paths")
    assert [p.rep for p in back] == [0, 3]
    for a, b in zip(reps, back):
        assert np.array_equal(a.data, b.data)
        assert b.theta == a.theta and b.seed == 11 and b.model == "mckean_ou"
        assert b.grid == a.grid


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 5).flatmap(lambda n: arrays(float, (n, n), elements=finite)))
def test_matrix_round_trip(tmp_path_factory, mat):
    path = tmp_path_factory.mktemp("mat") / "m.csv"
    io.write_matrix(path, mat)
    assert np.array_equal(io.read_matrix(path), mat)


def test_summary_round_trip(tmp_path):
    io.write_summary(tmp_path / "s.txt", {"a": 1.5, "flag": True, "vec": np.array([1.0, 2.0])})
    assert io.read_summary(tmp_path / "s.txt") == {"a": "1.5", "flag": "1", "vec": "1 2"}


def test_canonical_json_is_order_free():
    a = io.canonical_json({"b": np.float64(1.0), "a": [np.int32(2), True]})
    b = io.canonical_json({"a": [2, True], "b": 1.0})
    assert a == b == '{"a":[2,true],"b":1.0}'


def test_csv_uses_unix_newlines(tmp_path):
    io.write_csv(tmp_path / "x.csv", ["a", "b"], [[1, 0.5]])
    assert (tmp_path / "x.csv").read_bytes() == b"a,b\n1,0.5\n"
    assert io.read_csv(tmp_path / "x.csv") == (["a", "b"], [["1", "0.5"]])


def test_sha256_file(tmp_path):
    (tmp_path / "f").write_bytes(b"abc")
    assert io.sha256_file(tmp_path / "f") == (
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    )
