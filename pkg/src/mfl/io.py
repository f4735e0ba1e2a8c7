"""CSV and JSON artifacts.

Floats are written with ``repr``-exact 17 significant digits so that reading
an artifact back reproduces the in-memory values bit for bit.
"""
import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from mfl.simulate import ParticlePaths, TimeGrid

SCHEMA_VERSION = 1


def fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([fmt(v) for v in row])


def read_csv(path):
    """Header and rows as strings; callers convert columns."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def canonical_json(obj):
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def write_json(path, obj):
    Path(path).write_text(json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n", encoding="utf-8")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_summary(path, items):
    """``key: value`` lines in insertion order."""
    lines = [f"{k}: {fmt(v) if not isinstance(v, (list, tuple, np.ndarray)) else ' '.join(fmt(x) for x in np.ravel(v))}"
             for k, v in items.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_summary(path):
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        key, _, value = line.partition(": ")
        out[key] = value
    return out


# -- particle paths ----------------------------------------------------------

def write_paths(stem, paths_list):
    """``<stem>.csv`` with ``rep,particle,step,time,x0..`` rows plus a ``<stem>.json`` sidecar."""
    stem = Path(stem)
    first = paths_list[0]
    header = ["rep", "particle", "step", "time"] + [f"x{k}" for k in range(first.d)]
    times = first.grid.times

    def rows():
        for paths in paths_list:
            for i in range(paths.N):
                for j in range(paths.m + 1):
                    yield [paths.rep, i, j, times[j], *paths.data[i, j]]

    write_csv(stem.with_suffix(".csv"), header, rows())
    write_json(stem.with_suffix(".json"), {
        "schema_version": SCHEMA_VERSION,
        "model": first.model,
        "theta": list(first.theta),
        "N": first.N,
        "m": first.m,
        "T": first.grid.T,
        "d": first.d,
        "seed": first.seed,
        "reps": [p.rep for p in paths_list],
    })


def read_paths(stem):
    stem = Path(stem)
    meta = read_json(stem.with_suffix(".json"))
    _, rows = read_csv(stem.with_suffix(".csv"))
    grid = TimeGrid(meta["T"], meta["m"])
    N, steps, d = meta["N"], meta["m"] + 1, meta["d"]
    values = np.array([[float(v) for v in r[4:]] for r in rows]).reshape(len(meta["reps"]), N, steps, d)
    return [
        ParticlePaths(values[k], grid, seed=meta["seed"], rep=rep, model=meta["model"], theta=meta["theta"])
        for k, rep in enumerate(meta["reps"])
    ]


def write_matrix(path, mat):
    mat = np.atleast_2d(mat)
    write_csv(path, ["row", "col", "value"],
              ([r, c, mat[r, c]] for r in range(mat.shape[0]) for c in range(mat.shape[1])))


def read_matrix(path):
    _, rows = read_csv(path)
    n = max(int(r[0]) for r in rows) + 1
    k = max(int(r[1]) for r in rows) + 1
    mat = np.zeros((n, k))
    for r, c, v in rows:
        mat[int(r), int(c)] = float(v)
    return mat
