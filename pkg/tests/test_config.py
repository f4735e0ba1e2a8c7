import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfl.config import DEFAULT_BOXES, KEYS, parse_config
from mfl.errors import ConfigError
from mfl.io import canonical_json

MINIMAL = "model = mckean_ou\ntheta = [-1, 1, 0.5]\n"


def errors_of(text, kind="simulate", **kw):
    with pytest.raises(ConfigError) as info:
        parse_config(text, kind=kind, **kw)
    return info.value.errors


def test_minimal_config_fills_defaults():
    cfg = parse_config(MINIMAL, kind="simulate")
    assert cfg.kind == "simulate"
    assert cfg["N"] == KEYS["N"][1] and cfg["m"] == KEYS["m"][1]
    assert cfg["box_lower"] == DEFAULT_BOXES["mckean_ou"][0]
    assert cfg["method"] == "linear"
    assert cfg.model().p == 3
    assert cfg.grid().m == cfg["m"]


def test_nonlinear_family_defaults_to_numeric():
    cfg = parse_config("model = nonlinear_f\ntheta = [1]", kind="estimate")
    assert cfg["method"] == "numeric"


def test_zero_theta1_names_the_nondegeneracy_constraint():
    errs = errors_of("model = mckean_ou\n\ntheta = [0, 1, 0.5]\n"
                     "box_lower = [-1, -1, 1]\nbox_upper = [-0.5, 1, 2]\n")
    assert any(e.startswith("line 3:") and "non-degeneracy" in e for e in errs)


def test_duplicate_key_reports_both_lines():
    errs = errors_of(MINIMAL + "[run]\nN = 10\n# again\nN = 20\n")
    assert errs == ["line 6: duplicate key 'N' (first set on line 4)"]


def test_unknown_key_reported_with_line():
    errs = errors_of(MINIMAL + "particles = 10\n")
    assert errs == ["line 3: unknown key 'particles'"]


def test_all_errors_collected():
    errs = errors_of("model = mckean_ou\nN = -3\nm = 2.5\nfoo = 1\nthis line is bad\n")
    text = "\n".join(errs)
    assert "m must be an integer" in text
    assert "unknown key 'foo'" in text
    assert "expected 'key = value'" in text
    assert len(errs) >= 3


def test_semantic_errors():
    assert "N must be positive" in errors_of(MINIMAL + "N = 0\n")
    assert any("requires theta" in e for e in errors_of("model = mckean_ou\n", kind="lan"))
    assert any("requires theta2" in e for e in errors_of(
        "model = double_layer\ntheta = [1, 0.5, 1, 2]\n", kind="identifiability"))
    assert any("R >= 2" in e for e in errors_of(MINIMAL, kind="normality"))
    assert any("three distinct" in e for e in errors_of(MINIMAL + "N_levels = [10, 20]\n", kind="chaos-rate"))
    assert any("needs a linear family" in e for e in errors_of(
        "model = nonlinear_f\ntheta = [1]\nmethod = linear\n", kind="estimate"))
    assert any("unknown model" in e for e in errors_of("model = vicsek\n"))
    assert any("unknown kernel" in e for e in errors_of("model = gen_linear\ntheta = [1, 1]\ng = cosine\n"))


def test_missing_model_and_kind():
    errs = errors_of("N = 10\n", kind=None)
    assert "missing required key 'model'" in errs
    assert "missing experiment kind" in errs


def test_kind_mismatch():
    errs = errors_of("kind = lan\n" + MINIMAL, kind="simulate")
    assert any("invoked as 'simulate'" in e for e in errs)


def test_cli_seed_override():
    cfg = parse_config(MINIMAL + "seed = 3\n", kind="simulate", overrides={"seed": 99})
    assert cfg["seed"] == 99


def test_sweep_expands_cartesian_product():
    cfg = parse_config(MINIMAL + "N = [10, 20]\nm = [5, 6, 7]\n", kind="simulate")
    kids = cfg.children()
    assert cfg.sweep == ("N", "m")
    assert [(k["N"], k["m"]) for k in kids] == [(n, m) for n in (10, 20) for m in (5, 6, 7)]
    assert len({k["seed"] for k in kids}) == 6
    assert all(not k.sweep for k in kids)


def test_seed_sweep_keeps_given_seeds():
    cfg = parse_config(MINIMAL + "seed = [4, 5]\n", kind="simulate")
    assert [k["seed"] for k in cfg.children()] == [4, 5]


def test_lists_for_non_sweepable_keys_are_not_sweeps():
    cfg = parse_config(MINIMAL, kind="simulate")
    assert cfg.sweep == () and cfg.children() == [cfg]


@settings(max_examples=30, deadline=None)
@given(st.permutations(["model = mckean_ou", "theta = [-1, 1, 0.5]", "N = 12", "m = 7", "seed = 5",
                        "init = gaussian", "init_var = 0.5"]))
def test_canonical_form_ignores_key_order(lines):
    cfg = parse_config("\n".join(lines), kind="simulate")
    ref = parse_config("\n".join(sorted(lines)), kind="simulate")
    assert canonical_json(cfg.canonical()) == canonical_json(ref.canonical())


def test_comments_and_sections_ignored():
    cfg = parse_config("# header\n[model]\nmodel = mckean_ou  # inline\n[params]\ntheta = [-1, 1, 0.5]\n",
                       kind="simulate")
    assert cfg["model"] == "mckean_ou"
