import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monopoisson import config as cm
from monopoisson.cli import shipped_configs
from monopoisson.errors import ConfigError

MINIMAL = """
[model]
family = "birth_death"
p = 0.3
"""


def test_minimal_defaults():
    cfg = cm.parse_config(MINIMAL)
    assert cfg.model.N == 20
    assert cfg.reward.form == "identity"
    assert cfg.solver.method == "linear" and cfg.solver.anchor == 0
    assert cfg.split is None
    assert cfg.output.path == "-"


def test_negative_split_lambda_path():
    text = open([p for p in shipped_configs() if p.endswith("mm1.toml")][0]).read()
    with pytest.raises(ConfigError) as info:
        cm.parse_config(text.replace("lambda = 0.7", "lambda = -0.7"))
    assert info.value.path == "split.lambda"


@pytest.mark.parametrize("text,path", [
    (MINIMAL + "colour = 1\n", "model.colour"),
    (MINIMAL + "\n[solver]\nmethod = 'magic'\n", "solver.method"),
    ("[model]\nfamily = 'nope'\n", "model"),
    (MINIMAL + "\n[reward]\nform = 'linear'\nslope = 'x'\n", "reward.slope"),
    ("seed = -1\n" + MINIMAL, "seed"),
    ("extra = 1\n" + MINIMAL, "extra"),
])
def test_schema_errors(text, path):
    with pytest.raises(ConfigError) as info:
        cm.parse_config(text)
    assert info.value.path == path


def test_toml_syntax_error():
    with pytest.raises(ConfigError):
        cm.parse_config("[model\n")


def test_non_utf8(tmp_path):
    f = tmp_path / "bad.toml"
    f.write_bytes(b"\xff\xfe[model]")
    with pytest.raises(ConfigError):
        cm.load_config(f)


@pytest.mark.parametrize("path", shipped_configs())
def test_shipped_round_trip(path):
    cfg = cm.load_config(path)
    text = cm.serialize_config(cfg)
    again = cm.parse_config(text)
    assert again == cfg
    assert cm.serialize_config(again) == text


def test_seed_env_override(monkeypatch):
    cfg = cm.parse_config(MINIMAL)
    monkeypatch.delenv(cm.SEED_ENV, raising=False)
    assert cfg.effective_seed() == cm.DEFAULT_SEED
    monkeypatch.setenv(cm.SEED_ENV, "77")
    assert cfg.effective_seed() == 77
    assert cm.parse_config("seed = 5\n" + MINIMAL).effective_seed() == 5


def test_reward_missing_parameter():
    cfg = cm.parse_config(MINIMAL + "\n[reward]\nform = 'capped'\n")
    with pytest.raises(ConfigError) as info:
        cm.build_reward(cfg)
    assert info.value.path == "reward.cap"


def test_builders_for_every_family():
    texts = {
        "birth_death": MINIMAL,
        "lindley": "[model]\nfamily='lindley'\narrival_rate=0.5\nservice_rate=1.0\n",
        "lindley_discrete": "[model]\nfamily='lindley_discrete'\np_up=0.2\nup=2\n",
        "reflected_ar1": "[model]\nfamily='reflected_ar1'\na=0.5\n",
        "matrix": "[model]\nfamily='matrix'\nrows=[[0.5,0.5],[0.5,0.5]]\n",
    }
    for family, text in texts.items():
        k = cm.build_kernel(cm.parse_config(text))
        assert k.name == family or family == "matrix"


def test_split_lambda_above_mass():
    text = open([p for p in shipped_configs() if p.endswith("lindley_discrete.toml")][0]).read()
    cfg = cm.parse_config(text.replace("lambda = 0.6", "lambda = 0.9"))
    with pytest.raises(ConfigError) as info:
        cm.build_split(cfg, cm.build_kernel(cfg))
    assert info.value.path == "split.lambda"


def test_parse_grid():
    assert np.allclose(cm.parse_grid("0:2:5"), [0, 0.5, 1, 1.5, 2])
    with pytest.raises(ConfigError):
        cm.parse_grid("0:2")


finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
drift = st.fixed_dictionaries({"quadratic": st.floats(0, 5), "linear": finite, "constant": finite})
models = st.one_of(
    st.fixed_dictionaries({"family": st.just("birth_death"), "p": st.floats(0.01, 0.99), "N": st.integers(2, 99)}),
    st.fixed_dictionaries({"family": st.just("lindley"), "arrival_rate": st.floats(0.01, 5),
                           "service_rate": st.floats(0.01, 5)}),
    st.fixed_dictionaries({"family": st.just("reflected_ar1"), "a": st.floats(0, 0.99), "noise_mean": finite,
                           "noise_sd": st.floats(0.01, 5)}),
    st.fixed_dictionaries({"family": st.just("matrix"),
                           "rows": st.lists(st.lists(st.floats(0, 1), min_size=2, max_size=2), min_size=2,
                                            max_size=2)}),
)


@settings(max_examples=100, deadline=None)
@given(
    models,
    st.one_of(st.none(), st.integers(0, 2**63 - 1)),
    st.sampled_from(["identity", "linear", "power"]),
    st.one_of(st.none(), st.fixed_dictionaries({
        "b": st.floats(0.01, 10), "lambda": st.floats(0.01, 0.99),
        "phi": st.sampled_from(["lindley_minorization", "matrix_minorization"]), "v1": drift, "v2": drift,
    })),
    st.fixed_dictionaries({"method": st.sampled_from(["linear", "regenerative", "series"]),
                           "tol": st.floats(1e-15, 1.0), "cycles": st.integers(30, 10**6)}),
)
def test_round_trip_property(model, seed, form, split, solver):
    import tomli_w

    data = {"model": model, "reward": {"form": form, "slope": 1.5}, "solver": solver}
    if seed is not None:
        data["seed"] = seed
    if split is not None:
        data["split"] = split
    cfg = cm.parse_config(tomli_w.dumps(data))
    text = cm.serialize_config(cfg)
    assert cm.parse_config(text) == cfg
    assert cm.serialize_config(cm.parse_config(text)) == text
