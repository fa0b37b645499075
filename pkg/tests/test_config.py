import pytest
from hypothesis import given, strategies as st

from minorant.config import OUTPUT_DIR_ENV, ConfigError, ExperimentConfig


def test_defaults_and_accessors():
    c = ExperimentConfig(output_dir="out")
    assert c.size(123) == 123 and c.grid(7) == 7
    c2 = c.with_overrides(replicas=10, grid_n=20, tolerances={"ks": 0.5})
    assert c2.size(123) == 10 and c2.grid(7) == 20 and c2.tol("ks", 0.1) == 0.5
    assert c2.tol("other", 0.1) == 0.1
    assert c.tolerances == {}


@given(
    st.integers(0, 2**31),
    st.one_of(st.none(), st.integers(1, 10**6)),
    st.floats(0.01, 100),
    st.floats(-10, 0),
    st.floats(0.01, 10),
    st.dictionaries(st.sampled_from(["ks", "chi2", "rel"]), st.floats(1e-6, 1.0)),
)
def test_text_roundtrip(seed, reps, horizon, lo, width, tols):
    c = ExperimentConfig(master_seed=seed, replicas=reps, horizon=horizon, slope_window=(lo, lo + width),
                         tolerances=tols, output_dir="x")
    assert ExperimentConfig.from_text(c.to_text()) == c


def test_file_roundtrip(tmp_path):
    c = ExperimentConfig(master_seed=7, grid_n=500, output_dir=str(tmp_path))
    p = tmp_path / "c.cfg"
    c.save(p)
    assert ExperimentConfig.load(p) == c


@pytest.mark.parametrize("kw", [
    {"master_seed": -1}, {"replicas": 0}, {"horizon": 0.0}, {"slope_window": (1.0, 1.0)},
    {"tolerances": {"ks": -1.0}}, {"chain_length": 2.5},
])
def test_validation(kw):
    with pytest.raises(ConfigError):
        ExperimentConfig(**kw)


@pytest.mark.parametrize("text", ["bogus = 1", "replicas = ten", "no equals sign", "slope_window = 1"])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text(text)


def test_comments_ignored():
    c = ExperimentConfig.from_text("# header\nmaster_seed = 5  # trailing\n\ntol.ks = 0.02\n")
    assert c.master_seed == 5 and c.tolerances == {"ks": 0.02}


def test_hash_ignores_output_dir():
    a = ExperimentConfig(output_dir="a")
    b = ExperimentConfig(output_dir="b")
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != ExperimentConfig(master_seed=1, output_dir="a").config_hash()


def test_output_dir_from_env(monkeypatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, "/tmp/somewhere")
    assert ExperimentConfig().output_dir == "/tmp/somewhere"
