import pytest

from sgdd.config import ConfigError, RunConfig, parse_config, serialize_config


def test_defaults_validate():
    cfg = RunConfig().validate()
    assert cfg.sigma == 0.3 and cfg.p_in == 2 and cfg.p_out == 3
    assert cfg.coarse_ratio == 4 and cfg.tol_outer == 1e-5 and cfg.tol_picard == 1e-6


def test_round_trip():
    cfg = RunConfig(problem="nonlinear-stochastic", mesh_n=64, M=4, sigma=0.25,
                    preconditioner="2gv2", seed=7, threads=3)
    text = serialize_config(cfg)
    again = parse_config(text)
    assert again == cfg
    assert serialize_config(again) == text


def test_comments_and_spacing():
    cfg = parse_config("""
# a comment
mesh_n = 16   # trailing comment
sigma=0.1
""")
    assert cfg.mesh_n == 16 and cfg.sigma == 0.1


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config("mesh_m = 16\n")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config("mesh_n = 16\nmesh_n = 32\n")


def test_bad_values_rejected():
    with pytest.raises(ConfigError):
        parse_config("sigma = -0.5\n")
    with pytest.raises(ConfigError):
        parse_config("preconditioner = magic\n")
    with pytest.raises(ConfigError):
        parse_config("mesh_n = ten\n")
    with pytest.raises(ConfigError):
        parse_config("problem = quadratic\n")


def test_coarse_ratio_constraints():
    with pytest.raises(ConfigError, match="perfect square"):
        RunConfig(coarse_ratio=5).validate()
    with pytest.raises(ConfigError, match="divisible"):
        RunConfig(mesh_n=30, coarse_ratio=16).validate()
    # one-level preconditioner ignores the ratio
    RunConfig(mesh_n=30, coarse_ratio=16, preconditioner="ras1").validate()


def test_tol_coarse_auto():
    cfg = parse_config("tol_coarse = auto\n")
    assert cfg.tol_coarse is None
    assert cfg.coarse_tol("v2") == 1e-2
    assert cfg.coarse_tol("v3") == 1e-5
    cfg = parse_config("tol_coarse = 0.5\n")
    assert cfg.coarse_tol("v2") == 0.5
    assert "tol_coarse = 0.5" in serialize_config(cfg)
