import pytest

from config import Settings, SolverConfig


def test_defaults():
    cfg = SolverConfig()
    assert (cfg.steps, cfg.corr_tol, cfg.lambda_tol) == (100, 1e-10, 1e-8)
    assert cfg.newton_correction and not cfg.verify


def test_overrides_skip_unset_values():
    cfg = SolverConfig().with_overrides({'steps': 20}, corr_tol=None, oracle_seed=3)
    assert (cfg.steps, cfg.corr_tol, cfg.oracle_seed) == (20, 1e-10, 3)


def test_unknown_or_invalid_options():
    with pytest.raises(ValueError):
        SolverConfig().with_overrides({'step': 10})
    with pytest.raises(ValueError):
        SolverConfig(steps=0)
    with pytest.raises(ValueError):
        SolverConfig(corr_tol=0.0)


def test_to_dict_lists_every_field():
    data = SolverConfig().to_dict()
    assert data['max_newton'] == 10
    assert set(data) >= {'steps', 'oracle_starts', 'degeneracy_cond'}


def test_settings_validate():
    assert Settings.validate()


def test_bare_output_names_go_under_output_dir(tmp_path, monkeypatch):
    monkeypatch.setattr(Settings, 'OUTPUT_DIR', tmp_path / 'results')
    assert Settings.resolve_output_path('out.json') == tmp_path / 'results' / 'out.json'
    assert (tmp_path / 'results').is_dir()
    explicit = tmp_path / 'x' / 'y.json'
    assert Settings.resolve_output_path(str(explicit)) == explicit
