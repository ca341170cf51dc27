import json
import math

import pytest

import rcrm


def test_dlt_probability_and_prior():
    cfg = rcrm.ModelConfig()
    assert rcrm.dlt_probability(0.0, 5, cfg) == pytest.approx(0.30)
    post = rcrm.compute_posterior(cfg, [0] * 6, [0] * 6)
    assert sum(post.mtd_probs) == pytest.approx(1.0)
    assert post.dose_means[4] == pytest.approx(0.3811959828278518, rel=1e-9)


def test_bad_config_raises():
    cfg = rcrm.ModelConfig()
    cfg.skeleton = [0.3, 0.2, 0.1]
    with pytest.raises(rcrm.ConfigError):
        cfg.validate()


def test_trial_walkthrough():
    config = rcrm.TrialConfig()
    config.variant = rcrm.DesignVariant.CRM
    trial = rcrm.Trial(config, 1)
    assert trial.current_dose == 1
    trial.record(0)
    assert trial.current_dose == 2
    with pytest.raises(rcrm.StateError):
        trial.record(4)


def test_simulation_is_seeded():
    config = rcrm.TrialConfig()
    s1 = rcrm.paper_scenarios()[0]
    assert s1.true_mtd == 4
    a = rcrm.run_study(config, s1, 50, 3, threads=1)
    b = rcrm.run_study(config, s1, 50, 3, threads=2)
    assert a.selection_counts == b.selection_counts
    assert a.cohorts_at_mtd == b.cohorts_at_mtd
    assert math.isfinite(a.sd_cohorts_at_mtd)
    state = rcrm.simulate_trial(config, s1, 3, 0)
    assert state["status"] in {"Completed", "StoppedOvertoxic"}


def test_run_spec_json():
    spec = {"n_trials": 5, "designs": ["RCRM1"], "scenarios": [
        {"name": "A", "true_probs": [0.05, 0.1, 0.2, 0.3, 0.45, 0.6]}]}
    cells = rcrm.run_spec_json(json.dumps(spec), 1)
    assert len(cells) == 1
    assert cells[0]["design"] == "RCRM1"
    assert cells[0]["n_trials"] == 5
