import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import one_village_params, random_subcritical_params, two_village_params

from varw import (
    ModelParams,
    ValidationError,
    compute_spectral,
    critical_profile,
    eta_norm,
    load_model,
    parse_model,
    validate_model,
)

# analytic Perron data for the default 2x2 kernel [[0, .5], [.4, 0]]
MU_2X2 = 0.4472135954999579  # sqrt(0.2)
ETA1_2X2 = 0.894427190999916  # 0.4 / sqrt(0.2)


def test_validate_accepts_single_village():
    params = one_village_params(q=0.5, lam=1.0, sigma=0.2, nu=1.0)
    assert validate_model(params, require_subcritical=True) is params


def test_validate_rejects_doubly_stochastic_kernel():
    params = ModelParams(
        kernel=np.array([[0.0, 1.0], [1.0, 0.0]]),
        sleep_rates=[1.0, 1.0],
        init_sleepers=[0.0, 0.0],
        init_actives=[0.0, 0.0],
    )
    with pytest.raises(ValidationError, match="no strictly sub-stochastic row"):
        validate_model(params)


def test_validate_rejects_reducible_support():
    params = ModelParams(
        kernel=np.array([[0.0, 0.5], [0.0, 0.5]]),
        sleep_rates=[1.0, 1.0],
        init_sleepers=[0.0, 0.0],
        init_actives=[0.0, 0.0],
    )
    with pytest.raises(ValidationError, match="reducible"):
        validate_model(params)


def test_validate_rejects_row_sum_above_one():
    params = ModelParams(
        kernel=np.array([[0.6, 0.5], [0.4, 0.0]]),
        sleep_rates=[1.0, 1.0],
        init_sleepers=[0.0, 0.0],
        init_actives=[0.0, 0.0],
    )
    with pytest.raises(ValidationError, match="exceeds 1"):
        validate_model(params)


def test_validate_rejects_dimension_mismatch():
    params = ModelParams(
        kernel=np.array([[0.5]]),
        sleep_rates=[1.0, 2.0],
        init_sleepers=[0.0],
        init_actives=[0.0],
    )
    with pytest.raises(ValidationError, match="length"):
        validate_model(params)


def test_validate_rejects_sigma_outside_unit_interval():
    params = one_village_params(sigma=1.5)
    with pytest.raises(ValidationError, match="sigma"):
        validate_model(params)


def test_validate_rejects_bad_entries():
    with pytest.raises(ValidationError, match="negative"):
        validate_model(
            ModelParams(kernel=np.array([[-0.1]]), sleep_rates=[1.0],
                        init_sleepers=[0.0], init_actives=[0.0])
        )
    with pytest.raises(ValidationError, match="non-finite"):
        validate_model(
            ModelParams(kernel=np.array([[np.nan]]), sleep_rates=[1.0],
                        init_sleepers=[0.0], init_actives=[0.0])
        )
    with pytest.raises(ValidationError, match="sleep rates"):
        validate_model(one_village_params(lam=-1.0))
    with pytest.raises(ValidationError, match="nu"):
        validate_model(one_village_params(nu=-0.5))
    with pytest.raises(ValidationError, match="labels"):
        validate_model(
            ModelParams(kernel=np.array([[0.5]]), sleep_rates=[1.0],
                        init_sleepers=[0.0], init_actives=[0.0], labels=["a", "b"])
        )


def test_validate_subcritical_flag():
    params = one_village_params(lam=1.0, sigma=0.9)
    validate_model(params)  # fine for the simulator
    with pytest.raises(ValidationError, match="not subcritical"):
        validate_model(params, require_subcritical=True)


def test_validate_accepts_critical_profile_exactly():
    params = one_village_params(lam=1.0, sigma=0.5)
    validate_model(params, require_subcritical=True)


def test_zero_kernel_single_village_is_valid():
    # lone village, all jumps leak: irreducibility holds vacuously (zero-step paths)
    params = one_village_params(q=0.0)
    validate_model(params)
    spectral = compute_spectral(params)
    assert spectral.mu == 0.0
    assert spectral.eta[0] == 1.0


def test_spectral_scalar_kernel():
    spectral = compute_spectral(one_village_params(q=0.5))
    assert abs(spectral.mu - 0.5) < 1e-12
    assert spectral.eta[0] == 1.0
    assert spectral.eta_min == 1.0


def test_spectral_symmetric_kernel():
    params = ModelParams(
        kernel=np.array([[0.0, 0.3], [0.3, 0.0]]),
        sleep_rates=[1.0, 1.0],
        init_sleepers=[0.0, 0.0],
        init_actives=[0.0, 0.0],
    )
    spectral = compute_spectral(params)
    assert abs(spectral.mu - 0.3) < 1e-10
    assert np.allclose(spectral.eta, [1.0, 1.0], atol=1e-10)


def test_spectral_matches_analytic_two_by_two():
    spectral = compute_spectral(two_village_params())
    assert abs(spectral.mu - MU_2X2) < 1e-10
    assert abs(spectral.eta[0] - 1.0) == 0.0
    assert abs(spectral.eta[1] - ETA1_2X2) < 1e-10
    assert np.max(np.abs(two_village_params().kernel @ spectral.eta - spectral.mu * spectral.eta)) <= 1e-10


def test_spectral_is_deterministic():
    params = two_village_params()
    a = compute_spectral(params)
    b = compute_spectral(params)
    assert a.mu == b.mu
    assert np.array_equal(a.eta, b.eta)


def test_eta_norm_examples(default_spectral):
    assert eta_norm(default_spectral, [0.0, 0.0]) == 0.0
    sym = compute_spectral(
        ModelParams(
            kernel=np.array([[0.0, 0.3], [0.3, 0.0]]),
            sleep_rates=[1.0, 1.0],
            init_sleepers=[0.0, 0.0],
            init_actives=[0.0, 0.0],
        )
    )
    assert abs(eta_norm(sym, [3.0, -4.0]) - 7.0) < 1e-9
    assert abs(eta_norm(default_spectral, [1.0, 1.0]) - (1.0 + ETA1_2X2)) < 1e-9


def test_eta_norm_rejects_length_mismatch(default_spectral):
    with pytest.raises(ValidationError):
        eta_norm(default_spectral, [1.0, 2.0, 3.0])


@given(st.lists(st.floats(-100, 100), min_size=2, max_size=2))
def test_norm_sandwich(w):
    spectral = compute_spectral(two_village_params())
    w = np.array(w)
    l1 = float(np.sum(np.abs(w)))
    eta = eta_norm(spectral, w)
    assert spectral.eta_min * l1 <= eta + 1e-12
    assert eta <= l1 + 1e-12
    assert np.max(np.abs(w)) <= l1 + 1e-12
    assert l1 <= 2 * np.max(np.abs(w)) + 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_eigen_action_on_random_instances(seed):
    rng = np.random.default_rng(seed)
    params = random_subcritical_params(rng)
    spectral = compute_spectral(params)
    m = rng.uniform(0.0, 5.0, params.num_villages)
    lhs = eta_norm(spectral, m @ params.kernel)
    rhs = spectral.mu * eta_norm(spectral, m)
    assert abs(lhs - rhs) <= 1e-9


def test_critical_profile_values():
    params = two_village_params()
    assert np.allclose(critical_profile(params), [0.5, 0.5])


# --- model documents ---------------------------------------------------------


def test_load_model_roundtrip(tmp_path):
    path = tmp_path / "m.json"
    doc = {
        "kernel": [[0.0, 0.5], [0.4, 0.0]],
        "lambda": [1.0, 1.0],
        "sigma": [0.2, 0.3],
        "nu": [0.5, 0.3],
        "labels": ["a", "b"],
    }
    path.write_text(json.dumps(doc))
    params = load_model(path)
    assert params.num_villages == 2
    assert params.labels == ("a", "b")
    assert np.array_equal(params.kernel, np.array(doc["kernel"]))


def test_parse_model_rejects_unknown_keys():
    with pytest.raises(ValidationError, match="unknown keys"):
        parse_model(
            {"kernel": [[0.5]], "lambda": [1.0], "sigma": [0.0], "nu": [0.0], "extra": 1}
        )


def test_parse_model_rejects_missing_keys():
    with pytest.raises(ValidationError, match="missing keys"):
        parse_model({"kernel": [[0.5]]})


def test_parse_model_rejects_ragged_kernel():
    with pytest.raises(ValidationError):
        parse_model({"kernel": [[0.5, 0.1], [0.2]], "lambda": [1, 1], "sigma": [0, 0], "nu": [0, 0]})


def test_load_model_missing_file(tmp_path):
    with pytest.raises(ValidationError, match="not found"):
        load_model(tmp_path / "nope.json")


def test_load_model_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ValidationError, match="not valid JSON"):
        load_model(path)


def test_params_arrays_are_immutable():
    params = two_village_params()
    with pytest.raises(ValueError):
        params.kernel[0, 0] = 1.0
