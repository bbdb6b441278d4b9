import numpy as np
import pytest
from scipy import stats

from lgcpfusion.grid import GridDomain
from lgcpfusion.inference import (FitData, FitResult, ModelSpec, Posterior, PriorSpec, SamplerConfig,
                                  build_fit_data, fit)
from lgcpfusion.inference.diagnostics import effective_sample_size, split_rhat
from lgcpfusion.landscape import desk_landscape
from lgcpfusion.observation import ScenarioSpec, simulate_replicate


def single_cell_data(y):
    g = GridDomain(1, 1, (0.0, 0.0), 1.0, np.array([[True]]))
    return FitData(g, np.ones((1, 1)), np.ones((1, 1)), np.zeros((1, 6)), np.zeros((0, 1)), np.zeros((0, 1)),
                   np.zeros(0), np.zeros(1, bool), np.zeros(1), np.array([float(y)]), np.zeros(1),
                   np.ones((1, 1)))


INTERCEPT_ONLY = ModelSpec.from_id(3, x_covariates=())
FROZEN = SamplerConfig(warmup=1000, iterations=11000, thin=1, chains=2, freeze_fields=True, store_fields=False)


def test_intercept_posterior_matches_quadrature():
    y = 5
    post = Posterior(INTERCEPT_ONLY, single_cell_data(y), PriorSpec.default(10.0))
    res = fit(post, FROZEN, seed=3)
    b = res.draws("beta[0]")
    assert b.size == 20_000
    # dense quadrature of exp(y b - e^b) N(b; 0, 100)
    grid = np.linspace(-6.0, 6.0, 200_001)
    lp = y * grid - np.exp(grid) - 0.005 * grid ** 2
    cdf = np.cumsum(np.exp(lp - lp.max()))
    cdf /= cdf[-1]
    ks = stats.kstest(b, lambda v: np.interp(v, grid, cdf)).statistic
    assert ks < 0.05
    assert set(res.chains) == {"beta[0]", "rho1", "sigma1"}


def test_prior_recovery_without_data():
    post = Posterior(INTERCEPT_ONLY, single_cell_data(5), PriorSpec.default(10.0), use_data=False)
    b = fit(post, FROZEN, seed=4).draws("beta[0]")
    assert abs(b.mean()) < 0.05 * 10.0
    assert b.std() == pytest.approx(10.0, rel=0.05)


@pytest.fixture(scope="module")
def small_problem():
    land = desk_landscape(nx=10)
    rep = simulate_replicate(ScenarioSpec.for_scenario(3), land, 0)
    model = ModelSpec.from_id(5)
    data = build_fit_data(land, model, rep.selected, rep.ps_pattern, rep.cs_reported, rep.aux_pattern)
    return Posterior(model, data, PriorSpec.default(land.grid.diameter()))


SHORT = SamplerConfig(warmup=100, iterations=300, thin=2, chains=2)


def test_same_seed_gives_identical_chains(small_problem):
    a = fit(small_problem, SHORT, seed=(1, 1, 3, 0, 5))
    b = fit(small_problem, SHORT, seed=(1, 1, 3, 0, 5))
    c = fit(small_problem, SHORT, seed=(1, 1, 3, 1, 5))
    for name in a.chains:
        assert np.array_equal(a.chains[name], b.chains[name])
    assert np.array_equal(a.fields["omega2"], b.fields["omega2"])
    assert not np.array_equal(a.chains["beta[0]"], c.chains["beta[0]"])
    # chains of one fit use different streams
    assert not np.array_equal(a.chains["beta[0]"][0], a.chains["beta[0]"][1])


def test_fit_result_shape_and_diagnostics(small_problem):
    res = fit(small_problem, SHORT, seed=0)
    kept = SHORT.kept_per_chain
    assert kept == 100
    names = small_problem.layout.scalar_names() + ["rho1", "sigma1", "rho2", "sigma2"]
    assert res.param_names == names
    for v in res.chains.values():
        assert v.shape == (2, kept)
    assert res.fields["omega1"].shape == (2, kept, small_problem.data.n)
    diag = res.diagnostics
    assert set(diag["rhat"]) == set(names) and set(diag["ess"]) == set(names)
    for block in ("latent", "hyper1", "rescale1", "hyper2", "rescale2"):
        assert block in diag["acceptance"]
        assert all(0 <= r <= 1 for r in diag["acceptance"][block])
    assert "beta[0]" in res.summary()


def test_save_load_round_trip(small_problem, tmp_path):
    res = fit(small_problem, SamplerConfig(warmup=50, iterations=150, thin=5, chains=2), seed=2)
    res.save(tmp_path / "fit")
    back = FitResult.load(tmp_path / "fit")
    assert back.model_id == 5
    for name in res.chains:
        assert np.array_equal(back.chains[name], res.chains[name])
    for name in res.fields:
        assert np.array_equal(back.fields[name], res.fields[name])
    assert back.diagnostics["rhat"] == pytest.approx(res.diagnostics["rhat"])
    assert back.config["iterations"] == 150
    assert back.seed == 2


def test_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(warmup=10, iterations=10)
    with pytest.raises(ValueError):
        SamplerConfig(thin=0)


def test_diagnostics_on_known_chains():
    rng = np.random.default_rng(0)
    iid = rng.normal(size=(4, 5000))
    assert split_rhat(iid) == pytest.approx(1.0, abs=0.01)
    assert effective_sample_size(iid) == pytest.approx(20_000, rel=0.1)
    shifted = iid + np.arange(4)[:, None]
    assert split_rhat(shifted) > 1.5
    # AR(1) with coefficient phi has ESS n (1 - phi) / (1 + phi)
    phi = 0.8
    ar = np.zeros((4, 20_000))
    e = rng.normal(size=ar.shape)
    for t in range(1, ar.shape[1]):
        ar[:, t] = phi * ar[:, t - 1] + e[:, t]
    assert effective_sample_size(ar) == pytest.approx(80_000 * (1 - phi) / (1 + phi), rel=0.15)
