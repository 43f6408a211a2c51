import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from orthowave import model
from orthowave.model import MarketParams, OptionKind, analytic_price, effective_vol_and_div, normal_cdf

from oracles import scalar_black_scholes

# reference values from 40-digit arithmetic (S = K = 10, r = 0.06, sigma = 0.2, t = 1)
CALL_1D = 1.098954915262598785757688375820225072172
PUT_1D = 0.5166002511050858811292162085317221331193
# geometric put, d = 2, benchmark parameters, S = (K, K), t = 1
PUT_2D_ATM = 0.388817513613956216121350384554672915173


def one_asset(r=0.06, sigma=0.2, K=10.0, T=1.0):
    return MarketParams(r, [sigma], [[1.0]], K, T)


def test_effective_parameters():
    p = MarketParams.uniform(2, 0.06, 0.2, 0.25, 10.0, 1.0)
    sigma, delta = effective_vol_and_div(p)
    assert sigma**2 == pytest.approx(0.025, abs=1e-15)
    assert delta == pytest.approx(0.0075, abs=1e-15)
    s1, d1 = effective_vol_and_div(one_asset())
    assert s1 == pytest.approx(0.2) and d1 == pytest.approx(0.0, abs=1e-16)
    s3, d3 = effective_vol_and_div(MarketParams.uniform(3, 0.06, 0.3, 1.0, 10.0, 1.0))
    assert s3 == pytest.approx(0.3, rel=1e-14) and d3 == pytest.approx(0.0, abs=1e-15)


def test_reference_prices():
    p = one_asset()
    assert analytic_price("call", p, [[10.0]], 1.0)[0] == pytest.approx(CALL_1D, abs=1e-12)
    assert analytic_price("put", p, [[10.0]], 1.0)[0] == pytest.approx(PUT_1D, abs=1e-12)
    p2 = MarketParams.uniform(2, 0.06, 0.2, 0.25, 10.0, 1.0)
    assert analytic_price("put", p2, [10.0, 10.0], 1.0) == pytest.approx(PUT_2D_ATM, abs=1e-12)


def test_payoff_at_maturity():
    p = MarketParams.uniform(3, 0.06, 0.2, 0.25, 10.0, 1.0)
    assert analytic_price("put", p, [5.0, 5.0, 5.0], 0.0) == pytest.approx(5.0)
    assert analytic_price("call", p, [15.0, 15.0, 15.0], 0.0) == pytest.approx(5.0)
    assert analytic_price("put", p, [10.0, 10.0, 10.0], 0.0) == 0.0


@given(
    st.floats(1.0, 30.0),
    st.floats(2.0, 20.0),
    st.floats(0.0, 0.1),
    st.floats(0.05, 0.6),
    st.floats(0.05, 3.0),
)
def test_one_asset_matches_scalar_formula(S, K, r, sigma, t):
    p = one_asset(r, sigma, K, t)
    for kind in ("call", "put"):
        ref = scalar_black_scholes(kind, S, K, r, sigma, t)
        assert float(analytic_price(kind, p, [[S]], t)[0]) == pytest.approx(ref, abs=1e-10)


def test_put_call_parity_random_draws():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        d = int(rng.integers(1, 6))
        rho = float(rng.uniform(-0.2, 0.9)) if d > 1 else 0.0
        p = MarketParams.uniform(d, rng.uniform(0, 0.1), rng.uniform(0.05, 0.5), rho, rng.uniform(5, 15), 1.0)
        S = rng.uniform(1.0, 30.0, size=d)
        t = float(rng.uniform(0.01, 2.0))
        G = float(np.exp(np.mean(np.log(S))))
        _, delta = effective_vol_and_div(p)
        res = (
            analytic_price("call", p, S, t)
            - analytic_price("put", p, S, t)
            - G * math.exp(-delta * t)
            + p.K * math.exp(-p.r * t)
        )
        worst = max(worst, abs(float(res)))
    assert worst <= 1e-12


def test_monotonicity():
    p = MarketParams.uniform(2, 0.06, 0.2, 0.25, 10.0, 1.0)
    s = np.linspace(2.0, 30.0, 50)
    S = np.stack([s, s], axis=-1)
    put = analytic_price("put", p, S, 1.0)
    call = analytic_price("call", p, S, 1.0)
    assert np.all(np.diff(put) <= 0) and np.all(np.diff(call) >= 0)
    assert put[0] > put[-1] and call[-1] > call[0]


def test_normal_cdf():
    assert normal_cdf(0.0) == 0.5
    assert normal_cdf(10.0) >= 1 - 1e-12
    x = np.random.default_rng(3).normal(size=100) * 4
    np.testing.assert_allclose(normal_cdf(x) + normal_cdf(-x), 1.0, atol=1e-15)


def test_coordinate_round_trip():
    prob = model.table_problem(3, "put")
    rng = np.random.default_rng(5)
    S = rng.uniform(0.5, 40.0, size=(100, 3))
    z = model.prices_to_cube(prob, S, 0.7)
    np.testing.assert_allclose(model.cube_to_prices(prob, z, 0.7), S, rtol=1e-13)


def test_cube_payoff_kink():
    prob = model.table_problem(2, "put")
    u0 = model.payoff_on_cube(prob)
    z_atm = model.prices_to_cube(prob, np.array([10.0, 10.0]), 0.0)
    assert u0(*z_atm) == 0.0
    normal, offset = u0.kink_plane
    assert normal @ z_atm == pytest.approx(offset)
    below = model.prices_to_cube(prob, np.array([5.0, 5.0]), 0.0)
    assert u0(*below) == pytest.approx(5.0)


def test_parameter_file(tmp_path):
    prob = model.load_problem(model.benchmark_file(), d=3, option="call")
    assert prob.d == 3 and prob.kind is OptionKind.CALL
    P = prob.diffusion()
    w = np.log(50.0) - np.log(0.1)
    assert P[0, 1] == pytest.approx(0.25 * 0.04 / (2 * w * w))
    bad = tmp_path / "bad.json"
    bad.write_text('{"d": 2, "r": 0.05}')
    with pytest.raises(ValueError, match="missing"):
        model.load_problem(bad)


def test_validation():
    perfect = MarketParams.uniform(2, 0.06, 0.2, 1.0, 10.0, 1.0)
    with pytest.raises(ValueError, match="positive definite"):
        model.PricingProblem(perfect, model.DomainSpec.uniform(2, 0.1, 50.0), "put")
    with pytest.raises(ValueError):
        MarketParams(0.05, [0.2, 0.2], [[1.0, 1.2], [1.2, 1.0]], 10.0, 1.0)
    with pytest.raises(ValueError):
        MarketParams(0.05, [-0.2], [[1.0]], 10.0, 1.0)
    with pytest.raises(ValueError):
        model.DomainSpec([1.0], [0.5])
    with pytest.raises(ValueError):
        analytic_price("put", one_asset(), [[-1.0]], 1.0)
