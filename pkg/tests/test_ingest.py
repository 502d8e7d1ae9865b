import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from precision_lab.core import ReturnsMatrix
from precision_lab.errors import EmptyPanel, HorizonTooLarge, NonPositivePrice, ParseError
from precision_lab.ingest import (
    PricePanel,
    RollingWindowPlan,
    aggregate_horizon,
    load_panel,
    log_returns,
    rolling_windows,
    write_panel,
)


def make_returns(t, p=2, seed=0):
    rng = np.random.default_rng(seed)
    return ReturnsMatrix(rng.standard_normal((t, p)) * 0.01,
                         [f"d{i:04d}" for i in range(t)],
                         [f"A{j}" for j in range(p)])


class TestLoadPanel:
    def test_well_formed(self, tmp_path):
        f = tmp_path / "px.csv"
        f.write_text("date,AAA,BBB\n2020-01-01,1.0,2.0\n2020-01-02,1.1,2.1\n2020-01-03,1.2,2.2\n")
        panel = load_panel(f, schema="prices")
        assert panel.values.shape == (3, 2)
        assert panel.tickers == ["AAA", "BBB"]

    def test_drops_bad_row(self, tmp_path, caplog):
        f = tmp_path / "px.csv"
        f.write_text("date,AAA,BBB\n2020-01-01,1.0,2.0\n2020-01-02,NA,2.1\n2020-01-03,1.2,2.2\n")
        with caplog.at_level("WARNING"):
            panel = load_panel(f, schema="prices")
        assert panel.values.shape == (2, 2)
        assert "dropped 1" in caplog.text

    def test_empty_after_cleaning(self, tmp_path):
        f = tmp_path / "px.csv"
        f.write_text("date,AAA,BBB\n2020-01-01,x,2.0\n2020-01-02,y,2.1\n")
        with pytest.raises(EmptyPanel):
            load_panel(f, schema="prices")

    def test_bad_header(self, tmp_path):
        f = tmp_path / "px.csv"
        f.write_text("AAA,BBB\n1.0,2.0\n")
        with pytest.raises(ParseError):
            load_panel(f, schema="prices")

    def test_roundtrip_full_precision(self, tmp_path):
        r = make_returns(5, 3, seed=11)
        f = tmp_path / "r.csv"
        write_panel(r, f)
        back = load_panel(f, schema="returns")
        np.testing.assert_array_equal(back.values, r.values)
        assert back.dates == r.dates and back.tickers == r.tickers


class TestLogReturns:
    def test_ln_e(self):
        panel = PricePanel(np.array([[1.0, 1.0], [np.e, 1.0], [np.e**2, 1.0]]),
                           ["a", "b", "c"], ["X", "Y"])
        r = log_returns(panel)
        np.testing.assert_allclose(r.values[:, 0], 1.0)

    def test_constant_prices(self):
        panel = PricePanel(np.full((4, 2), 7.0), list("abcd"), ["X", "Y"])
        np.testing.assert_array_equal(log_returns(panel).values, 0.0)

    def test_hand_formula(self):
        panel = PricePanel(np.array([[100.0, 1.0], [110.0, 1.0], [121.0, 1.0]]),
                           list("abc"), ["X", "Y"])
        r = log_returns(panel)
        np.testing.assert_allclose(r.values[:, 0], np.log(1.1))

    def test_positive_prices_enforced(self):
        with pytest.raises(NonPositivePrice):
            PricePanel(np.array([[1.0, -1.0], [1.0, 1.0]]), ["a", "b"], ["X", "Y"])

    def test_inverse_property(self):
        # exp-cumsum of log-returns rebuilds prices, and back again
        r = make_returns(40, 3, seed=5)
        prices = np.exp(np.vstack([np.zeros(3), np.cumsum(r.values, axis=0)]))
        panel = PricePanel(prices, [f"d{i:04d}" for i in range(41)], r.tickers)
        np.testing.assert_allclose(log_returns(panel).values, r.values, atol=1e-12)


class TestAggregateHorizon:
    def test_weekly_sum(self):
        r = ReturnsMatrix(np.full((10, 2), 0.01), [f"d{i}" for i in range(10)], ["X", "Y"])
        agg = aggregate_horizon(r, 5)
        assert agg.values.shape == (2, 2)
        np.testing.assert_allclose(agg.values, 0.05)

    def test_monthly_sum(self):
        r = ReturnsMatrix(np.full((40, 2), 0.003), [f"d{i:02d}" for i in range(40)], ["X", "Y"])
        np.testing.assert_allclose(aggregate_horizon(r, 20).values, 0.06)

    def test_floor_rule(self):
        r = make_returns(12)
        agg = aggregate_horizon(r, 5)
        assert agg.values.shape[0] == 2  # 2 rows dropped

    def test_sum_preservation(self):
        r = make_returns(23, 3, seed=9)
        agg = aggregate_horizon(r, 5)
        np.testing.assert_allclose(agg.values.sum(axis=0),
                                   r.values[:20].sum(axis=0), atol=1e-12)

    def test_too_large(self):
        with pytest.raises(HorizonTooLarge):
            aggregate_horizon(make_returns(3), 5)


class TestRollingWindows:
    def test_spec_example(self):
        r = make_returns(4)
        plan = RollingWindowPlan(window_length=2, step=1, horizon="daily")
        wins = rolling_windows(r, plan)
        assert [(list(a), list(b)) for a, b in wins] == [([0, 1], [2]), ([1, 2], [3])]

    def test_single_window(self):
        r = make_returns(7)
        plan = RollingWindowPlan(window_length=6, step=1, horizon="daily")
        assert len(rolling_windows(r, plan)) == 1

    def test_window_count_by_enumeration(self):
        for t in (10, 17, 31):
            for w in (3, 5, 8):
                r = make_returns(t)
                plan = RollingWindowPlan(window_length=w, step=1, horizon="daily")
                wins = rolling_windows(r, plan)
                assert len(wins) == t - w - 1 + 1

    def test_no_leakage(self):
        r = make_returns(30)
        plan = RollingWindowPlan(window_length=4, step=1, horizon="weekly")
        for train, test in rolling_windows(r, plan):
            assert max(train) < min(test)
            assert len(test) == 5

    def test_weekly_rows(self):
        r = make_returns(520)
        plan = RollingWindowPlan(window_length=100, step=1, horizon="weekly")
        wins = rolling_windows(r, plan)
        train, test = wins[0]
        assert len(train) == 500 and len(test) == 5
        # steps advance by one aggregated period (5 daily rows)
        assert wins[1][0][0] - wins[0][0][0] == 5


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=5, max_value=60), st.integers(min_value=1, max_value=20))
def test_aggregate_sum_property(t, h):
    if t // h < 2:
        return
    r = make_returns(t, 2, seed=t * 31 + h)
    agg = aggregate_horizon(r, h)
    kept = (t // h) * h
    np.testing.assert_allclose(agg.values.sum(axis=0), r.values[:kept].sum(axis=0),
                               atol=1e-12)
