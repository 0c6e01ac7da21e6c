"""Smoke test of the Python bindings. Run with `python python/smoke_test.py`."""

import json
import math
import tempfile
from pathlib import Path

import sharpecast as sc


def main() -> None:
    work = Path(tempfile.mkdtemp())

    returns, risk_free = sc.synth(str(work / "in"), n_funds=4, n_months=200, seed=3)
    panel = sc.sharpe_panel(returns, risk_free)
    assert panel.n_series == 4 and len(panel) == 189, panel
    assert panel.start == "2000-12"
    again = sc.SharpePanel.from_csv(panel.to_csv())
    assert again.fund_ids == panel.fund_ids and len(again) == len(panel)

    origins = [row[1] for row in sc.plan_splits(240, 6)]
    assert origins == list(range(229, 235)), origins

    assert sc.mase([1, 2, 3, 4], [1, 1], [1.5, -0.5]) == 1.0
    m = sc.evaluate([1, 2, 3, 4], [2, 3], [2.5, 2.0])
    assert set(m) == {"mase", "rmse", "mae", "smdape", "maape"}

    train = panel.slice(0, 120)
    transformed, state = sc.fit_transform(train)
    assert len(state.differenced) == 4
    back = sc.inverse_transform([[0.0] * 3 if d else [row[-1]] * 3 for d, row in zip(state.differenced, transformed.values)], state)
    assert all(math.isfinite(x) for row in back for x in row)
    assert json.loads(state.to_json())["offset"] == state.offset

    forecast, model = sc.forecast_stat("theta", train.values[0], 6)
    assert len(forecast) == 6 and model["kind"] == "theta"

    weights = dict(sc.global_weights([("lstm", 1.510), ("gru", 1.546)]))
    assert abs(weights["lstm"] - 0.5059) < 1e-4

    best, value, trials = sc.tpe_minimize(lambda p: (p["x"] - 0.3) ** 2, [("x", 0.0, 1.0)], 40, seed=1)
    assert len(trials) == 40 and abs(best["x"] - 0.3) < 0.1, (best, value)

    config = sc.RunConfig(
        5, str(work / "run"), returns=returns, risk_free=risk_free, horizons=[6], algorithms=["naive", "theta", "ets"]
    )
    cells = sc.run_pipeline(config)
    assert len(cells) == 6 * 4 * 6, len(cells)
    assert cells == sc.read_metrics(str(work / "run" / "metrics.csv"))

    config.horizons = []
    try:
        sc.run_pipeline(config)
    except sc.ConfigError as e:
        assert "horizons" in str(e)
    else:
        raise AssertionError("empty horizons accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
