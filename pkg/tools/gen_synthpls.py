"""Generate the bundled synthetic CBG regression fixture.

Sixty block groups with the full factor table and a sentiment column built
from three known drivers, so the regression stage can be exercised on its own
and checked against the coefficients that generated the data:

    sentiment = 0.2 * (0.8*z(population_density) - 0.6*z(pct_industrial)
                       + 0.4*z(lum) + 0.15*noise)

After the pipeline standardizes both sides the recoverable standardized
coefficients are (0.8, -0.6, 0.4) / sd(combined), so population_density,
pct_industrial, and lum must come out as the top three predictors by
coefficient magnitude, signed (+, -, +), with small p-values. Everything else
is independent noise. The 0.2 multiplier keeps values in a plausible
sentiment range; it cancels exactly under response standardization.

Run from the repository root:

    python3 tools/gen_synthpls.py
"""

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from urbansent.artifacts import fmt, write_artifact
from urbansent.ingest import CBG_FACTOR_COLUMNS

SEED = 20240818
N_CBGS = 60
NOISE_SD = 0.15
OUT_DIR = Path(__file__).resolve().parents[1] / "src" / "urbansent" / "data" / "synthpls"

# (low, high) uniform ranges per factor; all satisfy the loader's checks
RANGES = {
    "pct_college": (5.0, 80.0),
    "median_income": (28000.0, 160000.0),
    "pct_white": (5.0, 90.0),
    "pct_african_american": (2.0, 90.0),
    "pct_hispanic": (1.0, 40.0),
    "pct_asian": (0.0, 25.0),
    "pct_age_18_44": (20.0, 60.0),
    "pct_age_45_64": (15.0, 40.0),
    "pct_age_over_65": (3.0, 30.0),
    "pct_male": (40.0, 60.0),
    "population_density": (150.0, 12000.0),
    "bus_stop_density": (0.0, 45.0),
    "metro_station_density": (0.0, 4.0),
    "primary_road_density": (0.0, 8.0),
    "secondary_road_density": (0.5, 12.0),
    "minor_road_density": (2.0, 30.0),
    "pct_industrial": (0.0, 35.0),
    "pct_institutional": (0.0, 20.0),
    "pct_utilities": (0.0, 8.0),
    "pct_commercial": (2.0, 45.0),
    "pct_residential": (10.0, 85.0),
    "lum": (0.05, 0.95),
}

DRIVERS = {"population_density": 0.8, "pct_industrial": -0.6, "lum": 0.4}


def main() -> None:
    rng = np.random.default_rng(SEED)
    columns = {}
    for name in CBG_FACTOR_COLUMNS:
        low, high = RANGES[name]
        columns[name] = rng.uniform(low, high, size=N_CBGS)

    combo = np.zeros(N_CBGS)
    for name, weight in DRIVERS.items():
        col = columns[name]
        combo += weight * (col - col.mean()) / col.std(ddof=1)
    combo += NOISE_SD * rng.standard_normal(N_CBGS)
    sentiment = 0.2 * combo
    total_reviews = rng.integers(11, 80, size=N_CBGS)

    OUT_DIR.mkdir(parents=True, exist_ok=True)
    ids = [f"S{i:03d}" for i in range(N_CBGS)]

    factor_lines = [",".join(("cbg_id",) + CBG_FACTOR_COLUMNS)]
    for i, cbg_id in enumerate(ids):
        vals = [f"{columns[c][i]:.4f}" for c in CBG_FACTOR_COLUMNS]
        factor_lines.append(",".join([cbg_id] + vals))
    (OUT_DIR / "cbg_factors.csv").write_text("\n".join(factor_lines) + "\n", encoding="utf-8")

    rows = [
        [cbg_id, str(int(total_reviews[i])), fmt(sentiment[i])]
        for i, cbg_id in enumerate(ids)
    ]
    write_artifact(
        OUT_DIR / "cbg_sentiment.csv",
        "cbg_sentiment",
        ["cbg_id", "total_reviews", "weighted_mean"],
        rows,
    )

    config = {"cbg_factors": "cbg_factors.csv", "seed": 11, "pls_folds": 10}
    (OUT_DIR / "config.json").write_text(json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {N_CBGS} block groups to {OUT_DIR}")


if __name__ == "__main__":
    main()
