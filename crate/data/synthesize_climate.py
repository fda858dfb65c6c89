"""Regenerate the synthetic stand-in for data/tokyo_tmax_monthly.csv.

The table is NOT observational data. It is a seeded draw from a simple model:
a fixed monthly climatology, a linear warming trend over the record, one shared
anomaly per year and independent per-month noise. Replace the CSV with an export
of the JMA "monthly mean daily maximum temperature" table for Tokyo (block 47662)
to work with observed values; the header format is `year,jan,...,dec`.

    python3 data/synthesize_climate.py > data/tokyo_tmax_monthly.csv
"""
import numpy as np

# Approximate recent monthly climatology of daily maxima in central Tokyo (degC).
CLIMATOLOGY = np.array([9.8, 10.9, 14.2, 19.4, 23.6, 26.1, 29.9, 31.3, 27.5, 22.0, 16.7, 12.0])
MONTH_SD = np.array([1.0, 1.1, 1.0, 0.9, 0.8, 0.9, 1.4, 1.2, 1.1, 0.9, 0.9, 1.0])
FIRST, LAST = 1876, 2021
WARMING = 2.2  # degC over the record

rng = np.random.default_rng(20221016)
print("year,jan,feb,mar,apr,may,jun,jul,aug,sep,oct,nov,dec")
for year in range(FIRST, LAST + 1):
    trend = WARMING * ((year - FIRST) / (LAST - FIRST) - 1.0)
    shared = rng.normal(0.0, 0.4)
    row = CLIMATOLOGY + trend + shared + rng.normal(0.0, MONTH_SD)
    print(str(year) + "," + ",".join(f"{v:.1f}" for v in row))
