"""16-QAM symbol error rate: closed forms against Monte Carlo.

First the AWGN curve of a unit 1x1 link, then the Rayleigh-faded average
with L combined branches, then the SER of GA-selected sub-channels for the
two antenna configurations.
"""

import numpy as np

from multicast_antsel.channel import MulticastChannel
from multicast_antsel.capacity import AntennaSubset
from multicast_antsel.experiment import parse_config, run_ser_experiment
from multicast_antsel.ser import LinkSimConfig, SerParams, analytic_ser_curve, conditional_ser_qam, simulate_link

grid = np.arange(0, 21, 4.0)

# AWGN: a fixed unit gain, so the conditional SER is exact
link = LinkSimConfig(symbols_per_block=50_000, num_blocks=4, seed=3)
(awgn,) = simulate_link(MulticastChannel.from_gains([np.ones((1, 1))]), AntennaSubset((0,), ((0,),)), link, snr_grid_db=grid)
print("AWGN, 16-QAM")
for (snr_db, p), ci in zip(awgn.points, awgn.confidence):
    print(f"  {snr_db:4.0f} dB  sim {p:.3e} +- {ci:.1e}   theory {conditional_ser_qam(10 ** (snr_db / 10)):.3e}")

# fading average: diversity order shows up as the slope at high SNR
print("\nRayleigh, MRC of L branches")
for L in (1, 2, 3):
    curve = analytic_ser_curve(SerParams(branches=L, symbol_snr_grid=grid))
    print(f"  L={L}: " + "  ".join(f"{p:.2e}" for p in curve.ser))

text = """
schema_version: 1
master_seed: 2
scenarios:
  - {name: 4T4R-2T2R, preset: paper-4T4R-2T2R, snr_grid_db: [0, 5, 10], trials: 40,
     experiments: [ser], link: {symbols_per_block: 1000, num_blocks: 1}}
  - {name: 8T8R-3T3R, preset: paper-8T8R-3T3R, snr_grid_db: [0, 5, 10], trials: 40,
     experiments: [ser], link: {symbols_per_block: 1000, num_blocks: 1}}
"""
print("\nGA-selected sub-channels, selection combining")
for s in parse_config(text):
    rows = [r for r in run_ser_experiment(s).ser_rows if r.method == "ga"]
    print(f"  {s.name}: " + "  ".join(f"{r.snr_db:.0f} dB {r.ser:.3e}" for r in rows))
