"""The compressor nobody designed.

Fix the four tuning parameters, feed the gain filter a level sequence,
and watch a dynamic range compressor appear: a 2:1 steady-state ratio
with smooth attack and release transients, all emerging from the
filtering recursion.

Run:  python3 demos/01_inferred_compressor.py
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from hlcbayes.compressor import characterize, run_sequence, steady_state
from hlcbayes.model import Theta

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

theta = Theta.make(alpha=2.0, beta=-90.0, obs_variance=10.0, gain_precision=1.0)

# --- steady state: the input/gain curve -----------------------------------
levels = np.arange(20.0, 89.0, 1.0)
steady = np.array([steady_state(theta, float(lv)).mean for lv in levels])
sds = np.array([steady_state(theta, float(lv)).sd() for lv in levels])

print("steady-state gains (input dB -> gain dB):")
for lv in (40.0, 55.0, 70.0, 80.0):
    print(f"  {lv:5.1f} -> {steady[levels == lv][0]:6.2f}")

char = characterize(theta, 55.0, 80.0)
print(f"\ncompression ratio between 55 and 80 dB: {char.compression_ratio:.3f}")
print(f"attack steps: {char.attack_steps}   release steps: {char.release_steps}")
print("(at 5 ms hops that is {} ms and {} ms)".format(5 * char.attack_steps, 5 * char.release_steps))

fig, ax = plt.subplots(figsize=(6, 4))
ax.plot(levels, steady, lw=2)
ax.fill_between(levels, steady - sds, steady + sds, alpha=0.25)
ax.set_xlabel("input level (dB)")
ax.set_ylabel("steady gain (dB)")
ax.set_title("steady-state input/gain curve")
fig.tight_layout()
fig.savefig(OUT / "01_static_gain.png", dpi=120)

# --- dynamics: a square wave between the two probe levels ------------------
seq = np.array([55.0] * 50 + [80.0] * 50 + [55.0] * 50 + [80.0] * 50)
states = run_sequence(seq, theta)
means = np.array([s.mean for s in states])
band = np.array([s.sd() for s in states])

fig, ax = plt.subplots(figsize=(7, 4))
ax.plot(seq, ls="--", label="input level (dB)")
ax.plot(means, lw=2, label="inferred gain (dB)")
ax.fill_between(np.arange(len(means)), means - band, means + band, alpha=0.25)
ax.set_xlabel("frame")
ax.legend()
ax.set_title("gain trace under an alternating input")
fig.tight_layout()
fig.savefig(OUT / "01_dynamic_gain.png", dpi=120)

print(f"\nfigures written to {OUT}/01_static_gain.png and 01_dynamic_gain.png")
