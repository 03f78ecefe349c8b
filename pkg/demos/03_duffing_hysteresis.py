"""
Duffing frequency response and non-physical roots
==================================================

``x'' + 0.1 x' + x + x^3 = cos(w t)``. Warm-started sweeps up and down in w
trace the two stable branches and the jumps between them. Random starts at
w = 2 then probe the difference between RHB and HDHB: with too few
collocation points, HDHB can converge to coefficient vectors that no
trajectory of the oscillator follows. Such roots are rare here (a few per
thousand converged starts, see ``rhbkit mc``), so this short run may well
show none; RHB never produces one.
"""
import numpy as np

from rhbkit.bench.cases import duffing_branches, run_monte_carlo, run_sweep

ws = [round(w, 2) for w in np.arange(1.0, 3.61, 0.1)]
up = run_sweep("duffing", ws, order=7)
down = run_sweep("duffing", ws[::-1], order=7)[::-1]

# %%
print("   w    forward  backward")
for w, f, b in zip(ws, up, down):
    mark = "  <- two stable responses" if abs(f.amplitude - b.amplitude) > 0.1 else ""
    print(f"{w:5.2f}  {f.amplitude:8.4f}  {b.amplitude:8.4f}{mark}")

# %%
# Single-harmonic estimates of the three responses at w = 2 anchor the
# classification of random-start results.
print("first-harmonic amplitudes at w = 2:", np.round(duffing_branches(1.0, 2.0), 4))

mc = run_monte_carlo(trials=100, seed=0)
for v in ("rhb", "hdhb"):
    print(v, mc.counts[v])
