# %% [markdown]
# Small networks with known answers
#
# A single edge 0 -> 1 with rate 1 activates node 1 at an exponential time, so
# x_1(t) = 1 - exp(-t).  A chain 0 -> 1 -> 2 convolves two exponentials.  Both
# make handy sanity checks for the estimators.

# %%
import numpy as np

from netsde import build_network, predict

edge = build_network(2, [(0, 1, 1.0)])
for method in ("mc-oracle", "sde-jump-adapted", "sde-euler"):
    c = predict(method, edge, [0], T=2.0, h=0.01, L=20_000, seed=1)
    idx = [50, 100, 200]
    print(f"{method:18s}", np.round(c.marginals[idx, 1], 4), "exact", np.round(1 - np.exp(-c.times[idx]), 4))

# %% [markdown]
# The chain.  Euler only moves one hop per step, so at coarse steps it lags the
# exact replay; the lag shrinks with h.

# %%
chain = build_network(3, [(0, 1, 1.0), (1, 2, 2.0)])
exact = 1 - (2 * np.exp(-2.0) - np.exp(-4.0))
for h in (0.2, 0.1, 0.05, 0.01):
    c = predict("sde-euler", chain, [0], T=2.0, h=h, L=100_000, seed=2)
    print(f"h={h:<5} x2(2)={c.marginals[-1, 2]:.4f}  exact {exact:.4f}")
c = predict("sde-jump-adapted", chain, [0], T=2.0, h=0.5, L=100_000, seed=2)
print(f"jump-adapted x2(2)={c.marginals[-1, 2]:.4f}")

# %% [markdown]
# With recovery the middle node can switch off again, which starves node 2.

# %%
chain_rec = chain.with_recovery([0.0, 1.5, 0.0])
for method in ("mc-oracle", "sde-jump-adapted", "meanfield"):
    c = predict(method, chain_rec, [0], T=2.0, h=0.01, L=50_000, seed=3)
    print(f"{method:18s} x(2) =", np.round(c.marginals[-1], 4))
