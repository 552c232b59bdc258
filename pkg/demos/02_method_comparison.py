# %% [markdown]
# Comparing estimators on synthetic networks
#
# Three 200-node families, two random sources each, horizon 5.  The exact
# oracle averages 10^4 event-driven cascades; the SDE estimator uses 1000
# antithetic trajectories at step 0.01; mean-field integrates the
# independence-closure ODE.

# %%
import os

import numpy as np

from netsde import error_curves, predict
from netsde.experiments import FAMILY_DEFAULTS
from netsde.network import GeneratorConfig, generate, random_sources
from netsde.plotting import save_chart

out = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(out, exist_ok=True)

T, h = 5.0, 0.01
for k, (family, kw) in enumerate(FAMILY_DEFAULTS.items()):
    net = generate(GeneratorConfig(family, 200, seed=k, **kw))
    src = random_sources(200, 2, seed=k)
    truth = predict("mc-oracle", net, src, T, h, 10_000, seed=10 + k)
    curves = {m: predict(m, net, src, T, h, 1000, seed=20 + k) for m in ("sde-euler", "meanfield")}
    for m, c in curves.items():
        r = error_curves(c, truth)
        print(f"{family:12s} {m:10s} mu(T)={c.mu[-1]:7.2f} (oracle {truth.mu[-1]:.2f})  "
              f"terminal rel err {r.terminal_rel:.3f}  {c.runtime:.2f}s")
    series = {"oracle": (truth.times, truth.mu), **{m: (c.times, c.mu) for m, c in curves.items()}}
    save_chart(os.path.join(out, f"influence_{family}.svg"), series, title=family, ylabel="influence")

# %% [markdown]
# Mean-field treats node states as independent, which double counts
# reinforcing paths and sits well above the oracle.  The SDE estimator tracks
# the oracle within its sampling error.

# %% [markdown]
# Antithetic pairing: each pair of trajectories draws its Poisson counts from
# U and 1 - U.  The variance of the terminal influence drops for the same L.

# %%
net = generate(GeneratorConfig("erdos-renyi", 200, seed=0))
src = random_sources(200, 2, seed=0)
for anti in (True, False):
    vals = [predict("sde-euler", net, src, T, h, 40, seed=s, antithetic=anti).mu[-1] for s in range(60)]
    print(f"antithetic={anti!s:5s} spread of mu(T) over 60 runs at L=40: sd {np.std(vals):.2f}")
