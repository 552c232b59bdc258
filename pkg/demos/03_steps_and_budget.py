# %% [markdown]
# Step size, bias, and the (h, L) budget
#
# The grid stepper has weak order about one.  A pilot run estimates the
# order, the bias prefactor and the per-sample variance; the planner then
# picks the cheapest (h, L) meeting a target root-mean-square error.

# %%
import numpy as np

from netsde import convergence_study, estimate_constants, plan_h_L
from netsde.network import GeneratorConfig, generate

net = generate(GeneratorConfig("erdos-renyi", 10, rates=(1.0, 3.0), seed=0))
src = [int(np.argmax(net.out_degree))]
res = convergence_study(net, src, 2.0, (0.4, 0.2, 0.1, 0.05), ("euler", "taylor2"), L=200_000, seed=1)
print("reference E mu(T) =", round(res.reference_mean, 4))
for s in res.steppers:
    print(f"{s:8s} slope {res.slopes[s]:.3f}  biases", np.round(res.bias[s], 4))

# %% [markdown]
# Plan a run for a few error targets.

# %%
c = estimate_constants(net, src, 2.0, L0=20_000, seed=2)
print(f"beta={c.beta:.3f}  sigma^2={c.sigma2:.3f}  C={c.C:.3f}")
for eps in (0.2, 0.1, 0.05):
    p = plan_h_L(eps, c, 2.0, network=net)
    print(f"eps={eps:<5} h={p.h:.4f} L={p.L:<8d} bound={p.bound:.4f} grid cost={p.compute_cost:.3g}")
