# The numerical self-checks, run standalone.
#
# `run_verification` re-derives the library's load-bearing claims from
# scratch: estimator unbiasedness by enumeration, weight optimality against
# simplex sampling, the closed-form variance bound against Monte Carlo,
# gradients against finite differences, prox nonexpansiveness, weight
# normalization, and the sparse lambda_max against a dense eigensolve.
import numpy as np

from sccd_admm import run_verification, synthesize, generate_erdos_renyi
from sccd_admm.verify import update_error_bound_mc

report = run_verification(seed=0)
for check in report["checks"]:
    mark = "pass" if check["passed"] else "FAIL"
    print(f"[{mark}] {check['name']}: {check['detail']}")
print(f"\noverall: {'pass' if report['passed'] else 'FAIL'}")

# the variance bound, tracked along an actual trajectory: Monte Carlo mean
# squared update error vs the closed form, at a high- and a low-degree node
graph = generate_erdos_renyi(12, 0.5, seed=7)
ds = synthesize(12, 20, 8, "l2", seed=3, lam=0.4)
degs = [graph.degree(i) for i in range(12)]
nodes = (int(np.argmax(degs)), int(np.argmin(degs)))

print(f"\nbound along a run (nodes {nodes}, 300 draws per checkpoint):")
print(f"{'round':>6} {'node':>5} {'mc mean':>12} {'bound':>12} {'ratio':>6}")
for cp in update_error_bound_mc(graph, ds, c=0.3, d_prox=0.3, rounds=40,
                           every=10, draws=300, nodes=nodes, seed=1):
    print(f"{cp.round_index:6d} {cp.node:5d} {cp.mc_mean:12.3e} "
          f"{cp.bound:12.3e} {cp.mc_mean / cp.bound:6.2f}")
