# One node's communication-count search, step by step.
#
# Each round a node probes candidate neighbor counts, scores each by
# (compute + communication price) / predicted progress, and keeps the
# cheapest. The walk starts from half the degree on round one, shrinks by
# `stepsize` with a floor of one, and later rounds start from the previous
# winner, so the per-node count can only fall over time.
import numpy as np

from sccd_admm.adapt import sampling_weights, search_num, variance_bound

rng = np.random.default_rng(0)
degree = 10

# synthetic progress curve: contacting more neighbors helps, with noise and
# diminishing returns; a real run gets this from a trial update
def evaluate(s, num):
    return (1.0 - np.exp(-0.6 * num)) * (1.0 + 0.05 * rng.standard_normal())

for c_cmm, label in ((0.05, "cheap links"), (1.5, "expensive links")):
    best, attempts = search_num(prev_num=degree, degree=degree, round_index=1,
                                stepsize=2, c_cmp=1.0, c_cmm=c_cmm,
                                evaluate=evaluate)
    print(f"--- {label}: C_cmm = {c_cmm} ---")
    for a in attempts:
        print(f"  probe s={a.s} num={a.num:2d}  gamma={a.gamma:.3f}"
              f"  score={a.score:8.3f}")
    print(f"  chosen count: {best}\n")

# the importance distribution that keeps the truncated neighbor sum
# unbiased: selection probability proportional to how far the stored
# neighbor value sits from the node's own iterate
x_i = rng.standard_normal(4)
cache = x_i[None, :] + rng.standard_normal((degree, 4)) * rng.uniform(
    0.05, 2.0, size=(degree, 1))
w = sampling_weights(x_i, cache)
print("selection probabilities (sum to 1):")
print(np.array2string(w.probs, precision=3))

diffs = x_i[None, :] - cache
print(f"update-error variance bound at c=0.3, eta=0.2: "
      f"{variance_bound(0.3, 0.2, diffs):.4f}")
