# Wall-clock delay under a synchronous schedule.
#
# Per round the network waits for the slowest talker (tau times the largest
# neighbor count) and the slowest updater (largest attempt count + 1, in
# abstract compute units). Slot length tau = dim * 32 bits / link rate.
from sccd_admm import (
    DelayModel, RunConfig, delay_summary, per_value_slot_seconds,
    centralized_reference, generate_erdos_renyi, laplacian_lambda_max, run,
    synthesize,
)

n, dim, m = 12, 20, 8
graph = generate_erdos_renyi(n, 0.5, seed=7)
ds = synthesize(n, dim, m, "l2", seed=3, lam=0.4)
_, obj_star = centralized_reference(ds)
lam_max = laplacian_lambda_max(graph)

results = {}
for variant in ("sccd", "dadmm"):
    cfg = RunConfig(variant=variant, c=0.3, co_rat=0.1, max_iters=2000,
                    master_seed=3)
    results[variant] = run(graph, ds, cfg, obj_star=obj_star,
                           lambda_max=lam_max, collect_attempts=False)

print(f"{'variant':>7} {'rate':>8} {'tau (us)':>9} {'comm (s)':>9} "
      f"{'comp (units)':>13}")
for rate_mbps in (54.0, 11.0):
    tau = per_value_slot_seconds(dim, rate_mbps * 1e6)
    model = DelayModel(tau=tau)
    for variant, res in results.items():
        d = delay_summary(res.nums_per_round, res.s_per_round,
                          res.seconds_per_round, model)
        print(f"{variant:>7} {rate_mbps:6.0f}Mb {tau * 1e6:9.2f} "
              f"{d.comm_delay:9.5f} {d.comp_delay:13.0f}")

# halving the link rate scales only the communication column. Within one
# round the searching variant waits on fewer transmissions, but it runs
# more rounds and pays trial updates, so which variant finishes first
# depends on how slow the links are relative to one update
