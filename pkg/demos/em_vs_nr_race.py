"""EM against direct Newton ascent on identical quantized-channel trials.

Both estimators maximize the same bit-word likelihood.  The comparison pairs
them trial by trial on bit-identical data and starting points, so differences
come from the algorithms alone: Newton takes few expensive, sometimes fragile
steps; EM takes many cheap, guaranteed-ascent steps.
"""

from fieldest import compare_em_nr, config_from_mapping

cfg = config_from_mapping(
    {
        "channel.kind": "quantized",
        "channel.m": 8,
        "network.k": 40,
        "snr.observation_db": 15.0,
        "snr.channel_db": 15.0,
        "trials.count": 12,
        "crlb.enabled": False,
        "report.tau_count": 5,
    }
)

row = compare_em_nr(cfg)["cells"][0]

print(f"matched trials: {row['n_trials']}, jointly converged: {row['n_jointly_converged']}")
print(f"mean iterations (jointly converged):  em = {row['em_mean_iterations_joint']:.1f}"
      f"   nr = {row['nr_mean_iterations_joint']:.1f}")
print(f"median squared error (all trials):    em = {row['em_median_se']:.4f}"
      f"   nr = {row['nr_median_se']:.4f}")
print(f"converged trials:                     em = {row['em']['n_converged']}"
      f"   nr = {row['nr']['n_converged']}")

print("\nper-estimator squared-error boxes (all estimated trials):")
for name in ("em", "nr"):
    box = row[name]["box"]
    print(f"  {name}: median {box['median']:.4f}   [q1 {box['q1']:.4f}, q3 {box['q3']:.4f}]"
          f"   outliers {len(box['outliers'])}")
