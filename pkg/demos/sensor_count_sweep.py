"""A small Monte Carlo campaign: accuracy as the network grows.

Runs the quantized pipeline at several sensor counts with everything else
held fixed, then prints the squared-error box summaries and a slice of the
outlier-probability curve.  Trial counts are kept small so the demo finishes
in well under a minute; the batch CLI runs the same sweep at scale:

    fieldest campaign --config sweep.cfg --out results/
"""

from fieldest import config_from_mapping, run_campaign

cfg = config_from_mapping(
    {
        "channel.kind": "quantized",
        "channel.m": 8,
        "network.k": [20, 40, 100],
        "snr.observation_db": 15.0,
        "snr.channel_db": 15.0,
        "trials.count": 12,
        "crlb.enabled": False,
        "report.tau_count": 7,
        "report.tau_min": 0.1,
        "report.tau_max": 100.0,
    }
)

report = run_campaign(cfg)

print(f"{'K':>4}  {'conv':>5}  {'median SE':>10}  {'q1':>8}  {'q3':>8}")
for row in report["cells"]:
    box = row["box"]
    print(
        f"{row['k']:>4}  {row['n_converged']:>3}/{row['n_trials']}"
        f"  {box['median']:>10.4f}  {box['q1']:>8.4f}  {box['q3']:>8.4f}"
    )

print("\noutlier probability P(SE > tau):")
taus = report["tau_grid"]
print("  tau: " + "  ".join(f"{t:7.2f}" for t in taus))
for row in report["cells"]:
    po = row["po"]
    print(f"  K={row['k']:<3} " + "  ".join(f"{p:7.3f}" for p in po))

print("\nlarger networks concentrate the error distribution toward zero;")
print("rerunning this script reproduces identical numbers (seeded trials).")
