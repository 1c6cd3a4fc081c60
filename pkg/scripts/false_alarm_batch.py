"""False events per batch of 20 clean channels, over many disjoint batches.

Each batch runs 20 fault-free channels of 10^4 samples at z = 4.5 and counts
events. The Gaussian two-sided tail at 4.5 gives the nominal expectation
printed alongside.

Usage: python scripts/false_alarm_batch.py [N_BATCHES]
"""
import collections
import sys

from scipy.stats import norm, poisson

from rlsad.detector import ChannelConfig, ChannelDetector, Phase
from rlsad.simulator import ROLL, simulate

N_SAMPLES = 10_000
BATCH = 20
THRESHOLD = 4.5


def run_channel(seed):
    sim = simulate(ROLL, None, duration_s=N_SAMPLES / ROLL.rate_hz, seed=seed)
    det = ChannelDetector(ChannelConfig("roll", "roll_cmd", "roll_meas", z_threshold=THRESHOLD))
    armed = events = 0
    for t, u, y in zip(sim.columns["t"], sim.columns["ch_cmd"], sim.columns["ch_meas"]):
        if det.step(t, u, y) is not None:
            events += 1
        armed += det.phase is Phase.ARMED
    return events, armed


def main(n_batches=10):
    tail = 2 * norm.sf(THRESHOLD)
    counts, armed_total = [], 0
    for b in range(n_batches):
        results = [run_channel(b * BATCH + i) for i in range(BATCH)]
        counts.append(sum(e for e, _ in results))
        armed_total += sum(a for _, a in results)
        print(f"batch {b:3d} (seeds {b * BATCH}..{b * BATCH + BATCH - 1}): {counts[-1]} event(s)")
    expected = tail * armed_total / n_batches
    print(f"\nnominal tail probability at z={THRESHOLD}: {tail:.3g} per armed sample")
    print(f"mean events per batch: {sum(counts) / n_batches:.2f} (nominal {expected:.2f})")
    hist = collections.Counter(counts)
    for k in sorted(hist):
        print(f"  {k} event(s): {hist[k]} batch(es), Poisson {n_batches * poisson.pmf(k, expected):.1f}")
    share = sum(c <= 1 for c in counts) / n_batches
    print(f"batches with <= 1 event: {share:.0%} (Poisson {poisson.cdf(1, expected):.0%})")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 10)
