"""Verdict counts from the log-normal adjudication on each synthetic trace kind.

    python3 scripts/adjudication_study.py --seeds 20 --n-boot 200
"""
import argparse
import sys
from collections import Counter
from dataclasses import dataclass

from trafficvol import fitcompare, synth


@dataclass(frozen=True)
class AdjudicationConfig:
    seeds: int = 20
    n: int = 9000
    n_boot: int = 200
    kinds: tuple[str, ...] = ("lognormal", "exponential", "gaussian", "bimodal")


def run(cfg: AdjudicationConfig) -> dict[str, dict]:
    out = {}
    for kind in cfg.kinds:
        accepted = 0
        verdicts: dict[str, Counter] = {}
        for seed in range(cfg.seeds):
            x = synth.generate(synth.SynthSpec(kind, cfg.n, seed)).volumes
            adj = fitcompare.adjudicate(x, n_boot=cfg.n_boot, seed=seed)
            accepted += adj.gof.accepted
            for fam, c in adj.comparisons.items():
                verdicts.setdefault(fam.value, Counter())[c.verdict.value] += 1
        out[kind] = {"gof_accepted": accepted, "verdicts": verdicts}
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=AdjudicationConfig.seeds)
    ap.add_argument("--n-boot", type=int, default=AdjudicationConfig.n_boot)
    args = ap.parse_args(argv)
    cfg = AdjudicationConfig(seeds=args.seeds, n_boot=args.n_boot)
    for kind, r in run(cfg).items():
        print(f"{kind}: lognormal GOF accepted {r['gof_accepted']}/{cfg.seeds}")
        for fam, counts in r["verdicts"].items():
            print(f"  vs {fam:<12} " + ", ".join(f"{v}={k}" for v, k in sorted(counts.items())))
    return 0


if __name__ == "__main__":
    sys.exit(main())
