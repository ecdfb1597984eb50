"""Rejection rates of ADF, PP and KPSS on noise, random walks and near-unit-root AR(1).

    python3 scripts/stationarity_size.py --seeds 1000
"""
import argparse
import sys
from dataclasses import dataclass

import numpy as np

from trafficvol import stationarity as sta


@dataclass(frozen=True)
class SizeConfig:
    seeds: int = 1000
    n: int = 900
    phi: float = 0.95


def processes(rng: np.random.Generator, cfg: SizeConfig) -> dict[str, np.ndarray]:
    e = rng.normal(size=cfg.n)
    ar = np.zeros(cfg.n)
    for i in range(1, cfg.n):
        ar[i] = cfg.phi * ar[i - 1] + e[i]
    return {"noise": rng.normal(size=cfg.n), "walk": np.cumsum(e), f"ar1({cfg.phi})": ar}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=SizeConfig.seeds)
    cfg = SizeConfig(seeds=ap.parse_args(argv).seeds)
    tally: dict[str, dict[str, int]] = {}
    for s in range(cfg.seeds):
        for name, y in processes(np.random.default_rng(s), cfg).items():
            r = sta.classify(y)
            t = tally.setdefault(name, {})
            for test in ("adf", "pp", "kpss"):
                t[test] = t.get(test, 0) + (getattr(r, test).verdict is not sta.TestVerdict.INCONCLUSIVE)
            t[r.classification.value] = t.get(r.classification.value, 0) + 1
    print(f"rejections and classifications over {cfg.seeds} seeds at n={cfg.n}")
    for name, t in tally.items():
        print(f"{name:<10} " + ", ".join(f"{k}={v}" for k, v in t.items()))
    return 0


if __name__ == "__main__":
    sys.exit(main())
