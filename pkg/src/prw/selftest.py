"""Quick invariant suite: metric sandwich, translated clouds, full-rank PRW."""

from typing import List, Tuple

import numpy as np

from .distances import RsganConfig, iprw, prw2_rsgan
from .exact_ot import wasserstein_p
from .harness import ResultTable, Row
from .measures import make_empirical, trial_rng


def _sandwich(seed: int, rows: List[Row]) -> bool:
    ok = True
    for run in range(4):
        rng = trial_rng(seed, 0, run)
        mu = make_empirical(rng.standard_normal((20, 6)))
        nu = make_empirical(rng.standard_normal((20, 6)) + rng.uniform(-1, 1, 6))
        w2 = wasserstein_p(mu, nu, 2.0)
        for k in (1, 2, 4):
            ip = iprw(mu, nu, k=k, n_proj=20, seed=run)
            res = prw2_rsgan(mu, nu, RsganConfig(k=k, seed=run))
            p = f"k={k}"
            rows += [Row("selftest", p, 20, run, "w2", w2, 0.0),
                     Row("selftest", p, 20, run, "iprw", ip, 0.0),
                     Row("selftest", p, 20, run, "prw", res.value, 0.0)]
            ok &= ip <= w2 + 1e-9
            ok &= res.value <= w2 + 1e-6
            ok &= res.value >= np.sqrt(max(res.initial_objective, 0.0)) - 1e-12
    return bool(ok)


def _translation(seed: int, rows: List[Row]) -> bool:
    hits = 0
    for run in range(5):
        rng = trial_rng(seed, 1, run)
        X = rng.standard_normal((15, 4))
        t = rng.standard_normal(4)
        res = prw2_rsgan(make_empirical(X), make_empirical(X + t), RsganConfig(k=1, seed=run))
        norm = float(np.linalg.norm(t))
        rows.append(Row("selftest", "translation", 15, run, "prw_over_norm", res.value / norm, 0.0))
        hits += 0.95 * norm <= res.value <= norm + 1e-8
    return hits >= 4


def _full_rank(seed: int, rows: List[Row]) -> bool:
    ok = True
    for run in range(3):
        rng = trial_rng(seed, 2, run)
        mu = make_empirical(rng.standard_normal((12, 3)))
        nu = make_empirical(rng.standard_normal((12, 3)) * 1.5)
        w2 = wasserstein_p(mu, nu, 2.0)
        res = prw2_rsgan(mu, nu, RsganConfig(k=3, seed=run))
        rows.append(Row("selftest", "k=d", 12, run, "prw_minus_w2", res.value - w2, 0.0))
        ok &= abs(res.value - w2) <= 1e-6
    return bool(ok)


CHECKS = (("sandwich", _sandwich), ("translation", _translation), ("k=d", _full_rank))


def run_selftest(seed: int = 0) -> Tuple[bool, List[Tuple[str, bool]], ResultTable]:
    """Run every check; returns ``(all_passed, [(name, passed)], table of measured values)``."""
    rows: List[Row] = []
    results = [(name, check(seed, rows)) for name, check in CHECKS]
    return all(ok for _, ok in results), results, ResultTable(rows)
