"""Acceptance criteria, each at its stated tolerance.

Training criteria run the shipped figure configs at the named noise values and
judge the median over the five shipped seeds. A summary line per criterion is
printed at the end of the session.
"""

import math
import subprocess
import sys
import time
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from qae.cli import load_config
from qae.harness import analytic_baseline, run_point

from conftest import report

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"


@lru_cache(maxsize=None)
def point(config: str, value: float):
    _, exp = load_config(CONFIGS / f"{config}.json")
    return run_point(exp, value)


def per_seed(rec, name="F_val_bar"):
    return "[" + ", ".join(f"{getattr(s, name):.4f}" for s in rec.seeds) + "]"


def test_criterion_1_combined_noise():
    rec = point("fig3", 0.3)
    f_val, df_val, f_in = rec.F_val_bar, rec.median("dF_val"), rec.F_bar
    ok = f_val >= 0.90 and df_val <= 0.05 and f_in <= 0.15
    report(1, ok, f"median F_val_bar {f_val:.4f} (>=0.90), dF_val {df_val:.4f} (<=0.05), "
                  f"F_bar {f_in:.4f} (<=0.15); per seed {per_seed(rec)}")
    assert f_in <= 0.15
    assert f_val >= 0.90
    assert df_val <= 0.05


def test_criterion_2_spinflip_dense_and_stacked():
    parts, ok = [], True
    for cfg in ("fig2a_dense", "fig2a_stacked"):
        for p in (0.1, 0.2, 0.3):
            f = point(cfg, p).F_val_bar
            ok &= f >= 0.95
            parts.append(f"{cfg.split('_')[1]} p={p}: {f:.4f}")
    report(2, ok, "median F_val_bar >= 0.95: " + "; ".join(parts))
    assert ok


def test_criterion_3_two_phases():
    rec = point("fig4a", 0.4)
    ok = rec.F_val_bar >= 0.90
    report(3, ok, f"median F_val_bar {rec.F_val_bar:.4f} (>=0.90) at p=0.4; per seed {per_seed(rec)}")
    assert ok


def test_criterion_4_random_phases():
    clean = point("fig4b", 0.0)
    noisy = point("fig4b", 0.2)
    filtered = noisy.median("F_val_bar_filtered")
    ok = clean.F_val_bar >= 0.98 and filtered >= 0.95
    report(4, ok, f"p=0 median F_val_bar {clean.F_val_bar:.4f} (>=0.98); "
                  f"p=0.2 |J|<=1 median {filtered:.4f} (>=0.95)")
    assert clean.F_val_bar >= 0.98
    assert filtered >= 0.95


def test_criterion_5_large_training_set():
    cfg, _ = load_config(CONFIGS / "fig5.json")
    rec = point("fig5", 0.4)
    ok = rec.F_val_bar >= 0.90
    report(5, ok, f"median F_val_bar {rec.F_val_bar:.4f} (>=0.90) at p=0.4, lr {cfg.training.lr}; "
                  f"per seed {per_seed(rec)}")
    assert ok


def test_criterion_6_sparse_matches_dense():
    parts, ok = [], True
    for p in (0.1, 0.2, 0.3):
        sparse, dense = point("fig7a", p).F_val_bar, point("fig2a_dense", p).F_val_bar
        ok &= sparse >= 0.95 and abs(sparse - dense) <= 0.05
        parts.append(f"p={p}: sparse {sparse:.4f} dense {dense:.4f}")
    report(6, ok, "sparse >= 0.95 and within 0.05 of dense: " + "; ".join(parts))
    assert ok


def test_criterion_7_analytic_baseline():
    f, se = analytic_baseline(0.3, 4, 200)
    rng = np.random.default_rng(7)
    flips = rng.random((1_000_000, 4)) < 0.3
    samples = np.all(flips == flips[:, :1], axis=1).astype(float)
    mc, mc_se = samples.mean(), samples.std() / math.sqrt(samples.size)
    ok = round(f, 4) == 0.2482 and abs(se - math.sqrt(0.2482 * 0.7518 / 200)) < 1e-4 and abs(mc - f) < 3 * mc_se
    report(7, ok, f"F_inf {f:.4f}, error bar {se:.5f}, Monte-Carlo {mc:.5f} +- {mc_se:.5f}")
    assert ok


PROPERTY_SUITES = [
    "tests/test_linops.py",
    "tests/test_noise.py",
    "tests/test_states.py",
    "tests/test_qnn.py",
    "tests/test_train.py",
    "tests/test_harness.py",
    "tests/test_cli.py",
]


def test_criterion_8_property_suites():
    start = time.perf_counter()
    res = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *PROPERTY_SUITES],
        cwd=ROOT,
        capture_output=True,
        text=True,
    )
    elapsed = time.perf_counter() - start
    tail = res.stdout.strip().splitlines()[-1] if res.stdout.strip() else res.stderr[-200:]
    ok = res.returncode == 0 and elapsed <= 300
    report(8, ok, f"{tail} ({elapsed:.0f} s, limit 300 s)")
    assert res.returncode == 0, res.stdout[-3000:]
    assert elapsed <= 300
