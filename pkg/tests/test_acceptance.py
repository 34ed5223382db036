"""Acceptance suite: one test per criterion, at the stated tolerances.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one pass/fail line
per criterion (pytest -v also shows one PASSED/FAILED line per criterion via
the test names).
"""

import math
import os
from contextlib import contextmanager

import numpy as np
import pytest

from geopriv.dataset import SAN_FRANCISCO
from geopriv.experiments import (
    DecisionExperimentConfig,
    GowallaExperimentConfig,
    gowalla_remap_experiment,
    render_rows,
    run_decision_experiment,
    tradeoff_table,
)
from geopriv.geo import PlanarPoint
from geopriv.mechanisms import Laplace, calibrate_to_qavg, sample_arrays
from geopriv.metrics import (
    Pmf,
    perr_min,
    posterior_bound_holds,
    satisfies_error_bound,
    satisfies_geo_ind,
    tightest_epsilon,
)
from geopriv.rng import RandomStream

from test_metrics import random_mechanism


@contextmanager
def criterion(number, text):
    try:
        yield
    except BaseException:
        print(f"[acceptance] criterion {number}: FAIL - {text}")
        raise
    print(f"[acceptance] criterion {number}: PASS - {text}")


def empirical_loss_stats(params, n=1_000_000, seed=2024):
    xs, ys = sample_arrays(params, PlanarPoint(0.0, 0.0), n, RandomStream(seed, 0))
    r = np.hypot(xs, ys)
    return float(r.mean()), float(np.percentile(r, 95.0))


def test_criterion_1_worked_bound():
    with criterion(1, "perr_min(2 km^-1, 500 m) = 0.26894 +/- 1e-5"):
        assert perr_min(0.002, 500.0) == pytest.approx(0.26894, abs=1e-5)


def test_criterion_2_laplace_analytics():
    with criterion(2, "empirical Laplace qavg = 1000 m +/- 0.5%, p95 = 2372 m +/- 1% at 1e6 samples"):
        qavg, r95 = empirical_loss_stats(Laplace(0.002))
        assert qavg == pytest.approx(1000.0, rel=5e-3)
        assert r95 == pytest.approx(2372.0, rel=1e-2)


def test_criterion_3_r95_over_qavg_ratios():
    expected = {"laplace": 2.372, "gaussian": 1.953, "circular": 1.462}
    with criterion(3, "R95/qavg ratios 2.372 / 1.953 / 1.462 within 1% at 1e6 samples"):
        for family, target in expected.items():
            params = calibrate_to_qavg(family, 1000.0)
            qavg, r95 = empirical_loss_stats(params)
            assert r95 / qavg == pytest.approx(target, rel=1e-2), family


def test_criterion_4_tradeoff_numbers():
    with criterion(4, "error floor 0.4 @ 200 m -> qavg 986.5 +/- 1, r95 2340 +/- 3; eps*=0.01 @ 100 m -> qavg 20 km"):
        eps = math.log(1.5) / 200.0  # floor 0.4 at r* = 200 m
        row = tradeoff_table([eps], 200.0)[0]
        assert row.perr_min == pytest.approx(0.4, abs=1e-9)
        assert row.qavg == pytest.approx(986.5, abs=1.0)
        assert row.r95 == pytest.approx(2340.0, abs=3.0)
        row2 = tradeoff_table([0.01 / 100.0], 100.0)[0]
        assert row2.eps_star == pytest.approx(0.01, rel=1e-12)
        assert row2.qavg == 20_000.0


def test_criterion_5_sure_lower_bound_vs_absence():
    with criterion(5, "histogram operating point: Laplace respects the floor, Gaussian/Circular break it, Gaussian avg > Laplace avg"):
        cfg = DecisionExperimentConfig(distances=(100.0,), qavgs=(500.0,), trials=20_000, seed=42)
        rows, _ = run_decision_experiment(cfg)
        by = {r.family: r for r in rows}
        floor = perr_min(0.004, 100.0)  # 0.40131...
        assert by["laplace"].min_perr >= 0.4013 - 1e-12
        assert by["laplace"].min_perr >= floor - 1e-12
        assert by["gaussian"].min_perr < 0.4013
        assert by["circular"].min_perr < 0.4013
        assert by["gaussian"].avg_perr > by["laplace"].avg_perr


def test_criterion_5_histogram_contrast():
    # histogram shape at the same operating point: Laplace has no mass below its floor; Gaussian puts mass
    # both below 0.4 and in higher bins than the Laplace mode
    with criterion("5b", "histogram: zero Laplace mass below the floor, Gaussian mass on both sides"):
        cfg = DecisionExperimentConfig(distances=(100.0,), qavgs=(500.0,), trials=20_000, seed=42)
        rows, _ = run_decision_experiment(cfg)
        by = {r.family: r for r in rows}
        floor = perr_min(0.004, 100.0)
        edges = np.linspace(0.0, 0.5, cfg.histogram_bins + 1)
        lap_hist = np.array(by["laplace"].histogram)
        gau_hist = np.array(by["gaussian"].histogram)
        assert lap_hist[edges[1:] <= floor].sum() == 0
        assert gau_hist[edges[1:] <= 0.4].sum() > 0
        lap_mode = int(lap_hist.argmax())
        assert gau_hist[lap_mode + 1 :].sum() > 0


def test_criterion_6_crossover_and_low_privacy_point():
    with criterion(6, "families beat Laplace below the first crossing; Laplace avg = 0.1 +/- 0.02 where the floor is 0.01"):
        for qavg in (300.0, 500.0):
            d_star = qavg * math.log(99.0) / 2.0  # floor exactly 0.01 here
            grid = sorted(set(float(v) for v in np.geomspace(50.0, 10.0 * qavg, 24)) | {d_star})
            cfg = DecisionExperimentConfig(
                distances=tuple(grid), qavgs=(qavg,), trials=20_000, seed=42
            )
            rows, _ = run_decision_experiment(cfg, threads=4)
            lap = {r.d: r.avg_perr for r in rows if r.family == "laplace"}
            assert lap[d_star] == pytest.approx(0.1, abs=0.02)
            for family in ("gaussian", "circular"):
                fam = {r.d: r.avg_perr for r in rows if r.family == family}
                diffs = [(d, fam[d] - lap[d]) for d in sorted(lap)]
                crossing = next((i for i, (_, v) in enumerate(diffs) if v <= 0), None)
                assert crossing is not None, (family, qavg, "no crossing in range")
                assert crossing > 0, (family, qavg, "family never beats laplace")
                assert all(v > 0 for _, v in diffs[:crossing])


def test_criterion_7_definition_equivalence():
    with criterion(7, "1000 random mechanisms: pairwise bound holds iff every triple clears the error floor"):
        rng = np.random.default_rng(777)
        counterexamples = 0
        for case in range(1000):
            mech = random_mechanism(rng, zero_column=(case % 7 == 0))
            t = tightest_epsilon(mech)
            if math.isinf(t):
                probes = [1e-4, 1e-2]
            elif t == 0.0:
                probes = [1e-12, 1e-6]
            else:
                probes = [t * 0.5, t * 0.999999, t * 1.000001, t * 2.0]
            for eps in probes:
                if satisfies_geo_ind(mech, eps) != satisfies_error_bound(mech, eps):
                    counterexamples += 1
        assert counterexamples == 0


def test_criterion_8_posterior_bound_property():
    with criterion(8, "1000 random geo-ind mechanisms x random priors satisfy the prior/posterior bound + 1e-9"):
        rng = np.random.default_rng(888)
        for _ in range(1000):
            mech = random_mechanism(rng)
            t = tightest_epsilon(mech)
            eps = t * (1 + 1e-9) if t > 0 else 1e-9
            masses = rng.dirichlet(np.ones(len(mech.inputs)))
            prior = Pmf(mech.inputs, masses)
            report = posterior_bound_holds(prior, mech, eps, slack=1e-9)
            assert report.holds


def test_criterion_9_remap_exact_property_on_fixture(synthetic_checkins_path):
    with criterion(9, "synthetic fixture: remapped qavg <= plain qavg for every epsilon in {6.67, 4, 2, 1}/km"):
        cfg = GowallaExperimentConfig(
            checkins_path=synthetic_checkins_path,
            epsilons_inv_km=(6.67, 4.0, 2.0, 1.0),
            n_checkins=2000,
            seed=42,
        )
        rows, info = gowalla_remap_experiment(cfg)
        assert len(rows) == 4
        for row in rows:
            assert row.qavg_remap <= row.qavg_plain, row
        assert info["n_eval"] >= 1000


def _real_dataset_path():
    base = os.environ.get("GEOPRIV_DATA")
    if not base:
        return None
    path = os.path.join(base, "loc-gowalla_totalCheckins.txt")
    return path if os.path.exists(path) else None


@pytest.mark.skipif(_real_dataset_path() is None, reason="real check-in dataset not available")
def test_criterion_9_reduction_bands_on_real_data():
    with criterion("9b", "real data, SF region: qavg reduction 30-50%, r95 reduction 5-25% per epsilon"):
        cfg = GowallaExperimentConfig(
            checkins_path=_real_dataset_path(),
            region=SAN_FRANCISCO,
            n_checkins=20_000,
            seed=42,
        )
        rows, _ = gowalla_remap_experiment(cfg)
        for row in rows:
            assert row.qavg_remap <= row.qavg_plain
            assert 30.0 <= row.qavg_reduction_pct <= 50.0, row
            assert 5.0 <= row.r95_reduction_pct <= 25.0, row


def test_criterion_10_byte_determinism(synthetic_checkins_path):
    with criterion(10, "reruns with the same seed and any thread count produce byte-identical CSVs"):
        cfg = DecisionExperimentConfig(
            distances=(100.0, 400.0), qavgs=(300.0, 500.0), trials=20_000, seed=42
        )
        texts = [
            render_rows(run_decision_experiment(cfg, threads=t)[0], "csv")
            for t in (1, 2, 4)
        ]
        assert texts[0] == texts[1] == texts[2]
        again = render_rows(run_decision_experiment(cfg, threads=1)[0], "csv")
        assert again == texts[0]

        trd = tradeoff_table([0.00667, 0.004, 0.002, 0.001], 200.0)
        assert render_rows(trd, "csv") == render_rows(tradeoff_table([0.00667, 0.004, 0.002, 0.001], 200.0), "csv")

        gcfg = GowallaExperimentConfig(
            checkins_path=synthetic_checkins_path,
            epsilons_inv_km=(4.0, 1.0),
            n_checkins=300,
            seed=42,
        )
        g1 = render_rows(gowalla_remap_experiment(gcfg)[0], "csv")
        g2 = render_rows(gowalla_remap_experiment(gcfg)[0], "csv")
        assert g1 == g2
