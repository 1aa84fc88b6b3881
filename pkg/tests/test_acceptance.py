"""Acceptance suite: every criterion at its stated tolerance, one printed
verdict line per criterion.

Run as `pytest tests/test_acceptance.py -v -s` to see the verdict lines.
The whole suite is sized for a desk machine (a few minutes total).
"""

import json
import os
import time

import numpy as np
import pytest

from bubbleflow.cli import main as cli_main
from bubbleflow.dynamics import simulate_path
from bubbleflow.martingale_lab import (classify_martingale, endpoint_good,
                                       gbm_closed_forms, gbm_gamma0,
                                       gbm_inverse_family, scale_density,
                                       scale_function, tilted_density)
from bubbleflow.measure_flow import (drift_check, flow_check, kernels_for,
                                     simulate_fundamental_under_flow)
from bubbleflow.montecarlo import (convergence_study, deterministic_params,
                                   probe_index, rk4_reference, run_table)
from bubbleflow.network import make_network, poisson_degrees, powerlaw_degrees
from bubbleflow.params import (FLOW_NETWORK, NETWORK_PRESETS, ModelParams,
                               flow_check_defaults)

N_NODES = 50000


def _verdict(tag, ok, detail):
    line = f"{tag} {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    assert ok, line


# ---------------------------------------------------------------------------
# A1 - mean degrees


def test_a1_mean_degrees():
    t0 = time.time()
    z = {
        "sf2.2": powerlaw_degrees(2.2, N_NODES).z,
        "sf2.5": powerlaw_degrees(2.5, N_NODES).z,
        "er3.2": poisson_degrees(3.2, N_NODES).z,
        "er1.9": poisson_degrees(1.9, N_NODES).z,
    }
    elapsed = time.time() - t0
    ok = (abs(z["sf2.2"] - 3.1987) < 0.05 and abs(z["er3.2"] - 3.1987) < 0.05
          and abs(z["sf2.5"] - 1.9069) < 0.05
          and abs(z["er1.9"] - 1.9069) < 0.05 and elapsed < 1.0)
    _verdict("A1", ok,
             f"z={{{', '.join(f'{k}:{v:.4f}' for k, v in z.items())}}} "
             f"targets 3.1987/1.9069 +-0.05, runtime {elapsed:.2f}s < 1s")


# ---------------------------------------------------------------------------
# A2 - four-network orderings and magnitudes


@pytest.fixture(scope="module")
def table_rows():
    t0 = time.time()
    rows = run_table(ModelParams(), n_paths=2000)
    return rows, time.time() - t0


def _disjoint(lo_row, hi_row, key, sekey):
    lo_hi = lo_row[key] + 1.96 * lo_row[sekey]
    hi_lo = hi_row[key] - 1.96 * hi_row[sekey]
    return lo_hi < hi_lo


def test_a2_figure_orderings(table_rows):
    rows, elapsed = table_rows
    r = {row["network"]: row for row in rows}
    # (i) probe ordering with disjoint 95% CIs, at the text's probe tau+0.6
    key, se = "beta_at_0.6", "se_beta_at_0.6"
    order = ["er1.9", "er3.2", "sf2.5", "sf2.2"]
    oi = all(_disjoint(r[a], r[b], key, se)
             for a, b in zip(order, order[1:]))
    # (ii) time of maximum: heterogeneity bursts sooner
    oii = (r["sf2.2"]["mean_argmax"] + 1.96 * r["sf2.2"]["se_argmax"]
           < r["er3.2"]["mean_argmax"] - 1.96 * r["er3.2"]["se_argmax"])
    # (iii) magnitudes within a factor 5 of the reference maxima
    m_sf, m_er = r["sf2.2"]["mean_max"], r["er3.2"]["mean_max"]
    oiii = (2.93e5 / 5 <= m_sf <= 2.93e5 * 5
            and 2.73e5 / 5 <= m_er <= 2.73e5 * 5)
    ok = oi and oii and oiii and elapsed < 600
    _verdict("A2", ok,
             f"beta@0.6 {r['sf2.2'][key]:.3g}>{r['sf2.5'][key]:.3g}>"
             f"{r['er3.2'][key]:.3g}>{r['er1.9'][key]:.3g} disjoint={oi}; "
             f"argmax {r['sf2.2']['mean_argmax']:.3f}<"
             f"{r['er3.2']['mean_argmax']:.3f} disjoint={oii}; "
             f"max sf={m_sf:.3g} er={m_er:.3g} in factor-5 windows={oiii}; "
             f"runtime {elapsed:.0f}s < 600s")


# ---------------------------------------------------------------------------
# A3 + A4 - pricing flow


@pytest.fixture(scope="module")
def flow_report():
    params = flow_check_defaults()
    dist = make_network(*FLOW_NETWORK, params.nodes)
    t0 = time.time()
    rep = flow_check(params, dist, 0.0, 10000)
    fund = simulate_fundamental_under_flow(0.0, params, 100_000)
    return params, dist, rep, fund, time.time() - t0


def test_a3_pricing_identity(flow_report):
    params, dist, rep, fund, elapsed = flow_report
    ok = (abs(rep.z_score) <= 3.0
          and abs(fund["mean"] - fund["target"]) <= 3 * fund["se"]
          and elapsed < 300)
    _verdict("A3", ok,
             f"pricing z={rep.z_score:.2f} (<=3); tilted fundamental mean "
             f"{fund['mean']:.3f} vs {fund['target']} within 3se "
             f"({3 * fund['se']:.3f}); runtime {elapsed:.0f}s < 300s")


def test_a4_density_martingale(flow_report):
    params, dist, rep, fund, _ = flow_report
    grid_ok = all(abs(zz) <= 3.0 for (_, _, _, zz) in rep.grid)
    worst = max(abs(zz) for (_, _, _, zz) in rep.grid)
    # drift residual on a sample of the same paths
    resid = 0.0
    for j in range(50):
        traj = simulate_path(params, dist, j)
        ker = kernels_for(traj, dist, 0.0)
        resid = max(resid, drift_check(ker, traj, dist))
    ok = (grid_ok and rep.bound_violations == 0 and rep.flagged_paths == 0
          and resid <= 1e-10)
    _verdict("A4", ok,
             f"mean-Z grid worst |z|={worst:.2f} (<=3) on 10 points; "
             f"bound violations {rep.bound_violations}/10000; "
             f"drift residual {resid:.2e} <= 1e-10")


# ---------------------------------------------------------------------------
# A5 - martingale lab


def test_a5_martingale_lab():
    t0 = time.time()
    grid_ok, signs = True, set()
    agree_ok = True
    for mu0 in (-1.0, 0.0, 0.5, 1.0, 2.0):
        for s0 in (0.5, 1.0, 2.0):
            spec = gbm_inverse_family(mu0, s0)
            rep = classify_martingale(spec)
            signs.add(int(np.sign(round(gbm_gamma0(mu0, s0), 9))))
            if rep.verdict != "martingale":
                grid_ok = False
            # the two goodness formulations never disagree (a disagreement
            # would surface as None from endpoint_good)
            for which in ("r", "l"):
                if endpoint_good(spec, which) is None and \
                        rep.verdict != "martingale":
                    agree_ok = False
    # closed forms vs quadrature at 1e-8 relative
    cf_ok = True
    worst_cf = 0.0
    for mu0 in (-1.0, 0.5, 1.0, 2.0):
        for s0 in (0.5, 1.0, 2.0):
            if abs(gbm_gamma0(mu0, s0)) < 1e-12:
                continue
            spec = gbm_inverse_family(mu0, s0)
            for x in (0.5, 2.0, 5.0):
                cf = gbm_closed_forms(mu0, s0, x)
                pairs = (
                    (scale_density(spec, x), cf["rho"]),
                    (tilted_density(spec, x), cf["rho_tilde"]),
                    (scale_function(spec, x), cf["s"]),
                    (scale_function(spec, x, tilted=True), cf["s_tilde"]),
                )
                for got, want in pairs:
                    rel = abs(got - want) / max(abs(want), 1e-300)
                    worst_cf = max(worst_cf, rel)
                    if rel > 1e-8:
                        cf_ok = False
    elapsed = time.time() - t0
    ok = grid_ok and signs == {-1, 0, 1} and cf_ok and agree_ok \
        and elapsed < 30
    _verdict("A5", ok,
             f"grid martingale={grid_ok} (exponent signs {sorted(signs)}); "
             f"closed-vs-quadrature worst rel {worst_cf:.2e} <= 1e-8; "
             f"goodness forms agree={agree_ok}; runtime {elapsed:.1f}s < 30s")


# ---------------------------------------------------------------------------
# A6 - numerics hygiene


def test_a6_numerics_hygiene():
    p = ModelParams()
    er = make_network(*NETWORK_PRESETS["er3.2"], p.nodes)
    # closed-form vs Euler gap halves with dt (median ratio <= 0.75)
    conv = convergence_study(p, er, (4e-3, 2e-3, 1e-3), n_paths=100)
    ratios_ok = all(r <= 0.75 for r in conv["gap_ratio_medians"])
    # pure-decay analytic case within 10*dt relative
    pdp = ModelParams(lambda_contagion=1e-9, delta_sell=0.0, xk0=0.0,
                      sigma_bar=0.0, sigma_M=0.0, sigma_theta=0.0,
                      mu_theta=0.0, x_init=1000.0)
    tr = simulate_path(pdp, er, 0)
    target = tr.beta[0] * np.exp(-pdp.k_decay * pdp.Lambda0 * pdp.M0
                                 * tr.times)
    decay_rel = float(np.max(np.abs(tr.beta - target)) / tr.beta[0])
    decay_ok = decay_rel < 10 * pdp.dt
    # deterministic run vs fourth-order reference at dt = 1e-4
    pfine = ModelParams().replace(dt=1e-4)
    ref = rk4_reference(pfine, er)
    trd = simulate_path(deterministic_params(pfine), er, 0)
    rels = []
    for probe in (0.6, 1.6):
        i = probe_index(trd.times, probe)
        rels.append(abs(trd.beta[i] - ref["beta"][i]) / abs(ref["beta"][i]))
    rk4_ok = max(rels) < 1e-3
    ok = ratios_ok and decay_ok and rk4_ok
    _verdict("A6", ok,
             f"gap ratios {['%.2f' % r for r in conv['gap_ratio_medians']]} "
             f"<= 0.75; pure-decay rel {decay_rel:.2e} < {10 * pdp.dt:.0e}; "
             f"deterministic-vs-RK4 at probes {max(rels):.2e} < 1e-3")


# ---------------------------------------------------------------------------
# A7 - determinism of outputs


def test_a7_bit_identical_outputs(tmp_path):
    env_key = "BUBBLEFLOW_THREADS"
    saved = os.environ.get(env_key)
    payloads = {}
    try:
        for tag, threads in (("run1", "1"), ("run2", "1"), ("run3", "4")):
            os.environ[env_key] = threads
            out = tmp_path / tag
            rc = cli_main(["table", "--paths", "40", "--out", str(out),
                           "--seed", "11"])
            assert rc == 0
            rc = cli_main(["flow-check", "--t", "0.0", "--n", "120",
                           "--fund-paths", "400", "--out", str(out)])
            assert rc == 0
            rc = cli_main(["feller", "--family", "gbm-inverse", "--mu0",
                           "1", "--sigma0", "1", "--out", str(out)])
            assert rc == 0
            payloads[tag] = tuple(
                (out / name).read_bytes()
                for name in ("table.csv", "flow_check.json", "feller.json",
                             "run_config.json"))
    finally:
        if saved is None:
            os.environ.pop(env_key, None)
        else:
            os.environ[env_key] = saved
    same_rerun = payloads["run1"] == payloads["run2"]
    same_workers = payloads["run1"] == payloads["run3"]
    ok = same_rerun and same_workers
    _verdict("A7", ok,
             f"rerun bytes identical={same_rerun}, "
             f"1-vs-4 workers identical={same_workers} "
             f"(table.csv, flow_check.json, feller.json, run_config.json)")
