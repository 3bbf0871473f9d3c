"""Exit criteria for the analytic and simulation pipeline.

Each test records one PASS/FAIL line (printed in the terminal summary)
before asserting. Tolerances are fixed here and not tuned.
"""

import io
import itertools
import time

import numpy as np
import pytest

from conftest import baseline
from retrial_osa import experiments as ex
from retrial_osa.cli import main
from retrial_osa.generator import assemble_generator, closed_form_blocks, extract_blocks
from retrial_osa.metrics import compute_metrics, erlang_loss_distribution, level_marginal
from retrial_osa.model import build_state_space
from retrial_osa.simulation import SimConfig, run_simulation
from retrial_osa.solver import solve_direct, solve_ldqbd

BAND_PAIRS = [(1, 1), (2, 2), (3, 2), (3, 3)]
ORBITS = [0, 5, 10]
THETAS = [0.5, 2.0, 5.0]
GRID = list(itertools.product(BAND_PAIRS, ORBITS, THETAS))


def solve_both(p):
    space = build_state_space(p)
    Q = assemble_generator(space)
    blocks = extract_blocks(Q, space)
    return space, Q, solve_direct(Q), solve_ldqbd(blocks, Q)


@pytest.fixture(scope="module")
def grid_solutions():
    start = time.perf_counter()
    sols = {}
    for (M, N), L, theta in GRID:
        sols[M, N, L, theta] = solve_both(baseline(M, N, L, theta=theta))
    return sols, time.perf_counter() - start


def record(log, name, ok, detail=""):
    log.append((name, bool(ok), detail))
    print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
    return ok


def test_c1_hand_solved_oracle(acceptance_log):
    p = baseline(1, 1, 0)
    solve_both(p)  # warm caches before timing
    timings = []
    for _ in range(5):
        start = time.perf_counter()
        _, _, direct, ldqbd = solve_both(p)
        m = compute_metrics(direct, p)
        timings.append(time.perf_counter() - start)
    runtime = float(np.median(timings))
    target = np.array([1 / 6, 1 / 2, 1 / 3])
    pi_err = max(np.max(np.abs(direct.probabilities - target)),
                 np.max(np.abs(ldqbd.probabilities - target)))
    ok = (pi_err < 1e-12
          and abs(m.p_drop_paper - 0.844444) < 1e-6
          and abs(m.p_drop_exact - 0.866667) < 1e-6
          and abs(m.throughput_exact - 0.2) < 1e-12
          and runtime < 0.010)
    detail = (f"pi err {pi_err:.2g}, p_drop_paper {m.p_drop_paper:.6f}, p_drop_exact "
              f"{m.p_drop_exact:.6f}, throughput {m.throughput_exact:.6f}, {runtime * 1e3:.2f} ms")
    assert record(acceptance_log, "C1 hand-solved oracle", ok, detail)


def test_c2_dual_solver_agreement(grid_solutions, acceptance_log):
    sols, elapsed = grid_solutions
    worst_gap = max(np.max(np.abs(d.probabilities - l.probabilities)) for _, _, d, l in sols.values())
    worst_res = max(max(d.residual, l.residual) for _, _, d, l in sols.values())
    ok = worst_gap < 1e-10 and worst_res < 1e-10 and elapsed < 5.0
    detail = f"max gap {worst_gap:.2g}, max residual {worst_res:.2g}, {elapsed:.2f} s for {len(sols)} points"
    assert record(acceptance_log, "C2 dual-solver agreement", ok, detail)


def test_c3_erlang_level_marginal(grid_solutions, acceptance_log):
    sols, _ = grid_solutions
    worst = 0.0
    for space, _, d, l in sols.values():
        p = space.params
        erlang = erlang_loss_distribution(p.M, p.lambda_p / p.mu_p)
        for pi in (d, l):
            worst = max(worst, float(np.max(np.abs(level_marginal(pi, space) - erlang))))
    assert record(acceptance_log, "C3 Erlang loss level marginal", worst < 1e-10, f"max gap {worst:.2g}")


def test_c4_literal_block_equivalence(acceptance_log):
    mismatches = []
    for M, N, L in [(2, 2, 2), (3, 2, 3)]:
        p = baseline(M, N, L)
        space = build_state_space(p)
        rule = extract_blocks(assemble_generator(space), space)
        literal = closed_form_blocks(p)
        for name in ("A", "D", "C"):
            for i, (a, b) in enumerate(zip(getattr(rule, name), getattr(literal, name))):
                if a is None and b is None:
                    continue
                if not np.array_equal(a, b):
                    mismatches.append(f"{name}_{i} (M={M},N={N},L={L})")
    assert record(acceptance_log, "C4 closed-form blocks equal rule-based blocks", not mismatches,
                  ", ".join(mismatches) or "exact equality")


def test_c5_simulation_concordance(grid_solutions, acceptance_log):
    sols, _ = grid_solutions
    start = time.perf_counter()
    inside, misses = 0, []
    for n, (key, (space, _, direct, _)) in enumerate(sorted(sols.items())):
        p = space.params
        exact = compute_metrics(direct, p).p_drop_exact
        est = run_simulation(SimConfig(p, horizon=1e4, warmup=1e3, replications=100, seed=1000 + n))
        lo, hi = est.interval("p_drop")
        if lo <= exact <= hi:
            inside += 1
        else:
            misses.append(key)
    elapsed = time.perf_counter() - start
    share = inside / len(sols)
    ok = share >= 0.90 and elapsed < 120
    detail = f"{inside}/{len(sols)} inside 95% CI ({share:.0%}), {elapsed:.1f} s, misses {misses}"
    assert record(acceptance_log, "C5 simulation concordance", ok, detail)


def _metrics(M, N, **kw):
    p = baseline(M, N, **kw)
    return compute_metrics(solve_direct(assemble_generator(build_state_space(p))), p)


def _reduction(a, b, attr):
    return 1 - getattr(b, attr) / getattr(a, attr)


def _within(value, centre, half):
    return abs(value - centre) <= half + 1e-12


def test_c6a_more_bands_cut_drops_by_about_30_percent(acceptance_log):
    kw = dict(L=10, theta=2.0, lambda_p=0.4)
    a, b = _metrics(2, 2, **kw), _metrics(3, 2, **kw)
    red = {v: _reduction(a, b, f"p_drop_{v}") for v in ("paper", "exact")}
    ok = any(_within(r, 0.30, 0.10) for r in red.values())
    detail = ", ".join(f"{v} {r:.1%}" for v, r in red.items()) + " (target 30% +/- 10 pp)"
    assert record(acceptance_log, "C6a (2,2)->(3,2) drop reduction", ok, detail)


def test_c6b_more_subbands_cut_drops_by_about_40_percent(acceptance_log):
    kw = dict(L=10, theta=2.0, lambda_p=0.4)
    a, b = _metrics(3, 2, **kw), _metrics(3, 3, **kw)
    red = {v: _reduction(a, b, f"p_drop_{v}") for v in ("paper", "exact")}
    ok = any(_within(r, 0.40, 0.10) for r in red.values())
    detail = ", ".join(f"{v} {r:.1%}" for v, r in red.items()) + " (target 40% +/- 10 pp)"
    assert record(acceptance_log, "C6b (3,2)->(3,3) drop reduction", ok, detail)


def test_c6c_fewer_subbands_cut_throughput_by_about_30_percent(acceptance_log):
    kw = dict(L=10, theta=2.0, lambda_p=0.5)
    a, b = _metrics(3, 3, **kw), _metrics(3, 2, **kw)
    red = {v: _reduction(a, b, f"throughput_{v}") for v in ("paper", "exact")}
    ok = any(_within(r, 0.30, 0.10) for r in red.values())
    detail = ", ".join(f"{v} {r:.1%}" for v, r in red.items()) + " (target 30% +/- 10 pp)"
    assert record(acceptance_log, "C6c (3,3)->(3,2) throughput fall", ok, detail)


def test_c7_monotonicity(acceptance_log):
    slack = 1e-12
    drops = {}
    identity_gap = 0.0
    for (M, N), L, theta, lp in itertools.product(BAND_PAIRS, ORBITS, THETAS, ex.LAMBDA_P_VALUES):
        m = _metrics(M, N, L=L, theta=theta, lambda_p=lp)
        drops[M, N, L, theta, lp] = m.p_drop_exact
        for v in ("paper", "exact"):
            identity_gap = max(identity_gap, abs(getattr(m, f"throughput_{v}")
                                                 - 1.5 * (1 - getattr(m, f"p_drop_{v}"))))
    violations = []
    for (M, N, L, theta, lp), v in drops.items():
        i = ex.LAMBDA_P_VALUES.index(lp)
        if i + 1 < len(ex.LAMBDA_P_VALUES) and v > drops[M, N, L, theta, ex.LAMBDA_P_VALUES[i + 1]] + slack:
            violations.append(("lambda_p", M, N, L, theta, lp))
        t = THETAS.index(theta)
        if t + 1 < len(THETAS) and drops[M, N, L, THETAS[t + 1], lp] > v + slack:
            violations.append(("theta", M, N, L, theta, lp))
        o = ORBITS.index(L)
        if o + 1 < len(ORBITS) and drops[M, N, ORBITS[o + 1], theta, lp] > v + slack:
            violations.append(("L", M, N, L, theta, lp))
        if L == 10 and v > drops[M, N, 0, theta, lp] + slack:
            violations.append(("retrial benefit", M, N, L, theta, lp))
    ok = not violations and identity_gap <= 1e-15
    detail = f"{len(drops)} points, {len(violations)} violations, identity gap {identity_gap:.2g}"
    assert record(acceptance_log, "C7 monotonicity and throughput identity", ok, detail)


def _cli(argv):
    out = io.StringIO()
    assert main(argv, out=out) == 0
    return out.getvalue().encode()


def test_c8_determinism(tmp_path, acceptance_log):
    flags = ["--M", "2", "--N", "2", "--L", "10", "--lambda-p", "0.1", "--lambda-s", "1.5",
             "--mu-p", "0.2", "--mu-s", "0.4", "--theta", "2"]
    argv = ["simulate", *flags, "--reps", "30", "--horizon", "5000", "--seed", "7"]
    sim_same = _cli(argv) == _cli(argv)

    cfg = tmp_path / "sweep.cfg"
    cfg.write_text("L = 10\nsweep M, N = (2,2), (3,2), (3,3)\nsweep lambda_p = 0.1..0.5 step 0.1\n"
                   "simulate = true\nreps = 5\nhorizon = 1000\nseed = 3\n")
    outputs = []
    for workers in (1, 4):
        path = tmp_path / f"out{workers}.csv"
        _cli(["sweep", str(cfg), "-o", str(path), "--workers", str(workers)])
        outputs.append(path.read_bytes())
    sweep_same = outputs[0] == outputs[1]
    ok = sim_same and sweep_same
    assert record(acceptance_log, "C8 determinism", ok,
                  f"simulate byte-identical: {sim_same}, sweep workers 1 vs 4 identical: {sweep_same}")
