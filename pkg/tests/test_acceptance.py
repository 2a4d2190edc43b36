"""End-to-end acceptance checks, one test per criterion.

Each test prints a ``PASS``/``FAIL`` line (visible with ``pytest -s`` or in
the terminal summary) and then asserts. Tolerances are fixed here.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

import barrierkit
from barrierkit.certificates import (
    corridor_barriers,
    detect_relative_degree,
    from_expression,
    future_focused_certificate,
    latin_hypercube,
    package,
    rectify_relative_degree,
)
from barrierkit.cli import run
from barrierkit.cli.assemble import assemble
from barrierkit.cli.config import load
from barrierkit.controllers import cbf_qp_filter, constant, make_controller
from barrierkit.models import BUILTINS, builtin
from barrierkit.qp import QpProblem, solve
from barrierkit.sim import Scenario, euler, euler_maruyama, execute, monte_carlo, rk4, write_trace
from barrierkit.sim.rng import Key
from barrierkit.symbolic import evaluate, gradient, parse, symbolic_gradient, to_source
from barrierkit.symbolic import bind
from oracles import CORPUS, LISTING_FORMULAS, brute_force_qp, fd_gradient, ff_grid
from oracles import project_halfspace, rel_close

SCEN = Path(barrierkit.__file__).parent / "scenarios"
H_TOL = 1e-6


@pytest.fixture
def verdict(capsys):
    def report(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail

    return report


def _trace_columns(out):
    import csv

    with open(Path(out) / "trace.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _column(header, rows, name):
    i = header.index(name)
    return np.array([float(r[i]) for r in rows])


def test_criterion_1_tutorial_reach_avoid(tmp_path, verdict):
    start = time.perf_counter()
    code = run(SCEN / "unicycle_reach_avoid.yaml", tmp_path)
    wall = time.perf_counter() - start
    header, rows = _trace_columns(tmp_path)
    barrier_cols = [h for h in header if h.startswith("b:")]
    h_min = min(_column(header, rows, c).min() for c in barrier_cols)
    report = json.loads((tmp_path / "report.json").read_text())
    ok = (code == 0 and len(rows) == 1001 and h_min >= -H_TOL and report["goal_reached"]
          and report["goal_time"] < 10.0 and wall < 10.0)
    verdict(1, ok, f"records={len(rows)} min h={h_min:.4g} goal at "
                   f"{report['goal_time']} s wall={wall:.2f} s")


def test_criterion_2_corridor_with_moving_agent(tmp_path, verdict):
    cfg_path = SCEN / "hsr_corridor.yaml"
    code = run(cfg_path, tmp_path / "filtered")
    rep = json.loads((tmp_path / "filtered" / "report.json").read_text())
    R = next(c["R"] for c in rep["config"]["certificates"] if c["family"] == "future_focused")
    header, rows = _trace_columns(tmp_path / "filtered")
    walls = min(_column(header, rows, f"b:h_r{k}").min() for k in range(1, 5))
    run(cfg_path, tmp_path / "nominal", ["controller.filter=false"])
    nominal = json.loads((tmp_path / "nominal" / "report.json").read_text())
    d_safe, d_nom = rep["min_inter_agent_distance"], nominal["min_inter_agent_distance"]
    ok = code == 0 and d_safe >= 2 * R and walls >= -H_TOL and d_nom < 2 * R
    verdict(2, ok, f"min distance {d_safe:.4f} >= {2 * R} (filtered), {d_nom:.4f} "
                   f"(nominal only); min corridor h {walls:.4g}")


def test_criterion_3_qp_oracles(verdict):
    rng = np.random.default_rng(3)
    worst1 = 0.0
    for _ in range(1000):
        m = int(rng.integers(1, 4))
        u0, a, b = rng.normal(size=m) * 2, rng.normal(size=m), float(rng.normal() * 2)
        u = solve(QpProblem(np.eye(m), -u0, a[None, :], [b])).u_star
        worst1 = max(worst1, float(np.max(np.abs(u - project_halfspace(u0, a, b)[0]))))
    worst2 = 0.0
    for _ in range(500):
        m, k = int(rng.integers(1, 4)), int(rng.integers(1, 7))
        M = rng.normal(size=(m, m))
        H = M @ M.T + 0.5 * np.eye(m)
        A = rng.normal(size=(k, m))
        b = A @ rng.normal(size=m) - rng.uniform(0, 1, k) * rng.integers(0, 2, k)
        q = rng.normal(size=m) * 3
        sol = solve(QpProblem(H, q, A, b))
        ref = brute_force_qp(H, q, A, b)
        err = float(np.max(np.abs(sol.u_star - ref))) if sol.optimal else math.inf
        worst2 = max(worst2, err)
    verdict(3, worst1 <= 1e-8 and worst2 <= 1e-6,
            f"projection max error {worst1:.2e}, brute-force max error {worst2:.2e}")


def test_criterion_4_qp_latency(verdict):
    rng = np.random.default_rng(4)
    problems = []
    for _ in range(2000):
        A = rng.normal(size=(8, 2))
        b = A @ rng.normal(size=2) - rng.uniform(0, 1, 8)
        problems.append(QpProblem(np.eye(2), rng.normal(size=2) * 3, A, b))
    for p in problems[:50]:
        solve(p)
    times = np.array([solve(p).solve_time for p in problems])
    med, p99 = float(np.median(times)), float(np.percentile(times, 99))
    verdict(4, med < 1e-3 and p99 < 5e-3,
            f"median {med * 1e6:.1f} us, p99 {p99 * 1e6:.1f} us over {len(times)} solves "
            f"({barrierkit.qp.KERNEL} kernel)")


def _shipped_barriers():
    uni = builtin("dynamic_unicycle")
    out = []
    for name in ("unicycle_reach_avoid.yaml", "hsr_corridor.yaml", "unicycle_stochastic.yaml"):
        cfg, lines = load(SCEN / name)
        asm = assemble(cfg, lines)
        for cert in asm.package:
            out.append((f"{name}:{cert.name}", cert, asm.model))
    # the library families on their own
    out.append(("obstacle", from_expression("(x[0]-1.75)^2 + (x[1]-1.25)^2 - 0.25", 4), uni))
    out.append(("rectified", rectify_relative_degree("(x[0]-1.75)^2 + (x[1]-1.25)^2 - 0.25", uni,
                                                     gains=[2.0]), uni))
    for c in corridor_barriers(-1, 7, -2.5, 2.5):
        out.append((c.name, c, uni))
    return out


def _states(rng, n, count=200):
    return rng.uniform(-3.0, 3.0, (count, n))


def test_criterion_5_differentiation(verdict):
    rng = np.random.default_rng(5)
    worst = 0.0
    checked = 0
    # barriers: the certificate's own gradient (symbolic or analytic) and the
    # dual-number gradient of h, both against central differences
    for label, cert, model in _shipped_barriers():
        for x in _states(rng, model.n):
            fd = fd_gradient(cert.h, x)
            for g in (cert.grad_h(x), gradient(cert.h, x)):
                if not rel_close(g, fd, 1e-5):
                    worst = math.inf
                else:
                    worst = max(worst, float(np.max(np.abs(g - fd) / np.maximum(1, np.abs(fd)))))
            checked += 1
    # model drifts: symbolic derivative of each drift expression and the dual
    # gradient of the native drift component
    for name in BUILTINS:
        model = builtin(name)
        sym = [[bind(d) for d in symbolic_gradient(e, model.n)] for e in model.drift_exprs]
        for x in _states(rng, model.n):
            for i in range(model.n):
                comp = lambda v, i=i: model.drift(v)[i]  # noqa: E731
                fd = fd_gradient(comp, x)
                s = np.array([float(d(x)) for d in sym[i]])
                a = gradient(comp, x)
                for g in (s, a):
                    if not rel_close(g, fd, 1e-5):
                        worst = math.inf
            checked += 1
    verdict(5, worst <= 1e-5, f"{checked} state/function pairs, worst relative error {worst:.2e}")


def test_criterion_6_rectification(verdict):
    uni = builtin("dynamic_unicycle")
    samples = latin_hypercube([[-3, 3]] * 4, 64)
    pos = ["(x[0]-1.75)^2 + (x[1]-1.25)^2 - 0.25", "x[0] - 2", "x[0]*x[1] - 1"]
    pos_r = [detect_relative_degree(parse(s, 4), uni, samples, 4) for s in pos]
    wall_r = [detect_relative_degree(c.h, uni, samples, 4) for c in corridor_barriers(-1, 7, -2, 2)]

    di = builtin("double_integrator_1d")
    psi = rectify_relative_degree("1 - x[0]", di, gains=[1.0])
    ctrl = make_controller(cbf_qp_filter(constant([2.0]), package(psi), di))
    rng = np.random.default_rng(6)
    worst, runs = math.inf, 0
    while runs < 50:
        x0 = rng.uniform([-3.0, -2.0], [1.0, 2.0])
        if 1 - x0[0] < 0 or psi(x0) < 0:
            continue
        tr = execute(Scenario(di, ctrl, x0, monitors=(("h", psi.base),)), 5.0, 0.01)
        worst = min(worst, float(tr.barriers.min()))
        runs += 1
    ok = pos_r == [2, 2, 2] and wall_r == [1, 1, 1, 1] and worst >= -H_TOL
    verdict(6, ok, f"position-only r={pos_r}, corridor r={wall_r}, "
                   f"double-integrator min h over {runs} runs {worst:.3g}")


def test_criterion_7_future_focused_grid(verdict):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        ego = [*rng.uniform(-5, 5, 2), rng.uniform(0, 2), rng.uniform(-math.pi, math.pi)]
        agent = [*rng.uniform(-5, 5, 2), *rng.uniform(-1.5, 1.5, 2)]
        T, R = rng.uniform(0.5, 5.0), rng.uniform(0.1, 1.0)
        cert = future_focused_certificate(T, R, 4, agent[2:], n=6)
        h = cert(np.array([*ego, *agent[:2]]))
        worst = max(worst, abs(h - ff_grid(ego, agent, T, R)))
    verdict(7, worst <= 1e-6, f"max |closed form - grid| = {worst:.2e} over 1000 pairs")


def test_criterion_8_integrators(verdict):
    dts = [0.1, 0.05, 0.025, 0.0125]
    errs = []
    for dt in dts:
        x = np.array([1.0])
        for _ in range(round(1 / dt)):
            x = rk4(x, lambda v: -v, dt)
        errs.append(abs(x[0] - math.exp(-1)))
    slope = float(np.polyfit(np.log(dts), np.log(errs), 1)[0])
    rng = np.random.default_rng(8)
    em_gap = 0.0
    for _ in range(100):
        x, d = rng.normal(size=4), rng.normal(size=4)
        em_gap = max(em_gap, float(np.max(np.abs(euler_maruyama(x, d, np.zeros(4), 0.01)
                                                  - euler(x, d, 0.01)))))
    trials = 10_000
    w = np.zeros(trials)
    for i in range(100):
        w = euler_maruyama(w, np.zeros(trials), Key(8).split(i).normal(trials), 0.01)
    var = float(np.var(w, ddof=1))
    ok = 3.7 <= slope <= 4.3 and em_gap <= 1e-12 and 0.94 <= var <= 1.06
    verdict(8, ok, f"RK4 slope {slope:.3f}, EM-vs-Euler gap {em_gap:.1e}, "
                   f"Brownian variance {var:.4f}")


def test_criterion_9_determinism(tmp_path, verdict):
    cfg, lines = load(SCEN / "unicycle_stochastic.yaml", ["T_final=3"])
    scen = assemble(cfg, lines).scenario
    for tag in ("a", "b"):
        write_trace(execute(scen, 3.0, 0.01, seed=21), tmp_path / tag)
    same_files = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
                     for f in ("trace.csv", "trace.json"))
    _, s1 = monte_carlo(scen, 8, 5, 3.0, 0.01, workers=1)
    _, s4 = monte_carlo(scen, 8, 5, 3.0, 0.01, workers=4)
    same_summary = json.dumps(s1, sort_keys=True) == json.dumps(s4, sort_keys=True)
    verdict(9, same_files and same_summary,
            f"trace files identical: {same_files}; MC summary identical across 1 and 4 "
            f"workers: {same_summary}")


def test_criterion_10_parser(verdict):
    corpus_ok = all(parse(to_source(parse(s, 4)), 4) == parse(s, 4)
                    and to_source(parse(to_source(parse(s, 4)), 4)) == to_source(parse(s, 4))
                    for s in CORPUS)
    listing_in = all(s in CORPUS for s in LISTING_FORMULAS)
    examples = [
        evaluate(parse("x[0]*x[0]"), [3.0]) == 9.0,
        evaluate(parse("min(x[0], x[1])"), [2.0, 5.0]) == 2.0,
        evaluate(parse("v*cos(th)"), [], {"v": 1.0, "th": 0.0}) == 1.0,
    ]
    ok = corpus_ok and listing_in and len(CORPUS) >= 50 and all(examples)
    verdict(10, ok, f"{len(CORPUS)} expressions round-trip: {corpus_ok}; "
                    f"evaluation examples exact: {sum(examples)}/3")
