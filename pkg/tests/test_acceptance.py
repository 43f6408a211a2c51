"""Acceptance criteria, one test per criterion.

Each test appends a PASS/FAIL line to the summary printed at the end of the
run.  Published reference values are the benchmark table of the method's
original description (pointwise errors at P1 = (K/2, ...), P2 = (K, ...),
P3 = (3K/2, ...)).
"""
import time

import numpy as np
import pytest

from orthowave import cli, model, operator
from orthowave.basis1d import build_basis, default_generators, verify_basis
from orthowave.operator import BlockOperator, crank_nicolson_pair
from orthowave.sparsegrid import cardinality_formula, enumerate_sparse, from_table_level

from oracles import dense_2d_oracle, scalar_black_scholes

# published put errors (P1, P2) for d = 2 at table levels 3, 4, 5
PUT_D2 = {3: (6.42e-4, 9.11e-4), 4: (7.60e-5, 7.31e-5), 5: (4.51e-6, 3.52e-7)}
PUT_D3_K2 = (9.72e-4, 6.45e-4)
PUT_D4_K1 = (7.32e-3, 8.71e-3)


def record(log, name, ok, detail):
    log.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    assert ok, detail


def within(value, ref, factor):
    return ref / factor <= value <= ref * factor


@pytest.fixture(scope="module")
def d2_rows():
    return {k: cli.run_price(cli.ExperimentSpec(d=2, level=k)) for k in (3, 4, 5)}


def test_criterion_1_basis_validity(acceptance_log):
    g = default_generators()
    worst = {"orthonormality": 0.0, "vanishing_moments": 0.0, "boundary_values": 0.0}
    for k in range(6):
        rep = verify_basis(build_basis(g, k))
        for key in worst:
            worst[key] = max(worst[key], getattr(rep, key))
    ok = worst["orthonormality"] <= 1e-8 and worst["vanishing_moments"] <= 1e-10 and worst["boundary_values"] <= 1e-10
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    record(acceptance_log, "1 basis validity (k<=5)", ok, detail)


def test_criterion_2_cardinalities(acceptance_log):
    import itertools

    closed = all(enumerate_sparse(d, k).total_count == cardinality_formula(d, k) for d in (2, 3, 4) for k in range(1, 9))
    sizes = [12, 12, 24, 48]
    brute = []
    for k in range(4):
        n = 0
        for m in itertools.product(range(k + 1), repeat=5):
            if sum(m) <= k:
                n += int(np.prod([sizes[i] for i in m]))
        brute.append(n == enumerate_sparse(5, k).total_count)
    column = [from_table_level(2, k).total_count for k in range(7)]
    ok = closed and all(brute) and column == [36, 144, 432, 1152, 2880, 6912, 16128]
    record(acceptance_log, "2 cardinalities", ok, f"closed forms {closed}, d=5 brute force {all(brute)}, N column {column}")


def test_criterion_3_operator(acceptance_log):
    g = default_generators()
    P = model.table_problem(2).diffusion()
    rel = 0.0
    for k in (1, 2):
        b = build_basis(g, k)
        s = enumerate_sparse(2, k)
        mats = operator.one_dim_matrices(b, s.widths)
        op = BlockOperator(s, mats, P, 16.03, 0.5)
        ref = dense_2d_oracle(s, b, P, 16.03, 0.5)
        rel = max(rel, np.max(np.abs(op.to_dense() - ref)) / np.max(np.abs(ref)))
    B = operator.one_dim_matrices(build_basis(g, 5)).B
    anti = float(np.max(np.abs(B + B.T)))
    rng = np.random.default_rng(0)
    s = enumerate_sparse(2, 3)
    op = BlockOperator(s, operator.one_dim_matrices(build_basis(g, 3), s.widths), P, 64.03, 0.5)
    spd = True
    for _ in range(100):
        u, v = rng.standard_normal((2, s.total_count))
        Au, Av = op(u), op(v)
        spd &= abs(v @ Au - u @ Av) <= 1e-10 * np.linalg.norm(Au) * np.linalg.norm(v) and u @ Au > 0
    ok = rel <= 1e-10 and anti <= 1e-10 and spd
    record(acceptance_log, "3 operator correctness", ok, f"dense oracle rel {rel:.1e}, |B+B^T| {anti:.1e}, SPD probes {spd}")


def test_criterion_4_conditioning(acceptance_log):
    problem = {d: model.table_problem(d) for d in (1, 2, 3)}
    rows = cli.condition_study(2, range(2, 6), problem[2])
    conds = [r[3] for r in rows]
    no_growth = conds[-1] <= conds[0] * 1.05
    spread = max(conds) / min(conds)
    at2 = [cli.condition_study(d, [2], problem[d])[0][3] for d in (1, 2, 3)]
    dim_spread = max(at2) / min(at2)
    below = all(r[3] < r[7] for r in rows)
    ok = spread < 2 and no_growth and dim_spread < 2 and below
    detail = f"d=2 k=2..5 cond {[round(c, 3) for c in conds]}, d=1,2,3 at k=2 {[round(c, 3) for c in at2]}"
    record(acceptance_log, "4 conditioning", ok, detail)


def test_criterion_5_table_reproduction(acceptance_log, d2_rows):
    msgs = []
    ok = True
    for k, (r1, r2) in PUT_D2.items():
        row = d2_rows[k]
        e1, e2 = row.errors[0], row.errors[1]
        good = within(e1, r1, 5) and within(e2, r2, 10 if k == 5 else 5) and row.it_max <= 12
        ok &= good
        msgs.append(f"k={k} {e1:.2e}/{e2:.2e} it={row.it_max}")
    t0 = time.perf_counter()
    row3 = cli.run_price(cli.ExperimentSpec(d=3, level=2))
    good = within(row3.errors[0], PUT_D3_K2[0], 5) and within(row3.errors[1], PUT_D3_K2[1], 5) and row3.it_max <= 12
    ok &= good
    msgs.append(f"d=3 k=2 {row3.errors[0]:.2e}/{row3.errors[1]:.2e} ({time.perf_counter() - t0:.0f}s)")
    record(acceptance_log, "5 table reproduction", ok, "; ".join(msgs))


def test_criterion_6_convergence_order(acceptance_log, d2_rows):
    e = [d2_rows[k].errors[1] for k in (3, 4, 5)]
    ratios = [e[0] / e[1], e[1] / e[2]]
    record(acceptance_log, "6 convergence order at P2", min(ratios) >= 4, f"ratios {ratios[0]:.1f}, {ratios[1]:.1f}")


def test_criterion_7_oracle_integrity(acceptance_log):
    rng = np.random.default_rng(2024)
    parity = 0.0
    for _ in range(1000):
        d = int(rng.integers(1, 6))
        p = model.MarketParams.uniform(
            d, rng.uniform(0, 0.1), rng.uniform(0.05, 0.5), rng.uniform(0.0, 0.8) if d > 1 else 0.0, rng.uniform(5, 15), 1.0
        )
        S = rng.uniform(1.0, 30.0, size=d)
        t = float(rng.uniform(0.01, 2.0))
        _, delta = model.effective_vol_and_div(p)
        G = float(np.exp(np.mean(np.log(S))))
        res = model.analytic_price("call", p, S, t) - model.analytic_price("put", p, S, t)
        parity = max(parity, abs(float(res) - G * np.exp(-delta * t) + p.K * np.exp(-p.r * t)))
    scalar = 0.0
    for _ in range(200):
        S, K = rng.uniform(1, 30), rng.uniform(2, 20)
        r, sig, t = rng.uniform(0, 0.1), rng.uniform(0.05, 0.6), rng.uniform(0.05, 3)
        p = model.MarketParams(r, [sig], [[1.0]], K, t)
        for kind in ("put", "call"):
            got = float(model.analytic_price(kind, p, [[S]], t)[0])
            scalar = max(scalar, abs(got - scalar_black_scholes(kind, S, K, r, sig, t)))
    ok = parity <= 1e-12 and scalar <= 1e-10
    record(acceptance_log, "7 oracle integrity", ok, f"parity {parity:.1e}, scalar formula {scalar:.1e}")


def test_criterion_8_structural_identity(acceptance_log):
    rng = np.random.default_rng(8)
    worst = 0.0
    for d in (1, 2, 3):
        problem = model.table_problem(d)
        s = enumerate_sparse(d, 2)
        mats = operator.one_dim_matrices(build_basis(default_generators(), 2), s.widths)
        op = BlockOperator(s, mats, problem.diffusion(), 1.0, 1.0)
        tau = 1.0 / 16
        lhs, rhs = crank_nicolson_pair(op, tau, problem.params.r)
        for _ in range(10):
            v = rng.standard_normal(s.total_count)
            t = (2.0 / tau) * v
            worst = max(worst, np.linalg.norm(lhs(v) + rhs(v) - t) / np.linalg.norm(t))
    record(acceptance_log, "8 Crank-Nicolson split identity", worst <= 1e-12, f"max relative residual {worst:.1e}")


def test_d4_row(acceptance_log):
    row = cli.run_price(cli.ExperimentSpec(d=4, level=1))
    ok = row.N == 20736 and within(row.errors[0], PUT_D4_K1[0], 5) and within(row.errors[1], PUT_D4_K1[1], 5)
    record(acceptance_log, "d=4 table row k=1", ok, f"N={row.N}, errors {row.errors[0]:.2e}/{row.errors[1]:.2e}")
