"""Reference values for the fixture tests, computed without the Rust crate.

Each fixture is re-modelled directly from its node lists with cvxpy, prices
are read from the clearing duals, and bid selections are enumerated by brute
force. The output is written to crates/core/tests/data/reference.json and is
checked in; rerun this script only when a fixture changes.
"""

import itertools
import json
from pathlib import Path

import cvxpy as cp
import numpy as np
from scipy.integrate import quad

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"
OUT = ROOT / "crates" / "core" / "tests" / "data" / "reference.json"


def load(name):
    return json.loads((FIXTURES / f"{name}.json").read_text())


def curve_pieces(nodes, p_low, p_high):
    """Volume pieces (top price, bottom price, volume) and the base net demand.

    The curve is read from its high-price end: at the top of the area interval
    the net demand is the last node's quantity; moving down in price adds the
    pieces in order. Missing zero crossings become vertical pieces at the
    interval ends.
    """
    pieces = []
    last_q = nodes[-1][1]
    base = min(last_q, 0.0)
    if last_q > 0:
        pieces.append((p_high, p_high, last_q))
    for (p1, q1), (p2, q2) in reversed(list(zip(nodes[:-1], nodes[1:]))):
        if q1 - q2 > 1e-12:
            pieces.append((p2, p1, q1 - q2))
    first_q = nodes[0][1]
    if first_q < 0:
        pieces.append((p_low, p_low, -first_q))
    return base, pieces


def market_model(doc, selection):
    """Welfare-maximizing dispatch for a fixed set of executed blocks."""
    hours = doc["hours"]
    areas = [a["id"] for a in doc["areas"]]
    lo, hi = doc["price_interval"]
    welfare = 0
    cons = []
    balance = {(a, t): 0 for a in areas for t in range(hours)}
    constant = 0.0
    for c in doc["curves"]:
        iv = next(a.get("price_interval", [lo, hi]) for a in doc["areas"] if a["id"] == c["area"])
        base, pieces = curve_pieces(c["nodes"], iv[0], iv[1])
        balance[(c["area"], c["hour"])] += base
        for top, bottom, vol in pieces:
            y = cp.Variable()
            # integral of the price along the piece, filled from the top
            welfare = welfare + top * y - 0.5 * (top - bottom) / vol * cp.square(y)
            balance[(c["area"], c["hour"])] += y
            cons.extend([y >= 0, y <= vol])
    for b in doc.get("blocks", []):
        if b["id"] in selection:
            for t, q in enumerate(b["quantities"]):
                balance[(b["area"], t)] += q
                constant += b["limit_price"] * q
    flows = {}
    for ic in doc.get("interconnectors", []):
        tau = cp.Variable(hours)
        flows[ic["id"]] = tau
        cons.extend([tau >= np.array(ic["lower"]), tau <= np.array(ic["upper"])])
        if ic.get("ramp") is not None:
            prev = ic.get("initial_flow", 0.0)
            for t in range(hours):
                d = tau[t] - (prev if t == 0 else tau[t - 1])
                cons.extend([d <= ic["ramp"], -d <= ic["ramp"]])
        for t in range(hours):
            balance[(ic["from"], t)] += tau[t]
            balance[(ic["to"], t)] -= tau[t]
    clearing = {k: (v == 0) for k, v in balance.items()}
    return welfare, cons, constant, clearing, flows


def solve_market(doc, selection=()):
    welfare, cons, constant, clearing, flows = market_model(doc, set(selection))
    prob = cp.Problem(cp.Maximize(welfare), cons + list(clearing.values()))
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        return None
    prices = {k: float(c.dual_value) for k, c in clearing.items()}
    return {
        "welfare": float(prob.value) + constant,
        "prices": prices,
        "flows": {k: [float(x) for x in np.atleast_1d(v.value)] for k, v in flows.items()},
    }


def min_flow_norm(doc):
    """Squared-flow-minimal dispatch among the welfare-maximal ones."""
    best = solve_market(doc)
    welfare, cons, constant, clearing, flows = market_model(doc, set())
    obj = sum(cp.sum_squares(v) for v in flows.values())
    prob = cp.Problem(
        cp.Minimize(obj),
        cons + list(clearing.values()) + [welfare >= best["welfare"] - constant - 1e-7],
    )
    prob.solve(solver=cp.CLARABEL)
    return {k: [float(x) for x in np.atleast_1d(v.value)] for k, v in flows.items()}


def interval_penalty_gain(doc):
    """Welfare gained when clearing may be violated at a cost of the interval ends.

    By exact penalization the gain is zero iff some optimal clearing price
    vector lies inside the price interval.
    """
    lo, hi = doc["price_interval"]
    base = solve_market(doc)["welfare"]
    welfare, cons, constant, clearing, _ = market_model(doc, set())
    obj = welfare
    rows = []
    for c in clearing.values():
        short, surplus = cp.Variable(nonneg=True), cp.Variable(nonneg=True)
        rows.append(c.args[0] - short + surplus == 0)
        obj = obj - hi * short + lo * surplus
    prob = cp.Problem(cp.Maximize(obj), cons + rows)
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    return float(prob.value) + constant - base


def four_blocks(doc):
    """Enumerate block selections; price each one by its no-loss interval."""
    lo, hi = doc["price_interval"]
    blocks = doc["blocks"]
    feasible = []
    for mask in itertools.product([0, 1], repeat=len(blocks)):
        chosen = [b for b, m in zip(blocks, mask) if m]
        if abs(sum(b["quantities"][0] for b in chosen)) > 1e-12:
            continue
        p_lo, p_hi = lo, hi
        for b in chosen:
            q = b["quantities"][0]
            if q > 0:
                p_hi = min(p_hi, b["limit_price"])
            else:
                p_lo = max(p_lo, b["limit_price"])
        if p_lo > p_hi:
            continue
        welfare = sum(b["limit_price"] * b["quantities"][0] for b in chosen)
        price = min(max(0.0, p_lo), p_hi)
        feasible.append((welfare, [b["id"] for b in chosen], price, (p_lo, p_hi)))
    feasible.sort(key=lambda x: -x[0])
    welfare, ids, price, _ = feasible[0]
    all_four = sum(b["limit_price"] * b["quantities"][0] for b in blocks)
    nonempty = [f for f in feasible if f[1]]
    hull = [min(f[3][0] for f in nonempty), max(f[3][1] for f in nonempty)]
    surplus = {b["id"]: (b["limit_price"] - price) * b["quantities"][0] for b in blocks}
    return {
        "welfare": welfare,
        "selection": ids,
        "price": price,
        "all_blocks_objective": all_four,
        "losing_at_price": sorted(k for k, v in surplus.items() if v < -1e-9),
        "profitable_rejected": sorted(
            k for k, v in surplus.items() if v > 1e-9 and k not in ids
        ),
        "nonempty_price_hull": hull,
    }


def main():
    ref = {}
    # welfare of one segment: integral of its price function times its volume
    p, dp, dq, z = 10.0, 20.0, 5.0, 0.5
    ref["segment_welfare"] = dq * quad(lambda u: p + (1 - u) * dp, 0, z)[0]
    grid = np.linspace(-3000, 3000, 60001)
    ref["big_m_supply_one_hour"] = float(min(0.0, np.min((2 - grid) * 1.0)))

    ref["four_blocks"] = four_blocks(load("four_blocks"))

    for name in ["two_area_open", "two_area_congested", "ramp"]:
        r = solve_market(load(name))
        ref[name] = {
            "welfare": r["welfare"],
            "flows": r["flows"]["RS"],
            "prices": {
                a: [r["prices"][(a, t)] for t in range(load(name)["hours"])] for a in ["R", "S"]
            },
        }
    c = ref["two_area_congested"]
    ref["two_area_congested"]["rent"] = (c["prices"]["S"][0] - c["prices"]["R"][0]) * c["flows"][0]

    d = load("diamond")
    ref["diamond"] = {"welfare": solve_market(d)["welfare"], "flows": min_flow_norm(d)}

    rc = load("ramp_curtailment")
    ref["ramp_curtailment"] = {
        "welfare": solve_market(rc)["welfare"],
        "interval_penalty_gain": interval_penalty_gain(rc),
    }
    ref["ramp"]["interval_penalty_gain"] = interval_penalty_gain(load("ramp"))

    OUT.write_text(json.dumps(ref, indent=2, sort_keys=True) + "\n")
    print(json.dumps(ref, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
