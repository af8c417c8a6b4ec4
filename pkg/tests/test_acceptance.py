"""Acceptance suite: every criterion at its stated tolerance, one printed
pass/fail line each. The 200-instance battery is shared by a module fixture.

Run with `pytest -s tests/test_acceptance.py` to see the per-criterion lines.
"""

import math
import random
import time
from dataclasses import dataclass, field

import pytest

from sinrbackbone.cli import (
    DEFAULT_PARAMS,
    GeneratorSpec,
    RunConfig,
    generate,
    run,
    sweep,
)
from sinrbackbone.physical import build_graph, derive_dilution, grid_index
from sinrbackbone.protocol import Simulator, _ceil_div, _ceil_lg, backbone_creation
from sinrbackbone.verify import (
    adversarial_dilution_check,
    check_bucket_coverage,
    check_connected_backbone,
    check_constant_degree,
    check_diameter,
    check_dominating,
    check_leader_grid,
    check_size_ratio,
    dilution_trial,
    expected_three_hop,
    expected_two_hop,
)

N_INSTANCES = 200
PARAMS = DEFAULT_PARAMS


@dataclass
class InstanceRecord:
    index: int
    inst: object
    graph: object
    result: object


@dataclass
class Suite:
    records: list = field(default_factory=list)
    elapsed: float = 0.0


def _emit(criterion: int, passed: bool, detail: str) -> None:
    print(f"ACCEPTANCE {criterion} {'PASS' if passed else 'FAIL'} - {detail}")


@pytest.fixture(scope="module")
def suite():
    rng = random.Random(20260810)
    out = Suite()
    t0 = time.time()
    for i in range(N_INSTANCES):
        n = rng.randint(2, 60)
        side = min(4.0, max(1.2, 0.85 * math.sqrt(n)))
        inst = generate(GeneratorSpec(n=n, arena_side=side, seed=100_000 + i), PARAMS)
        graph = build_graph(inst)
        result = backbone_creation(inst)
        out.records.append(InstanceRecord(i, inst, graph, result))
    out.elapsed = time.time() - t0
    return out


def test_acceptance_1_leader_election_postconditions(suite):
    violations = []
    for rec in suite.records:
        adj = rec.graph.adjacency
        leaders = set(rec.result.leaders)
        for u in adj:
            if u not in leaders and not set(adj[u]) & leaders:
                violations.append((rec.index, "undominated", u))
        for u in leaders:
            if set(adj[u]) & leaders:
                violations.append((rec.index, "adjacent-leaders", u))
        grid = check_leader_grid(rec.result, rec.inst)
        if not grid.passed:
            violations.append((rec.index, "two-per-box", grid.witness))
    ok = not violations
    _emit(
        1,
        ok,
        f"{N_INSTANCES} instances, {len(violations)} violations, "
        f"{suite.elapsed:.0f}s for the full battery",
    )
    assert ok, violations[:5]


def test_acceptance_2_bucket_domination_induction(suite):
    violations = []
    for rec in suite.records:
        v = check_bucket_coverage(rec.graph, rec.result.phase_snapshots, rec.result.delta)
        if not v.passed:
            violations.append((rec.index, v.witness))
    ok = not violations
    _emit(2, ok, f"{N_INSTANCES} instances, {len(violations)} violations")
    assert ok, violations[:5]


def test_acceptance_3_two_hop_assignment(suite):
    mismatches = []
    for rec in suite.records:
        expected = expected_two_hop(rec.graph.adjacency, set(rec.result.leaders))
        if expected != rec.result.two_hop:
            mismatches.append((rec.index, expected, rec.result.two_hop))
    ok = not mismatches
    pairs = sum(len(r.result.two_hop) for r in suite.records)
    _emit(3, ok, f"{pairs} leader pairs at distance 2, exact match on all")
    assert ok, mismatches[:3]


def test_acceptance_4_three_hop_agreement(suite):
    mismatches = []
    for rec in suite.records:
        expected = expected_three_hop(rec.graph.adjacency, set(rec.result.leaders))
        got = rec.result.three_hop
        if expected != got:
            mismatches.append((rec.index, expected, got))
            continue
        for (s, t), (x, y) in got.items():
            if got.get((t, s)) != (y, x):
                mismatches.append((rec.index, "asymmetric", (s, t)))
    ok = not mismatches
    pairs = sum(len(r.result.three_hop) for r in suite.records) // 2
    _emit(4, ok, f"{pairs} leader pairs at distance 3, both endpoints agree")
    assert ok, mismatches[:3]


def test_acceptance_5_token_passing_delivery(suite):
    violations = []
    for rec in suite.records:
        gi = grid_index(rec.inst)
        adj = rec.graph.adjacency
        for tok in rec.result.token_records:
            per_box: dict = {}
            for h in tok.holders:
                b = gi.boxes[h]
                per_box[b] = per_box.get(b, 0) + 1
            for box, count in per_box.items():
                if count > 21:
                    violations.append((rec.index, "box", box, count))
            for sender, receivers in tok.transmissions:
                missing = set(adj[sender]) - set(receivers)
                if missing:
                    violations.append((rec.index, "delivery", sender, sorted(missing)))
    ok = not violations
    execs = sum(len(r.result.token_records) for r in suite.records)
    _emit(5, ok, f"{execs} token msg slots, {len(violations)} violations")
    assert ok, violations[:5]


def test_acceptance_6_dilution_soundness():
    dil = derive_dilution(PARAMS)
    assert adversarial_dilution_check(PARAMS, dil.d, blocks_span=100)
    failures = []
    for seed in range(1000):
        bad = dilution_trial(PARAMS, dil.d, boxes_side=16, seed=seed)
        failures.extend(bad)
    ok = not failures
    _emit(6, ok, f"d={dil.d}, c={dil.c}, 1000 placements, {len(failures)} reception failures")
    assert ok, failures[:5]


def test_acceptance_7_backbone_properties(suite):
    failures = []
    ratios = []
    for rec in suite.records:
        checks = [
            check_dominating(rec.result, rec.graph),
            check_connected_backbone(rec.result, rec.graph),
            check_constant_degree(rec.result, rec.graph),
            check_diameter(rec.result, rec.graph, factor=3.0, slack=4),
        ]
        failures.extend((rec.index, v.check) for v in checks if not v.passed)
        if rec.inst.n <= 14:
            v = check_size_ratio(rec.result, rec.graph)
            ratios.append(v.metrics["ratio"])
    ok = not failures
    worst = max(ratios) if ratios else 0.0
    _emit(
        7,
        ok,
        f"dominating/connected/degree/diameter clean on {N_INSTANCES}; "
        f"size ratio on {len(ratios)} exact instances: max C_s={worst:.2f} (reported)",
    )
    assert ok, failures[:5]


def test_acceptance_8_round_complexity_stability(tmp_path):
    cfg = RunConfig(out_dir=str(tmp_path / "sweep"))
    summary = sweep(cfg)
    spread = summary["c_r_max_rel_spread"]
    ok = summary["stable_within_25pct"]
    _emit(
        8,
        ok,
        f"fitted C_r median={summary['c_r_median']:.0f}, max spread={spread:.0%} "
        f"(criterion: within 25%)",
    )
    # Known limitation at desk scale: every Leader-Election selector falls in
    # the m > k rewrite regime (Delta < 42), where certified family sizes do
    # not scale as Delta * lg^2 N. See the sweep table for the per-cell fits.
    assert ok, (
        f"per-cell C_r spread {spread:.0%} exceeds 25%: at desk scale "
        "(Delta in [4,24], N in [64,1024]) the (m,m,N) selector rewrite makes "
        "leader-election rounds grow superlinearly in Delta and the certified "
        "family sizes deviate from lg N proportionality across label spaces"
    )


def test_acceptance_9_family_certification(suite):
    problems = []
    deltas = sorted({rec.result.delta for rec in suite.records})
    seen = 0
    for delta in deltas:
        sim = Simulator(suite.records[0].inst)  # family access only
        for i in range(_ceil_lg(delta) + 1):
            pw = 1 << i
            fam = sim.selector(
                _ceil_div(delta, pw) + 1, _ceil_div(41 * delta, 42 * pw) + 2
            )
            seen += 1
            if not (fam.certified and fam.verification == "exhaustive"):
                problems.append(("selector", delta, i, fam.verification))
        base = sim.base_ssf()
        if not (base.certified and base.verification == "exhaustive"):
            problems.append(("ssf", base.verification))
        pair = sim.pair_ssf()
        if pair.n_labels <= 64:
            if not pair.certified:
                problems.append(("pair", pair.verification))
        elif pair.verification not in ("exhaustive", "spot-checked"):
            problems.append(("pair", pair.verification))
    ok = not problems
    _emit(
        9,
        ok,
        f"{seen} selector families + base ssf exhaustively certified at N=64; "
        f"pair family over N^2=4096 labels spot-checked",
    )
    assert ok, problems


def test_acceptance_10_pipeline_determinism(tmp_path):
    outs = []
    for name in ("a", "b"):
        cfg = RunConfig(
            generator=GeneratorSpec(n=22, arena_side=2.8, seed=66),
            out_dir=str(tmp_path / name),
        )
        assert run(cfg) == 0
        outs.append(tmp_path / name)
    identical = all(
        (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
        for f in ("report.json", "trace.jsonl", "instance.json")
    )
    _emit(10, identical, "reports and traces byte-identical across two executions")
    assert identical
