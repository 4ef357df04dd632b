"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line with its runtime; the lines are
repeated in the pytest terminal summary.
"""
import io
import json
import math
import random
import subprocess
import sys
import time
from contextlib import contextmanager
from pathlib import Path

from conftest import ACCEPTANCE_LINES
from devsworld.conformance import aggregate, rule_catalog, score_case
from devsworld.conformance.core import CaseResult, Finding, Rule
from devsworld.conformance.harness import TestCase, bundled_suite, evaluate_case, evaluate_suite
from devsworld.genpipe import MockClient, generate, validate_plan
from devsworld.scenarios import SCENARIOS
from devsworld.trace import parse_text

from mutants import ABP

FIX = Path(__file__).parent / "fixtures"


@contextmanager
def criterion(number, title, budget=None):
    start = time.perf_counter()
    ok, note = False, ""
    try:
        yield
        elapsed = time.perf_counter() - start
        if budget is not None and elapsed >= budget:
            note = f" (over the {budget:g} s budget)"
            raise AssertionError(f"criterion {number} took {elapsed:.2f} s, budget {budget} s")
        ok = True
    except AssertionError as exc:
        note = note or f": {str(exc).splitlines()[0][:160]}"
        raise
    finally:
        elapsed = time.perf_counter() - start
        line = f"{'PASS' if ok else 'FAIL'} {number}. {title} [{elapsed:.2f} s]{'' if ok else note}"
        ACCEPTANCE_LINES.append(line)
        print(line)


def _rules(name):
    comp, sys_ = rule_catalog(name)
    return {r.id: r for r in comp + sys_}


def test_1_abp_determinism_and_noise():
    with criterion(1, "ABP determinism and LCG fidelity", budget=1.0):
        cmd = [sys.executable, "-m", "devsworld", "simulate", "abp"]
        a = subprocess.run(cmd, capture_output=True, check=True).stdout
        b = subprocess.run(cmd, capture_output=True, check=True).stdout
        assert a and a == b
        records, report = parse_text(a)
        assert report.valid
        forward = [(r.payload["noise_value"], r.payload["behavior"]) for r in records
                   if r.event == "packet_get" and r.payload["channel"] == "forward"]
        x, oracle = 42, []
        for _ in range(4):
            x = (17 * x + 11) % 100
            oracle.append((x, "drop" if x < 10 else "pass"))
        assert oracle == [(25, "pass"), (36, "pass"), (23, "pass"), (2, "drop")]
        assert forward[:4] == oracle


PROTOCOL_RULES = ("abp.alternating_bit", "abp.stop_and_wait", "abp.channel_latency", "abp.cause_before_effect")


def test_2_abp_protocol_invariants():
    with criterion(2, "ABP protocol invariants over 20 random configs, each rule killed by its mutant", budget=30.0):
        rng = random.Random(2024)
        rules = _rules("abp")
        killed = {rid: 0 for rid in PROTOCOL_RULES}
        for _ in range(20):
            argv = ["--seed", str(rng.randrange(100)), "--total_packets", str(rng.randint(2, 50)),
                    "--timeout", str(rng.choice([rng.uniform(5, 15), rng.uniform(15, 60)])),
                    "--sender_delay", str(rng.uniform(0.5, 15)), "--receiver_delay", str(rng.uniform(0.5, 15)),
                    "--channel_delay", str(rng.uniform(0.5, 10)), "--simulate_time", "5000"]
            cfg = SCENARIOS["abp"].parse_args(argv)
            records = SCENARIOS["abp"].simulate(cfg)
            for rid in PROTOCOL_RULES:
                diag = rules[rid].evaluate(records, cfg)
                assert diag is None, f"{rid} failed on {argv}: {diag.message}"
                if rules[rid].evaluate(ABP[rid](list(records), cfg), cfg) is not None:
                    killed[rid] += 1
        assert killed == {rid: 20 for rid in PROTOCOL_RULES}, killed


def test_3_seird_conservation():
    with criterion(3, "SEIRD conservation over 10,000 steps and hand-computed first step", budget=5.0):
        rng = random.Random(7)
        for _ in range(10):
            dt = rng.choice([0.01, 0.05, 0.1])
            argv = ["--susceptible", str(rng.uniform(100, 1e6)), "--exposed", str(rng.uniform(0, 100)),
                    "--infected", str(rng.uniform(1, 1000)), "--recovered", str(rng.uniform(0, 100)),
                    "--beta", str(rng.uniform(0.05, 1.5)), "--sigma", str(rng.uniform(0.05, 1)),
                    "--gamma", str(rng.uniform(0.01, 0.5)), "--mu", str(rng.uniform(0, 0.2)),
                    "--dt", str(dt), "--horizon", repr(10000 * dt)]
            cfg = SCENARIOS["seird"].parse_args(argv)
            assert cfg.n_steps == 10000
            records = SCENARIOS["seird"].simulate(cfg)
            assert len(records) == 10001
            n = cfg.population
            worst = max(abs(sum(r.payload[c] for c in "SEIRD") - n) for r in records)
            assert worst <= 1e-9 * n, f"drift {worst} for N={n}"
        first = SCENARIOS["seird"].simulate(SCENARIOS["seird"].parse_args(["--horizon", "0.5"]))
        assert abs(first[1].payload["S"] - 988.515) <= 1e-12


def test_4_kernel_semantics():
    import test_kernel as k

    with criterion(4, "kernel semantics property tests", budget=30.0):
        k.test_outputs_precede_transitions_in_each_instant()
        k.test_elapsed_matches_independent_clock()
        k.test_default_confluent_is_internal_then_external_with_zero_elapsed()
        k.test_flattened_hierarchy_is_equivalent()
        k.test_zero_delay_cycle_is_detected()


def test_5_scoring_arithmetic():
    with criterion(5, "scoring arithmetic fixtures"):
        def rule(rid, level, ok):
            return Rule(rid, level, "", lambda recs, cfg: [] if ok else [Finding(None, "x")])

        comp = [rule(f"c{k}", "component", k < 2) for k in range(4)]
        sys_ = [rule(f"s{k}", "system", True) for k in range(3)]
        assert score_case([], comp, sys_, v=1).c == 0.75
        assert score_case([], comp, sys_, v=0).c == 0.0
        cases = [CaseResult(str(k), v, c) for k, (v, c) in enumerate([(1, 0.75), (0, 0.0), (1, 1.0), (1, 0.3)])]
        s = aggregate(cases)
        assert abs(s.oss - 0.75) <= 1e-12
        assert abs(s.bcs - (0.75 + 0.0 + 1.0 + 0.3) / 4) <= 1e-12


def test_6_oracle_closure():
    with criterion(6, "reference simulators score OSS = BCS = 1.0 on their bundled suites"):
        for name in ("abp", "seird", "barbershop", "iobs"):
            cmd = [sys.executable, "-m", "devsworld", "simulate", name]
            start = time.perf_counter()
            scores = evaluate_suite(cmd, bundled_suite(name), name, workers=4)
            elapsed = time.perf_counter() - start
            failing = {c.case_id: [d.rule_id for d in c.diagnostics] + c.errors for c in scores.cases if c.c != 1.0}
            assert scores.oss == 1.0 and scores.bcs == 1.0, f"{name}: {failing}"
            if name == "abp":
                heavy = [c for c in scores.cases if c.case_id.startswith("heavy")]
                assert heavy and all(c.record_count > 10000 for c in heavy)
                assert elapsed < 60.0, f"ABP suite took {elapsed:.1f} s"


def test_7_iobs_statistics():
    with criterion(7, "IOBS completion rate and binomial rules at 10,000 requests", budget=10.0):
        cfg = SCENARIOS["iobs"].parse_args(["--requests", "10000", "--horizon", "10100"])
        records = SCENARIOS["iobs"].simulate(cfg)
        entered = sum(1 for r in records if r.entity == "aam" and r.event == "stage_enter")
        done = sum(1 for r in records if r.event == "balance_update")
        assert entered == 10000
        rate = done / entered
        assert 0.23 <= rate <= 0.27, rate
        rules = _rules("iobs")
        for rid in ("iobs.anv_binomial", "iobs.pv_binomial"):
            assert rules[rid].evaluate(records, cfg) is None


def _occupancy_peak(records):
    q = peak = 0
    for r in records:
        if r.entity == "reception":
            q += {"admitted": 1, "dispatch": -1}.get(r.event, 0)
            peak = max(peak, q)
    return peak


def test_8_barbershop_blocking():
    with criterion(8, "barbershop blocking: one rejection of nine, occupancy at most 8 over 1,000 streams"):
        sc = SCENARIOS["barbershop"]

        def run(times, horizon):
            cfg = sc.parse_args(["--mean_interarrival", "0", "--arrivals", "-", "--horizon", str(horizon)])
            stdin = io.StringIO("".join(json.dumps({"time": t}) + "\n" for t in times))
            return sc.simulate(cfg, stdin)

        nine = run([5.0] * 9, 100)
        assert sum(r.event == "rejected" for r in nine) == 1
        rng = random.Random(8)
        for _ in range(1000):
            times, t = [], 0.0
            for _ in range(rng.randint(1, 30)):
                t += rng.choice([0.0, 0.0, rng.expovariate(0.5)])
                times.append(round(t, 6))
            assert _occupancy_peak(run(times, 400)) <= 8


def test_9_pipeline_with_mock(tmp_path):
    with criterion(9, "mock-driven generation: valid plan, reproducible build, working simulator", budget=20.0):
        spec, contract = (FIX / "abp_spec.md").read_text(), (FIX / "abp_contract.md").read_text()
        script = FIX / "abp_mock.json"
        serial = generate(spec, contract, MockClient.from_file(script), tmp_path / "serial", "ABP_System", workers=1)
        concurrent = generate(spec, contract, MockClient.from_file(script), tmp_path / "concurrent", "ABP_System",
                              workers=8)
        tree = serial.tree
        assert validate_plan(tree) == []
        assert tree.depth() <= math.log2(tree.leaves()) + 1
        files = {p.name: p.read_bytes() for p in sorted((tmp_path / "serial").iterdir())}
        assert files == {p.name: p.read_bytes() for p in sorted((tmp_path / "concurrent").iterdir())}
        assert concurrent.assembly.files() == serial.assembly.files()
        smoke = next(c for c in bundled_suite("abp").cases if c.id == "smoke-single-packet")
        res = evaluate_case([sys.executable, str(tmp_path / "serial" / "main.py")], smoke, "abp")
        assert res.v == 1, res.errors
