import pytest

from devsworld.conformance import rule_catalog
from devsworld.scenarios import SCENARIOS

from mutants import MUTANTS

BASE_ARGS = {
    "abp": [],
    "seird": ["--horizon", "10"],
    "barbershop": [],
    "iobs": ["--requests", "200"],
}


@pytest.fixture(scope="module")
def reference():
    out = {}
    for name, argv in BASE_ARGS.items():
        cfg = SCENARIOS[name].parse_args(argv)
        out[name] = (cfg, SCENARIOS[name].simulate(cfg))
    return out


def _rules(name):
    comp, sys_ = rule_catalog(name)
    return {r.id: r for r in comp + sys_}


@pytest.mark.parametrize("name", sorted(BASE_ARGS))
def test_reference_trace_passes_every_rule(reference, name):
    cfg, records = reference[name]
    failures = {rid: d.message for rid, r in _rules(name).items() if (d := r.evaluate(records, cfg))}
    assert failures == {}


@pytest.mark.parametrize("name", sorted(BASE_ARGS))
def test_every_rule_has_a_mutant(name):
    assert set(MUTANTS[name]) == set(_rules(name))


CASES = [(name, rid) for name in sorted(MUTANTS) for rid in sorted(MUTANTS[name])]


@pytest.mark.parametrize("name,rule_id", CASES, ids=[rid for _, rid in CASES])
def test_mutant_is_rejected_by_its_rule(reference, name, rule_id):
    cfg, records = reference[name]
    mutated = MUTANTS[name][rule_id](list(records), cfg)
    assert mutated != records
    diag = _rules(name)[rule_id].evaluate(mutated, cfg)
    assert diag is not None and diag.rule_id == rule_id


def test_rule_crash_counts_as_failure():
    from devsworld.trace import TraceRecord

    cfg = SCENARIOS["abp"].defaults()
    bad = [TraceRecord(0.0, "sender", "packet_sent", {"bit": 0})]
    diag = _rules("abp")["abp.alternating_bit"].evaluate(bad, cfg)
    assert diag is not None and "could not be evaluated" in diag.message


def test_empty_iobs_trace_is_not_conformant():
    cfg = SCENARIOS["iobs"].defaults()
    assert _rules("iobs")["iobs.request_intake"].evaluate([], cfg) is not None


def test_unknown_catalog():
    with pytest.raises(LookupError):
        rule_catalog("nope")


def test_diagnostic_points_at_record(reference):
    cfg, records = reference["abp"]
    mutated = MUTANTS["abp"]["abp.noise_orbit"](list(records), cfg)
    diag = _rules("abp")["abp.noise_orbit"].evaluate(mutated, cfg)
    assert mutated[diag.index].event == "packet_get"
    assert "subnet" in diag.entities
