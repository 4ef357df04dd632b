from __future__ import annotations

from ...scenarios.iobs import STAGES, VERIFYING
from ..core import COMPONENT, SYSTEM, Finding, Rule
from .common import INT, NUM, catalog_rule, close, horizon_rule, monotonic_rule, select

SIGNIFICANCE = 1e-4

CATALOG = {
    **{(s, "stage_enter"): {"request_id": INT, "amount": NUM} for s in STAGES},
    **{(s, "dropped"): {"request_id": INT} for s in VERIFYING},
    ("tpm", "balance_update"): {"request_id": INT, "amount": NUM, "balance": NUM},
}


def _index(records):
    """request_id -> {(stage, event): (index, time)}, first occurrence only."""
    out: dict[int, dict] = {}
    for i, r in enumerate(records):
        if r.entity in STAGES and "request_id" in r.payload:
            out.setdefault(r.payload["request_id"], {}).setdefault((r.entity, r.event), (i, r.time))
    return out


def _exit_event(stage, seen):
    """The record that ends a request's stay in ``stage``."""
    if stage == "tpm":
        return seen.get(("tpm", "balance_update"))
    nxt = STAGES[STAGES.index(stage) + 1]
    return seen.get((nxt, "stage_enter")) or seen.get((stage, "dropped"))


def stage_latency(records, cfg):
    """Every stage holds a request for exactly the configured delay."""
    delay, horizon = float(cfg.delay), float(cfg.horizon)
    for rid, seen in sorted(_index(records).items()):
        for stage in STAGES:
            enter = seen.get((stage, "stage_enter"))
            if enter is None:
                break
            out = _exit_event(stage, seen)
            due = enter[1] + delay
            if out is None:
                if due < horizon or close(due, horizon):
                    yield Finding(enter[0], f"request {rid} never left {stage} (due at {due})")
                break
            if not close(out[1], due):
                yield Finding(out[0], f"request {rid} left {stage} at {out[1]}, expected {due}")
                break


def drop_legality(records, cfg):
    """Only ANV and PV drop, only requests they hold, and dropped requests go no further."""
    index = _index(records)
    for i, r in select(records, event="dropped"):
        rid = r.payload.get("request_id")
        if r.entity not in VERIFYING:
            yield Finding(i, f"{r.entity} is not a verification stage and cannot drop")
            continue
        seen = index.get(rid, {})
        if (r.entity, "stage_enter") not in seen:
            yield Finding(i, f"{r.entity} dropped request {rid} it never received")
            continue
        downstream = STAGES[STAGES.index(r.entity) + 1:]
        if any((s, "stage_enter") in seen for s in downstream):
            yield Finding(i, f"dropped request {rid} continued downstream")
    counts: dict = {}
    for i, r in select(records, event="dropped"):
        key = r.payload.get("request_id")
        counts[key] = counts.get(key, 0) + 1
        if counts[key] > 1:
            yield Finding(i, f"request {key} dropped twice")


def balance_updates(records, cfg):
    """The balance changes only when a request completes TPM, by exactly its amount."""
    balance = float(cfg.initial_balance)
    entered = {r.payload["request_id"]: r.payload["amount"] for _, r in select(records, "tpm", "stage_enter")}
    done = set()
    for i, r in select(records, "tpm", "balance_update"):
        rid, amount = r.payload["request_id"], r.payload["amount"]
        if rid not in entered or rid in done:
            yield Finding(i, f"balance_update for request {rid} that is not completing TPM")
            return
        if not close(amount, entered[rid]):
            yield Finding(i, f"request {rid} debited {amount}, entered with {entered[rid]}")
            return
        balance -= amount
        done.add(rid)
        if not close(r.payload["balance"], balance):
            yield Finding(i, f"balance {r.payload['balance']} after request {rid}, expected {balance}")
            return


def request_intake(records, cfg):
    """AAM numbers requests 1, 2, ... and sees at least every built-in client request."""
    entered = select(records, "aam", "stage_enter")
    for n, (i, r) in enumerate(entered, start=1):
        if r.payload["request_id"] != n:
            yield Finding(i, f"request id {r.payload['request_id']} at position {n}")
            return
    horizon = float(cfg.horizon)
    expected = sum(1 for k in range(cfg.requests) if k * float(cfg.interval) <= horizon)
    if len(entered) < expected:
        idx = entered[-1][0] if entered else None
        yield Finding(idx, f"{len(entered)} requests reached AAM, the client sent {expected}", ("aam",))


def pipeline_order(records, cfg):
    """Requests visit AAM, ANV, PV, BPM, TPM in order, each stage once, and carry their amount along."""
    reached: dict[int, int] = {}
    amounts: dict[int, float] = {}
    for i, r in select(records, event="stage_enter"):
        rid = r.payload["request_id"]
        pos = STAGES.index(r.entity)
        if reached.get(rid, -1) != pos - 1:
            yield Finding(i, f"request {rid} entered {r.entity} out of pipeline order")
            return
        reached[rid] = pos
        if rid in amounts and not close(amounts[rid], r.payload["amount"]):
            yield Finding(i, f"request {rid} amount changed to {r.payload['amount']} at {r.entity}")
            return
        amounts.setdefault(rid, r.payload["amount"])


def _gate_counts(records, stage):
    nxt = STAGES[STAGES.index(stage) + 1]
    passed = len(select(records, nxt, "stage_enter"))
    failed = len(select(records, stage, "dropped"))
    return passed, failed


def _binomial_rule(stage):
    def check(records, cfg):
        passed, failed = _gate_counts(records, stage)
        n = passed + failed
        if n == 0:
            return
        from scipy.stats import binomtest  # deferred: scipy is slow to import

        p = binomtest(passed, n, float(cfg.pass_prob), alternative="two-sided").pvalue
        if p < SIGNIFICANCE:
            yield Finding(None, f"{stage} passed {passed}/{n}; two-sided binomial p={p:.3g} < {SIGNIFICANCE}", (stage,))

    return check


def rules() -> tuple[list[Rule], list[Rule]]:
    comp = [
        Rule("iobs.request_intake", COMPONENT, "every client request is accepted and numbered in order",
             request_intake),
        Rule("iobs.stage_latency", COMPONENT, "each stage delays a request by exactly the stage delay", stage_latency),
        Rule("iobs.drop_legality", COMPONENT, "drops happen only at ANV/PV, once, and end the request", drop_legality),
        Rule("iobs.balance_updates", COMPONENT, "the balance moves only on TPM completion, by the amount",
             balance_updates),
    ]
    sys_ = [
        Rule("iobs.pipeline_order", SYSTEM, "requests traverse the stages in order", pipeline_order),
        Rule("iobs.anv_binomial", SYSTEM, "ANV pass count is consistent with pass_prob", _binomial_rule("anv")),
        Rule("iobs.pv_binomial", SYSTEM, "PV pass count is consistent with pass_prob", _binomial_rule("pv")),
        horizon_rule("iobs.horizon", lambda cfg: float(cfg.horizon)),
        monotonic_rule("iobs.monotonic_time"),
        catalog_rule("iobs.event_catalog", CATALOG),
    ]
    return comp, sys_
