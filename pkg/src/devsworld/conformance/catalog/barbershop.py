from __future__ import annotations

from ...scenarios.barbershop import CAPACITY
from ..core import COMPONENT, SYSTEM, Finding, Rule
from .common import INT, catalog_rule, close, horizon_rule, monotonic_rule, select

_C = {"customer": INT}
_CQ = {"customer": INT, "queue_length": INT}
CATALOG = {
    ("reception", "shop_open"): {"capacity": INT},
    ("reception", "arrival"): _C,
    ("reception", "admitted"): _CQ,
    ("reception", "rejected"): _CQ,
    ("reception", "dispatch"): _CQ,
    ("reception", "shop_close"): {"arrivals": INT, "admitted": INT, "rejected": INT},
    ("inspection", "service_start"): _C,
    ("inspection", "service_end"): _C,
    ("inspection", "handshake"): _C,
    ("cutting", "service_start"): _C,
    ("cutting", "service_end"): _C,
}


def _customers(records, entity, event):
    return [(i, r.time, r.payload["customer"]) for i, r in select(records, entity, event)]


def _service(records, entity, duration, horizon):
    open_ = None
    for i, r in select(records, entity):
        if r.event == "service_start":
            if open_ is not None:
                yield Finding(i, f"{entity} started customer {r.payload['customer']} while serving {open_[2]}")
            open_ = (i, r.time, r.payload["customer"])
        elif r.event == "service_end":
            if open_ is None or open_[2] != r.payload["customer"]:
                yield Finding(i, f"{entity} ended customer {r.payload['customer']} it was not serving")
            elif not close(r.time - open_[1], duration):
                yield Finding(i, f"{entity} served customer {open_[2]} for {r.time - open_[1]}, expected {duration}")
            open_ = None
    if open_ is not None and open_[1] + duration <= horizon and not close(open_[1] + duration, horizon):
        yield Finding(open_[0], f"{entity} never finished customer {open_[2]}")


def service_times(records, cfg):
    yield from _service(records, "inspection", float(cfg.inspection_time), float(cfg.horizon))
    yield from _service(records, "cutting", float(cfg.cutting_time), float(cfg.horizon))


def queue_accounting(records, cfg):
    """queue_length tracks admissions minus dispatches."""
    q = 0
    for i, r in select(records, "reception"):
        if r.event == "admitted":
            q += 1
        elif r.event == "dispatch":
            q -= 1
        else:
            continue
        if r.payload["queue_length"] != q:
            yield Finding(i, f"{r.event} reports queue_length {r.payload['queue_length']}, expected {q}")
            return


def rejection_only_when_full(records, cfg):
    q = 0
    for i, r in select(records, "reception"):
        if r.event == "admitted":
            if q >= CAPACITY:
                yield Finding(i, f"customer {r.payload['customer']} admitted into a full queue")
            q += 1
        elif r.event == "dispatch":
            q -= 1
        elif r.event == "rejected" and q < CAPACITY:
            yield Finding(i, f"customer {r.payload['customer']} rejected with {q} waiting")


def capacity(records, cfg):
    for i, r in select(records, "reception"):
        if "queue_length" in r.payload and r.payload["queue_length"] > CAPACITY:
            yield Finding(i, f"queue_length {r.payload['queue_length']} exceeds {CAPACITY}")


def arrival_accounting(records, cfg):
    """Every arrival is admitted or rejected once; the closing totals agree."""
    arrivals = [c for _, _, c in _customers(records, "reception", "arrival")]
    seen = set(arrivals)
    if len(seen) != len(arrivals):
        yield Finding(None, "duplicate arrival ids", ("reception",))
    decided: dict[int, int] = {}
    for i, _, c in _customers(records, "reception", "admitted") + _customers(records, "reception", "rejected"):
        if c not in seen:
            yield Finding(i, f"decision for customer {c} without an arrival")
        decided[c] = decided.get(c, 0) + 1
        if decided[c] > 1:
            yield Finding(i, f"customer {c} decided twice")
    missing = seen - set(decided)
    if missing:
        yield Finding(None, f"arrivals never admitted or rejected: {sorted(missing)[:5]}", ("reception",))
    closes = select(records, "reception", "shop_close")
    if len(closes) != 1:
        yield Finding(None, f"expected one shop_close, found {len(closes)}", ("reception",))
        return
    i, r = closes[0]
    want = {
        "arrivals": len(arrivals),
        "admitted": len(select(records, "reception", "admitted")),
        "rejected": len(select(records, "reception", "rejected")),
    }
    if r.payload != want:
        yield Finding(i, f"shop_close totals {r.payload} != counted {want}")


def fifo(records, cfg):
    """Admitted customers flow through dispatch, inspection and cutting in order."""
    upstream = [c for _, _, c in _customers(records, "reception", "admitted")]
    stages = [
        ("reception dispatch", _customers(records, "reception", "dispatch")),
        ("inspection", _customers(records, "inspection", "service_start")),
        ("cutting", _customers(records, "cutting", "service_start")),
    ]
    for name, seq in stages:
        for n, (i, _, c) in enumerate(seq):
            if n >= len(upstream) or upstream[n] != c:
                yield Finding(i, f"{name} served customer {c} out of order")
                return
        upstream = [c for _, _, c in seq]


def handshake(records, cfg):
    """Inspection accepts a new customer only after cutting reported the previous one done."""
    cut_end = {c: t for _, t, c in _customers(records, "cutting", "service_end")}
    insp_end = {c: t for _, t, c in _customers(records, "inspection", "service_end")}
    shakes = _customers(records, "inspection", "handshake")
    for i, t, c in shakes:
        if c not in cut_end or not close(cut_end[c], t):
            yield Finding(i, f"handshake for customer {c} at {t} does not coincide with cutting service_end")
    for i, t, c in _customers(records, "cutting", "service_start"):
        if c not in insp_end or not close(insp_end[c], t):
            yield Finding(i, f"cutting took customer {c} at {t}, not when inspection released it")
    shake_at: dict[int, float] = {}
    for _, t, c in shakes:
        shake_at.setdefault(c, t)
    starts = _customers(records, "inspection", "service_start")
    for (_, _, prev), (i, t, c) in zip(starts, starts[1:]):
        done = shake_at.get(prev)
        if done is None or (done > t and not close(done, t)):
            yield Finding(i, f"inspection started customer {c} before the handshake for {prev}")
            return


def rules() -> tuple[list[Rule], list[Rule]]:
    comp = [
        Rule("barbershop.service_times", COMPONENT, "inspection and cutting hold each customer for their service time",
             service_times),
        Rule("barbershop.queue_accounting", COMPONENT, "queue_length follows admissions and dispatches",
             queue_accounting),
        Rule("barbershop.rejection_only_when_full", COMPONENT, "customers are rejected exactly when the queue is full",
             rejection_only_when_full),
    ]
    sys_ = [
        Rule("barbershop.capacity", SYSTEM, f"never more than {CAPACITY} waiting", capacity),
        Rule("barbershop.arrival_accounting", SYSTEM, "each arrival decided once; totals agree", arrival_accounting),
        Rule("barbershop.fifo", SYSTEM, "service order equals admission order", fifo),
        Rule("barbershop.handshake", SYSTEM, "done handshake gates the next inspection", handshake),
        horizon_rule("barbershop.horizon", lambda cfg: float(cfg.horizon)),
        monotonic_rule("barbershop.monotonic_time"),
        catalog_rule("barbershop.event_catalog", CATALOG),
    ]
    return comp, sys_
