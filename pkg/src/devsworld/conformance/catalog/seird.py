from __future__ import annotations

from ...scenarios.seird import COMPARTMENTS, euler_step
from ..core import COMPONENT, SYSTEM, Finding, Rule
from .common import INT, NUM, catalog_rule, close, horizon_rule, monotonic_rule, select

CATALOG = {("seird", "state"): {"step": INT, **{c: NUM for c in COMPARTMENTS}}}

TOL = 1e-9


def _states(records):
    return select(records, "seird", "state")


def _vec(r):
    return tuple(float(r.payload[c]) for c in COMPARTMENTS)


def _near(a, b, scale):
    return abs(a - b) <= TOL * max(1.0, scale)


def initial_state(records, cfg):
    states = _states(records)
    if not states:
        yield Finding(None, "no state records", ("seird",))
        return
    i, r = states[0]
    want = (cfg.susceptible, cfg.exposed, cfg.infected, cfg.recovered, cfg.deceased)
    if r.time != 0.0 or r.payload["step"] != 0 or any(not _near(a, b, cfg.population) for a, b in zip(_vec(r), want)):
        yield Finding(i, f"first state {r.payload} at {r.time} is not the configured initial state")


def euler_update(records, cfg):
    """Consecutive states differ by exactly one forward-Euler step."""
    states = _states(records)
    n = cfg.population
    for (_, a), (j, b) in zip(states, states[1:]):
        want = euler_step(_vec(a), cfg, n)
        if any(not _near(x, y, n) for x, y in zip(_vec(b), want)):
            yield Finding(j, f"step {b.payload['step']} deviates from the Euler update of step {a.payload['step']}")
            return


def non_negative(records, cfg):
    for i, r in _states(records):
        if any(v < -TOL * max(1.0, cfg.population) for v in _vec(r)):
            yield Finding(i, f"negative compartment at step {r.payload['step']}")


def conservation(records, cfg):
    n = cfg.population
    for i, r in _states(records):
        total = sum(_vec(r))
        if abs(total - n) > TOL * max(1.0, n):
            yield Finding(i, f"population {total} drifted from {n}")


def step_cadence(records, cfg):
    """Record k sits at k*dt, with no gaps or repeats, through the final step."""
    states = _states(records)
    for k, (i, r) in enumerate(states):
        if r.payload["step"] != k or not close(r.time, k * cfg.dt):
            yield Finding(i, f"record {k} has step {r.payload['step']} at {r.time}, expected step {k} at {k * cfg.dt}")
            return
    if len(states) != cfg.n_steps + 1:
        idx = states[-1][0] if states else None
        yield Finding(idx, f"{len(states)} state records, expected {cfg.n_steps + 1}", ("seird",))


def rules() -> tuple[list[Rule], list[Rule]]:
    comp = [
        Rule("seird.initial_state", COMPONENT, "step 0 at t=0 equals the configured compartments", initial_state),
        Rule("seird.euler_update", COMPONENT, "each step is one forward-Euler update", euler_update),
        Rule("seird.non_negative", COMPONENT, "compartments never go negative", non_negative),
    ]
    sys_ = [
        Rule("seird.conservation", SYSTEM, "S+E+I+R+D stays equal to the population", conservation),
        Rule("seird.step_cadence", SYSTEM, "one record per dt, no gaps", step_cadence),
        horizon_rule("seird.horizon", lambda cfg: cfg.n_steps * cfg.dt),
        monotonic_rule("seird.monotonic_time"),
        catalog_rule("seird.event_catalog", CATALOG),
    ]
    return comp, sys_
