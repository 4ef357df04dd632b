"""Online banking pipeline: AAM -> ANV -> PV -> BPM -> TPM.

Every stage delays each request by a fixed amount (10 s by default) and
serves any number of requests at once.  ANV and PV drop a request with
probability ``1 - pass_prob``; the verdict is drawn from the stage's own
seeded substream when the request enters.  TPM debits the account balance
when a request leaves it.

Events (entity is the lower-case stage name):

- <stage> / stage_enter / {"request_id", "amount"}
- anv|pv / dropped / {"request_id"}
- tpm / balance_update / {"request_id", "amount", "balance"}
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from ..kernel import Atomic, Coupled
from ..rng import substream
from .base import ConfigError, Scenario, read_arrivals

STAGES = ("aam", "anv", "pv", "bpm", "tpm")
VERIFYING = ("anv", "pv")


@dataclass
class IobsConfig:
    requests: int = field(default=100, metadata={"help": "requests produced by the built-in client"})
    interval: float = field(default=1.0, metadata={"help": "seconds between client requests"})
    amount: float = field(default=10.0, metadata={"help": "payment amount per request"})
    initial_balance: float = field(default=100000.0, metadata={"help": "account balance at t=0"})
    delay: float = field(default=10.0, metadata={"help": "processing delay per stage (s)"})
    pass_prob: float = field(default=0.5, metadata={"help": "probability of passing each verification"})
    seed: int = field(default=42, metadata={"help": "random seed"})
    horizon: float = field(default=1000.0, metadata={"help": "simulation horizon (s)"})
    arrivals: str = field(default="", metadata={"help": "explicit request schedule file ('-' for stdin)"})

    def validate(self) -> None:
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        if self.requests < 0:
            raise ConfigError("requests must be >= 0")
        if not 0.0 <= self.pass_prob <= 1.0:
            raise ConfigError("pass_prob must lie in [0, 1]")
        for name in ("interval", "delay", "horizon"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be a positive finite number")
        if not (math.isfinite(self.amount) and math.isfinite(self.initial_balance)):
            raise ConfigError("amount and initial_balance must be finite")


class Client(Atomic):
    entity = "client"

    def __init__(self, name: str, count: int, interval: float, amount: float):
        super().__init__(name)
        self.add_out_port("out_request")
        self.count, self.interval, self.amount = count, float(interval), float(amount)
        self.sent = 0

    def initialize(self):
        if self.count > 0:
            self.hold_until("sending", 0.0)
        else:
            self.passivate("done")

    def output(self):
        return {"out_request": [{"amount": self.amount}]}

    def delta_int(self):
        self.sent += 1
        if self.sent < self.count:
            self.hold_until("sending", self.sent * self.interval)
        else:
            self.passivate("done")


class Stage(Atomic):
    def __init__(self, name: str, delay: float, pass_prob: float | None = None, seed: int = 0):
        super().__init__(name)
        self.entity = name
        self.add_in_port("in_request")
        self.add_out_port("out_request")
        self.delay = float(delay)
        self.pass_prob = pass_prob
        self.seed = seed
        # (due time, request, passes)
        self.pipeline: deque[tuple[float, dict, bool]] = deque()

    def initialize(self):
        self.rng = substream(self.seed, self.path) if self.pass_prob is not None else None
        self.passivate("idle")

    def _reschedule(self):
        if self.pipeline:
            self.hold_until("busy", self.pipeline[0][0])
        else:
            self.passivate("idle")

    def _due(self):
        due = self.pipeline[0][0]
        return [(req, ok) for t, req, ok in self.pipeline if t == due]

    def output(self):
        if not self.pipeline:
            return {}
        passed = [req for req, ok in self._due() if ok]
        return {"out_request": passed} if passed else {}

    def accept(self, request: dict) -> dict:
        return request

    def complete(self, request: dict) -> None:
        pass

    def delta_int(self):
        for req, ok in self._due():
            self.pipeline.popleft()
            if ok:
                self.complete(req)
            else:
                self.emit("dropped", {"request_id": req["request_id"]})
        self._reschedule()

    def delta_ext(self, elapsed, inputs):
        for req in inputs.get("in_request", []):
            req = self.accept(dict(req))
            self.emit("stage_enter", {"request_id": req["request_id"], "amount": req["amount"]})
            ok = True if self.rng is None else self.rng.random() < self.pass_prob
            self.pipeline.append((self.now + self.delay, req, ok))
        self._reschedule()


class AccessManager(Stage):
    def __init__(self, name: str, delay: float):
        super().__init__(name, delay)
        self.next_id = 0

    def accept(self, request):
        self.next_id += 1
        request["request_id"] = self.next_id
        request["amount"] = float(request.get("amount", 0.0))
        return request


class TransactionManager(Stage):
    def __init__(self, name: str, delay: float, initial_balance: float):
        super().__init__(name, delay)
        self.balance = float(initial_balance)

    def complete(self, request):
        self.balance -= request["amount"]
        self.emit("balance_update", {"request_id": request["request_id"], "amount": request["amount"],
                                     "balance": self.balance})


def build_iobs(cfg: IobsConfig) -> Coupled:
    cfg.validate()
    root = Coupled("iobs")
    root.add_in_port("request")
    stages = [
        AccessManager("aam", cfg.delay),
        Stage("anv", cfg.delay, cfg.pass_prob, cfg.seed),
        Stage("pv", cfg.delay, cfg.pass_prob, cfg.seed),
        Stage("bpm", cfg.delay),
        TransactionManager("tpm", cfg.delay, cfg.initial_balance),
    ]
    for st in stages:
        root.add_component(st)
    root.add_coupling("request", "aam.in_request")
    for a, b in zip(stages, stages[1:]):
        root.add_coupling(a.out_ports["out_request"], b.in_ports["in_request"])
    if cfg.requests > 0:
        client = root.add_component(Client("client", cfg.requests, cfg.interval, cfg.amount))
        root.add_coupling(client.out_ports["out_request"], stages[0].in_ports["in_request"])
    return root


def _exogenous(cfg: IobsConfig, stdin) -> list:
    return [(float(a["time"]), "request", {"amount": float(a.get("amount", cfg.amount))})
            for a in read_arrivals(cfg.arrivals, stdin)]


SCENARIO = Scenario(
    name="iobs",
    config_cls=IobsConfig,
    build=build_iobs,
    horizon=lambda cfg: float(cfg.horizon),
    description="online banking verification pipeline",
    exogenous=_exogenous,
)
