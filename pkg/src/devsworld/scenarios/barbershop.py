"""Barbershop: bounded reception queue, inspection, cutting, done-handshake.

Reception holds at most 8 waiting customers and rejects arrivals beyond that.
Inspection takes one customer at a time, passes it on to cutting, and only
asks reception for the next customer after cutting reports done.

Events (entity / event / payload):

- reception / shop_open / {"capacity"}
- reception / arrival / {"customer"}
- reception / admitted / {"customer", "queue_length"}
- reception / rejected / {"customer", "queue_length"}
- reception / dispatch / {"customer", "queue_length"}
- inspection / service_start, service_end / {"customer"}
- inspection / handshake / {"customer"}   (done signal received)
- cutting / service_start, service_end / {"customer"}
- reception / shop_close / {"arrivals", "admitted", "rejected"}   (at the horizon)

Arrivals come from an exponential generator and/or an explicit schedule
(``--arrivals PATH``; ``-`` reads stdin, one ``{"time": t}`` object per line).
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from ..kernel import Atomic, Coupled
from ..rng import substream
from .base import ConfigError, Scenario, read_arrivals

CAPACITY = 8


@dataclass
class BarbershopConfig:
    seed: int = field(default=7, metadata={"help": "random seed"})
    mean_interarrival: float = field(default=4.0, metadata={"help": "mean of exponential inter-arrival time; 0 disables the generator"})
    max_customers: int = field(default=50, metadata={"help": "customers produced by the generator"})
    inspection_time: float = field(default=2.0, metadata={"help": "inspection service time"})
    cutting_time: float = field(default=6.0, metadata={"help": "cutting service time"})
    horizon: float = field(default=500.0, metadata={"help": "simulation horizon"})
    arrivals: str = field(default="", metadata={"help": "explicit arrival schedule file ('-' for stdin)"})

    capacity = CAPACITY

    def validate(self) -> None:
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        if not self.mean_interarrival >= 0:
            raise ConfigError("mean_interarrival must be >= 0")
        if self.max_customers < 0:
            raise ConfigError("max_customers must be >= 0")
        for name in ("inspection_time", "cutting_time", "horizon"):
            v = getattr(self, name)
            if not (v > 0 and v != float("inf")):
                raise ConfigError(f"{name} must be a positive finite number")


class Generator(Atomic):
    entity = "generator"

    def __init__(self, name: str, seed: int, mean: float, limit: int):
        super().__init__(name)
        self.add_out_port("out_arrival")
        self.seed, self.mean, self.limit = seed, mean, limit
        self.sent = 0
        self.next_at = 0.0

    def initialize(self):
        self.rng = substream(self.seed, self.path)
        self._draw()

    def _draw(self):
        if self.sent >= self.limit:
            self.passivate("done")
            return
        self.next_at = self.now + self.rng.expovariate(1.0 / self.mean)
        self.hold_until("waiting", self.next_at)

    def output(self):
        return {"out_arrival": [{}]}

    def delta_int(self):
        self.sent += 1
        self._draw()


class Reception(Atomic):
    entity = "reception"

    def __init__(self, name: str, capacity: int = CAPACITY):
        super().__init__(name)
        self.add_in_port("in_arrival")
        self.add_in_port("in_ready")
        self.add_out_port("out_customer")
        self.capacity = capacity
        self.queue: deque[int] = deque()
        self.inspection_free = True
        self.arrivals = self.admitted = self.rejected = 0

    def initialize(self):
        self.emit("shop_open", {"capacity": self.capacity})
        self.passivate("idle")

    def _maybe_dispatch(self):
        if self.inspection_free and self.queue:
            self.hold_in("dispatching", 0.0)
        elif self.phase != "dispatching":
            self.passivate("idle")
        else:
            self.resume()

    def output(self):
        if self.phase == "dispatching" and self.queue:
            return {"out_customer": [{"customer": self.queue[0]}]}
        return {}

    def delta_int(self):
        if self.phase == "dispatching" and self.queue:
            customer = self.queue.popleft()
            self.inspection_free = False
            self.emit("dispatch", {"customer": customer, "queue_length": len(self.queue)})
        self.passivate("idle")
        self._maybe_dispatch()

    def delta_ext(self, elapsed, inputs):
        if inputs.get("in_ready"):
            self.inspection_free = True
        for _ in inputs.get("in_arrival", []):
            self.arrivals += 1
            customer = self.arrivals
            self.emit("arrival", {"customer": customer})
            if len(self.queue) >= self.capacity:
                self.rejected += 1
                self.emit("rejected", {"customer": customer, "queue_length": len(self.queue)})
            else:
                self.queue.append(customer)
                self.admitted += 1
                self.emit("admitted", {"customer": customer, "queue_length": len(self.queue)})
        self._maybe_dispatch()

    def exit(self):
        self.emit("shop_close", {"arrivals": self.arrivals, "admitted": self.admitted, "rejected": self.rejected})


class Inspection(Atomic):
    entity = "inspection"

    def __init__(self, name: str, service_time: float):
        super().__init__(name)
        self.add_in_port("in_customer")
        self.add_in_port("in_done")
        self.add_out_port("out_customer")
        self.add_out_port("out_ready")
        self.service_time = float(service_time)
        self.current: int | None = None

    def initialize(self):
        self.passivate("idle")

    def output(self):
        if self.phase == "inspecting":
            return {"out_customer": [{"customer": self.current}]}
        if self.phase == "requesting":
            return {"out_ready": [{"ready": True}]}
        return {}

    def delta_int(self):
        if self.phase == "inspecting":
            self.emit("service_end", {"customer": self.current})
            self.passivate("blocked")
        else:
            self.passivate("idle")

    def delta_ext(self, elapsed, inputs):
        for done in inputs.get("in_done", []):
            self.emit("handshake", {"customer": done["customer"]})
            self.current = None
            self.hold_in("requesting", 0.0)
        for c in inputs.get("in_customer", []):
            self.current = c["customer"]
            self.emit("service_start", {"customer": self.current})
            self.hold_in("inspecting", self.service_time)
        self.resume()


class Cutting(Atomic):
    entity = "cutting"

    def __init__(self, name: str, service_time: float):
        super().__init__(name)
        self.add_in_port("in_customer")
        self.add_out_port("out_done")
        self.service_time = float(service_time)
        self.current: int | None = None

    def initialize(self):
        self.passivate("idle")

    def output(self):
        if self.phase == "cutting":
            return {"out_done": [{"customer": self.current}]}
        return {}

    def delta_int(self):
        if self.phase == "cutting":
            self.emit("service_end", {"customer": self.current})
            self.current = None
        self.passivate("idle")

    def delta_ext(self, elapsed, inputs):
        for c in inputs.get("in_customer", []):
            self.current = c["customer"]
            self.emit("service_start", {"customer": self.current})
            self.hold_in("cutting", self.service_time)
        self.resume()


def build_barbershop(cfg: BarbershopConfig) -> Coupled:
    cfg.validate()
    root = Coupled("barbershop")
    root.add_in_port("arrive")
    reception = root.add_component(Reception("reception"))
    inspection = root.add_component(Inspection("inspection", cfg.inspection_time))
    cutting = root.add_component(Cutting("cutting", cfg.cutting_time))
    root.add_coupling("arrive", "reception.in_arrival")
    if cfg.mean_interarrival > 0 and cfg.max_customers > 0:
        gen = root.add_component(Generator("generator", cfg.seed, cfg.mean_interarrival, cfg.max_customers))
        root.add_coupling(gen.out_ports["out_arrival"], reception.in_ports["in_arrival"])
    root.add_coupling("reception.out_customer", "inspection.in_customer")
    root.add_coupling("inspection.out_customer", "cutting.in_customer")
    root.add_coupling("cutting.out_done", "inspection.in_done")
    root.add_coupling("inspection.out_ready", "reception.in_ready")
    return root


def _exogenous(cfg: BarbershopConfig, stdin) -> list:
    return [(float(a["time"]), "arrive", {}) for a in read_arrivals(cfg.arrivals, stdin)]


SCENARIO = Scenario(
    name="barbershop",
    config_cls=BarbershopConfig,
    build=build_barbershop,
    horizon=lambda cfg: float(cfg.horizon),
    description="barbershop with blocking reception and done-handshake",
    exogenous=_exogenous,
)
