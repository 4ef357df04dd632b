"""Alternating bit protocol over two lossy channels with deterministic LCG noise.

Time unit: 1.0 = 1 ms.  Trace events (entity / event / payload):

- sender / delay_start / {"type": "preparation", "duration": float}
- sender / packet_sent / {"seq_num": int, "bit": 0|1, "is_retry": bool}
- sender / ack_received / {"ack_bit": 0|1, "is_valid": bool}
- receiver / delay_start / {"type": "processing", "duration": float}
- receiver / packet_received / {"seq_num": int, "bit": 0|1}
- subnet / packet_get / {"behavior": "drop"|"pass", "channel": "forward"|"backward", "noise_value": int}
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from ..kernel import Atomic, Coupled
from .base import ConfigError, Scenario

DROP_BELOW = 10


def lcg_step(x: int) -> tuple[int, str]:
    """Advance the channel noise level; returns ``(x_new, "pass" | "drop")``."""
    x_new = (17 * x + 11) % 100
    return x_new, ("drop" if x_new < DROP_BELOW else "pass")


@dataclass
class AbpConfig:
    total_packets: int = field(default=10, metadata={"help": "packets the sender transmits"})
    seed: int = field(default=42, metadata={"help": "initial noise level of both channels"})
    timeout: float = field(default=20.0, metadata={"help": "sender retransmission timeout (ms)"})
    sender_delay: float = field(default=10.0, metadata={"help": "sender preparation delay (ms)"})
    receiver_delay: float = field(default=10.0, metadata={"help": "receiver processing delay (ms)"})
    channel_delay: float = field(default=3.0, metadata={"help": "subnet transmission delay (ms)"})
    simulate_time: float = field(default=1000.0, metadata={"help": "simulation horizon (ms)"})

    def validate(self) -> None:
        if isinstance(self.total_packets, bool) or not isinstance(self.total_packets, int) or self.total_packets < 0:
            raise ConfigError("total_packets must be a non-negative integer")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        for name in ("timeout", "sender_delay", "receiver_delay", "channel_delay", "simulate_time"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not value > 0 or value == float("inf"):
                raise ConfigError(f"{name} must be a positive finite number")


class Sender(Atomic):
    entity = "sender"

    def __init__(self, name: str, total_packets: int, sender_delay: float, timeout: float):
        super().__init__(name)
        self.add_in_port("in_start")
        self.add_in_port("in_ack")
        self.add_out_port("out_data")
        self.total_packets = total_packets
        self.sender_delay = float(sender_delay)
        self.timeout = float(timeout)
        self.seq_num = 0
        self.bit = 0
        self.is_retry = False
        self.acked = 0

    def initialize(self):
        if self.total_packets > 0:
            self._start_session()
        else:
            self.passivate("idle")

    def _start_session(self):
        self.seq_num, self.bit, self.acked = 1, 0, 0
        self._prepare(retry=False)

    def _prepare(self, retry: bool):
        self.is_retry = retry
        self.emit("delay_start", {"type": "preparation", "duration": self.sender_delay})
        self.hold_in("preparing", self.sender_delay)

    def output(self):
        if self.phase == "preparing":
            return {"out_data": [{"seq_num": self.seq_num, "bit": self.bit}]}
        return {}

    def delta_int(self):
        if self.phase == "preparing":
            self.emit("packet_sent", {"seq_num": self.seq_num, "bit": self.bit, "is_retry": self.is_retry})
            self.hold_in("waiting", self.timeout)
        elif self.phase == "waiting":
            self._prepare(retry=True)
        else:
            self.passivate(self.phase)

    def delta_ext(self, elapsed, inputs):
        for cmd in inputs.get("in_start", []):
            if self.phase in ("idle", "done"):
                self.total_packets = int(cmd.get("total_packets", 0))
                if self.total_packets > 0:
                    self._start_session()
                    return
        acks = inputs.get("in_ack", [])
        if not acks:
            self.resume()
            return
        accepted = False
        for ack in acks:
            ack_bit = ack["ack_bit"]
            active = self.phase in ("preparing", "waiting") and not accepted
            valid = active and ack_bit == self.bit
            self.emit("ack_received", {"ack_bit": ack_bit, "is_valid": valid})
            if valid:
                accepted = True
        if not accepted:
            self.resume()
            return
        self.acked += 1
        if self.acked >= self.total_packets:
            self.passivate("done")
        else:
            self.seq_num += 1
            self.bit ^= 1
            self._prepare(retry=False)


class Receiver(Atomic):
    entity = "receiver"

    def __init__(self, name: str, receiver_delay: float):
        super().__init__(name)
        self.add_in_port("in_data")
        self.add_out_port("out_ack")
        self.receiver_delay = float(receiver_delay)
        self.current: dict | None = None
        self.buffered: dict | None = None

    def initialize(self):
        self.passivate("idle")

    def _start(self, packet: dict):
        self.current = packet
        self.emit("delay_start", {"type": "processing", "duration": self.receiver_delay})
        self.hold_in("busy", self.receiver_delay)

    def output(self):
        if self.phase == "busy" and self.current is not None:
            return {"out_ack": [{"ack_bit": self.current["bit"]}]}
        return {}

    def delta_int(self):
        if self.phase == "busy":
            self.emit("packet_received", {"seq_num": self.current["seq_num"], "bit": self.current["bit"]})
            self.current = None
            if self.buffered is not None:
                nxt, self.buffered = self.buffered, None
                self._start(nxt)
                return
        self.passivate("idle")

    def delta_ext(self, elapsed, inputs):
        started = False
        for packet in inputs.get("in_data", []):
            if self.phase != "busy" and not started:
                self._start(packet)
                started = True
            elif self.buffered is None:
                self.buffered = packet
        if not started:
            self.resume()


class Subnet(Atomic):
    entity = "subnet"

    def __init__(self, name: str, channel: str, seed: int, channel_delay: float):
        super().__init__(name)
        self.add_in_port("in_packet")
        self.add_out_port("out_packet")
        self.channel = channel
        self.noise = seed
        self.channel_delay = float(channel_delay)
        self.in_flight: deque[tuple[float, dict]] = deque()

    def initialize(self):
        self.passivate("idle")

    def _reschedule(self):
        if self.in_flight:
            self.hold_until("transmitting", self.in_flight[0][0])
        else:
            self.passivate("idle")

    def output(self):
        if not self.in_flight:
            return {}
        due = self.in_flight[0][0]
        return {"out_packet": [p for t, p in self.in_flight if t == due]}

    def delta_int(self):
        due = self.in_flight[0][0]
        while self.in_flight and self.in_flight[0][0] == due:
            self.in_flight.popleft()
        self._reschedule()

    def delta_ext(self, elapsed, inputs):
        for packet in inputs.get("in_packet", []):
            self.noise, fate = lcg_step(self.noise)
            self.emit("packet_get", {"behavior": fate, "channel": self.channel, "noise_value": self.noise})
            if fate == "pass":
                self.in_flight.append((self.now + self.channel_delay, packet))
        self._reschedule()


def build_abp(cfg: AbpConfig) -> Coupled:
    cfg.validate()
    root = Coupled("abp")
    root.add_in_port("start")
    sender = root.add_component(Sender("sender", cfg.total_packets, cfg.sender_delay, cfg.timeout))
    receiver = root.add_component(Receiver("receiver", cfg.receiver_delay))
    fwd = root.add_component(Subnet("subnet_fwd", "forward", cfg.seed, cfg.channel_delay))
    bwd = root.add_component(Subnet("subnet_bwd", "backward", cfg.seed, cfg.channel_delay))
    root.add_coupling(root.in_ports["start"], sender.in_ports["in_start"])
    root.add_coupling(sender.out_ports["out_data"], fwd.in_ports["in_packet"])
    root.add_coupling(fwd.out_ports["out_packet"], receiver.in_ports["in_data"])
    root.add_coupling(receiver.out_ports["out_ack"], bwd.in_ports["in_packet"])
    root.add_coupling(bwd.out_ports["out_packet"], sender.in_ports["in_ack"])
    return root


SCENARIO = Scenario(
    name="abp",
    config_cls=AbpConfig,
    build=build_abp,
    horizon=lambda cfg: float(cfg.simulate_time),
    description="alternating bit protocol with deterministic channel noise",
)
