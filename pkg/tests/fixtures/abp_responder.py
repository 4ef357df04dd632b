"""Rule-based stand-in for a chat model, used to record tests/fixtures/abp_mock.json.

Run ``python3 tests/fixtures/make_abp_mock.py`` after changing templates or replies.
Two replies are deliberately wrong the first time (a Subnet port typed
"tuple", an undecided Receiver classification) so the recorded script
exercises the feedback retry and the re-query path.
"""
from __future__ import annotations

import json
import re

from devsworld.genpipe import ChatClient

ROOT = "ABP_System"


def _port(name, type_, structure, description, initial_state="None", initial_signal="None"):
    return {"name": name, "type": type_, "structure": structure,
            "protocol": {"description": description, "initial_state": initial_state, "initial_signal": initial_signal}}


def _arg(name, type_, structure):
    return {"name": name, "type": type_, "structure": structure}


def _log(event, keys, when):
    return {"dict_content": [{"key": k, "value": v} for k, v in keys], "extra_info": when}


DATA = "{'seq_num': int, 'bit': int}  # bit in {0, 1}"
ACK = "{'ack_bit': int}  # ack_bit in {0, 1}"

SPECS = {
    ROOT: {
        "function": "- Root of the alternating bit protocol system. 1 time unit = 1 ms.\n"
                    "- Contains a sender, a receiver and two lossy channels; no external ports.",
        "logging": {"detailed": [], "general": "All records come from the sub-models."},
        "model_init_args": [_arg("total_packets", "int", "packets to send"), _arg("seed", "int", "initial noise"),
                            _arg("timeout", "float", "ms"), _arg("sender_delay", "float", "ms"),
                            _arg("receiver_delay", "float", "ms"), _arg("channel_delay", "float", "ms")],
        "input_ports": [],
        "output_ports": [],
    },
    "Sender": {
        "function": "- 1 time unit = 1 ms.\n- Packets numbered from 1; bit starts at 0 and flips per new packet.\n"
                    "- Preparation of sender_delay before every send, resends included.\n"
                    "- Timer of timeout after each send; on expiry resend the same packet.\n"
                    "- Accept an ACK only when ack_bit equals the current bit; stop after total_packets ACKs.",
        "logging": {"detailed": [
            _log("delay_start", [("type", "'preparation'"), ("duration", "float")], "preparation begins"),
            _log("packet_sent", [("seq_num", "int"), ("bit", "int"), ("is_retry", "bool")], "packet leaves"),
            _log("ack_received", [("ack_bit", "int"), ("is_valid", "bool")], "ACK arrives"),
        ], "general": "entity 'sender'"},
        "model_init_args": [_arg("total_packets", "int", "packets to send"), _arg("sender_delay", "float", "ms"),
                            _arg("timeout", "float", "ms")],
        "input_ports": [_port("in_ack", "dict", ACK, "ACKs from subnet_bwd.out_packet")],
        "output_ports": [_port("out_data", "dict", DATA, "packets to subnet_fwd.in_packet",
                               initial_signal="first packet after sender_delay when total_packets > 0")],
    },
    "Receiver": {
        "function": "- 1 time unit = 1 ms.\n- Process a packet for receiver_delay, then send its bit back as an ACK.\n"
                    "- While busy keep only the first extra packet and process it next.",
        "logging": {"detailed": [
            _log("delay_start", [("type", "'processing'"), ("duration", "float")], "processing begins"),
            _log("packet_received", [("seq_num", "int"), ("bit", "int")], "processing ends"),
        ], "general": "entity 'receiver'"},
        "model_init_args": [_arg("receiver_delay", "float", "ms")],
        "input_ports": [_port("in_data", "dict", DATA, "packets from subnet_fwd.out_packet")],
        "output_ports": [_port("out_ack", "dict", ACK, "ACKs to subnet_bwd.in_packet")],
    },
    "Subnet": {
        "function": "- 1 time unit = 1 ms.\n- Noise x starts at seed; on entry x = (17 * x + 11) % 100.\n"
                    "- Drop when x < 10, otherwise deliver after channel_delay.",
        "logging": {"detailed": [
            _log("packet_get", [("behavior", "'drop' | 'pass'"), ("channel", "'forward' | 'backward'"),
                                ("noise_value", "int")], "a packet enters"),
        ], "general": "entity 'subnet'"},
        "model_init_args": [_arg("channel", "str", "'forward' or 'backward'"), _arg("seed", "int", "initial noise"),
                            _arg("channel_delay", "float", "ms")],
        "input_ports": [_port("in_packet", "dict", "any dict, forwarded unchanged", "packets entering the channel")],
        "output_ports": [_port("out_packet", "dict", "same dict as received", "packets leaving the channel")],
    },
}

COUPLING = (
    "Instantiate Sender as sender. Instantiate Receiver as receiver. "
    "Instantiate Subnet as subnet_fwd (channel 'forward') and subnet_bwd (channel 'backward').\n"
    "sender.out_data -> subnet_fwd.in_packet; subnet_fwd.out_packet -> receiver.in_data; "
    "receiver.out_ack -> subnet_bwd.in_packet; subnet_bwd.out_packet -> sender.in_ack."
)

CONTROLLER_INFO = (
    "- Parse --total_packets (default 10), --seed (42), --timeout (20), --sender_delay (10), "
    "--receiver_delay (10), --channel_delay (3), --simulate_time (1000).\n"
    "- No stdin. Run until simulate_time and write the JSONL trace to stdout."
)

SOURCES = {
    "Sender": '''from devsworld.kernel import Atomic


class Sender(Atomic):
    """
    Function:
        - Stop-and-wait sender with an alternating bit; 1 time unit = 1 ms.
        - preparing: after sender_delay the packet is sent, then waiting.
        - waiting: a valid ACK moves to the next packet; timeout expiry prepares a resend.
    Logging in this model:
        - delay_start {type: 'preparation', duration}
        - packet_sent {seq_num, bit, is_retry}
        - ack_received {ack_bit, is_valid}
    Input Ports:
      - in_ack (dict): acknowledgement
        structure: {'ack_bit': int}
    Output Ports:
      - out_data (dict): packet
        structure: {'seq_num': int, 'bit': int}
    """

    entity = "sender"

    def __init__(self, name: str, total_packets: int, sender_delay: float, timeout: float):
        super().__init__(name)
        self.add_in_port("in_ack")
        self.add_out_port("out_data")
        self.total_packets = total_packets
        self.sender_delay = float(sender_delay)
        self.timeout = float(timeout)
        self.seq_num = 1
        self.bit = 0
        self.acked = 0
        self.is_retry = False

    def initialize(self):
        if self.total_packets > 0:
            self._prepare(False)
        else:
            self.passivate("done")

    def _prepare(self, retry):
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
            self._prepare(True)
        else:
            self.passivate(self.phase)

    def delta_ext(self, elapsed, inputs):
        accepted = False
        for ack in inputs.get("in_ack", []):
            valid = self.phase in ("preparing", "waiting") and not accepted and ack["ack_bit"] == self.bit
            self.emit("ack_received", {"ack_bit": ack["ack_bit"], "is_valid": valid})
            accepted = accepted or valid
        if not accepted:
            self.resume()
            return
        self.acked += 1
        if self.acked >= self.total_packets:
            self.passivate("done")
        else:
            self.seq_num += 1
            self.bit ^= 1
            self._prepare(False)
''',
    "Receiver": '''from devsworld.kernel import Atomic


class Receiver(Atomic):
    """
    Function:
        - Processes each packet for receiver_delay, then acknowledges its bit; 1 time unit = 1 ms.
        - idle: a packet starts processing. busy: the first extra packet waits in a one-slot buffer.
    Logging in this model:
        - delay_start {type: 'processing', duration}
        - packet_received {seq_num, bit}
    Input Ports:
      - in_data (dict): packet
        structure: {'seq_num': int, 'bit': int}
    Output Ports:
      - out_ack (dict): acknowledgement
        structure: {'ack_bit': int}
    """

    entity = "receiver"

    def __init__(self, name: str, receiver_delay: float):
        super().__init__(name)
        self.add_in_port("in_data")
        self.add_out_port("out_ack")
        self.receiver_delay = float(receiver_delay)
        self.current = None
        self.waiting = None

    def initialize(self):
        self.passivate("idle")

    def _start(self, packet):
        self.current = packet
        self.emit("delay_start", {"type": "processing", "duration": self.receiver_delay})
        self.hold_in("busy", self.receiver_delay)

    def output(self):
        if self.phase == "busy":
            return {"out_ack": [{"ack_bit": self.current["bit"]}]}
        return {}

    def delta_int(self):
        self.emit("packet_received", {"seq_num": self.current["seq_num"], "bit": self.current["bit"]})
        self.current = None
        if self.waiting is not None:
            packet, self.waiting = self.waiting, None
            self._start(packet)
        else:
            self.passivate("idle")

    def delta_ext(self, elapsed, inputs):
        started = False
        for packet in inputs.get("in_data", []):
            if self.phase == "idle" and not started:
                self._start(packet)
                started = True
            elif self.waiting is None:
                self.waiting = packet
        if not started:
            self.resume()
''',
    "Subnet": '''from collections import deque

from devsworld.kernel import Atomic


class Subnet(Atomic):
    """
    Function:
        - Lossy channel with deterministic LCG noise; 1 time unit = 1 ms.
        - On entry: x = (17 * x + 11) % 100; drop if x < 10, else deliver after channel_delay.
    Logging in this model:
        - packet_get {behavior, channel, noise_value}
    Input Ports:
      - in_packet (dict): any packet
    Output Ports:
      - out_packet (dict): the same packet, channel_delay later
    """

    entity = "subnet"

    def __init__(self, name: str, channel: str, seed: int, channel_delay: float):
        super().__init__(name)
        self.add_in_port("in_packet")
        self.add_out_port("out_packet")
        self.channel = channel
        self.noise = seed
        self.channel_delay = float(channel_delay)
        self.queue = deque()

    def initialize(self):
        self.passivate("idle")

    def _next(self):
        if self.queue:
            self.hold_until("sending", self.queue[0][0])
        else:
            self.passivate("idle")

    def output(self):
        if not self.queue:
            return {}
        due = self.queue[0][0]
        return {"out_packet": [p for t, p in self.queue if t == due]}

    def delta_int(self):
        due = self.queue[0][0]
        while self.queue and self.queue[0][0] == due:
            self.queue.popleft()
        self._next()

    def delta_ext(self, elapsed, inputs):
        for packet in inputs.get("in_packet", []):
            self.noise = (17 * self.noise + 11) % 100
            behavior = "drop" if self.noise < 10 else "pass"
            self.emit("packet_get", {"behavior": behavior, "channel": self.channel, "noise_value": self.noise})
            if behavior == "pass":
                self.queue.append((self.now + self.channel_delay, packet))
        self._next()
''',
    ROOT: '''from devsworld.kernel import Coupled

from receiver import Receiver
from sender import Sender
from subnet import Subnet


class ABP_System(Coupled):
    """
    Function:
      - Alternating bit protocol system.
      - Sub-models:
        - Sender: name=sender.
        - Receiver: name=receiver.
        - Subnet: name=subnet_fwd (forward) and subnet_bwd (backward).
    Logging in this model:
      - none of its own
    Input Ports:
      - none
    Output Ports:
      - none
    """

    def __init__(self, name: str, total_packets: int, seed: int, timeout: float, sender_delay: float,
                 receiver_delay: float, channel_delay: float):
        super().__init__(name)
        self.add_component(Sender("sender", total_packets, sender_delay, timeout))
        self.add_component(Receiver("receiver", receiver_delay))
        self.add_component(Subnet("subnet_fwd", "forward", seed, channel_delay))
        self.add_component(Subnet("subnet_bwd", "backward", seed, channel_delay))
        self.add_coupling("sender.out_data", "subnet_fwd.in_packet")
        self.add_coupling("subnet_fwd.out_packet", "receiver.in_data")
        self.add_coupling("receiver.out_ack", "subnet_bwd.in_packet")
        self.add_coupling("subnet_bwd.out_packet", "sender.in_ack")
''',
}

MAIN = '''import argparse
import sys

from devsworld.kernel import Coordinator
from devsworld.trace import JsonlSink

from abp_system import ABP_System


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--total_packets", type=int, default=10)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--timeout", type=float, default=20.0)
    parser.add_argument("--sender_delay", type=float, default=10.0)
    parser.add_argument("--receiver_delay", type=float, default=10.0)
    parser.add_argument("--channel_delay", type=float, default=3.0)
    parser.add_argument("--simulate_time", type=float, default=1000.0)
    args = parser.parse_args()
    root = ABP_System("abp", args.total_packets, args.seed, args.timeout, args.sender_delay,
                      args.receiver_delay, args.channel_delay)
    sink = JsonlSink(sys.stdout)
    try:
        Coordinator(root, sink=sink).run_until(args.simulate_time)
    finally:
        sink.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
'''

_NAME = re.compile(r"`([A-Za-z_]\w*)`")


def _target(prompt: str) -> str:
    return _NAME.search(prompt).group(1)


class AbpResponder(ChatClient):
    def complete(self, role, prompt, schema=None):
        retry = "## Reviewer feedback" in prompt
        if role == "classifier":
            name = _target(prompt)
            if name == ROOT:
                return json.dumps({"model_type": "coupled", "submodels": ["Sender", "Receiver", "Subnet"],
                                   "reasoning": "sender, receiver and channels cooperate"})
            if name == "Receiver" and "could not decide" not in prompt:
                return json.dumps({"model_type": "notsure", "submodels": [],
                                   "reasoning": "the one-slot buffer might be its own part"})
            return json.dumps({"model_type": "atomic", "submodels": [], "reasoning": "one state cycle"})
        if role == "formulator":
            name = _target(prompt)
            spec = json.loads(json.dumps(SPECS[name]))
            if name == "Subnet" and not retry:
                spec["input_ports"][0]["type"] = "tuple"
            info = CONTROLLER_INFO if name == ROOT else ""
            return "Model description follows.\n" + json.dumps({"core_model": spec, "controller_info": info})
        if role == "splitter":
            children = [{"class_name": n, **SPECS[n]} for n in ("Sender", "Receiver", "Subnet")]
            return json.dumps({"children_plan": children, "coupling_specification": COUPLING})
        if role == "generator":
            name = _target(prompt.split("defines the", 1)[1])
            return f"The state machine follows the requirements.\n<python_code>\n{SOURCES[name]}</python_code>\n"
        if role == "summarizer":
            name = re.search(r"^class (\w+)\(", prompt, re.M).group(1)
            return json.dumps(SPECS[name])
        if role == "controller":
            return f"<python_code>\n{MAIN}</python_code>"
        raise ValueError(f"unexpected role {role}")
