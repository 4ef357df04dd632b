"""Trace rules for the alternating bit protocol scenario.

Records sharing a timestamp may appear in any order, so causal checks
compare times, never line positions across entities.
"""
from __future__ import annotations

from bisect import bisect_left, bisect_right
from collections import Counter

from ...scenarios.abp import lcg_step
from ..core import COMPONENT, SYSTEM, Finding, Rule
from .common import BOOL, INT, NUM, catalog_rule, close, horizon_rule, monotonic_rule, select

CATALOG = {
    ("sender", "delay_start"): {"type": {"preparation"}, "duration": NUM},
    ("sender", "packet_sent"): {"seq_num": INT, "bit": {0, 1}, "is_retry": BOOL},
    ("sender", "ack_received"): {"ack_bit": {0, 1}, "is_valid": BOOL},
    ("receiver", "delay_start"): {"type": {"processing"}, "duration": NUM},
    ("receiver", "packet_received"): {"seq_num": INT, "bit": {0, 1}},
    ("subnet", "packet_get"): {"behavior": {"drop", "pass"}, "channel": {"forward", "backward"}, "noise_value": INT},
}


def _sender(records):
    return select(records, entity="sender")


def _passes(records, channel):
    return [(i, r) for i, r in select(records, "subnet", "packet_get")
            if r.payload["channel"] == channel and r.payload["behavior"] == "pass"]


# ---------------------------------------------------------------- system rules

def _unmatched(causes, effects):
    """Effects whose key was produced fewer times than consumed, up to their time.

    ``causes`` and ``effects`` are ``(time, key)`` and ``(index, time, key)``
    sequences; a cause at the same instant as its effect counts as earlier.
    """
    causes = sorted(causes)
    have: Counter = Counter()
    used: Counter = Counter()
    j = 0
    for i, t, key in sorted(effects, key=lambda e: (e[1], e[0])):
        while j < len(causes) and (causes[j][0] <= t or close(causes[j][0], t)):
            have[causes[j][1]] += 1
            j += 1
        used[key] += 1
        if used[key] > have[key]:
            yield i, t, key


def cause_before_effect(records, cfg):
    """Each packet_received matches an earlier packet_sent; each ACK an earlier packet_received."""
    sent = [(r.time, (r.payload["seq_num"], r.payload["bit"])) for _, r in select(records, "sender", "packet_sent")]
    received = select(records, "receiver", "packet_received")
    for i, t, key in _unmatched(sent, [(i, r.time, (r.payload["seq_num"], r.payload["bit"])) for i, r in received]):
        yield Finding(i, f"packet_received seq={key[0]} bit={key[1]} at {t} has no earlier packet_sent", ("sender",))
    acks = [(i, r.time, r.payload["ack_bit"]) for i, r in select(records, "sender", "ack_received")]
    for i, t, bit in _unmatched([(r.time, r.payload["bit"]) for _, r in received], acks):
        yield Finding(i, f"ack_received bit={bit} at {t} has no earlier receiver emission", ("receiver",))


def channel_latency(records, cfg):
    """Passed packets reach the far end exactly channel_delay later."""
    cd, horizon = float(cfg.channel_delay), float(cfg.simulate_time)
    # backward: one ack_received per passed ACK, at g + cd
    expected = sorted(r.time + cd for _, r in _passes(records, "backward") if r.time + cd <= horizon)
    acks = select(records, "sender", "ack_received")
    got = sorted(r.time for _, r in acks)
    for n, (i, r) in enumerate(sorted(acks, key=lambda p: p[1].time)):
        if n >= len(expected) or not close(expected[n], r.time):
            yield Finding(i, f"ack_received at {r.time} does not follow a backward pass by {cd}")
            break
    else:
        if len(got) < len(expected):
            t = expected[len(got)]
            idx = next(i for i, r in _passes(records, "backward") if close(r.time + cd, t))
            yield Finding(idx, f"ACK passed at {t - cd} never reached the sender at {t}", ("sender",))
    # forward: receiver starts at g + cd or right after finishing a buffered packet
    starts = select(records, "receiver", "delay_start")
    deliveries = [(i, r.time + cd) for i, r in _passes(records, "forward")]
    triggers = sorted([d for _, d in deliveries] + [r.time for _, r in select(records, "receiver", "packet_received")])
    for i, r in starts:
        if not _has_near(triggers, r.time):
            yield Finding(i, f"receiver started processing at {r.time} without a delivery")
    busy = sorted((r.time, r.time + float(r.payload["duration"])) for _, r in starts)
    begins = [b for b, _ in busy]
    for i, d in deliveries:
        if d > horizon:
            continue
        k = bisect_right(begins, d) - 1
        inside = k >= 0 and (d <= busy[k][1] or close(d, busy[k][1]))
        if not inside and not _has_near(begins, d):
            yield Finding(i, f"forward packet due at {d} was never seen by the receiver", ("receiver",))


def _has_near(sorted_times, t):
    k = bisect_left(sorted_times, t)
    return any(0 <= j < len(sorted_times) and close(sorted_times[j], t) for j in (k - 1, k))


def fate_on_arrival(records, cfg):
    """Fate is decided when a packet enters a subnet, at the sending instant."""
    gets = Counter((r.time, r.payload["channel"]) for _, r in select(records, "subnet", "packet_get"))
    sends = Counter(r.time for _, r in select(records, "sender", "packet_sent"))
    acks = Counter(r.time for _, r in select(records, "receiver", "packet_received"))
    for i, r in select(records, "sender", "packet_sent"):
        if gets[(r.time, "forward")] != sends[r.time]:
            yield Finding(i, f"packet_sent at {r.time} without matching forward packet_get", ("subnet",))
    for i, r in select(records, "receiver", "packet_received"):
        if gets[(r.time, "backward")] != acks[r.time]:
            yield Finding(i, f"ACK sent at {r.time} without matching backward packet_get", ("subnet",))
    for i, r in select(records, "subnet", "packet_get"):
        source = sends if r.payload["channel"] == "forward" else acks
        if gets[(r.time, r.payload["channel"])] != source[r.time]:
            yield Finding(i, f"packet_get at {r.time} has no packet entering the {r.payload['channel']} channel")


def noise_orbit(records, cfg):
    """Per channel, noise values follow the LCG orbit from the seed."""
    state = {"forward": cfg.seed, "backward": cfg.seed}
    for i, r in select(records, "subnet", "packet_get"):
        ch = r.payload["channel"]
        x, fate = lcg_step(state[ch])
        state[ch] = x
        if r.payload["noise_value"] != x or r.payload["behavior"] != fate:
            yield Finding(i, f"{ch} noise {r.payload['noise_value']}/{r.payload['behavior']}, expected {x}/{fate}")
            return


def stop_and_wait(records, cfg):
    """A new packet is sent only after the current one was validly acknowledged."""
    current = None
    acked = False
    for i, r in _sender(records):
        if r.event == "packet_sent":
            seq = r.payload["seq_num"]
            if current is not None and seq != current:
                if not acked:
                    yield Finding(i, f"packet {seq} sent before packet {current} was acknowledged")
                    return
            if seq != current:
                acked = False
            current = seq
        elif r.event == "ack_received" and r.payload["is_valid"] and current is not None:
            acked = True


def alternating_bit(records, cfg):
    """Fresh packets go out as (1,0), (2,1), (3,0), ...; retries repeat the last one."""
    expect_seq = 1
    last = None
    for i, r in select(records, "sender", "packet_sent"):
        seq, bit = r.payload["seq_num"], r.payload["bit"]
        if last is not None and (seq, bit) == last:
            continue
        if (seq, bit) != (expect_seq, (expect_seq - 1) % 2):
            yield Finding(i, f"packet ({seq},{bit}) breaks the sequence; expected ({expect_seq},{(expect_seq - 1) % 2})")
            return
        last = (seq, bit)
        expect_seq += 1


# ------------------------------------------------------------- component rules

def sender_start(records, cfg):
    """With packets to send, the sender begins preparing at t=0."""
    if cfg.total_packets <= 0:
        return
    first = next(iter(_sender(records)), None)
    if first is None:
        yield Finding(None, "no sender events although total_packets > 0", ("sender",))
    elif first[1].event != "delay_start" or first[1].time != 0.0:
        yield Finding(first[0], "sender does not start with a preparation at t=0")


def preparation_delay(records, cfg):
    sd, horizon = float(cfg.sender_delay), float(cfg.simulate_time)
    pending = None
    for i, r in _sender(records):
        if r.event == "delay_start":
            if not close(float(r.payload["duration"]), sd):
                yield Finding(i, f"preparation duration {r.payload['duration']} != {sd}")
            pending = (i, r.time)
        elif r.event == "packet_sent":
            if pending is None or not close(pending[1] + sd, r.time):
                yield Finding(i, f"packet_sent at {r.time} is not {sd} after a preparation start")
            pending = None
        elif r.event == "ack_received" and r.payload["is_valid"] and pending is not None and pending[1] <= r.time:
            pending = None  # retransmission cancelled by a late valid ACK
    if pending is not None and pending[1] + sd <= horizon:
        yield Finding(pending[0], f"preparation started at {pending[1]} never completed")


def processing_delay(records, cfg):
    rd, horizon = float(cfg.receiver_delay), float(cfg.simulate_time)
    pending = None
    for i, r in select(records, entity="receiver"):
        if r.event == "delay_start":
            if not close(float(r.payload["duration"]), rd):
                yield Finding(i, f"processing duration {r.payload['duration']} != {rd}")
            if pending is not None:
                yield Finding(i, "processing started while another packet was in progress")
            pending = (i, r.time)
        elif r.event == "packet_received":
            if pending is None or not close(pending[1] + rd, r.time):
                yield Finding(i, f"packet_received at {r.time} is not {rd} after a processing start")
            pending = None
    if pending is not None and pending[1] + rd <= horizon:
        yield Finding(pending[0], f"processing started at {pending[1]} never completed")


def timeout_retransmission(records, cfg):
    """Without a valid ACK, the sender restarts preparation exactly `timeout` after sending."""
    to, horizon = float(cfg.timeout), float(cfg.simulate_time)
    last_sent = None
    acked_since = False
    after_valid_ack = False
    for i, r in _sender(records):
        if r.event == "packet_sent":
            last_sent, acked_since, after_valid_ack = (i, r.time), False, False
        elif r.event == "ack_received":
            if r.payload["is_valid"]:
                if last_sent is not None and r.time < last_sent[1] + to and not close(r.time, last_sent[1] + to):
                    acked_since = True
                after_valid_ack = True
        elif r.event == "delay_start":
            if last_sent is None or after_valid_ack:
                after_valid_ack = False
                last_sent = None
                continue
            if acked_since or not close(r.time, last_sent[1] + to):
                yield Finding(i, f"retransmission prepared at {r.time}, expected {last_sent[1] + to}")
                return
            last_sent = None
    if last_sent is not None and not acked_since and last_sent[1] + to <= horizon and not after_valid_ack:
        yield Finding(last_sent[0], f"timer started at {last_sent[1]} expired without retransmission")


def retry_flag(records, cfg):
    prev = None
    for i, r in select(records, "sender", "packet_sent"):
        seq = r.payload["seq_num"]
        if r.payload["is_retry"] != (seq == prev):
            yield Finding(i, f"is_retry={r.payload['is_retry']} but previous packet was {prev}")
        prev = seq


def ack_validation(records, cfg):
    """is_valid holds exactly for an ACK carrying the bit of the packet in progress."""
    bit, done, accepted = 0, cfg.total_packets <= 0, 0
    for i, r in _sender(records):
        if r.event == "packet_sent":
            bit = r.payload["bit"]
        elif r.event == "ack_received":
            expected = not done and r.payload["ack_bit"] == bit
            if r.payload["is_valid"] != expected:
                yield Finding(i, f"ack_bit={r.payload['ack_bit']} marked is_valid={r.payload['is_valid']}")
                return
            if expected:
                accepted += 1
                bit ^= 1
                done = accepted >= cfg.total_packets


def packet_limit(records, cfg):
    for i, r in select(records, "sender", "packet_sent"):
        if r.payload["seq_num"] > cfg.total_packets:
            yield Finding(i, f"seq_num {r.payload['seq_num']} exceeds total_packets {cfg.total_packets}")
            return


def rules() -> tuple[list[Rule], list[Rule]]:
    comp = [
        Rule("abp.sender_start", COMPONENT, "sender starts preparing at t=0 when it has packets", sender_start),
        Rule("abp.preparation_delay", COMPONENT, "preparation lasts sender_delay", preparation_delay),
        Rule("abp.processing_delay", COMPONENT, "processing lasts receiver_delay, one packet at a time", processing_delay),
        Rule("abp.timeout_retransmission", COMPONENT, "retransmission starts timeout after an unacknowledged send",
             timeout_retransmission),
        Rule("abp.retry_flag", COMPONENT, "is_retry marks repeated sequence numbers", retry_flag),
        Rule("abp.ack_validation", COMPONENT, "ACK validity follows the current bit", ack_validation),
        Rule("abp.packet_limit", COMPONENT, "never more than total_packets distinct packets", packet_limit),
    ]
    sys_ = [
        Rule("abp.cause_before_effect", SYSTEM, "receptions and ACKs have earlier causes", cause_before_effect),
        Rule("abp.channel_latency", SYSTEM, "passed packets arrive exactly channel_delay later", channel_latency),
        Rule("abp.fate_on_arrival", SYSTEM, "subnet fate is decided at the send instant", fate_on_arrival),
        Rule("abp.noise_orbit", SYSTEM, "noise values follow the LCG orbit per channel", noise_orbit),
        Rule("abp.stop_and_wait", SYSTEM, "no new packet before a valid ACK", stop_and_wait),
        Rule("abp.alternating_bit", SYSTEM, "sequence numbers and bits alternate from (1,0)", alternating_bit),
        horizon_rule("abp.horizon", lambda cfg: float(cfg.simulate_time)),
        monotonic_rule("abp.monotonic_time"),
        catalog_rule("abp.event_catalog", CATALOG),
    ]
    return comp, sys_
