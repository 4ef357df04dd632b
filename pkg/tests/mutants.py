"""One targeted trace corruption per built-in rule.

Each mutant takes a valid reference trace and its config and returns a
trace that the paired rule must reject.
"""
from dataclasses import replace

from devsworld.trace import TraceRecord


def _find(records, entity=None, event=None, where=lambda r: True, nth=0):
    hits = [i for i, r in enumerate(records)
            if (entity is None or r.entity == entity) and (event is None or r.event == event) and where(r)]
    return hits[nth]


def _patch(records, i, **payload):
    out = list(records)
    out[i] = replace(out[i], payload={**out[i].payload, **payload})
    return out


def _retime(records, i, t):
    out = list(records)
    out[i] = replace(out[i], time=t)
    return out


def _drop(records, i):
    return records[:i] + records[i + 1:]


def past_horizon(records, horizon):
    return list(records) + [replace(records[-1], time=horizon + 1.0)]


def backwards_time(records):
    last = records[-1]
    return list(records) + [replace(records[0], time=0.0)] if last.time > 0 else records


def unknown_payload_key(records):
    return _patch(records, 0, bogus=1)


def _generic(prefix, horizon_of):
    return {
        f"{prefix}.horizon": lambda rs, cfg: past_horizon(rs, horizon_of(cfg)),
        f"{prefix}.monotonic_time": lambda rs, cfg: backwards_time(rs),
        f"{prefix}.event_catalog": lambda rs, cfg: unknown_payload_key(rs),
    }


# ---------------------------------------------------------------- abp

def _abp_retry_prep(rs):
    """Index of the delay_start that prepares the first retransmission."""
    retry = _find(rs, "sender", "packet_sent", lambda r: r.payload["is_retry"])
    return max(i for i in range(retry) if rs[i].entity == "sender" and rs[i].event == "delay_start")


ABP = {
    "abp.sender_start": lambda rs, cfg: _drop(rs, 0),
    "abp.preparation_delay": lambda rs, cfg: _patch(rs, _find(rs, "sender", "delay_start"), duration=cfg.sender_delay - 1),
    "abp.processing_delay": lambda rs, cfg: _patch(rs, _find(rs, "receiver", "delay_start"),
                                                   duration=cfg.receiver_delay + 1),
    "abp.timeout_retransmission": lambda rs, cfg: _retime(rs, _abp_retry_prep(rs), rs[_abp_retry_prep(rs)].time + 1),
    "abp.retry_flag": lambda rs, cfg: _patch(rs, _find(rs, "sender", "packet_sent", lambda r: r.payload["is_retry"]),
                                             is_retry=False),
    "abp.ack_validation": lambda rs, cfg: _patch(rs, _find(rs, "sender", "ack_received"), is_valid=False),
    "abp.packet_limit": lambda rs, cfg: _patch(rs, _find(rs, "sender", "packet_sent", nth=-1),
                                               seq_num=cfg.total_packets + 1),
    "abp.cause_before_effect": lambda rs, cfg: _patch(rs, _find(rs, "receiver", "packet_received"), seq_num=999),
    "abp.channel_latency": lambda rs, cfg: _retime(rs, _find(rs, "sender", "ack_received"),
                                                   rs[_find(rs, "sender", "ack_received")].time - 0.5),
    "abp.fate_on_arrival": lambda rs, cfg: _retime(rs, _find(rs, "subnet", "packet_get"),
                                                   rs[_find(rs, "subnet", "packet_get")].time + 0.5),
    "abp.noise_orbit": lambda rs, cfg: _patch(rs, _find(rs, "subnet", "packet_get"),
                                              noise_value=rs[_find(rs, "subnet", "packet_get")].payload["noise_value"] + 1),
    "abp.stop_and_wait": lambda rs, cfg: _drop(rs, _find(rs, "sender", "ack_received", lambda r: r.payload["is_valid"])),
    "abp.alternating_bit": lambda rs, cfg: _patch(rs, _find(rs, "sender", "packet_sent", lambda r: r.payload["seq_num"] == 2),
                                                  bit=0),
    **_generic("abp", lambda cfg: cfg.simulate_time),
}


# ---------------------------------------------------------------- seird

def _move(rs, i, src, dst, amount):
    p = rs[i].payload
    return _patch(rs, i, **{src: p[src] - amount, dst: p[dst] + amount})


SEIRD = {
    "seird.initial_state": lambda rs, cfg: _move(rs, 0, "S", "E", 1.0),
    "seird.euler_update": lambda rs, cfg: _move(rs, 3, "S", "E", 1.0),
    "seird.non_negative": lambda rs, cfg: _move(rs, 2, "S", "E", rs[2].payload["S"] + 1.0),
    "seird.conservation": lambda rs, cfg: _patch(rs, len(rs) - 1, D=rs[-1].payload["D"] + 1.0),
    "seird.step_cadence": lambda rs, cfg: _drop(rs, len(rs) - 1),
    **_generic("seird", lambda cfg: cfg.n_steps * cfg.dt),
}


# ---------------------------------------------------------------- barbershop

def _rename_event(rs, i, event):
    out = list(rs)
    out[i] = replace(out[i], event=event)
    return out


def _swap_customers(rs, entity, event):
    a, b = _find(rs, entity, event, nth=0), _find(rs, entity, event, nth=1)
    ca, cb = rs[a].payload["customer"], rs[b].payload["customer"]
    return _patch(_patch(rs, a, customer=cb), b, customer=ca)


def _shorter_cut(rs):
    end = _find(rs, "cutting", "service_end")
    return _retime(rs, end, rs[end].time - 0.5)


BARBERSHOP = {
    "barbershop.service_times": lambda rs, cfg: _shorter_cut(rs),
    "barbershop.queue_accounting": lambda rs, cfg: _patch(rs, _find(rs, "reception", "admitted"), queue_length=5),
    "barbershop.rejection_only_when_full": lambda rs, cfg: _rename_event(rs, _find(rs, "reception", "admitted"), "rejected"),
    "barbershop.capacity": lambda rs, cfg: _patch(rs, _find(rs, "reception", "admitted"), queue_length=9),
    "barbershop.arrival_accounting": lambda rs, cfg: _drop(rs, _find(rs, "reception", "shop_close")),
    "barbershop.fifo": lambda rs, cfg: _swap_customers(rs, "cutting", "service_start"),
    "barbershop.handshake": lambda rs, cfg: _drop(rs, _find(rs, "inspection", "handshake")),
    **_generic("barbershop", lambda cfg: cfg.horizon),
}


# ---------------------------------------------------------------- iobs

def _without(rs, entity, event):
    return [r for r in rs if not (r.entity == entity and r.event == event)]


def _reenter(rs):
    i = _find(rs, "pv", "stage_enter")
    out = list(rs)
    out[i] = replace(out[i], entity="bpm")
    return out


IOBS = {
    "iobs.request_intake": lambda rs, cfg: _patch(rs, _find(rs, "aam", "stage_enter"), request_id=77777),
    "iobs.stage_latency": lambda rs, cfg: _retime(rs, _find(rs, "anv", "stage_enter"),
                                                  rs[_find(rs, "anv", "stage_enter")].time + 1),
    "iobs.drop_legality": lambda rs, cfg: list(rs) + [rs[_find(rs, "anv", "dropped")]],
    "iobs.balance_updates": lambda rs, cfg: _patch(rs, _find(rs, "tpm", "balance_update"),
                                                   balance=rs[_find(rs, "tpm", "balance_update")].payload["balance"] - 1),
    "iobs.pipeline_order": lambda rs, cfg: _reenter(rs),
    "iobs.anv_binomial": lambda rs, cfg: _without(rs, "anv", "dropped"),
    "iobs.pv_binomial": lambda rs, cfg: _without(rs, "pv", "dropped"),
    **_generic("iobs", lambda cfg: cfg.horizon),
}

MUTANTS = {"abp": ABP, "seird": SEIRD, "barbershop": BARBERSHOP, "iobs": IOBS}


def make_record(time, entity, event, **payload):
    return TraceRecord(float(time), entity, event, payload)
