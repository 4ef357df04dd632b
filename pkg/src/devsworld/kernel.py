"""Parallel DEVS kernel: atomic/coupled models and a root coordinator.

Models never track simulated time themselves.  The coordinator keeps, for
every atomic, the time of its last transition and of its next scheduled
internal event, and hands the elapsed time to ``delta_ext``.

Within one instant the coordinator

1. collects ``output()`` from every imminent atomic,
2. routes the bags through EIC/IC/EOC couplings (hierarchies are resolved
   transitively),
3. applies ``delta_con`` / ``delta_int`` / ``delta_ext``.

Atomics are visited in lexicographic order of their full path, which fixes
both the bag delivery order and the order of same-instant transitions.
"""
from __future__ import annotations

import math
from collections import defaultdict
from typing import Any, Callable, Iterable, Sequence

PASSIVE = math.inf
MAX_ROUNDS_PER_INSTANT = 1000


class DevsError(Exception):
    pass


class InvalidScheduleError(DevsError):
    pass


class CouplingError(DevsError):
    pass


class MissingPortError(CouplingError):
    pass


class LivelockError(DevsError):
    def __init__(self, time: float, paths: Sequence[str]):
        self.time = time
        self.paths = list(paths)
        super().__init__(
            f"zero-delay cycle at t={time!r} exceeded {MAX_ROUNDS_PER_INSTANT} "
            f"rounds; components: {', '.join(self.paths)}"
        )


class InputOrderError(DevsError):
    pass


class OutputPurityError(DevsError):
    pass


def _check_identifier(name: str, what: str) -> None:
    if not isinstance(name, str) or not name.isidentifier():
        raise ValueError(f"{what} {name!r} is not a valid identifier")


class Port:
    __slots__ = ("name", "direction", "owner")

    def __init__(self, name: str, direction: str, owner: "Model"):
        if direction not in ("input", "output"):
            raise ValueError(f"bad port direction {direction!r}")
        _check_identifier(name, "port name")
        self.name = name
        self.direction = direction
        self.owner = owner

    @property
    def path(self) -> str:
        return f"{self.owner.path}.{self.name}"

    def __repr__(self) -> str:
        return f"Port({self.path}, {self.direction})"


class Model:
    def __init__(self, name: str):
        _check_identifier(name, "model name")
        self.name = name
        self.parent: Coupled | None = None
        self.in_ports: dict[str, Port] = {}
        self.out_ports: dict[str, Port] = {}

    @property
    def path(self) -> str:
        if self.parent is None:
            return self.name
        return f"{self.parent.path}.{self.name}"

    @property
    def order_key(self) -> str:
        return getattr(self, "_order_key", None) or self.path

    def add_in_port(self, name: str) -> Port:
        if name in self.in_ports:
            raise ValueError(f"duplicate input port {name!r} on {self.path}")
        port = Port(name, "input", self)
        self.in_ports[name] = port
        return port

    def add_out_port(self, name: str) -> Port:
        if name in self.out_ports:
            raise ValueError(f"duplicate output port {name!r} on {self.path}")
        port = Port(name, "output", self)
        self.out_ports[name] = port
        return port


class Atomic(Model):
    """Leaf model.

    Subclasses override the hooks below.  ``output`` returns a mapping of
    output-port name to a list of values (the bag) and must not mutate state.
    Inputs arrive in the same shape: ``{port_name: [values...]}``.

    ``emit`` writes a trace record stamped with the current simulated time;
    the coordinator injects the sink.
    """

    entity: str | None = None

    def __init__(self, name: str):
        super().__init__(name)
        self.phase = "passive"
        self.sigma = PASSIVE
        self.now = 0.0
        self._next_abs: float | None = None
        self._keep: bool = False
        self._fresh: bool = True
        self._sink: Callable[[float, str, str, dict], None] | None = None

    # scheduling helpers
    def hold_in(self, phase: str, sigma: float) -> None:
        sigma = float(sigma)
        if math.isnan(sigma) or sigma < 0:
            raise InvalidScheduleError(f"{self.path}: sigma must be >= 0 or PASSIVE, got {sigma!r}")
        self.phase = phase
        self.sigma = sigma
        self._next_abs = None
        self._keep = False
        self._fresh = False

    def passivate(self, phase: str = "passive") -> None:
        self.hold_in(phase, PASSIVE)

    def hold_until(self, phase: str, time: float) -> None:
        """Schedule the next internal event at an absolute time (exact)."""
        time = float(time)
        if math.isnan(time) or time < self.now:
            raise InvalidScheduleError(f"{self.path}: cannot schedule at {time!r} before now={self.now!r}")
        self.phase = phase
        self.sigma = time - self.now
        self._next_abs = time
        self._keep = False
        self._fresh = False

    def resume(self) -> None:
        """Keep the pending internal event exactly where it was (for delta_ext).

        No effect if the model already rescheduled during this transition.
        """
        if self._fresh:
            self._keep = True

    def emit(self, event: str, payload: dict, entity: str | None = None) -> None:
        if self._sink is not None:
            self._sink(self.now, entity or self.entity or self.name, event, payload)

    # behaviour hooks
    def initialize(self) -> None:
        pass

    def delta_int(self) -> None:
        self.passivate(self.phase)

    def delta_ext(self, elapsed: float, inputs: dict[str, list]) -> None:
        self.resume()

    def delta_con(self, inputs: dict[str, list]) -> None:
        self.delta_int()
        self.delta_ext(0.0, inputs)

    def output(self) -> dict[str, list]:
        return {}

    def time_advance(self) -> float:
        return self.sigma

    def exit(self) -> None:
        pass


class Coupled(Model):
    def __init__(self, name: str):
        super().__init__(name)
        self.components: dict[str, Model] = {}
        self.eic: list[tuple[Port, Port]] = []
        self.ic: list[tuple[Port, Port]] = []
        self.eoc: list[tuple[Port, Port]] = []

    def add_component(self, child: Model) -> Model:
        if child.name in self.components:
            raise ValueError(f"duplicate component {child.name!r} in {self.path}")
        if child.parent is not None:
            raise ValueError(f"{child.name!r} already belongs to {child.parent.path}")
        child.parent = self
        self.components[child.name] = child
        return child

    def _resolve(self, ref: Port | str, role: str) -> Port:
        if isinstance(ref, Port):
            owner = ref.owner
            if owner is not self and self.components.get(owner.name) is not owner:
                raise MissingPortError(f"{ref.path} is outside the scope of {self.path}")
            ports = owner.in_ports if ref.direction == "input" else owner.out_ports
            if ports.get(ref.name) is not ref:
                raise MissingPortError(f"{ref.path} is not registered on its owner")
            return ref
        if "." in ref:
            comp_name, port_name = ref.split(".", 1)
            owner = self if comp_name == "self" else self.components.get(comp_name)
            if owner is None:
                raise MissingPortError(f"no component {comp_name!r} in {self.path}")
        else:
            owner, port_name = self, ref
        # sources read from own inputs or child outputs; sinks the reverse
        prefer_input = (owner is self) == (role == "src")
        first, second = (owner.in_ports, owner.out_ports) if prefer_input else (owner.out_ports, owner.in_ports)
        port = first.get(port_name) or second.get(port_name)
        if port is None:
            raise MissingPortError(f"no port {port_name!r} on {owner.path}")
        return port

    def add_coupling(self, src: Port | str, dst: Port | str) -> str:
        """Register a coupling and return its class: "EIC", "IC" or "EOC".

        String references are ``"child.port"`` or a bare ``"port"`` for this
        model's own ports.
        """
        s, d = self._resolve(src, "src"), self._resolve(dst, "dst")
        s_self, d_self = s.owner is self, d.owner is self
        if s_self and s.direction == "input" and not d_self and d.direction == "input":
            self.eic.append((s, d))
            return "EIC"
        if not s_self and s.direction == "output" and not d_self and d.direction == "input":
            self.ic.append((s, d))
            return "IC"
        if not s_self and s.direction == "output" and d_self and d.direction == "output":
            self.eoc.append((s, d))
            return "EOC"
        raise CouplingError(f"illegal coupling {s.path} ({s.direction}) -> {d.path} ({d.direction})")

    def atomics(self) -> list[Atomic]:
        out: list[Atomic] = []
        for child in self.components.values():
            if isinstance(child, Coupled):
                out.extend(child.atomics())
            else:
                out.append(child)
        return out


def _destinations(port: Port) -> list[Port]:
    """Atomic input ports (and root output ports) reached from ``port``."""
    found: list[Port] = []
    stack = [port]
    while stack:
        p = stack.pop()
        owner = p.owner
        if p.direction == "output":
            parent = owner.parent
            if parent is None:
                found.append(p)
                continue
            nxt = [d for s, d in parent.ic if s is p] + [d for s, d in parent.eoc if s is p]
        else:
            if isinstance(owner, Atomic):
                found.append(p)
                continue
            nxt = [d for s, d in owner.eic if s is p]
        stack.extend(reversed(nxt))
    return found


class Coordinator:
    """Root coordinator for a model hierarchy.

    ``sink(time, entity, event, payload)`` receives every record emitted by
    the atomics.  ``on_output(time, port_name, values)`` receives bags that
    leave the root through its output ports.  With ``debug=True`` every
    output function is called twice and the two bags compared.
    """

    def __init__(self, root: Model, sink=None, on_output=None, debug: bool = False):
        self.root = root
        self.sink = sink
        self.on_output = on_output
        self.debug = debug
        if isinstance(root, Atomic):
            self._atomics = [root]
        else:
            self._atomics = sorted(root.atomics(), key=lambda m: m.order_key)
        self._order = {m: i for i, m in enumerate(self._atomics)}
        self._routes: dict[Port, list[Port]] = {}
        self.t_last: dict[Atomic, float] = {}
        self.t_next: dict[Atomic, float] = {}
        self.time = 0.0
        self._rounds = 0
        self._initialized = False

    def _route(self, port: Port) -> list[Port]:
        dests = self._routes.get(port)
        if dests is None:
            dests = _destinations(port)
            self._routes[port] = dests
        return dests

    def _schedule(self, m: Atomic, t: float) -> None:
        if m._keep:
            m._keep = False
            nxt = self.t_next.get(m, PASSIVE)
            m.sigma = nxt - t
        elif m._next_abs is not None:
            nxt = m._next_abs
            m._next_abs = None
        else:
            ta = m.time_advance()
            if ta is None or math.isnan(ta) or ta < 0:
                raise InvalidScheduleError(f"{m.path}: time advance {ta!r} is invalid")
            nxt = t + ta
        self.t_last[m] = t
        self.t_next[m] = nxt

    def initialize(self, t0: float = 0.0) -> None:
        self.time = float(t0)
        for m in self._atomics:
            m.now = self.time
            m._sink = self.sink
            m._fresh = True
            m.initialize()
            self._schedule(m, self.time)
        self._initialized = True

    @property
    def next_time(self) -> float:
        if not self.t_next:
            return PASSIVE
        return min(self.t_next.values())

    def step(self, exogenous: dict[str, list] | None = None, at: float | None = None):
        """Execute one instant; returns ``(time, emitted)``.

        ``emitted`` lists ``(source_port_path, values)`` for every output bag
        produced in the instant.  When ``exogenous`` bags (keyed by root input
        port name) are given, the instant is ``at`` (default: ``next_time``).
        """
        if not self._initialized:
            self.initialize()
        t = self.next_time if at is None else float(at)
        if exogenous and at is None:
            raise ValueError("exogenous input needs an explicit time")
        if t < self.time:
            raise InputOrderError(f"time {t!r} is before current time {self.time!r}")
        if at is not None and t > self.next_time:
            raise InputOrderError(f"time {t!r} skips an internal event at {self.next_time!r}")
        if t == math.inf:
            return t, []
        if t == self.time:
            self._rounds += 1
        else:
            self._rounds = 1
        self.time = t

        imminent = [m for m in self._atomics if self.t_next[m] == t]
        inbox: dict[Atomic, dict[str, list]] = defaultdict(lambda: defaultdict(list))
        emitted: list[tuple[str, list]] = []

        if exogenous:
            for port_name, values in exogenous.items():
                port = self.root.in_ports.get(port_name)
                if port is None:
                    raise MissingPortError(f"root has no input port {port_name!r}")
                self._deliver(port, list(values), inbox, t)

        for m in imminent:
            m.now = t
            bags = m.output() or {}
            if self.debug:
                again = m.output() or {}
                if again != bags:
                    raise OutputPurityError(f"{m.path}: output() is not idempotent")
            for port_name, values in bags.items():
                if not values:
                    continue
                port = m.out_ports.get(port_name)
                if port is None:
                    raise MissingPortError(f"{m.path} has no output port {port_name!r}")
                emitted.append((port.path, list(values)))
                self._deliver(port, list(values), inbox, t)

        if self._rounds > MAX_ROUNDS_PER_INSTANT:
            involved = sorted({m.path for m in imminent} | {m.path for m in inbox})
            raise LivelockError(t, involved)

        imminent_set = set(imminent)
        active = sorted(imminent_set | set(inbox), key=self._order.__getitem__)
        for m in active:
            m.now = t
            m._fresh = True
            if m in inbox:
                bags = {k: list(v) for k, v in inbox[m].items()}
                if m in imminent_set:
                    m.delta_con(bags)
                else:
                    m.delta_ext(t - self.t_last[m], bags)
            else:
                m.delta_int()
            self._schedule(m, t)
        return t, emitted

    def _deliver(self, port: Port, values: list, inbox, t: float) -> None:
        for dest in self._route(port):
            if dest.direction == "output":
                if self.on_output is not None:
                    self.on_output(t, dest.name, list(values))
            else:
                inbox[dest.owner][dest.name].extend(values)

    def run_until(self, t_end: float, exogenous: Iterable[tuple[float, str, Any]] = ()) -> None:
        """Advance until the next event lies beyond ``t_end``, then run finalizers.

        ``exogenous`` is a time-sorted sequence of ``(time, root_port, value)``.
        Events scheduled after ``t_end`` are ignored.
        """
        t_end = float(t_end)
        if not math.isfinite(t_end):
            raise ValueError("t_end must be finite")
        events = list(exogenous)
        for a, b in zip(events, events[1:]):
            if b[0] < a[0]:
                raise InputOrderError(f"exogenous schedule not sorted: {b[0]!r} after {a[0]!r}")
        if not self._initialized:
            self.initialize()
        i = 0
        while True:
            t_int = self.next_time
            t_ext = events[i][0] if i < len(events) else PASSIVE
            t = min(t_int, t_ext)
            if t > t_end:
                break
            if t_ext == t:
                bags: dict[str, list] = defaultdict(list)
                while i < len(events) and events[i][0] == t:
                    bags[events[i][1]].append(events[i][2])
                    i += 1
                self.step(bags, at=t)
            else:
                self.step()
        self.finalize(t_end)

    def finalize(self, t: float | None = None) -> None:
        """Run every atomic's ``exit`` hook once, stamped at ``t`` (default: now)."""
        t = self.time if t is None else t
        for m in self._atomics:
            m.now = t
            m.exit()


def flatten(root: Coupled) -> Coupled:
    """Rebuild ``root`` as a single-level coupled model with the same atomics.

    The atomics are detached from their original parents, so ``root`` must
    not be simulated afterwards.
    """
    flat = Coupled(root.name)
    for name in root.in_ports:
        flat.add_in_port(name)
    for name in root.out_ports:
        flat.add_out_port(name)
    atomics = root.atomics()
    routes_out = {p: _destinations(p) for m in atomics for p in m.out_ports.values()}
    routes_in = {p: _destinations(p) for p in root.in_ports.values()}
    used: set[str] = set()
    for m in atomics:
        new_name = m.path.replace(".", "__")
        if new_name in used:
            raise ValueError(f"flattened name clash: {new_name}")
        used.add(new_name)
        m._order_key = m.path
        m.parent = None
        m.name = new_name
        flat.add_component(m)
    for src, dests in routes_in.items():
        for d in dests:
            if d.direction == "input":
                flat.add_coupling(flat.in_ports[src.name], d)
    for src, dests in routes_out.items():
        for d in dests:
            if d.direction == "output":
                flat.add_coupling(src, flat.out_ports[d.name])
            else:
                flat.add_coupling(src, d)
    return flat
