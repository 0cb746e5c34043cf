"""Pattern vocabulary: containers, iterators, algorithms, physical targets.

Holds the capability tables, the system-description parser and the
validator.  Everything here is an immutable value; validation never raises,
it returns a list of :class:`Violation`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

CONTAINER_KINDS = ("stack", "queue", "read_buffer", "write_buffer", "vector", "assoc_array")
ITERATOR_KINDS = ("forward", "backward", "bidirectional", "random")
ACCESS_KINDS = ("read", "write", "read_write")
ITERATOR_OPS = ("inc", "dec", "read", "write", "index")
TARGET_KINDS = ("fifo_core", "lifo_core", "sram", "line_buffer3")
ALGORITHM_KINDS = ("copy", "blur3x3")

MAX_WIDTH = 64


class SpecError(ValueError):
    """Raised when a system description cannot be parsed."""


@dataclass(frozen=True)
class Capability:
    random_input: bool
    random_output: bool
    sequential_input: frozenset
    sequential_output: frozenset


def _cap(ri, ro, si, so):
    return Capability(ri, ro, frozenset(si), frozenset(so))


# "input" = reading elements out of the container, "output" = writing into it.
CAPABILITY_MATRIX: Mapping[str, Capability] = {
    "stack": _cap(False, False, "F", "B"),
    "queue": _cap(False, False, "F", "F"),
    "read_buffer": _cap(False, False, "F", ""),
    "write_buffer": _cap(False, False, "", "F"),
    "vector": _cap(True, True, "FB", "FB"),
    "assoc_array": _cap(True, True, "", ""),
}

# Iterator kinds each operation applies to.
OP_KINDS: Mapping[str, frozenset] = {
    "inc": frozenset({"forward", "bidirectional", "random"}),
    "dec": frozenset({"backward", "bidirectional", "random"}),
    "read": frozenset(ITERATOR_KINDS),
    "write": frozenset(ITERATOR_KINDS),
    "index": frozenset({"random"}),
}

MAPPING_COMPATIBILITY: Mapping[str, frozenset] = {
    "stack": frozenset({"lifo_core", "sram"}),
    "queue": frozenset({"fifo_core", "sram"}),
    "read_buffer": frozenset({"fifo_core", "sram", "line_buffer3"}),
    "write_buffer": frozenset({"fifo_core", "sram"}),
    "vector": frozenset({"sram"}),
    "assoc_array": frozenset(),
}

# Container kinds served through pop/push only (no random addressing).
STREAM_KINDS = frozenset({"stack", "queue", "read_buffer", "write_buffer"})


@dataclass(frozen=True)
class ElementType:
    width_bits: int

    def __post_init__(self):
        if not isinstance(self.width_bits, int) or self.width_bits < 1:
            raise SpecError(f"element width must be a positive integer, got {self.width_bits!r}")


@dataclass(frozen=True)
class ContainerSpec:
    name: str
    kind: str
    element: ElementType
    capacity: int

    def __post_init__(self):
        if self.kind not in CONTAINER_KINDS:
            raise SpecError(f"container {self.name!r}: unknown kind {self.kind!r}")
        if not isinstance(self.capacity, int) or self.capacity < 1:
            raise SpecError(f"container {self.name!r}: capacity must be >= 1")


@dataclass(frozen=True)
class IteratorSpec:
    name: str
    kind: str
    access: str
    container: str
    used_ops: frozenset

    def __post_init__(self):
        if self.kind not in ITERATOR_KINDS:
            raise SpecError(f"iterator {self.name!r}: unknown kind {self.kind!r}")
        if self.access not in ACCESS_KINDS:
            raise SpecError(f"iterator {self.name!r}: unknown access {self.access!r}")
        object.__setattr__(self, "used_ops", frozenset(self.used_ops))
        unknown = self.used_ops - set(ITERATOR_OPS)
        if unknown:
            raise SpecError(f"iterator {self.name!r}: unknown ops {sorted(unknown)}")

    @property
    def reads(self) -> bool:
        return self.access in ("read", "read_write")

    @property
    def writes(self) -> bool:
        return self.access in ("write", "read_write")

    def ordered_ops(self) -> tuple:
        return tuple(op for op in ITERATOR_OPS if op in self.used_ops)


@dataclass(frozen=True)
class PhysicalTarget:
    name: str
    kind: str
    data_bus_width_bits: int
    addr_width_bits: int = 0
    read_latency_cycles: int = 0
    shared: bool = False

    def __post_init__(self):
        if self.kind not in TARGET_KINDS:
            raise SpecError(f"target {self.name!r}: unknown kind {self.kind!r}")
        if not isinstance(self.data_bus_width_bits, int) or self.data_bus_width_bits < 1:
            raise SpecError(f"target {self.name!r}: data bus width must be >= 1")
        if self.addr_width_bits < 0 or self.read_latency_cycles < 0:
            raise SpecError(f"target {self.name!r}: negative address width or latency")
        if self.kind == "sram" and self.addr_width_bits < 1:
            raise SpecError(f"target {self.name!r}: sram needs addr_width_bits >= 1")
        if self.kind in ("fifo_core", "lifo_core") and self.addr_width_bits != 0:
            raise SpecError(f"target {self.name!r}: {self.kind} has no address bus")


@dataclass(frozen=True)
class AlgorithmBinding:
    name: str
    kind: str
    source_iterator: str
    sink_iterator: str
    image_width: int = 0
    image_height: int = 0

    def __post_init__(self):
        if self.kind not in ALGORITHM_KINDS:
            raise SpecError(f"algorithm {self.name!r}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class SystemSpec:
    containers: tuple
    iterators: tuple
    algorithms: tuple
    targets: tuple
    bindings: Mapping[str, str] = field(hash=False)

    def container(self, name: str) -> ContainerSpec:
        return _by_name(self.containers)[name]

    def iterator(self, name: str) -> IteratorSpec:
        return _by_name(self.iterators)[name]

    def target(self, name: str) -> PhysicalTarget:
        return _by_name(self.targets)[name]

    def target_of(self, container: str) -> PhysicalTarget:
        return self.target(self.bindings[container])

    def iterators_of(self, container: str) -> tuple:
        return tuple(it for it in self.iterators if it.container == container)

    def containers_on(self, target: str) -> tuple:
        return tuple(c for c in self.containers if self.bindings.get(c.name) == target)

    def to_json(self) -> dict:
        """Canonical JSON tree (the inverse of :func:`parse_system_spec`)."""
        return {
            "containers": [
                {"name": c.name, "kind": c.kind, "element": {"width_bits": c.element.width_bits},
                 "capacity": c.capacity}
                for c in self.containers
            ],
            "iterators": [
                {"name": i.name, "kind": i.kind, "access": i.access, "container": i.container,
                 "used_ops": list(i.ordered_ops())}
                for i in self.iterators
            ],
            "algorithms": [
                {"name": a.name, "kind": a.kind, "source_iterator": a.source_iterator,
                 "sink_iterator": a.sink_iterator, "image_width": a.image_width,
                 "image_height": a.image_height}
                for a in self.algorithms
            ],
            "targets": [
                {"name": t.name, "kind": t.kind, "data_bus_width_bits": t.data_bus_width_bits,
                 "addr_width_bits": t.addr_width_bits, "read_latency_cycles": t.read_latency_cycles,
                 "shared": t.shared}
                for t in self.targets
            ],
            "bindings": dict(self.bindings),
        }


def _by_name(items) -> dict:
    return {x.name: x for x in items}


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    entities: tuple

    def __str__(self):
        return f"[{self.code}] {', '.join(self.entities)}: {self.message}"


@dataclass(frozen=True)
class MappingPlan:
    container: str
    target: str
    beats_per_element: int
    needs_arbitration_port: bool
    address_units: str
    # Filled in by elaboration: word offset inside a shared sram, and the
    # frame geometry a line buffer needs.
    base_address: int = 0
    line_length: int = 0
    line_count: int = 0


# ---------------------------------------------------------------- parsing

def _require(tree: Mapping, key: str, where: str, kind=None):
    if key not in tree:
        raise SpecError(f"{where}: missing field {key!r}")
    value = tree[key]
    if kind is not None and not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise SpecError(f"{where}: field {key!r} has wrong type {type(value).__name__}")
    return value


def _unique(names, what):
    seen = set()
    for n in names:
        if n in seen:
            raise SpecError(f"duplicate {what} name {n!r}")
        seen.add(n)


def parse_system_spec(document: str | bytes | Mapping[str, Any]) -> SystemSpec:
    """Parse a JSON system description into a :class:`SystemSpec`.

    ``document`` is JSON text or an already-decoded tree.  Cross references
    are resolved here; a dangling one raises :class:`SpecError` naming it.
    """
    if isinstance(document, (str, bytes)):
        try:
            tree = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SpecError(f"syntax error at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    else:
        tree = document
    if not isinstance(tree, dict):
        raise SpecError("top level must be an object")

    try:
        containers = tuple(
            ContainerSpec(
                name=_require(c, "name", "container", str),
                kind=_require(c, "kind", f"container {c.get('name')!r}", str),
                element=ElementType(_require(_require(c, "element", f"container {c.get('name')!r}", dict),
                                             "width_bits", f"container {c.get('name')!r} element", int)),
                capacity=_require(c, "capacity", f"container {c.get('name')!r}", int),
            )
            for c in _require(tree, "containers", "system", list)
        )
        iterators = tuple(
            IteratorSpec(
                name=_require(i, "name", "iterator", str),
                kind=_require(i, "kind", f"iterator {i.get('name')!r}", str),
                access=_require(i, "access", f"iterator {i.get('name')!r}", str),
                container=_require(i, "container", f"iterator {i.get('name')!r}", str),
                used_ops=frozenset(_require(i, "used_ops", f"iterator {i.get('name')!r}", list)),
            )
            for i in tree.get("iterators", [])
        )
        algorithms = tuple(
            AlgorithmBinding(
                name=_require(a, "name", "algorithm", str),
                kind=_require(a, "kind", f"algorithm {a.get('name')!r}", str),
                source_iterator=_require(a, "source_iterator", f"algorithm {a.get('name')!r}", str),
                sink_iterator=_require(a, "sink_iterator", f"algorithm {a.get('name')!r}", str),
                image_width=int(a.get("image_width", 0)),
                image_height=int(a.get("image_height", 0)),
            )
            for a in tree.get("algorithms", [])
        )
        targets = tuple(
            PhysicalTarget(
                name=_require(t, "name", "target", str),
                kind=_require(t, "kind", f"target {t.get('name')!r}", str),
                data_bus_width_bits=_require(t, "data_bus_width_bits", f"target {t.get('name')!r}", int),
                addr_width_bits=int(t.get("addr_width_bits", 0)),
                read_latency_cycles=int(t.get("read_latency_cycles", 0)),
                shared=bool(t.get("shared", False)),
            )
            for t in _require(tree, "targets", "system", list)
        )
    except (TypeError, AttributeError) as exc:
        raise SpecError(f"malformed entry: {exc}") from None
    bindings = _require(tree, "bindings", "system", dict)

    if not containers:
        raise SpecError("at least one container required")
    _unique([c.name for c in containers], "container")
    _unique([i.name for i in iterators], "iterator")
    _unique([a.name for a in algorithms], "algorithm")
    _unique([t.name for t in targets], "target")

    cnames = {c.name for c in containers}
    inames = {i.name for i in iterators}
    tnames = {t.name for t in targets}
    for it in iterators:
        if it.container not in cnames:
            raise SpecError(f"dangling reference: iterator {it.name!r} names unknown container {it.container!r}")
    for al in algorithms:
        for ref in (al.source_iterator, al.sink_iterator):
            if ref not in inames:
                raise SpecError(f"dangling reference: algorithm {al.name!r} names unknown iterator {ref!r}")
    for cname, tname in bindings.items():
        if cname not in cnames:
            raise SpecError(f"dangling reference: binding names unknown container {cname!r}")
        if not isinstance(tname, str) or tname not in tnames:
            raise SpecError(f"dangling reference: binding of {cname!r} names unknown target {tname!r}")

    return SystemSpec(containers, iterators, algorithms, targets, dict(bindings))


# ------------------------------------------------------------- validation

def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def _iterator_violations(it: IteratorSpec, cont: ContainerSpec) -> list:
    out = []
    ents = (it.name, cont.name)
    cap = CAPABILITY_MATRIX[cont.kind]
    if not it.used_ops:
        out.append(Violation("empty-ops", "iterator uses no operations", (it.name,)))
    for op in it.ordered_ops():
        if it.kind not in OP_KINDS[op]:
            rule = {"inc": "forward, bidirectional or random",
                    "dec": "backward, bidirectional or random",
                    "index": "random only"}[op]
            out.append(Violation("op-not-permitted",
                                 f"operation {op!r} on a {it.kind} iterator; {op} is {rule}", (it.name,)))
    if "read" in it.used_ops and not it.reads:
        out.append(Violation("op-not-permitted", "read on an iterator without read access", (it.name,)))
    if "write" in it.used_ops and not it.writes:
        out.append(Violation("op-not-permitted", "write on an iterator without write access", (it.name,)))

    needed = {"forward": {"F"}, "backward": {"B"}, "bidirectional": {"F", "B"}}.get(it.kind)
    for direction, seq, rnd in (("read", cap.sequential_input, cap.random_input),
                                ("write", cap.sequential_output, cap.random_output)):
        if direction == "read" and not it.reads or direction == "write" and not it.writes:
            continue
        ok = rnd if it.kind == "random" else needed <= seq
        if not ok:
            out.append(Violation("capability",
                                 f"{cont.kind} does not allow {it.kind} {direction} traversal", ents))

    if cont.kind in STREAM_KINDS and not out:
        move = "inc" if it.kind == "forward" else "dec"
        touches = it.used_ops & {"read", "write"}
        if touches and move not in it.used_ops:
            out.append(Violation("stream-access",
                                 f"{cont.kind} elements are consumed by the move: "
                                 f"{sorted(touches)} needs {move!r} in the same call", ents))
        if cont.kind == "queue" and it.access == "read_write" and not touches:
            out.append(Violation("stream-access", "read_write queue iterator needs read or write", ents))
    return out


def _mapping_violations(cont: ContainerSpec, target: PhysicalTarget) -> list:
    ents = (cont.name, target.name)
    if cont.kind == "assoc_array":
        return [Violation("unsupported-target",
                          "assoc_array has no hardware implementation (non-goal)", ents)]
    if target.kind not in MAPPING_COMPATIBILITY[cont.kind]:
        return [Violation("mapping", f"{cont.kind} cannot be mapped onto {target.kind}", ents)]
    out = []
    if cont.element.width_bits > MAX_WIDTH or target.data_bus_width_bits > MAX_WIDTH:
        out.append(Violation("width", f"widths above {MAX_WIDTH} bits are not supported", ents))
    elif _ceil_div(cont.element.width_bits, target.data_bus_width_bits) * target.data_bus_width_bits > MAX_WIDTH:
        out.append(Violation("width", f"padded element (whole beats) exceeds {MAX_WIDTH} bits", ents))
    if target.kind == "line_buffer3":
        if target.data_bus_width_bits != cont.element.width_bits:
            out.append(Violation("width", "line_buffer3 bus must equal the pixel width", ents))
        if 3 * cont.element.width_bits > MAX_WIDTH:
            out.append(Violation("width", "a 3-pixel column exceeds 64 bits", ents))
    return out


def validate_system(spec: SystemSpec) -> list:
    """Every rule violation of ``spec``; an empty list means valid.

    The result is sorted, so it does not depend on list order in ``spec``.
    """
    out: list = []
    conts = _by_name(spec.containers)
    targets = _by_name(spec.targets)
    iters = _by_name(spec.iterators)

    for c in spec.containers:
        tname = spec.bindings.get(c.name)
        if tname is None:
            out.append(Violation("unbound", "container has no binding", (c.name,)))
            continue
        out.extend(_mapping_violations(c, targets[tname]))
        clients = spec.iterators_of(c.name)
        if not clients:
            out.append(Violation("unused-container", "container is not accessed by any iterator", (c.name,)))
        elif len(clients) > 1:
            out.append(Violation("multi-client",
                                 "a container serves a single iterator (one shared done line)",
                                 (c.name,) + tuple(sorted(i.name for i in clients))))

    for t in spec.targets:
        users = spec.containers_on(t.name)
        if len(users) > 1 and not t.shared:
            out.append(Violation("sharing", "target bound by several containers but not shared",
                                 (t.name,) + tuple(sorted(c.name for c in users))))
        if t.shared and t.kind != "sram" and users:
            out.append(Violation("sharing", "only sram targets can be shared", (t.name,)))
        if t.kind == "sram" and users:
            words = 0
            for c in users:
                if c.kind in MAPPING_COMPATIBILITY and c.kind != "assoc_array":
                    words += c.capacity * _ceil_div(c.element.width_bits, t.data_bus_width_bits)
            if words > (1 << t.addr_width_bits):
                out.append(Violation("capacity", f"{words} words exceed the sram address space",
                                     (t.name,) + tuple(sorted(c.name for c in users))))

    for it in spec.iterators:
        out.extend(_iterator_violations(it, conts[it.container]))

    endpoints: dict = {}
    for al in spec.algorithms:
        src, snk = iters[al.source_iterator], iters[al.sink_iterator]
        for role, it in (("source", src), ("sink", snk)):
            endpoints.setdefault(it.name, []).append(al.name)
        if not src.reads:
            out.append(Violation("algorithm", "source iterator lacks read access", (al.name, src.name)))
        if not snk.writes:
            out.append(Violation("algorithm", "sink iterator lacks write access", (al.name, snk.name)))
        sc, kc = conts[src.container], conts[snk.container]
        if sc.element.width_bits != kc.element.width_bits:
            out.append(Violation("algorithm", "source and sink element widths differ", (al.name, sc.name, kc.name)))
        on_lbuf = spec.bindings.get(sc.name) in targets and targets[spec.bindings[sc.name]].kind == "line_buffer3"
        if al.kind == "blur3x3":
            if al.image_width < 3 or al.image_height < 3:
                out.append(Violation("algorithm", "blur3x3 needs an image of at least 3x3", (al.name,)))
            if not on_lbuf:
                out.append(Violation("algorithm", "blur3x3 source must be bound to a line_buffer3", (al.name, sc.name)))
            elif sc.capacity < 2 * al.image_width:
                out.append(Violation("capacity", "line buffer capacity must hold two image rows", (al.name, sc.name)))
            if {"read", "inc"} - src.used_ops or {"write", "inc"} - snk.used_ops:
                out.append(Violation("algorithm", "blur3x3 needs read+inc on source and write+inc on sink",
                                     (al.name, src.name, snk.name)))
        elif al.kind == "copy":
            if on_lbuf:
                out.append(Violation("algorithm", "a line_buffer3 can only feed blur3x3", (al.name, sc.name)))
            if not ({"read"} <= src.used_ops and {"write"} <= snk.used_ops):
                out.append(Violation("algorithm", "copy needs read on its source and write on its sink",
                                     (al.name, src.name, snk.name)))
            for it in (src, snk):
                move = {"forward": "inc", "backward": "dec"}.get(it.kind)
                if move is None or move not in it.used_ops:
                    out.append(Violation("algorithm", "copy traverses with a single forward or backward move",
                                         (al.name, it.name)))
    for c in spec.containers:
        if spec.bindings.get(c.name) in targets and targets[spec.bindings[c.name]].kind == "line_buffer3":
            feeds = [al for al in spec.algorithms if iters[al.source_iterator].container == c.name]
            if not any(al.kind == "blur3x3" for al in feeds):
                out.append(Violation("algorithm", "a line_buffer3 container must feed a blur3x3", (c.name,)))
    for it in spec.iterators:
        users = endpoints.get(it.name, [])
        if len(users) != 1:
            out.append(Violation("iterator-use", f"iterator is an endpoint of {len(users)} algorithms (need 1)",
                                 (it.name,) + tuple(sorted(users))))
    return sorted(set(out), key=lambda v: (v.code, v.entities, v.message))


def plan_mapping(container: ContainerSpec, target: PhysicalTarget) -> MappingPlan:
    """Pair a container with a physical target and derive its beat count."""
    bad = _mapping_violations(container, target)
    if bad:
        raise SpecError("; ".join(str(v) for v in bad))
    beats = _ceil_div(container.element.width_bits, target.data_bus_width_bits)
    return MappingPlan(
        container=container.name,
        target=target.name,
        beats_per_element=beats,
        needs_arbitration_port=target.shared,
        address_units="element" if beats == 1 else "beat",
    )


def with_geometry(plan: MappingPlan, **changes) -> MappingPlan:
    return replace(plan, **changes)
