"""Packet meta-header codec and hop-by-hop forwarding.

Wire layout, all multi-byte integers big-endian::

    dest      16 bytes
    source    16 bytes
    height     1 byte
    ids        height bytes, top of stack first
    headers    per stack entry, top first: 2-byte length + header bytes
    boundary   1 byte, PAYLOAD_MARKER
    payload    the rest
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

from .core import AdaptationFunction, Kind, Stack, apply
from .engine import RoutingTable
from .network import NODE_ID_BYTES, Network, NodeId, node_id_bytes, node_id_from_bytes
from .oracle import FeasiblePath

_LEN = struct.Struct(">H")
FIXED_SIZE = 2 * NODE_ID_BYTES + 1
PAYLOAD_MARKER = 0x00


class PacketDecodeError(ValueError):
    def __init__(self, offset: int, message: str):
        self.offset = offset
        super().__init__(f"offset {offset}: {message}")


class ForwardingCorruptionError(RuntimeError):
    """A table row names a function that cannot handle the stack it is keyed by."""


@dataclass(frozen=True)
class Packet:
    dest: NodeId
    source: NodeId
    proto_stack: Stack  # bottom to top
    header_stack: Tuple[bytes, ...]  # top first
    payload: bytes = b""

    def __post_init__(self):
        if not 1 <= len(self.proto_stack) <= 255:
            raise ValueError(f"stack height {len(self.proto_stack)} outside [1, 255]")
        if len(self.header_stack) != len(self.proto_stack):
            raise ValueError("header stack and protocol stack heights differ")

    @classmethod
    def with_stack(cls, dest: NodeId, source: NodeId, stack: Stack, payload: bytes = b"") -> "Packet":
        """Packet whose headers are the one-byte placeholders used on rewrite."""
        return cls(dest, source, tuple(stack), tuple(bytes([p]) for p in reversed(stack)), payload)

    @property
    def height(self) -> int:
        return len(self.proto_stack)


def encoded_size(p: Packet) -> int:
    return FIXED_SIZE + p.height + sum(2 + len(h) for h in p.header_stack) + 1 + len(p.payload)


def encode(p: Packet) -> bytes:
    parts = [node_id_bytes(p.dest), node_id_bytes(p.source), bytes([p.height]), bytes(reversed(p.proto_stack))]
    for header in p.header_stack:
        if len(header) > 0xFFFF:
            raise ValueError(f"header of {len(header)} bytes exceeds the 2-byte length field")
        parts.append(_LEN.pack(len(header)))
        parts.append(header)
    parts.append(bytes([PAYLOAD_MARKER]))
    parts.append(p.payload)
    return b"".join(parts)


def decode(buf: bytes) -> Packet:
    if len(buf) < FIXED_SIZE:
        raise PacketDecodeError(len(buf), f"truncated fixed header ({len(buf)} of {FIXED_SIZE} bytes)")
    try:
        dest = node_id_from_bytes(buf[:NODE_ID_BYTES])
        source = node_id_from_bytes(buf[NODE_ID_BYTES : 2 * NODE_ID_BYTES])
    except UnicodeDecodeError as e:
        raise PacketDecodeError(e.start, "node id is not UTF-8") from None
    if not dest or not source:
        raise PacketDecodeError(0 if not dest else NODE_ID_BYTES, "empty node id")
    height = buf[2 * NODE_ID_BYTES]
    if height == 0:
        raise PacketDecodeError(2 * NODE_ID_BYTES, "stack height 0")
    offset = FIXED_SIZE
    if len(buf) < offset + height:
        raise PacketDecodeError(len(buf), "truncated protocol id stack")
    stack = tuple(reversed(buf[offset : offset + height]))
    offset += height
    headers = []
    for _ in range(height):
        if len(buf) < offset + 2:
            raise PacketDecodeError(offset, "truncated header length")
        (n,) = _LEN.unpack_from(buf, offset)
        offset += 2
        if len(buf) < offset + n:
            raise PacketDecodeError(offset, f"header length {n} overruns buffer")
        headers.append(bytes(buf[offset : offset + n]))
        offset += n
    if len(buf) <= offset:
        raise PacketDecodeError(offset, "missing payload boundary")
    if buf[offset] != PAYLOAD_MARKER:
        raise PacketDecodeError(offset, f"bad payload boundary byte {buf[offset]:#04x}")
    offset += 1
    return Packet(dest, source, stack, tuple(headers), bytes(buf[offset:]))


def rewrite(p: Packet, f: AdaptationFunction) -> Packet:
    """Apply ``f`` to the packet, keeping ids and headers in lockstep."""
    stack = apply(f, p.proto_stack)
    if stack is None:
        raise ForwardingCorruptionError(f"{f} cannot handle stack {p.proto_stack}")
    headers = p.header_stack
    if f.kind is Kind.CONV:
        headers = (bytes([f.y]),) + headers[1:]
    elif f.kind is Kind.ENC:
        headers = (bytes([f.y]),) + headers
    else:
        headers = headers[1:]
    return Packet(p.dest, p.source, stack, headers, p.payload)


@dataclass(frozen=True)
class Deliver:
    pass


@dataclass(frozen=True)
class Forward:
    next_hop: NodeId
    packet: Packet
    function: AdaptationFunction


@dataclass(frozen=True)
class Discard:
    pass


Action = Union[Deliver, Forward, Discard]


def forward(node: NodeId, table: RoutingTable, in_set, p: Packet) -> Action:
    if p.dest == node and p.height == 1 and p.proto_stack[0] in in_set:
        return Deliver()
    row = table.lookup(p.dest, p.proto_stack)
    if row is None:
        return Discard()
    return Forward(row.next_hop, rewrite(p, row.function), row.function)


@dataclass
class Hop:
    node: NodeId
    stack: Stack
    action: str
    cost_so_far: int


@dataclass
class Trace:
    status: str  # "Delivered", "Discarded" or "BudgetExceeded"
    hops: List[Hop] = field(default_factory=list)
    functions: List[AdaptationFunction] = field(default_factory=list)

    @property
    def delivered(self) -> bool:
        return self.status == "Delivered"

    @property
    def nodes(self) -> List[NodeId]:
        return [h.node for h in self.hops]

    @property
    def hop_count(self) -> int:
        return len(self.hops) - 1

    @property
    def cost(self) -> int:
        return self.hops[-1].cost_so_far

    @property
    def max_height(self) -> int:
        return max(len(h.stack) for h in self.hops)

    def path(self) -> Optional[FeasiblePath]:
        if self.hop_count < 1:
            return None
        return FeasiblePath(tuple(self.nodes), tuple(self.functions))

    def csv_rows(self, net: Network) -> List[list]:
        fmt = net.alphabet.format_stack
        return [[i, h.node, fmt(h.stack), h.action, h.cost_so_far] for i, h in enumerate(self.hops)]


TRACE_COLUMNS = ["hop", "node", "stack", "action", "cost_so_far"]


def end_to_end(
    net: Network, tables: Dict[NodeId, RoutingTable], source: NodeId, p: Packet, hop_budget: int
) -> Trace:
    """Forward ``p`` from ``source`` until it is delivered, discarded, or the budget runs out."""
    if hop_budget < 1:
        raise ValueError("hop_budget must be >= 1")
    trace = Trace("BudgetExceeded")
    node, cost = source, 0
    for _ in range(hop_budget + 1):
        action = forward(node, tables[node], net.in_set(node), p)
        if isinstance(action, Deliver):
            trace.hops.append(Hop(node, p.proto_stack, "deliver", cost))
            trace.status = "Delivered"
            return trace
        if isinstance(action, Discard):
            trace.hops.append(Hop(node, p.proto_stack, "discard", cost))
            trace.status = "Discarded"
            return trace
        if len(trace.functions) == hop_budget:
            trace.hops.append(Hop(node, p.proto_stack, "budget", cost))
            return trace
        trace.hops.append(Hop(node, p.proto_stack, "forward", cost))
        trace.functions.append(action.function)
        cost += net.weight(node, action.function, action.next_hop)
        node, p = action.next_hop, action.packet
    return trace
