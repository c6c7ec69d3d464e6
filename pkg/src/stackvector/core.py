"""Protocol stacks and the adaptation functions that rewrite them.

A stack is a plain tuple of protocol ids ordered bottom to top, so ``(0, 1)``
is the stack "ab" when protocol 0 is named "a". The forbidden stack is
represented by ``None``: every operation that cannot handle its input returns
``None`` and every operation given ``None`` returns ``None`` again.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

ProtocolId = int
Stack = Tuple[int, ...]

MAX_PROTOCOLS = 256


class InvalidInputError(ValueError):
    """Raised when an operation receives arguments outside its domain."""


class Kind(enum.IntEnum):
    CONV = 0
    ENC = 1
    DEC = 2


_KIND_NAMES = {"conv": Kind.CONV, "enc": Kind.ENC, "dec": Kind.DEC}


@dataclass(frozen=True, order=True)
class AdaptationFunction:
    """One of ``x->y`` (conversion), ``x->xy`` (encapsulation of x in y)
    or ``~(x->xy)`` (decapsulation of x from y).

    Field order makes the natural ordering the canonical one used wherever
    iteration order must be deterministic: conversions, then encapsulations,
    then decapsulations, each sorted by ``(x, y)``.
    """

    kind: Kind
    x: ProtocolId
    y: ProtocolId

    def __post_init__(self):
        for p in (self.x, self.y):
            if not 0 <= p < MAX_PROTOCOLS:
                raise InvalidInputError(f"protocol id {p} does not fit in one byte")

    @property
    def kind_name(self) -> str:
        return self.kind.name.lower()

    def apply(self, stack: Optional[Stack]) -> Optional[Stack]:
        return apply(self, stack)

    def reverse(self) -> "AdaptationFunction":
        return reverse(self)


def conv(x: int, y: int) -> AdaptationFunction:
    return AdaptationFunction(Kind.CONV, x, y)


def enc(x: int, y: int) -> AdaptationFunction:
    return AdaptationFunction(Kind.ENC, x, y)


def dec(x: int, y: int) -> AdaptationFunction:
    return AdaptationFunction(Kind.DEC, x, y)


def kind_from_name(name: str) -> Kind:
    try:
        return _KIND_NAMES[name]
    except KeyError:
        raise InvalidInputError(f"unknown function kind {name!r}") from None


def apply(f: AdaptationFunction, stack: Optional[Stack]) -> Optional[Stack]:
    """Apply ``f`` to ``stack``; ``None`` when ``f`` cannot handle it."""
    if not stack:
        return None
    top = stack[-1]
    kind = f.kind
    if kind is Kind.CONV:
        if top == f.x:
            return stack[:-1] + (f.y,)
    elif kind is Kind.ENC:
        if top == f.x:
            return stack + (f.y,)
    elif len(stack) >= 2 and top == f.y and stack[-2] == f.x:
        return stack[:-1]
    return None


def reverse(f: AdaptationFunction) -> AdaptationFunction:
    if f.kind is Kind.CONV:
        return AdaptationFunction(Kind.CONV, f.y, f.x)
    if f.kind is Kind.ENC:
        return AdaptationFunction(Kind.DEC, f.x, f.y)
    return AdaptationFunction(Kind.ENC, f.x, f.y)


def is_identity(f: AdaptationFunction) -> bool:
    return f.kind is Kind.CONV and f.x == f.y


def stack_trace(
    functions: Sequence[AdaptationFunction], initial: Optional[int] = None
) -> Optional[list]:
    """Stacks induced by a sequence of adaptation functions.

    Without ``initial`` the first function must be an identity conversion
    ``x->x`` and the first stack is ``(x,)``. With ``initial`` the first
    function is applied to ``(initial,)`` like every other one, which is
    how a routing table row at the source is read.

    Returns ``None`` as soon as any stack is forbidden.
    """
    if not functions:
        raise InvalidInputError("empty function sequence")
    first = functions[0]
    if initial is None:
        if not is_identity(first):
            return None
        current: Optional[Stack] = (first.x,)
    else:
        current = apply(first, (initial,))
        if current is None:
            return None
    trace = [current]
    for f in functions[1:]:
        current = apply(f, current)
        if current is None:
            return None
        trace.append(current)
    return trace


def height(stack: Stack) -> int:
    return len(stack)


class Alphabet:
    """Bidirectional mapping between protocol names and one-byte ids."""

    def __init__(self, names: Iterable[str]):
        self.names: Tuple[str, ...] = tuple(names)
        if len(self.names) > MAX_PROTOCOLS:
            raise InvalidInputError(
                f"{len(self.names)} protocols exceed the {MAX_PROTOCOLS} id limit"
            )
        if len(set(self.names)) != len(self.names):
            raise InvalidInputError("duplicate protocol names")
        for name in self.names:
            if not name or any(c in name for c in "()~->., \t"):
                raise InvalidInputError(f"bad protocol name {name!r}")
        self._ids = {name: i for i, name in enumerate(self.names)}
        self._compact = all(len(name) == 1 for name in self.names)

    @classmethod
    def default(cls, alpha: int) -> "Alphabet":
        """``a``..``z`` for up to 26 protocols, ``p0``.. beyond that."""
        if alpha <= 26:
            return cls(chr(ord("a") + i) for i in range(alpha))
        return cls(f"p{i}" for i in range(alpha))

    def __len__(self):
        return len(self.names)

    def __eq__(self, other):
        return isinstance(other, Alphabet) and self.names == other.names

    def __hash__(self):
        return hash(self.names)

    def __repr__(self):
        return f"Alphabet({list(self.names)!r})"

    def id(self, name: str) -> int:
        try:
            return self._ids[name]
        except KeyError:
            raise InvalidInputError(f"unknown protocol {name!r}") from None

    def name(self, pid: int) -> str:
        return self.names[pid]

    def format_stack(self, stack: Optional[Stack]) -> str:
        if stack is None:
            return "FORBIDDEN"
        sep = "" if self._compact else "."
        return sep.join(self.names[p] for p in stack)

    def parse_stack(self, text: str) -> Stack:
        if not text:
            raise InvalidInputError("empty stack")
        parts = list(text) if self._compact else text.split(".")
        return tuple(self.id(p) for p in parts)

    def format_function(self, f: AdaptationFunction) -> str:
        x, y = self.names[f.x], self.names[f.y]
        if f.kind is Kind.CONV:
            return f"{x}->{y}"
        if f.kind is Kind.ENC:
            return f"{x}->{x}{y}" if self._compact else f"{x}->{x}.{y}"
        return f"~({x}->{x}{y})" if self._compact else f"~({x}->{x}.{y})"

    def parse_function(self, text: str) -> AdaptationFunction:
        s = text.strip()
        negated = s.startswith("~")
        if negated:
            s = s[1:].strip()
            if not (s.startswith("(") and s.endswith(")")):
                raise InvalidInputError(f"malformed decapsulation {text!r}")
        if s.startswith("(") and s.endswith(")"):
            s = s[1:-1]
        left, arrow, right = s.partition("->")
        if not arrow:
            raise InvalidInputError(f"malformed function {text!r}")
        x = self.id(left.strip())
        rhs = self.parse_stack(right.strip())
        if len(rhs) == 1 and not negated:
            return conv(x, rhs[0])
        if len(rhs) == 2 and rhs[0] == x:
            return dec(x, rhs[1]) if negated else enc(x, rhs[1])
        raise InvalidInputError(f"malformed function {text!r}")
