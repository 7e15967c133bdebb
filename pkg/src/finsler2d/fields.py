"""Scalar fields: anything that maps ``(point, degree)`` to a :class:`Jet`.

Parsed expressions (:class:`finsler2d.metricdsl.FieldDef`) already satisfy
this protocol.  :class:`FunctionField` wraps a plain Python function of the
four coordinate jets so test code and stock metrics can be written inline.
"""

from __future__ import annotations

from typing import Callable, Protocol

from .jet import Jet, coordinates


class ScalarField(Protocol):
    name: str

    def __call__(self, point, degree: int) -> Jet: ...

    def real(self, point) -> float: ...


class FunctionField:
    def __init__(self, fn: Callable, name: str = "f"):
        self.fn = fn
        self.name = name

    def __call__(self, point, degree: int) -> Jet:
        point = tuple(float(v) for v in point)
        out = self.fn(*coordinates(point, degree))
        if not isinstance(out, Jet):
            out = Jet.constant(float(out), point, degree)
        return out

    def real(self, point) -> float:
        return self(point, 0).value

    def __repr__(self):
        return f"FunctionField({self.name!r})"


def field(name: str = "f"):
    """Decorator form of :class:`FunctionField`."""

    def wrap(fn):
        return FunctionField(fn, name)

    return wrap


ZERO = FunctionField(lambda x1, x2, y1, y2: 0.0 * x1, "zero")
