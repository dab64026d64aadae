#
# Copyright Amazon.com Inc. or its affiliates.
# SPDX-License-Identifier: MIT
#
"""
A small language for describing glimpse grids, used by cost accounting and the timing harness.

A grid is either a name (``cvs``, ``dense``) or a call::

    grid(lon=<values>, lat=<values>, hfov=<number>, aspect=<number>, enlarge=<number>)

where ``<values>`` is a number, a list ``[a, b, c]`` or an inclusive range ``start:stop:step``. ``lon`` and ``lat``
are required; the other arguments default to 90 degrees, 4:3 and no enlargement.

.. invisible-code-block: python

    from cvshl import parse_grid

.. code-block:: python

    dense = parse_grid("grid(lon=0:340:20, lat=-75:75:15, hfov=90)")
    assert len(dense.longitudes) == 18 and len(dense.latitudes) == 11
    assert len(dense.glimpses()) == 198
    assert len(parse_grid("cvs").glimpses()) == 12

"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
from parsimonious.exceptions import ParseError
from parsimonious.grammar import Grammar
from parsimonious.nodes import Node, NodeVisitor

from ._errors import GeometryError, GridSpecError
from ._geometry import DEFAULT_ASPECT, DEFAULT_HFOV, Glimpse, Viewpoint

__grid_grammar__ = r"""
grid_spec  = ws? (grid_call / named) ws?

grid_call  = "grid" ws? "(" ws? argument (ws? "," ws? argument)* ws? ")"
argument   = key ws? "=" ws? value
key        = "lon" / "lat" / "hfov" / "aspect" / "enlarge"
value      = list / range / number

list       = "[" ws? number (ws? "," ws? number)* ws? "]"
range      = number ws? ":" ws? number ws? ":" ws? number
number     = ~r"[-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?"
named      = ~r"[A-Za-z_][\w-]*"
ws         = ~r"\s+"
"""

NAMED_GRIDS: dict[str, str] = {
    "cvs": "grid(lon=[0, 90, 180, 270], lat=[67.5, 0, -67.5], hfov=90, enlarge=0.2)",
    "dense": "grid(lon=0:340:20, lat=-75:75:15, hfov=90)",
}
"""
``cvs`` is the twelve glimpse sphere tiling with one score map cell of padding (k = 5); ``dense`` is an 18 x 11
candidate grid of plain glimpses.
"""


@dataclass(frozen=True)
class GridSpec:
    """
    A parsed glimpse grid.
    """

    name: str
    longitudes: tuple[float, ...]
    latitudes: tuple[float, ...]
    hfov: float = DEFAULT_HFOV
    aspect: float = DEFAULT_ASPECT
    enlarge: float = 0.0

    def glimpses(self, segment: int = 0) -> list[Glimpse]:
        """
        One glimpse per grid point, latitude major.
        """
        try:
            return [
                Glimpse(Viewpoint(theta, phi), self.hfov, self.aspect, segment)
                for theta in self.latitudes
                for phi in self.longitudes
            ]
        except GeometryError as e:
            raise GridSpecError(f"Grid '{self.name}' is not a valid glimpse grid: {e}") from e


def _items(maybe_children: Any) -> list[Any]:
    return maybe_children if isinstance(maybe_children, list) else []


class GridSpecVisitor(NodeVisitor):
    """
    Turns a parsed grid description into a :class:`GridSpec`.
    """

    grammar = Grammar(__grid_grammar__)

    unwrapped_exceptions = (GridSpecError,)

    def __init__(self, text: str) -> None:
        super().__init__()
        self._text = text

    def visit_grid_spec(self, node: Node, visited_children: Sequence[Any]) -> GridSpec:  # pylint: disable=W0613
        return visited_children[1][0]  # type: ignore[no-any-return]

    def visit_named(self, node: Node, visited_children: Sequence[Any]) -> GridSpec:  # pylint: disable=W0613
        if node.text not in NAMED_GRIDS:
            raise GridSpecError(f"Unknown grid '{node.text}' (known: {', '.join(NAMED_GRIDS)}).")
        return parse_grid(NAMED_GRIDS[node.text], name=node.text)

    def visit_grid_call(self, node: Node, visited_children: Sequence[Any]) -> GridSpec:
        _, _, _, _, first, rest, _, _ = visited_children
        arguments: dict[str, list[float]] = {}
        for key, values in [first] + [item[-1] for item in _items(rest)]:
            if key in arguments:
                raise GridSpecError(f"Argument '{key}' given twice in '{node.text}'.")
            arguments[key] = values
        for required in ("lon", "lat"):
            if required not in arguments:
                raise GridSpecError(f"Grid '{node.text}' needs a '{required}' argument.")
        scalars = {}
        for key in ("hfov", "aspect", "enlarge"):
            if key in arguments:
                if len(arguments[key]) != 1:
                    raise GridSpecError(f"Argument '{key}' takes a single number.")
                scalars[key] = arguments[key][0]
        enlarge = scalars.get("enlarge", 0.0)
        if enlarge < 0.0:
            raise GridSpecError(f"enlarge must be non-negative, got {enlarge}.")
        return GridSpec(
            name=self._text,
            longitudes=tuple(arguments["lon"]),
            latitudes=tuple(arguments["lat"]),
            hfov=scalars.get("hfov", DEFAULT_HFOV),
            aspect=scalars.get("aspect", DEFAULT_ASPECT),
            enlarge=enlarge,
        )

    def visit_argument(self, node: Node, visited_children: Sequence[Any]) -> tuple[str, list[float]]:
        return node.children[0].text, visited_children[-1]

    def visit_value(self, node: Node, visited_children: Sequence[Any]) -> list[float]:  # pylint: disable=W0613
        value = visited_children[0]
        return value if isinstance(value, list) else [value]

    def visit_list(self, node: Node, visited_children: Sequence[Any]) -> list[float]:  # pylint: disable=W0613
        _, _, first, rest, _, _ = visited_children
        return [first] + [item[-1] for item in _items(rest)]

    def visit_range(self, node: Node, visited_children: Sequence[Any]) -> list[float]:
        start, stop, step = visited_children[0], visited_children[4], visited_children[8]
        if not step > 0.0:
            raise GridSpecError(f"Range step must be positive in '{node.text}'.")
        if stop < start:
            raise GridSpecError(f"Range '{node.text}' is empty.")
        count = math.floor((stop - start) / step + 1e-9) + 1
        return [float(v) for v in start + step * np.arange(count)]

    def visit_number(self, node: Node, visited_children: Sequence[Any]) -> float:  # pylint: disable=W0613
        return float(node.text)

    def generic_visit(self, node: Node, visited_children: Sequence[Any]) -> Any:
        return visited_children or node


def parse_grid(text: str, name: str | None = None) -> GridSpec:
    """
    Parse a grid description.

    :param text: A grid name or a ``grid(...)`` call.
    :param name: Label for the result; defaults to the text itself (or the grid name).
    :raises GridSpecError: on syntax errors, unknown names or invalid arguments.
    """
    try:
        tree = GridSpecVisitor.grammar.parse(text)
    except ParseError as e:
        raise GridSpecError(f"Cannot parse grid '{text}' at column {e.pos + 1}.") from e
    spec = GridSpecVisitor(text).visit(tree)
    assert isinstance(spec, GridSpec)
    if name is not None:
        spec = GridSpec(name, spec.longitudes, spec.latitudes, spec.hfov, spec.aspect, spec.enlarge)
    spec.glimpses()
    return spec
