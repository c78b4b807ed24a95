"""
Piecewise-constant boolean signals and structural resolution of
time-varying automaton guards
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.properties.clocks import conjunction as clock_and
from src.properties.clocks import interval_constraint
from src.properties.dta import DtaEdge, OneGDTA
from src.properties.formulas import StateFormula, states_formula

logger = logging.getLogger(__name__)

StateSignals = Dict[str, 'BooleanSignal']


@dataclass(frozen=True)
class BooleanSignal:
    """
    Piecewise-constant truth value over ``[start, end]``.

    The value flips at every switch time. Intervals are half-open
    ``[t_i, t_{i+1})``; ``boundary`` overrides the value exactly at a switch
    time when a non-strict threshold makes the crossing point itself true.

    Attributes:
        initial: Value on the first interval
        switches: Strictly increasing switch times inside (start, end)
        start: Left end of the horizon
        end: Right end of the horizon
        boundary: (switch time, value) pairs for values taken exactly at a switch
        warnings: Diagnostics produced while computing the signal
    """
    initial: bool
    switches: Tuple[float, ...] = ()
    start: float = 0.0
    end: float = float('inf')
    boundary: Tuple[Tuple[float, bool], ...] = ()
    warnings: Tuple[str, ...] = ()

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.switches, self.switches[1:])):
            raise ValueError(f"switch times must be strictly increasing: {self.switches}")
        if self.switches and (self.switches[0] <= self.start or self.switches[-1] >= self.end):
            raise ValueError("switch times must lie strictly inside the horizon")

    @classmethod
    def constant(cls, value: bool, start: float = 0.0, end: float = float('inf')) -> 'BooleanSignal':
        return cls(initial=bool(value), start=start, end=end)

    def right_value(self, t: float) -> bool:
        """Value on the interval starting at or containing ``t``."""
        flips = int(np.searchsorted(self.switches, t, side='right'))
        return self.initial ^ bool(flips % 2)

    def value(self, t: float) -> bool:
        for time, value in self.boundary:
            if time == t:
                return value
        return self.right_value(t)

    def __call__(self, t: float) -> bool:
        return self.value(t)

    @property
    def is_constant(self) -> bool:
        return not self.switches

    def intervals(self) -> List[Tuple[float, float, bool]]:
        points = [self.start, *self.switches, self.end]
        value = self.initial
        result = []
        for lo, hi in zip(points, points[1:]):
            result.append((lo, hi, value))
            value = not value
        return result

    def true_measure(self) -> float:
        return sum(hi - lo for lo, hi, v in self.intervals() if v)

    def shift(self, t0: float) -> 'BooleanSignal':
        """The signal ``x -> s(t0 + x)`` on ``[0, end - t0]``."""
        return BooleanSignal(
            initial=self.right_value(t0),
            switches=tuple(t - t0 for t in self.switches if t > t0),
            start=0.0,
            end=self.end - t0,
            boundary=tuple((t - t0, v) for t, v in self.boundary if t > t0),
            warnings=self.warnings,
        )

    def with_warnings(self, warnings: Sequence[str]) -> 'BooleanSignal':
        return BooleanSignal(self.initial, self.switches, self.start, self.end,
                             self.boundary, tuple(self.warnings) + tuple(warnings))

    def to_dict(self) -> Dict[str, object]:
        return {
            'initial': self.initial,
            'switches': list(self.switches),
            'start': self.start,
            'end': self.end,
            'boundary': [list(b) for b in self.boundary],
            'warnings': list(self.warnings),
        }


def from_samples(values: Sequence[bool], points: Sequence[float], start: float,
                 end: float, boundary: Sequence[Tuple[float, bool]] = (),
                 warnings: Sequence[str] = ()) -> BooleanSignal:
    """
    Build a signal from interval values.

    ``values[i]`` holds on ``[points[i], points[i+1])`` with ``points[0] == start``;
    consecutive equal values are merged.
    """
    switches = []
    current = bool(values[0])
    for t, v in zip(points[1:], values[1:]):
        if bool(v) != current:
            switches.append(float(t))
            current = bool(v)
    kept = tuple((t, bool(v)) for t, v in boundary if t in switches)
    return BooleanSignal(bool(values[0]), tuple(switches), start, end, kept, tuple(warnings))


def signal_combine(op: str, signals: Sequence[BooleanSignal]) -> BooleanSignal:
    """
    Pointwise boolean combination of signals over the same horizon.

    Args:
        op: 'and', 'or' or 'not'
        signals: Operand signals ('not' takes exactly one)

    Returns:
        Combined signal; its switches are a subset of the operands' switches
    """
    if op == 'not':
        if len(signals) != 1:
            raise ValueError("'not' takes exactly one signal")
        s = signals[0]
        return BooleanSignal(not s.initial, s.switches, s.start, s.end,
                             tuple((t, not v) for t, v in s.boundary), s.warnings)
    if op not in ('and', 'or'):
        raise ValueError(f"unknown signal operator '{op}'")
    if not signals:
        return BooleanSignal.constant(op == 'and')
    start, end = signals[0].start, signals[0].end
    if any(s.start != start or s.end != end for s in signals):
        raise ValueError("signals must share the same horizon")

    combine = all if op == 'and' else any
    points = sorted({start} | {t for s in signals for t in s.switches})
    values = [combine(s.right_value(t) for s in signals) for t in points]
    boundary = []
    for t, right in zip(points[1:], values[1:]):
        exact = combine(s.value(t) for s in signals)
        if exact != right:
            boundary.append((t, exact))
    warnings = [w for s in signals for w in s.warnings]
    return from_samples(values, points, start, end, boundary, warnings)


def _refinement(signals: Sequence[BooleanSignal]) -> List[float]:
    return sorted({t for s in signals for t in s.switches})


def structural_resolution(d: OneGDTA, signals: Mapping[str, Mapping[str, BooleanSignal]],
                          horizon: Optional[float] = None) -> OneGDTA:
    """
    Replace time-varying propositions by clock-guarded state-set formulae.

    Each edge whose formula mentions a time-varying proposition is copied once
    per interval ``[t_i, t_{i+1})`` of the common refinement of the relevant
    signals. In each copy the proposition becomes the disjunction of the agent
    states where it holds on that interval, and the copy gains the constraint
    ``t_i <= x < t_{i+1}``. Copies whose formula is false are dropped.

    Args:
        d: Automaton over time-varying propositions
        signals: Per proposition, per agent state, its signal in clock time
        horizon: Switches at or beyond the horizon are ignored

    Returns:
        Automaton over agent-state indicators only (for the resolved propositions)

    Raises:
        DeterminismError: if the resolved automaton is not deterministic
    """
    resolved = set(signals)
    edges: List[DtaEdge] = []
    for edge in d.edges:
        varying = sorted(edge.formula.general_atoms() & resolved)
        if not varying:
            edges.append(edge)
            continue
        relevant = [sig for a in varying for sig in signals[a].values()]
        points = [t for t in _refinement(relevant) if t > 0 and (horizon is None or t < horizon)]
        bounds = [0.0, *points]
        for i, lo in enumerate(bounds):
            hi = bounds[i + 1] if i + 1 < len(bounds) else None
            midpoint = lo if hi is None else (lo + hi) / 2
            mapping: Dict[str, StateFormula] = {
                a: states_formula(s for s, sig in signals[a].items() if sig.right_value(midpoint))
                for a in varying
            }
            formula = edge.formula.substitute(mapping)
            if formula.is_false:
                continue
            window = interval_constraint(Fraction(lo), None if hi is None else Fraction(hi))
            edges.append(DtaEdge(edge.source, edge.action, edge.target, formula,
                                 clock_and(edge.constraint, window)))
    remaining = [p for p in d.props if p not in resolved]
    result = d.with_edges(edges, props=remaining, check=True)
    logger.debug(f"Structural resolution of {d.name}: {len(d.edges)} -> {len(result.edges)} edges")
    return result
