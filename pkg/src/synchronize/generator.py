"""
Generator of a single tagged agent in the product space S x Q
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
import sympy

from src.model.population import PopulationModel
from src.model.rates import population_symbol
from src.synchronize.product import ProductAgentClass
from src.synchronize.slicing import relabel_model

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GeneratorTemplate:
    """
    Sparse structure of the individual generator of one region.

    Entry e contributes ``multiplicity[e] * f_{transition[e]}(x) / x[source[e]]``
    to position ``(rows[e], cols[e])``.
    """
    size: int
    rows: np.ndarray
    cols: np.ndarray
    transition: np.ndarray
    multiplicity: np.ndarray
    source: np.ndarray

    def matrix(self, x: np.ndarray, rates: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        occupied = x[self.source] > 0
        values = np.zeros(len(self.rows))
        values[occupied] = (self.multiplicity[occupied] * rates[self.transition[occupied]]
                            / x[self.source[occupied]])
        q = np.zeros((self.size, self.size))
        np.add.at(q, (self.rows, self.cols), values)
        q[np.diag_indices(self.size)] = 0.0
        q[np.diag_indices(self.size)] = -q.sum(axis=1)
        return q


def generator_template(p: ProductAgentClass, m: PopulationModel, j: int) -> GeneratorTemplate:
    """Collect, for region ``j``, every (product edge, base transition) contribution."""
    if m.agent_class != p.agent:
        m = relabel_model(m, p.agent)
    state_index = m.agent_class.index
    locations = p.sliced.states
    rows, cols, transition, multiplicity, source = [], [], [], [], []
    for t_index, t in enumerate(m.transitions):
        for lt in dict.fromkeys(t.sync_set):
            if lt.source == lt.target and all(p.step(j, q, lt.label) == q for q in locations):
                continue
            mult = t.multiplicity(lt)
            for q in locations:
                target_q = p.step(j, q, lt.label)
                if lt.source == lt.target and target_q == q:
                    continue
                rows.append(p.index[(lt.source, q)])
                cols.append(p.index[(lt.target, target_q)])
                transition.append(t_index)
                multiplicity.append(mult)
                source.append(state_index[lt.source])
    return GeneratorTemplate(
        size=len(p.states),
        rows=np.array(rows, dtype=np.int64),
        cols=np.array(cols, dtype=np.int64),
        transition=np.array(transition, dtype=np.int64),
        multiplicity=np.array(multiplicity, dtype=float),
        source=np.array(source, dtype=np.int64),
    )


def individual_generator(p: ProductAgentClass, m: PopulationModel, x: np.ndarray, j: int,
                         continuous: bool = False) -> np.ndarray:
    """
    Rate matrix of one agent over S x Q in region ``j`` given the population state.

    Off-diagonal entries sum ``m_tau / x_s * f_tau(x)`` over the transitions
    moving an agent from s; rows of unoccupied states are zero.

    Args:
        p: Product agent classes
        m: Base population model
        x: Base population counts (integer, or a mean when ``continuous``)
        j: Region index
        continuous: Use the large-population form of the rates

    Returns:
        Generator matrix with zero row sums
    """
    template = generator_template(p, m, j)
    compiled = m.compiled
    rates = compiled.continuous_rates(x) if continuous else compiled.exact_rates(x)
    return template.matrix(x, rates)


def generator_entry_expressions(p: ProductAgentClass, m: PopulationModel, j: int,
                                continuous: bool = True) -> Dict[Tuple[int, int], sympy.Expr]:
    """
    Symbolic off-diagonal entries ``sum m_tau / X_s * f_tau(X)`` of region ``j``.

    Parameters are bound; ``N`` stays symbolic.
    """
    if m.agent_class != p.agent:
        m = relabel_model(m, p.agent)
    template = generator_template(p, m, j)
    rates = m.bound_rates(continuous=continuous)
    entries: Dict[Tuple[int, int], List[sympy.Expr]] = {}
    for r, c, t, mult, s in zip(template.rows, template.cols, template.transition,
                                template.multiplicity, template.source):
        expr = sympy.Integer(int(mult)) * rates[t] / population_symbol(m.states[s])
        entries.setdefault((int(r), int(c)), []).append(expr)
    return {key: sympy.cancel(sympy.Add(*terms)) for key, terms in entries.items()}
