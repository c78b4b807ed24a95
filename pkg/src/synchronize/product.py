"""
Product of an agent class with a sliced property, and the associated
population models with split rates (one per clock region)
"""
import itertools
import logging
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Dict, List, Sequence, Tuple

import numpy as np
import sympy

from src.model.population import AgentClass, GlobalTransition, LocalTransition, PopulationModel
from src.model.rates import RateExpr, falling_factorial, population_symbol
from src.properties.dta import OneGDTA
from src.synchronize.slicing import SlicedProperty, prepare_property, relabel_model

logger = logging.getLogger(__name__)

FINAL_COUNTER = 'Final'

ProductState = Tuple[str, str]


def product_state_name(s: str, q: str) -> str:
    return f"{s}_{q}"


@dataclass(frozen=True)
class ProductAgentClass:
    """
    Sequence of product agent classes, one per clock region.

    Attributes:
        agent: Relabelled agent class (unique labels)
        sliced: Sliced property
        states: Product states (s, q), agent-state major
        regions: Per region, the product agent class over named product states
    """
    agent: AgentClass
    sliced: SlicedProperty
    states: Tuple[ProductState, ...]
    regions: Tuple[AgentClass, ...]

    @cached_property
    def index(self) -> Dict[ProductState, int]:
        return {sq: i for i, sq in enumerate(self.states)}

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(product_state_name(s, q) for s, q in self.states)

    @property
    def times(self) -> Tuple[Fraction, ...]:
        return self.sliced.times

    def final_mask(self) -> np.ndarray:
        return np.array([q in self.sliced.finals for _, q in self.states], dtype=bool)

    def initial_index(self, s: str) -> int:
        return self.index[(s, self.sliced.initial)]

    def step(self, j: int, q: str, label: str) -> str:
        return self.sliced.regions[j].step(q, label)


def product_agent(a: AgentClass, sp: SlicedProperty) -> ProductAgentClass:
    """
    Standard product of the agent with each region DFA.

    (s, q) -label-> (s', q') exists iff s -label-> s' in the agent and
    q -label-> q' in the region DFA, implicit self-loops included.
    """
    states = tuple((s, q) for s in a.states for q in sp.states)
    names = tuple(product_state_name(s, q) for s, q in states)
    regions = []
    for region in sp.regions:
        locals_ = []
        for lt in a.local_transitions:
            for q in sp.states:
                target_q = region.step(q, lt.label)
                locals_.append(LocalTransition(product_state_name(lt.source, q), lt.label,
                                               product_state_name(lt.target, target_q)))
        regions.append(AgentClass(states=names, local_transitions=tuple(locals_)))
    return ProductAgentClass(agent=a, sliced=sp, states=states, regions=tuple(regions))


def _split_rate(t: GlobalTransition, sources: Sequence[str], base_states: Sequence[str],
                product: ProductAgentClass) -> RateExpr:
    """Rate of one q-assignment instance of ``t`` (split by falling factorials)."""
    aggregated = {
        population_symbol(s): sympy.Add(*[population_symbol(product_state_name(s, q))
                                          for q in product.sliced.states])
        for s in base_states
    }
    base_kappa = t.source_multiplicities()
    product_kappa = Counter(sources)

    num_exact = sympy.Mul(*[falling_factorial(population_symbol(sq), k)
                            for sq, k in product_kappa.items()])
    den_exact = sympy.Mul(*[falling_factorial(aggregated[population_symbol(s)], k)
                            for s, k in base_kappa.items()])
    num_cont = sympy.Mul(*[population_symbol(sq) ** k for sq, k in product_kappa.items()])
    den_cont = sympy.Mul(*[aggregated[population_symbol(s)] ** k for s, k in base_kappa.items()])

    exact = sympy.cancel(num_exact / den_exact * t.rate.expr.xreplace(aggregated))
    continuous = sympy.cancel(num_cont / den_cont * t.rate.continuous_expr.xreplace(aggregated))
    return RateExpr(expr=exact, text='', continuous=continuous)


@dataclass(frozen=True, eq=False)
class ProductPopulationModel:
    """
    Population models of the product agent, one per clock region.

    Attributes:
        base: Original population model
        product: Product agent classes
        regions: Region population models over X_{s,q} (plus X_Final when augmented)
        origin: Per region, the base transition name of each derived transition
    """
    base: PopulationModel
    product: ProductAgentClass
    regions: Tuple[PopulationModel, ...]
    origin: Tuple[Tuple[str, ...], ...]

    @property
    def times(self) -> Tuple[Fraction, ...]:
        return self.product.times

    @property
    def has_final_counter(self) -> bool:
        return FINAL_COUNTER in self.regions[0].counters

    @property
    def N(self) -> int:
        return self.base.N

    def region_index(self, t) -> int:
        return self.product.sliced.region_index(t)

    @property
    def initial_vector(self) -> np.ndarray:
        return self.regions[0].initial_vector

    def final_indices(self) -> np.ndarray:
        return np.flatnonzero(self.product.final_mask())

    def aggregate(self, x: np.ndarray) -> np.ndarray:
        """Base-model counts X_s = sum_q X_{s,q} from a product state vector."""
        n_q = len(self.product.sliced.states)
        n_s = len(self.base.states)
        return np.asarray(x, dtype=float)[: n_s * n_q].reshape(n_s, n_q).sum(axis=1)

    def final_count(self, x: np.ndarray) -> float:
        """Agents currently in a final product state."""
        return float(np.asarray(x, dtype=float)[self.final_indices()].sum())

    def to_dict(self) -> Dict[str, object]:
        """JSON-ready description of the product (for inspection and golden tests)."""
        return {
            'base_model': self.base.name,
            'property': self.product.sliced.name,
            'N': self.N,
            'states': list(self.product.names),
            'counters': list(self.regions[0].counters),
            'finals': [product_state_name(s, q) for s, q in self.product.states
                       if q in self.product.sliced.finals],
            'regions': [
                {
                    'start': str(lo),
                    'end': str(hi),
                    'transitions': [
                        {
                            'name': t.name,
                            'origin': origin,
                            'sync_set': [str(lt) for lt in t.sync_set],
                            'rate': str(t.rate.expr),
                            'continuous_rate': str(t.rate.continuous_expr),
                            'final_increment': list(t.counter_updates),
                        }
                        for t, origin in zip(model.transitions, origins)
                    ],
                }
                for lo, hi, model, origins in zip(self.times, self.times[1:], self.regions,
                                                   self.origin)
            ],
        }


def _initial_counts(m: PopulationModel, p: ProductAgentClass) -> Tuple[int, ...]:
    counts = dict(zip(m.states, m.initial_state))
    return tuple(counts[s] if q == p.sliced.initial else 0 for s, q in p.states)


def product_population(m: PopulationModel, p: ProductAgentClass) -> ProductPopulationModel:
    """
    Population model of the product agent, with rates split over q-assignments.

    For every base transition and every assignment of locations to the agents of
    its sync set, the derived transition fires the product local transitions and
    has rate  prod ff(X_{s,q}, k) / prod ff(X_s, k) * f(X~),  X_s = sum_q X_{s,q}.
    Assignments producing the same product sync multiset are merged.

    Args:
        m: Base population model (labels as in ``p.agent`` or the original ones)
        p: Product agent classes

    Returns:
        ProductPopulationModel
    """
    if m.agent_class != p.agent:
        m = relabel_model(m, p.agent)
    initial = _initial_counts(m, p)
    locations = p.sliced.states
    region_models = []
    origins = []
    for j, agent_j in enumerate(p.regions):
        transitions: List[GlobalTransition] = []
        origin: List[str] = []
        for t in m.transitions:
            sync = t.sync_set
            merged: Dict[Tuple[LocalTransition, ...], List[Tuple[str, ...]]] = {}
            for assignment in itertools.product(locations, repeat=len(sync)):
                product_sync = tuple(sorted(
                    (LocalTransition(product_state_name(lt.source, q), lt.label,
                                     product_state_name(lt.target, p.step(j, q, lt.label)))
                     for lt, q in zip(sync, assignment)),
                    key=lambda lt: (lt.source, lt.label, lt.target),
                ))
                merged.setdefault(product_sync, []).append(assignment)
            for product_sync, assignments in merged.items():
                rates = [
                    _split_rate(t, [product_state_name(lt.source, q) for lt, q in zip(sync, a)],
                                m.states, p)
                    for a in assignments
                ]
                rate = RateExpr(
                    expr=sympy.cancel(sympy.Add(*[r.expr for r in rates])),
                    text='',
                    continuous=sympy.cancel(sympy.Add(*[r.continuous_expr for r in rates])),
                )
                if rate.expr == 0:
                    continue
                name = f"{t.name}__{'_'.join(assignments[0])}" if sync else t.name
                transitions.append(GlobalTransition(name, product_sync, rate))
                origin.append(t.name)
        region_models.append(PopulationModel(
            agent_class=agent_j,
            transitions=tuple(transitions),
            N=m.N,
            initial_state=initial,
            params=m.params,
            name=f"{m.name}x{p.sliced.name}[{j}]",
        ))
        origins.append(tuple(origin))
    logger.info(
        f"Product {m.name} x {p.sliced.name}: {len(p.states)} states, "
        f"{len(region_models)} regions, "
        f"{sum(len(r.transitions) for r in region_models)} derived transitions"
    )
    return ProductPopulationModel(base=m, product=p, regions=tuple(region_models),
                                  origin=tuple(origins))


def final_increment(t: GlobalTransition, p: ProductAgentClass) -> int:
    """Agents moved by ``t`` from a non-final to a final location."""
    finals = {product_state_name(s, q) for s, q in p.states if q in p.sliced.finals}
    return sum(1 for lt in t.sync_set if lt.source not in finals and lt.target in finals)


def augment_final_counter(pm: ProductPopulationModel) -> ProductPopulationModel:
    """
    Add the non-decreasing counter X_Final of agents that entered a final location.

    Each derived transition increments X_Final by the number of agents it moves
    from a non-final into a final location; X_Final starts at N when the
    initial location is final and at 0 otherwise.
    """
    if pm.has_final_counter:
        return pm
    start = pm.N if pm.product.sliced.initial in pm.product.sliced.finals else 0
    regions = []
    for model in pm.regions:
        transitions = tuple(
            GlobalTransition(t.name, t.sync_set, t.rate, (final_increment(t, pm.product),))
            for t in model.transitions
        )
        regions.append(PopulationModel(
            agent_class=model.agent_class,
            transitions=transitions,
            N=model.N,
            initial_state=model.initial_state,
            params=model.params,
            name=model.name,
            counters=(FINAL_COUNTER,),
            initial_counters=(start,),
        ))
    return ProductPopulationModel(base=pm.base, product=pm.product, regions=tuple(regions),
                                  origin=pm.origin)


def synchronize(m: PopulationModel, d: OneGDTA, T,
                final_counter: bool = True) -> ProductPopulationModel:
    """
    Full four-step synchronization of a population model with an automaton.

    Args:
        m: Base population model
        d: Automaton without free propositions
        T: Time horizon
        final_counter: Add the X_Final counter

    Returns:
        ProductPopulationModel
    """
    agent, sliced = prepare_property(m.agent_class, d, T)
    product = product_agent(agent, sliced)
    pm = product_population(m, product)
    return augment_final_counter(pm) if final_counter else pm


def evaluate_split_rates(pm: ProductPopulationModel, j: int, x: np.ndarray,
                         exact: bool = True) -> np.ndarray:
    """Rates of the region-``j`` derived transitions at product state ``x``."""
    compiled = pm.regions[j].compiled
    return compiled.exact_rates(x) if exact else compiled.continuous_rates(x)


def base_rate_totals(pm: ProductPopulationModel, j: int, x: np.ndarray,
                     exact: bool = True) -> Dict[str, float]:
    """Sum of the derived rates per base transition at product state ``x``."""
    rates = evaluate_split_rates(pm, j, x, exact)
    totals: Dict[str, float] = {t.name: 0.0 for t in pm.base.transitions}
    for name, r in zip(pm.origin[j], rates):
        totals[name] += float(r)
    return totals

