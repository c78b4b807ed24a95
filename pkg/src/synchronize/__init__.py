"""
Synchronization of a population model with a single-agent timed automaton
"""
from .slicing import (SlicedProperty, prepare_property, prune_state_conditions, relabel_model,
                      relabel_unique, slice_by_clock)
from .product import (FINAL_COUNTER, ProductAgentClass, ProductPopulationModel,
                      augment_final_counter, base_rate_totals, product_agent, product_population,
                      synchronize)
from .generator import generator_entry_expressions, generator_template, individual_generator

__all__ = [
    'SlicedProperty',
    'prepare_property',
    'prune_state_conditions',
    'relabel_model',
    'relabel_unique',
    'slice_by_clock',
    'FINAL_COUNTER',
    'ProductAgentClass',
    'ProductPopulationModel',
    'augment_final_counter',
    'base_rate_totals',
    'product_agent',
    'product_population',
    'synchronize',
    'generator_entry_expressions',
    'generator_template',
    'individual_generator',
]
