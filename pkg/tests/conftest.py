"""
Shared fixtures: the epidemic case study and small models with closed-form answers
"""
import os
import sys
from pathlib import Path

import pytest

PROJECT_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(PROJECT_ROOT))
os.environ.setdefault('POPCHECK_LOG_LEVEL', 'WARNING')

from src.model.parser import load_model, parse_model  # noqa: E402
from src.properties.parser import load_properties, parse_property  # noqa: E402

# Pure death process: every agent leaves A at rate k, so X_A(t) ~ Bin(N, exp(-k t))
DECAY_MODEL = """
model decay;
state A B;
param k = 1;
population N = 10;
trans decay : A->B @ k*X_A;
init A = N;
"""

# A single agent flipping between A and B at rate k in both directions
FLIP_FLOP_MODEL = """
model flipflop;
state A B;
param k = 1;
population N = 1;
trans ab : A->B @ k*X_A;
trans ba : B->A @ k*X_B;
init A = N;
"""

DECAY_PROPERTIES = """
dta Dec { init q0; final qf; edge q0 -> qf on decay; }
dta Reach { init q0; final qf; props p; edge q0 -> qf on decay when p; }

csl Quick = P[<=2] >= 0.5 (Dec);
csl QuickA = P[<=2] >= 0.5 (Reach[A]);

global Half = Pr >= 0.5 (frac(Dec, 1) in [3/5, 2/3]);
global Remaining = Pr >= 0.5 (frac(A, 1) >= 1/5);

check Half;
"""


@pytest.fixture(scope='session')
def epidemic():
    return load_model(PROJECT_ROOT / 'models' / 'epidemic.pop')


@pytest.fixture(scope='session')
def epidemic_properties():
    return load_properties(PROJECT_ROOT / 'properties' / 'epidemic.prop')


@pytest.fixture
def decay():
    return parse_model(DECAY_MODEL)


@pytest.fixture
def flip_flop():
    return parse_model(FLIP_FLOP_MODEL)


@pytest.fixture
def decay_properties():
    return parse_property(DECAY_PROPERTIES)


@pytest.fixture
def decay_files(tmp_path):
    """Decay model and properties written to disk, for the command line."""
    model = tmp_path / 'decay.pop'
    model.write_text(DECAY_MODEL)
    props = tmp_path / 'decay.prop'
    props.write_text(DECAY_PROPERTIES)
    return model, props
