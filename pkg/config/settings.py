"""
Configuration settings for the Population Model Checker
"""
import os
from pathlib import Path

from dotenv import load_dotenv

# Project root directory
PROJECT_ROOT = Path(__file__).parent.parent

load_dotenv(PROJECT_ROOT / '.env')

# ODE solver defaults (embedded Dormand-Prince 5(4))
SOLVER_CONFIG = {
    'rtol': float(os.getenv('POPCHECK_RTOL', 1e-6)),
    'atol': float(os.getenv('POPCHECK_ATOL', 1e-9)),
    'safety': 0.9,
    'min_factor': 0.2,
    'max_factor': 10.0,
    'max_steps': 1_000_000,
    # PI controller exponents (alpha, beta) for a 5(4) pair
    'pi_alpha': 0.7 / 5,
    'pi_beta': 0.4 / 5,
    'covariance_clip': 1e-8,
}

# Population model validation
MODEL_CONFIG = {
    'density_sizes': (10**3, 10**6),
    'density_samples': 32,
    'density_tolerance': 1e-9,
    'negative_rate_warning': 1e-12,
    'density_seed': 20240617,
}

# Individual-agent path probabilities
CURVE_CONFIG = {
    'grid_points': 1000,
    'window_fraction': 0.1,        # T' = T / 10
    'window_floor_fraction': 1e-4,  # T' >= T / 10^4
    'bisection_tolerance': 1e-9,
    'tangency_tolerance': 1e-4,
    'clamp_warning': 1e-6,
    'row_sum_tolerance': 1e-6,
    'nested_grid_points': 200,
    'moment_order': 4,
    'ssa_grid_points': 11,
}

# Collective (global) properties
COLLECTIVE_CONFIG = {
    'finite_size_correction': True,
    'max_state_moment_order': 4,
    'closure_offset': 1,
}

# Maximum-entropy reconstruction
MAXENT_CONFIG = {
    'quadrature_nodes': 200,
    'max_quadrature_doublings': 6,
    'quadrature_tolerance': 1e-8,
    'max_iterations': 200,
    'gradient_tolerance': 1e-8,
    'armijo_c': 1e-4,
    'support_sigmas': 10.0,
}

# Stochastic simulation and exact transient analysis
SSA_CONFIG = {
    'runs': int(os.getenv('POPCHECK_SSA_RUNS', 10000)),
    'seed': int(os.getenv('POPCHECK_SEED', 42)),
    'confidence': 0.95,
    'uniformization_factor': 1.05,
    'poisson_truncation': 1e-10,
    'state_cap': 200_000,
}

# Worker pool for sweeps and independent checks
WORKER_CONFIG = {
    'workers': int(os.getenv('POPCHECK_WORKERS', os.cpu_count() or 1)),
}

# Input/output locations
DATA_CONFIG = {
    'models_dir': PROJECT_ROOT / 'models',
    'properties_dir': PROJECT_ROOT / 'properties',
    'output_dir': Path(os.getenv('POPCHECK_OUTPUT_DIR', PROJECT_ROOT / 'output')),
    'logs_dir': PROJECT_ROOT / 'logs',
}

# Logging Configuration
LOGGING_CONFIG = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'standard': {
            '()': 'colorlog.ColoredFormatter',
            'format': '%(log_color)s%(asctime)s - %(name)s - %(levelname)s%(reset)s - %(message)s',
        },
        'detailed': {
            'format': '%(asctime)s - %(name)s - %(levelname)s - %(filename)s:%(lineno)d - %(message)s'
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'level': os.getenv('POPCHECK_LOG_LEVEL', 'INFO'),
            'formatter': 'standard',
            'stream': 'ext://sys.stderr',
        },
        'file': {
            'class': 'logging.handlers.RotatingFileHandler',
            'level': 'DEBUG',
            'formatter': 'detailed',
            'filename': str(DATA_CONFIG['logs_dir'] / 'popcheck.log'),
            'maxBytes': 10485760,  # 10MB
            'backupCount': 5,
        },
    },
    'loggers': {
        '': {
            'handlers': ['console', 'file'],
            'level': 'DEBUG',
            'propagate': True,
        },
    },
}

# Methods accepted by each CLI verb
VERB_METHODS = {
    'fluid': ('fluid', 'cla', 'moments'),
    'check-local': ('fluid', 'moments', 'ssa'),
    'check-global': ('cla', 'moments', 'maxent', 'ssa', 'exact'),
    'simulate': ('ssa',),
    'sweep': ('fluid', 'moments', 'cla', 'maxent', 'ssa', 'exact'),
}
