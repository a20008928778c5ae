"""
Configuration Module

Loads numerical, simulation and output settings from environment variables with sensible defaults.
"""

import os
from typing import Dict, Any, Optional
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Adaptive quadrature settings
QUADRATURE = {
    "abs_tol": float(os.getenv("MTF_QUAD_ABS_TOL", "1e-10")),
    "rel_tol": float(os.getenv("MTF_QUAD_REL_TOL", "1e-10")),
    "max_depth": int(os.getenv("MTF_QUAD_MAX_DEPTH", "60")),
}

# Monotone inversion settings
INVERSION = {
    "tol": float(os.getenv("MTF_INVERSION_TOL", "1e-13")),
    "max_iter": int(os.getenv("MTF_INVERSION_MAX_ITER", "200")),
    "quantile_cap": float(os.getenv("MTF_QUANTILE_CAP", "1e-12")),  # capped at F^-1(1 - cap)
}

# Exact finite-n oracle settings
EXACT = {
    "max_n": int(os.getenv("MTF_EXACT_MAX_N", "64")),
    "truncation": float(os.getenv("MTF_EXACT_TRUNCATION", "1e-12")),
    "panel_levels": [float(v) for v in os.getenv("MTF_EXACT_PANEL_LEVELS", "0.5,0.1,0.01").split(",")],
}

# Monte-Carlo settings
SIMULATION = {
    "chunk_size": int(os.getenv("MTF_CHUNK_SIZE", "1024")),
    "workers": int(os.getenv("MTF_WORKERS", "1")),
    "default_m": int(os.getenv("MTF_DEFAULT_M", "100000")),
    "default_seed": int(os.getenv("MTF_DEFAULT_SEED", "20240101")),
}

# Statistics settings
STATS = {
    "tv_bins": int(os.getenv("MTF_TV_BINS", "200")),
    "dkw_confidence": float(os.getenv("MTF_DKW_CONFIDENCE", "0.99")),
    "w1_quantile_points": int(os.getenv("MTF_W1_QUANTILE_POINTS", "100000")),
    "ks_threshold": float(os.getenv("MTF_KS_THRESHOLD", "0.02")),
    "tv_threshold": float(os.getenv("MTF_TV_THRESHOLD", "0.05")),
    "pac_agreement": float(os.getenv("MTF_PAC_AGREEMENT", "1e-6")),
}

# Output settings
OUTPUT = {
    "dir": os.getenv("MTF_OUTPUT_DIR", "results"),
}

# Metrics settings
METRICS = {
    "textfile": os.getenv("MTF_METRICS_FILE", ""),
}

# Logging settings
LOGGING = {
    "level": os.getenv("LOG_LEVEL", "INFO"),
    "format": os.getenv("LOG_FORMAT", "%(asctime)s - %(name)s - %(levelname)s - %(message)s"),
}


# Helper function to get nested config
def get_config(path: str, default: Any = None) -> Any:
    """
    Get a configuration value by dot notation path
    Example: get_config("EXACT.max_n") returns the exact oracle size cap
    """
    config: Dict[str, Optional[Dict[str, Any]]] = {
        "QUADRATURE": QUADRATURE,
        "INVERSION": INVERSION,
        "EXACT": EXACT,
        "SIMULATION": SIMULATION,
        "STATS": STATS,
        "OUTPUT": OUTPUT,
        "METRICS": METRICS,
        "LOGGING": LOGGING,
    }

    parts = path.split(".")
    result: Any = config

    try:
        for part in parts:
            result = result[part]
        return result
    except (KeyError, TypeError):
        return default
