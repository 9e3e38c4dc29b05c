"""
Global Configuration for Application
"""
import os
import logging

# Get configuration from environment
LOGGING_LEVEL = getattr(logging, os.getenv("LOGGING_LEVEL", "INFO").upper(), logging.INFO)

# Where presets write their artifacts when --out is not given
OUTPUT_DIR = os.getenv("TIMEBIN_OUTPUT_DIR", "results")

# Seed used when neither the config file nor --seed sets one
DEFAULT_SEED = int(os.getenv("TIMEBIN_DEFAULT_SEED", "20020101"))

# Number of joblib workers sharing a Monte Carlo run; results do not depend on it
CHUNKS = int(os.getenv("TIMEBIN_CHUNKS", "1"))

# Pair number series are summed up to this many pairs per pulse
SERIES_N_MAX = int(os.getenv("SERIES_N_MAX", "20"))

JSON_SORT_KEYS = False
