import os

from dotenv import load_dotenv

load_dotenv()

# Residual tolerances (relative to operand norms)
ALG_TOL = float(os.getenv("ALG_TOL", "1e-9"))
UNIT_TOL = float(os.getenv("UNIT_TOL", "1e-10"))
ITER_TOL = float(os.getenv("ITER_TOL", "1e-6"))

# Numerical rank threshold, relative to the largest singular value
RANK_RTOL = float(os.getenv("RANK_RTOL", "1e-8"))

# Condition-number guard for frame Grams and Gram operators
COND_LIMIT = float(os.getenv("COND_LIMIT", "1e8"))

# Instance ceilings
MAX_AMBIENT_DIM = int(os.getenv("MAX_AMBIENT_DIM", "64"))
MAX_AMPLIFICATION = int(os.getenv("MAX_AMPLIFICATION", "4"))

# Sampling budgets
NORM_SAMPLES = int(os.getenv("NORM_SAMPLES", "10000"))
NORM_RESTARTS = int(os.getenv("NORM_RESTARTS", "8"))
NORM_RTOL = float(os.getenv("NORM_RTOL", "1e-2"))
POSITIVITY_SAMPLES = int(os.getenv("POSITIVITY_SAMPLES", "1000"))

# Default seed for generation and sampling checks
DEFAULT_SEED = int(os.getenv("MORITA_LAB_SEED", "1"))

# Rejection sampling retries
MAX_RETRIES = int(os.getenv("MAX_RETRIES", "5"))

# Concurrency
WORKERS = int(os.getenv("WORKERS", "4"))

# Where bundles and reports are written
INSTANCE_DIR = os.getenv("INSTANCE_DIR", "instances")

# Report schema version
REPORT_SCHEMA = 1

# Logging
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
