import os
from dotenv import load_dotenv


load_dotenv()

# section sizes
DEFAULT_WINDOW = int(os.getenv("LAB_WINDOW", "64"))
EXACT_WINDOW = int(os.getenv("LAB_EXACT_WINDOW", "32"))

# norm computation
DENSE_SVD_LIMIT = int(os.getenv("LAB_DENSE_SVD_LIMIT", "512"))
POWER_ITERATION_TOL = float(os.getenv("LAB_POWER_TOL", "1e-12"))
POWER_ITERATION_MAX_ITER = int(os.getenv("LAB_POWER_MAX_ITER", "10000"))

# runs
SEED = int(os.getenv("LAB_SEED", "0"))
WORKERS = int(os.getenv("LAB_WORKERS", "4"))
TOLERANCE = float(os.getenv("LAB_TOLERANCE", "1e-12"))

LOG_LEVEL = os.getenv("LAB_LOG_LEVEL", "INFO").upper()
