import os
from pathlib import Path
from dotenv import load_dotenv

# Package paths
PACKAGE_ROOT = Path(__file__).resolve().parents[1]
PROJECT_ROOT = PACKAGE_ROOT.parent

# Load environment variables from root .env file
load_dotenv(PROJECT_ROOT / '.env')

DATA_DIR = Path(os.getenv("FSA_AOI_DATA_DIR", str(PACKAGE_ROOT / "data")))
FIGURES_PATH = DATA_DIR / "figures.json"
OUTPUT_DIR = os.getenv("FSA_AOI_OUTPUT_DIR", "results")

# Runtime
DEFAULT_THREADS = int(os.getenv("FSA_AOI_THREADS", "1"))
LOG_LEVEL = os.getenv("FSA_AOI_LOG_LEVEL", "INFO").upper()
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# Numerical tolerances
QUAD_ABS_TOL = float(os.getenv("FSA_AOI_QUAD_ABS_TOL", "1e-9"))
QUAD_REL_TOL = float(os.getenv("FSA_AOI_QUAD_REL_TOL", "1e-7"))
QUAD_MAX_SUBDIVISIONS = int(os.getenv("FSA_AOI_QUAD_MAX_SUBDIVISIONS", "200"))
SERIES_TERM_TOL = float(os.getenv("FSA_AOI_SERIES_TERM_TOL", "1e-12"))
SERIES_MAX_TERMS = int(os.getenv("FSA_AOI_SERIES_MAX_TERMS", "200"))
SERIES_DIVERGENCE_GUARD = 1e12

# Inner s-integral of the g_theta kernels: geometric panels toward s=0
S_GRADING_RATIO = 0.2
S_GRADING_LEVELS = 18
S_NODES_PER_PANEL = 12

# Outer z-integrals: probe points for divergent exp(+...) growth
DIVERGENCE_PROBE_Z = (40.0, 80.0)

# Simulation defaults
BURN_IN_SUCCESSES = 100
CI_BATCHES = 100
CI_Z_SCORE = 1.96
INFINITE_SAMPLE_LIMIT = 0.2
MIN_EXPECTED_INTERFERERS = 50
WINDOW_SPACING_MULTIPLE = 15.0
WINDOW_TAIL_TOLERANCE = 0.005
CELLULAR_WINDOW_SPACINGS = 20.0
FRAME_BLOCK = 512
MAX_CELLULAR_RESAMPLES = 100

# Analytics defaults
DEFAULT_F_MAX = 200
AGREEMENT_TOLERANCE = 0.03

# Output
CSV_FLOAT_FORMAT = "%.17g"
INF_TOKEN = "inf"

# Exit codes
EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_ERROR = 3
EXIT_IO_ERROR = 4
