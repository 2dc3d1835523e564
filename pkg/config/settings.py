import os
from dotenv import load_dotenv

load_dotenv()

# Runtime Configuration
SMALLNOISE_JOBS = int(os.getenv('SMALLNOISE_JOBS', '0')) or None
LOG_LEVEL = os.getenv('SMALLNOISE_LOG_LEVEL', 'INFO')
TOOL_VERSION = '0.4.0'

# Integrator Configuration
DEFAULT_STEPS = int(os.getenv('SMALLNOISE_STEPS', '512'))
MIN_STEPS = 16
OVERFLOW_GUARD = 1e12
TOL_CONSERVE = float(os.getenv('SMALLNOISE_TOL_CONSERVE', '1e-8'))
DEFAULT_HORIZON = 1.0

# Shooting Configuration
TOL_BVP = float(os.getenv('SMALLNOISE_TOL_BVP', '1e-9'))
TOL_DEDUP = 1e-5
TOL_ENERGY_TIE = 1e-6
CONTINUUM_THRESHOLD = 8
NEWTON_MAX_ITER = 60
NEWTON_MAX_HALVINGS = 12
NEWTON_STEP_CAP = 10.0
NEWTON_COARSEN = 4
NEWTON_COARSE_TOL = 1e-7
NEWTON_POLISH_ITER = 8
NEWTON_STALL_RATIO = 0.9
NEWTON_STALL_LIMIT = 6
MULTISTART_SOBOL = 64
MULTISTART_NORMAL = 64
MULTISTART_BOX_FACTOR = 8.0
MULTISTART_CHUNK = 256
DEFAULT_SEED = int(os.getenv('SMALLNOISE_SEED', '20240601'))

# Non-degeneracy Thresholds
TOL_SV = 1e-7
TOL_FOCAL = 1e-6
UNDECIDED_BAND = 10.0
TOL_SYMMETRY = 1e-10
MAX_BRACKET_DEPTH = 4
HESSIAN_GRID = 32
HESSIAN_SUBSTEPS = 4
HESSIAN_FD_STEP = 1e-4
TOL_EIG = 1e-3

# Expansion Configuration
FD_GRADIENT_STEP = 1e-4
BRANCH_SWITCH_FACTOR = 10.0
TOL_GRADIENT_AGREEMENT = 1e-4

# Monte Carlo Configuration
DEFAULT_EPSILONS = [0.4, 0.3, 0.2, 0.15, 0.1]
DEFAULT_PATHS = 100_000
MIN_PATHS = 1000
DEFAULT_EULER_STEPS = 400
MC_BLOCK_SIZE = int(os.getenv('SMALLNOISE_MC_BLOCK', '8192'))
MC_STREAM_BLOCK = 1024
BOOTSTRAP_RESAMPLES = 100
KDE_REACH = 6.0
MAX_CENSORED_FRACTION = 1e-3
STDERR_WARN_FRACTION = 0.1
HORMANDER_DIAG_DEPTH = 3
