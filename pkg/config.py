"""
Configuration for the cavity-QED figure-of-merit toolkit
"""
import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# ==========================================
# SYSTEM PATHS CONFIGURATION
# ==========================================
# Project root directory (absolute path to the folder containing this config.py)
PROJECT_ROOT = os.path.dirname(os.path.abspath(__file__))

# Default output directory for CLI artifacts (overridden by --out)
OUTPUT_DIR = os.getenv("CQED_FOM_OUTPUT_DIR", "output")


# Helper to resolve relative paths to project root
def resolve_path(relative_path):
    if not relative_path:
        return relative_path
    if os.path.isabs(relative_path):
        return relative_path
    return os.path.join(PROJECT_ROOT, relative_path)


# ==========================================
# NUMERICS CONFIGURATION
# ==========================================
# Fock truncation; single-excitation dynamics never leave n <= 1
DEFAULT_N_MAX = int(os.getenv("CQED_FOM_N_MAX", "1"))

# Integrator tolerance (local error for the adaptive backend, invariant checks for both)
DEFAULT_TOL = float(os.getenv("CQED_FOM_TOL", "1e-9"))

# Hilbert dimension up to which the matrix-exponential backend is chosen by "auto"
EXACT_BACKEND_MAX_DIM = int(os.getenv("CQED_FOM_EXACT_MAX_DIM", "100"))

# Time grid: points per inverse Liouvillian rate and geometric growth of late steps
SAMPLES_PER_RATE = int(os.getenv("CQED_FOM_SAMPLES_PER_RATE", "16"))
GRID_GROWTH = float(os.getenv("CQED_FOM_GRID_GROWTH", "1.08"))

# Emission horizon: stop when tr[(a†a + σ₊σ₋)ρ] drops below the cutoff,
# never integrate past HORIZON_CAP_FACTOR / min(κ, γ)
EXCITATION_CUTOFF = 1e-6
RESIDUAL_LIMIT = 1e-4
HORIZON_CAP_FACTOR = 50.0

# ==========================================
# OPTICS DEFAULTS (SiV in diamond)
# ==========================================
DEFAULT_WAVELENGTH_NM = float(os.getenv("CQED_FOM_WAVELENGTH_NM", "737"))
DEFAULT_REFRACTIVE_INDEX = float(os.getenv("CQED_FOM_REFRACTIVE_INDEX", "2.40"))
DEFAULT_DIPOLE_DEBYE = float(os.getenv("CQED_FOM_DIPOLE_DEBYE", "2.31"))
DEFAULT_OVERLAP_XI = 1.0

# ==========================================
# CONCURRENCY
# ==========================================
# Worker threads for sweeps; the CLI flag --threads takes precedence
MAX_PARALLEL_THREADS = int(os.getenv("CQED_FOM_THREADS", "1"))

# ==========================================
# LOGGING CONFIGURATION
# ==========================================
LOG_DIR = resolve_path(os.getenv("CQED_FOM_LOG_DIR", os.path.join(OUTPUT_DIR, "logs")))
CONSOLE_LOG_LEVEL = os.getenv("CQED_FOM_LOG", "INFO")
FILE_LOG_LEVEL = "DEBUG"
LOG_MAX_BYTES = 10 * 1024 * 1024  # 10MB
LOG_BACKUP_COUNT = 5
