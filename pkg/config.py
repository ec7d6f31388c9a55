import os

from dotenv import load_dotenv

load_dotenv()

# --- CONFIG ---
JOBS = int(os.getenv("HRST_JOBS", "1"))
SAMPLE_CAP = float(os.getenv("HRST_SAMPLE_CAP", "1e7"))
LOG_LEVEL = os.getenv("HRST_LOG_LEVEL", "INFO").upper()
SEED = int(os.getenv("HRST_SEED", "0"))
SHELL = float(os.getenv("HRST_SHELL", "1.0"))

if JOBS < 1:
    raise ValueError(f"❌ HRST_JOBS must be >= 1, got {JOBS}")
if SAMPLE_CAP <= 0:
    raise ValueError(f"❌ HRST_SAMPLE_CAP must be positive, got {SAMPLE_CAP}")
if SHELL <= 0:
    raise ValueError(f"❌ HRST_SHELL must be positive, got {SHELL}")
