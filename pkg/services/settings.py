from __future__ import annotations
import os
from dotenv import load_dotenv

load_dotenv()

THREADS = max(1, int(os.getenv("SPECREG_THREADS", "1")))
LOG_LEVEL = os.getenv("SPECREG_LOG_LEVEL", "INFO").upper()

# node caps for dense materialization
DENSE_CAP = int(os.getenv("SPECREG_DENSE_CAP", "2000"))
ORACLE_CAP = int(os.getenv("SPECREG_ORACLE_CAP", "500"))

TOL = float(os.getenv("SPECREG_TOL", "1e-10"))
# vanishing random draws tolerated per Lanczos restart
MAX_RESTARTS = int(os.getenv("SPECREG_MAX_RESTARTS", "5"))
