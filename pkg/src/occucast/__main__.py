import os
import sys

# Keep BLAS single-threaded: the recurrence is sequential anyway, and the
# per-step matrices are too small for threads to help. Must happen before
# numpy loads.
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

from .cli import main  # noqa: E402

sys.exit(main())
