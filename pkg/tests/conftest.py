"""Shared test setup.

Thread pinning must happen before numpy loads so that BLAS reductions are
single-threaded and float sums associate the same way on every run; the
determinism tests compare artifact bytes across reruns.
"""

import os

for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")
