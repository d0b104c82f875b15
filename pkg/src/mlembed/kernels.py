"""Kernel backend selection.

The compiled extension is used when it imports; otherwise (or when the
environment variable ``MLEMBED_PURE_PYTHON`` is set to a non-empty value
other than ``0``) the pure-Python twins are used.
"""

import os

_force_pure = os.environ.get("MLEMBED_PURE_PYTHON", "") not in ("", "0")

if _force_pure:
    from . import _pykernels as impl
else:
    try:
        from . import _ckernels as impl
    except ImportError:  # extension not built
        from . import _pykernels as impl

BACKEND = impl.BACKEND
HAVE_OPENMP = impl.HAVE_OPENMP

novel_sweep = impl.novel_sweep
novel_sweep_parallel = impl.novel_sweep_parallel
random_sweep = impl.random_sweep
anti_sweep = impl.anti_sweep
contract = impl.contract
sgd_epoch = impl.sgd_epoch
logreg_epoch = impl.logreg_epoch
logreg_pairs_epoch = impl.logreg_pairs_epoch
louvain_sweep = impl.louvain_sweep
max_threads = impl.max_threads


def backends():
    """All importable backends, compiled first."""
    from . import _pykernels

    found = []
    try:
        from . import _ckernels

        found.append(_ckernels)
    except ImportError:
        pass
    found.append(_pykernels)
    return found
