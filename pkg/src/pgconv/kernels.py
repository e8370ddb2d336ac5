"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the NumPy
fallback takes over. Set ``PGCONV_KERNELS=python`` to force the fallback.
"""
import os

from . import _kernels_py

if os.environ.get("PGCONV_KERNELS", "").lower() == "python":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = _impl.BACKEND

project_simplex = _impl.project_simplex
project_simplex_rows = _impl.project_simplex_rows
damped_mw = _impl.damped_mw
damped_mw_rows = _impl.damped_mw_rows
entropy = _impl.entropy
logsumexp = _impl.logsumexp
mwu_update = _impl.mwu_update
omwu_update = _impl.omwu_update
mwu_trajectory = _impl.mwu_trajectory
omwu_trajectory = _impl.omwu_trajectory
qre_gap = _impl.qre_gap
qre_residual = _impl.qre_residual
omwu_solve = _impl.omwu_solve
one_step_value = _impl.one_step_value
game_q_from_v = _impl.game_q_from_v
actor_critic_loop = _impl.actor_critic_loop
value_iteration = _impl.value_iteration

__all__ = [
    "BACKEND", "project_simplex", "project_simplex_rows", "damped_mw", "damped_mw_rows",
    "entropy", "logsumexp", "mwu_update", "omwu_update", "mwu_trajectory",
    "omwu_trajectory", "qre_gap", "qre_residual", "omwu_solve", "one_step_value",
    "game_q_from_v", "actor_critic_loop", "value_iteration",
]
