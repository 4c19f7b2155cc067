"""Backend-dispatched numerical kernels.

Importing this package binds the kernel functions to the backend chosen by
``confpriors._backend`` (numba when available, pure numpy otherwise; override
with the ``CONFPRIORS_BACKEND`` environment variable).
"""

from .._backend import BACKEND
from . import _spec as spec
from . import _numpy

if BACKEND == "numba":
    from . import _numba as _impl
else:
    _impl = _numpy

log_softmax2d = _impl.log_softmax2d
forward_cached = _impl.forward_cached
mlp_log_probs = _impl.mlp_log_probs
pred_value_grad = _impl.pred_value_grad
posterior_value_and_grad = _impl.posterior_value_and_grad
flow_run = _impl.flow_run

__all__ = [
    "BACKEND",
    "spec",
    "log_softmax2d",
    "forward_cached",
    "mlp_log_probs",
    "pred_value_grad",
    "posterior_value_and_grad",
    "flow_run",
]
