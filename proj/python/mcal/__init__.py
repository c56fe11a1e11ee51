"""Post-hoc affine logit calibration for missingness bias.

Thin re-export of the compiled `_mcal` extension: calibrator fitting,
the missingness-bias metric, ablation tooling, LIME/KernelSHAP/exact
Shapley explainers, faithfulness metrics, and the experiment harness.
"""

from ._mcal import *  # noqa: F401,F403
from ._mcal import __doc__ as _core_doc  # noqa: F401
from ._mcal import __version__  # noqa: F401
