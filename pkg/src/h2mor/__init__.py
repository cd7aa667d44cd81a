"""H2-optimal model order reduction: IRKA, reduced IRKA and its truncated variant."""

from ._accel import backend
from .errors import H2MORError
from .irka import InitOption, IrkaConfig, ReducedModel, ReductionResult, compute_residue_dirs, irka, project
from .kernels import SOLVE_COUNTER, solve_count
from .krylov import RKBasis, ShiftSet, TangentSet, build_rk_basis, build_rk_bases, expand_basis, shift_distance, truncate_window
from .lti import DescriptorSystem, TransferSample, eval_transfer, is_c_stable, poles, transfer
from .rirka import RirkaConfig, RirkaInit, rirka

__version__ = "0.1.0"
