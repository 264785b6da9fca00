"""
nflowkit
"""

import logging
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("nflowkit")
except PackageNotFoundError:
    # Package is not installed
    __version__ = "unknown"

logging.getLogger(__name__).addHandler(logging.NullHandler())

from .construct import (  # noqa: E402
    activation_as_flow,
    assemble_uap_skeleton,
    build_double_width,
)
from .convops import (  # noqa: E402
    conv_apply,
    conv_flow_rhs,
    conv_network_forward,
    emulate_dense,
)
from .core import (  # noqa: E402
    ActivationFamily,
    ChannelKind,
    LatentState,
    activate,
    leaky_relu_identity_check,
    sup_norms,
)
from .discretize import (  # noqa: E402
    euler_resnet,
    measure_discretization_error,
    merge_affine,
    solve_implicit_step,
    split_plain,
)
from .flow import FlowProblem, gronwall_bound, integrate_reference, rhs  # noqa: E402
from .io_model import load, read_model, save, write_model  # noqa: E402
from .network import Layer, Network, forward  # noqa: E402
from .operator import (  # noqa: E402
    BasisFrame,
    OperatorModel,
    decode,
    encode,
    operator_forward,
    truncation_error,
)
from .params import (  # noqa: E402
    ParamPath,
    ParamSegment,
    Structure,
    path_sup_norm,
    perturb,
    time_correct,
)
from .train import fit, fit_operator  # noqa: E402

__all__ = [
    "ActivationFamily",
    "ChannelKind",
    "LatentState",
    "activate",
    "sup_norms",
    "leaky_relu_identity_check",
    "Structure",
    "ParamSegment",
    "ParamPath",
    "path_sup_norm",
    "perturb",
    "time_correct",
    "FlowProblem",
    "rhs",
    "integrate_reference",
    "gronwall_bound",
    "solve_implicit_step",
    "euler_resnet",
    "split_plain",
    "merge_affine",
    "measure_discretization_error",
    "Layer",
    "Network",
    "forward",
    "save",
    "load",
    "read_model",
    "write_model",
    "conv_apply",
    "emulate_dense",
    "conv_flow_rhs",
    "conv_network_forward",
    "BasisFrame",
    "OperatorModel",
    "encode",
    "decode",
    "truncation_error",
    "operator_forward",
    "build_double_width",
    "activation_as_flow",
    "assemble_uap_skeleton",
    "fit",
    "fit_operator",
]
