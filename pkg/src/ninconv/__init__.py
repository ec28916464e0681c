"""Pooling-free multi-kernel inception networks for image-to-image tasks, in NumPy."""

from .graph import NetworkSpec, ParameterStore, backward, count_parameters, forward, gradient_check
from .inception import ArchitectureSpec, build_inception_module, build_network, make_variant, receptive_field

__version__ = "0.1.0"

__all__ = [
    "ArchitectureSpec",
    "NetworkSpec",
    "ParameterStore",
    "backward",
    "build_inception_module",
    "build_network",
    "count_parameters",
    "forward",
    "gradient_check",
    "make_variant",
    "receptive_field",
]
