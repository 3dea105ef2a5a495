"""Bergman kernels, their derivatives, normalized kernels and special functions."""

from .bergman import (
    BergmanKernel,
    KernelDerivatives,
    deflated,
    kernel_derivs,
    kernel_eval,
    kernel_for,
    normalized_P,
    radial_kernel,
    su2_kernel,
)
from .logcomplex import LogComplex
from .special import G, G1, G2, dilog

__all__ = [
    "BergmanKernel", "KernelDerivatives", "LogComplex", "G", "G1", "G2", "deflated", "dilog",
    "kernel_derivs", "kernel_eval", "kernel_for", "normalized_P", "radial_kernel", "su2_kernel",
]
