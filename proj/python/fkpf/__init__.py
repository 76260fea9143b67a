"""Feynman-Kac Monte Carlo engine and exact-diagonalization oracle."""

from ._fkpf import (
    Error,
    IOError,
    ResourceLimit,
    SchemaError,
    compare,
    config_hash,
    gmm_element,
    heat_kernel,
    run,
    run_text,
    selftest,
    spectrum,
    version,
    w_kernel,
    w_star,
)

__version__ = version()

__all__ = [
    "Error",
    "IOError",
    "ResourceLimit",
    "SchemaError",
    "compare",
    "config_hash",
    "gmm_element",
    "heat_kernel",
    "run",
    "run_text",
    "selftest",
    "spectrum",
    "version",
    "w_kernel",
    "w_star",
]
