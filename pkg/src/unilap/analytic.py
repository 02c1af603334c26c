"""Closed-form spectra and ground states on the unit square.

Used by the convergence command and the acceptance checks for the four
boundary conditions whose exact solutions are available.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError

__all__ = ["exact_eigenvalues", "ground_state", "HAS_EXACT"]

HAS_EXACT = ("dirichlet", "neumann", "periodic", "quasiperiodic")


def exact_eigenvalues(bc: str, count: int, alpha: float | None = None) -> np.ndarray:
    """First ``count`` exact eigenvalues, ascending, with multiplicity."""
    if count < 1:
        raise ConfigurationError(f"count must be positive, got {count}")
    pi2 = np.pi**2
    modes = int(np.ceil(np.sqrt(count))) + 3
    if bc == "dirichlet":
        ij = np.arange(1, modes + 1)
        vals = pi2 * (ij[:, None] ** 2 + ij[None, :] ** 2)
    elif bc == "neumann":
        ij = np.arange(0, modes + 1)
        vals = pi2 * (ij[:, None] ** 2 + ij[None, :] ** 2)
    elif bc == "periodic":
        ij = np.arange(-modes, modes + 1)
        vals = 4.0 * pi2 * (ij[:, None] ** 2 + ij[None, :] ** 2)
    elif bc == "quasiperiodic":
        if alpha is None:
            raise ConfigurationError("quasiperiodic spectrum needs the phase alpha")
        m = np.arange(-modes, modes + 1)
        k = np.arange(-modes, modes + 1)
        vals = (2.0 * np.pi * m[:, None]) ** 2 + (2.0 * np.pi * k[None, :] - alpha) ** 2
    else:
        raise ConfigurationError(
            f"no analytic reference for boundary condition {bc!r}; "
            f"available: {', '.join(HAS_EXACT)}"
        )
    flat = np.sort(vals.ravel())
    if count > len(flat):
        raise ConfigurationError(f"count {count} too large for the mode table")
    return flat[:count]


def ground_state(bc: str, alpha: float | None = None):
    """Callable (x, y) -> complex values of the exact fundamental state."""
    if bc == "dirichlet":
        return lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y)
    if bc in ("neumann", "periodic"):
        return lambda x, y: np.ones_like(np.asarray(x, dtype=float))
    if bc == "quasiperiodic":
        if alpha is None:
            raise ConfigurationError("quasiperiodic ground state needs the phase alpha")
        return lambda x, y: np.exp(-1j * alpha * np.asarray(y, dtype=float))
    raise ConfigurationError(
        f"no analytic ground state for boundary condition {bc!r}; "
        f"available: {', '.join(HAS_EXACT)}"
    )
