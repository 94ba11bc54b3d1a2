"""Cylindrical Bessel and Hankel functions of integer order, real positive argument.

Thin, domain-checked wrappers over :mod:`scipy.special`. Everything is
vectorized: ``n`` and ``x`` broadcast against each other.
"""

import numpy as np
from scipy import special

from .errors import DomainError

MAX_ORDER = 64


def _check(n, x, max_order):
    n = np.asarray(n)
    x = np.asarray(x, dtype=float)
    if not np.issubdtype(n.dtype, np.integer):
        if not np.all(np.equal(np.mod(n, 1), 0)):
            raise DomainError("order must be an integer")
        n = n.astype(int)
    if np.any(n < 0) or np.any(n > max_order):
        raise DomainError(f"order out of range [0, {max_order}]")
    if np.any(~(x > 0)) or np.any(~np.isfinite(x)):
        raise DomainError("argument must be finite and strictly positive")
    return n, x


def _scalar(v):
    return v.item() if isinstance(v, np.ndarray) and v.ndim == 0 else v


def bessel_j(n, x, max_order=MAX_ORDER):
    """J_n(x) for integer ``0 <= n <= max_order`` and ``x > 0``."""
    n, x = _check(n, x, max_order)
    return _scalar(special.jv(n, x))


def bessel_y(n, x, max_order=MAX_ORDER):
    """Y_n(x) for integer ``0 <= n <= max_order`` and ``x > 0``."""
    n, x = _check(n, x, max_order)
    return _scalar(special.yv(n, x))


def hankel(kind, n, x, max_order=MAX_ORDER):
    """Hankel function of the first (``kind=1``) or second (``kind=2``) kind.

    H2 is formed as the exact conjugate of H1 so that conjugate symmetry holds
    bit for bit.
    """
    if kind not in (1, 2):
        raise DomainError("kind must be 1 or 2")
    n, x = _check(n, x, max_order)
    h1 = special.jv(n, x) + 1j * special.yv(n, x)
    return _scalar(h1 if kind == 1 else np.conj(h1))


def hankel1_signed(n, x):
    """H1_n(x) for any integer order (negative orders via reflection), no checks.

    Used internally by the modal series, which needs orders of both signs.
    """
    n = np.asarray(n)
    return special.hankel1(np.abs(n), x) * np.where((n < 0) & (n % 2 == 1), -1.0, 1.0)


def bessel_j_signed(n, x):
    n = np.asarray(n)
    return special.jv(np.abs(n), x) * np.where((n < 0) & (n % 2 == 1), -1.0, 1.0)


def hankel1p_signed(n, x):
    """Derivative of H1_n at x from the recurrence (H_{n-1} - H_{n+1}) / 2."""
    n = np.asarray(n)
    return 0.5 * (hankel1_signed(n - 1, x) - hankel1_signed(n + 1, x))


def bessel_jp_signed(n, x):
    n = np.asarray(n)
    return 0.5 * (bessel_j_signed(n - 1, x) - bessel_j_signed(n + 1, x))
