"""Special functions behind the separation probability.

The regularized incomplete beta function is evaluated with the modified Lentz
continued fraction (Numerical Recipes ``betacf``), switching to the symmetric
form ``1 - I(1 - x; b, a)`` when ``x >= (a + 1) / (a + b + 2)``. Every function
accepts scalars or numpy arrays; scalars in, floats out.

All internal arithmetic is float64.
"""

from __future__ import annotations

import logging as log
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import gammaln

from fstat_loss.embedding.errors import DomainError, SingularityError

ArrayLike = Union[float, np.ndarray]

CF_TOLERANCE = 1e-14
CF_MAX_ITERATIONS = 300
_TINY = 1e-300


@dataclass(frozen=True)
class BetaParams:
    """Shape parameters ``(a, b)`` of a beta distribution.

    >>> BetaParams(0.5, 1.0)
    BetaParams(a=0.5, b=1.0)
    >>> BetaParams(0.0, 1.0)
    Traceback (most recent call last):
        ...
    fstat_loss.embedding.errors.DomainError: [BetaParams] Shape parameters must be finite and positive: a=0.0, b=1.0
    """

    a: float
    b: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b) and self.a > 0 and self.b > 0):
            raise DomainError(f"[BetaParams] Shape parameters must be finite and positive: a={self.a}, b={self.b}")


def _output(value: np.ndarray, scalar: bool) -> ArrayLike:
    return float(value) if scalar else value


def log_gamma(x: ArrayLike) -> ArrayLike:
    """Natural logarithm of the gamma function.

    Args:
        x (ArrayLike): positive, finite argument(s).

    Raises:
        DomainError: if any argument is non-positive or non-finite.

    Returns:
        ArrayLike: ``ln Γ(x)``.

    Example:
        >>> from fstat_loss.embedding.specfun import log_gamma
        >>> abs(log_gamma(1.0)) < 1e-12, abs(log_gamma(2.0)) < 1e-12
        (True, True)
        >>> round(log_gamma(0.5), 10)
        0.5723649429
    """
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise DomainError(f"[log_gamma] Argument must be finite and positive: {x}")
    return _output(gammaln(x), scalar)


def log_beta(p: BetaParams) -> float:
    """Natural logarithm of the beta function ``ln B(a, b) = ln Γ(a) + ln Γ(b) - ln Γ(a + b)``.

    Example:
        >>> from fstat_loss.embedding.specfun import BetaParams, log_beta
        >>> abs(log_beta(BetaParams(1.0, 1.0))) < 1e-12
        True
        >>> round(log_beta(BetaParams(0.5, 0.5)), 7)
        1.1447299
    """
    return log_gamma(p.a) + log_gamma(p.b) - log_gamma(p.a + p.b)


def _continued_fraction(a: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Continued fraction part of the incomplete beta function, evaluated element-wise by the modified Lentz method."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _TINY, _TINY, d)
    d = 1.0 / d
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)

    for m in range(1, CF_MAX_ITERATIONS + 1):
        m2 = 2.0 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        h = np.where(active, h * d * c, h)

        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = d * c
        h = np.where(active, h * delta, h)

        active &= np.abs(delta - 1.0) >= CF_TOLERANCE
        if not np.any(active):
            break
    else:
        log.warning(
            f"[specfun] Continued fraction did not converge in {CF_MAX_ITERATIONS} iterations "
            f"for {int(np.sum(active))} argument(s)"
        )

    return h


def _reg_inc_beta(x: np.ndarray, y: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """I(x; a, b) with ``y = 1 - x`` passed separately so that arguments close to 1 keep their precision."""
    x, y, a, b = np.broadcast_arrays(*(np.asarray(v, dtype=np.float64) for v in (x, y, a, b)))
    result = np.where(x <= 0.0, 0.0, 1.0)
    interior = (x > 0.0) & (y > 0.0)
    if not np.any(interior):
        return result

    xi, yi, ai, bi = x[interior], y[interior], a[interior], b[interior]
    log_front = gammaln(ai + bi) - gammaln(ai) - gammaln(bi) + ai * np.log(xi) + bi * np.log(yi)
    front = np.exp(log_front)
    direct = xi < (ai + 1.0) / (ai + bi + 2.0)

    values = np.empty_like(xi)
    if np.any(direct):
        values[direct] = front[direct] * _continued_fraction(ai[direct], bi[direct], xi[direct]) / ai[direct]
    if np.any(~direct):
        flipped = ~direct
        tail = _continued_fraction(bi[flipped], ai[flipped], yi[flipped])
        values[flipped] = 1.0 - front[flipped] * tail / bi[flipped]

    result[interior] = np.clip(values, 0.0, 1.0)
    return result


def _reg_inc_beta_dx(x: np.ndarray, y: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Beta density ``x^(a-1) (1-x)^(b-1) / B(a, b)``; ``inf`` where it is unbounded."""
    x, y, a, b = np.broadcast_arrays(*(np.asarray(v, dtype=np.float64) for v in (x, y, a, b)))
    with np.errstate(divide="ignore", invalid="ignore"):
        log_x_term = np.where(a == 1.0, 0.0, (a - 1.0) * np.log(x))
        log_y_term = np.where(b == 1.0, 0.0, (b - 1.0) * np.log(y))
        log_density = log_x_term + log_y_term - (gammaln(a) + gammaln(b) - gammaln(a + b))
        return np.exp(log_density)


def reg_inc_beta(x: ArrayLike, p: BetaParams) -> ArrayLike:
    """Regularized incomplete beta function ``I(x; a, b)``.

    Args:
        x (ArrayLike): argument(s) in [0, 1].
        p (BetaParams): shape parameters.

    Raises:
        DomainError: if any argument is outside [0, 1].

    Returns:
        ArrayLike: values in [0, 1], non-decreasing in ``x``.

    Example:
        >>> from fstat_loss.embedding.specfun import BetaParams, reg_inc_beta
        >>> reg_inc_beta(0.0, BetaParams(2.0, 3.0))
        0.0
        >>> round(reg_inc_beta(0.2, BetaParams(0.5, 1.0)), 7)
        0.4472136
        >>> round(reg_inc_beta(0.5, BetaParams(0.5, 0.5)), 12)
        0.5
    """
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)) or np.any((x < 0.0) | (x > 1.0)):
        raise DomainError(f"[reg_inc_beta] Argument must lie in [0, 1]: {x}")
    return _output(_reg_inc_beta(x, 1.0 - x, p.a, p.b), scalar)


def reg_inc_beta_dx(x: ArrayLike, p: BetaParams) -> ArrayLike:
    """Derivative of ``I(x; a, b)`` with respect to ``x``.

    Args:
        x (ArrayLike): argument(s) in [0, 1].
        p (BetaParams): shape parameters.

    Raises:
        DomainError: if any argument is outside [0, 1].
        SingularityError: at ``x = 0`` with ``a < 1`` or at ``x = 1`` with ``b < 1``.

    Returns:
        ArrayLike: non-negative density values.

    Example:
        >>> from fstat_loss.embedding.specfun import BetaParams, reg_inc_beta_dx
        >>> round(reg_inc_beta_dx(0.25, BetaParams(0.5, 1.0)), 12)
        1.0
        >>> round(reg_inc_beta_dx(0.3, BetaParams(2.0, 2.0)), 12)
        1.26
    """
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)) or np.any((x < 0.0) | (x > 1.0)):
        raise DomainError(f"[reg_inc_beta_dx] Argument must lie in [0, 1]: {x}")
    if (p.a < 1.0 and np.any(x == 0.0)) or (p.b < 1.0 and np.any(x == 1.0)):
        raise SingularityError(f"[reg_inc_beta_dx] Density is unbounded at the endpoint for a={p.a}, b={p.b}")
    return _output(_reg_inc_beta_dx(x, 1.0 - x, p.a, p.b), scalar)


def _validate_f_arguments(s: np.ndarray, d1, d2) -> None:
    if not np.all(np.isfinite(s)) or np.any(s < 0.0):
        raise DomainError(f"[f_cdf] Statistic must be finite and non-negative: {s}")
    if int(d1) != d1 or d1 < 1:
        raise DomainError(f"[f_cdf] Numerator degrees of freedom must be a positive integer: {d1}")
    d2 = np.asarray(d2, dtype=np.float64)
    if not np.all(np.isfinite(d2)) or np.any(d2 <= 0.0):
        raise DomainError(f"[f_cdf] Denominator degrees of freedom must be positive: {d2}")


def f_cdf(s: ArrayLike, d1: int, d2: ArrayLike) -> ArrayLike:
    """CDF of the F distribution with ``(d1, d2)`` degrees of freedom.

    ``Pr(S < s) = I(d1 s / (d1 s + d2); d1 / 2, d2 / 2)``; for class pairs ``d1 = 1`` and ``d2 = ñ``.

    Args:
        s (ArrayLike): non-negative statistic(s).
        d1 (int): numerator degrees of freedom.
        d2 (ArrayLike): denominator degrees of freedom, broadcast against ``s``.

    Raises:
        DomainError: negative or non-finite statistic, or invalid degrees of freedom.

    Returns:
        ArrayLike: probabilities in [0, 1].

    Example:
        >>> from fstat_loss.embedding.specfun import f_cdf
        >>> f_cdf(0.0, 1, 10)
        0.0
        >>> round(f_cdf(200.0, 1, 2), 7)
        0.9950372
    """
    scalar = np.ndim(s) == 0 and np.ndim(d2) == 0
    s = np.asarray(s, dtype=np.float64)
    _validate_f_arguments(s, d1, d2)
    d2 = np.asarray(d2, dtype=np.float64)
    denominator = d1 * s + d2
    return _output(_reg_inc_beta(d1 * s / denominator, d2 / denominator, 0.5 * d1, 0.5 * d2), scalar)


def f_cdf_and_density(s: np.ndarray, n_tilde: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """F(1, ñ) CDF and its derivative with respect to ``s``, element-wise.

    The derivative is ``I'(x) ñ / (s + ñ)^2`` with ``x = s / (s + ñ)``; it is ``inf`` at ``s = 0``.

    Args:
        s (np.ndarray): non-negative statistics.
        n_tilde (np.ndarray): degrees of freedom, broadcast against ``s``.

    Returns:
        tuple[np.ndarray, np.ndarray]: CDF values and derivatives.
    """
    s = np.asarray(s, dtype=np.float64)
    _validate_f_arguments(s, 1, n_tilde)
    n_tilde = np.asarray(n_tilde, dtype=np.float64)
    denominator = s + n_tilde
    x = s / denominator
    y = n_tilde / denominator
    cdf = _reg_inc_beta(x, y, 0.5, 0.5 * n_tilde)
    density = _reg_inc_beta_dx(x, y, 0.5, 0.5 * n_tilde) * n_tilde / denominator**2
    return cdf, density
