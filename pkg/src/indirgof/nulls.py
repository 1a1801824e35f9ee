"""Standardized null error laws and alternative error samplers.

A :class:`NullModel` bundles the cdf, pdf, pdf derivative and quantile of
a candidate standardized error distribution (mean zero, variance one by
convention).  The augmented score

    h(t) = (1, -f'(t)/f(t), -(f(t) + t f'(t))/f(t))

collects the constant, location and scale score directions used by the
martingale transform.  Finite Fisher information for location and scale
is a documented precondition; :func:`check_fisher_information` probes it
by quadrature and warns, but nothing is enforced.
"""

import math
import warnings
from dataclasses import dataclass, field
from functools import partial
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln, ndtr, ndtri, stdtr, stdtrit

from .errors import EvaluationRangeError

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_LAPLACE_B = 1.0 / math.sqrt(2.0)  # unit-variance Laplace scale


@dataclass(frozen=True)
class NullModel:
    """Standardized null error law with the pieces the transform needs.

    ``score_breakpoints`` lists points where the score functions are
    discontinuous or kinked (e.g. the origin for the Laplace law); the
    quadrature machinery aligns integration panels with them.
    """

    name: str
    cdf: Callable = field(repr=False)
    pdf: Callable = field(repr=False)
    pdf_derivative: Callable = field(repr=False)
    quantile: Callable = field(repr=False)
    is_gaussian: bool = False
    score_breakpoints: tuple = ()

    def sample(self, rng, size):
        """Draw by quantile transform of uniforms."""
        return self.quantile(rng.random(size))


def _norm_pdf(t):
    t = np.asarray(t, dtype=float)
    return np.exp(-0.5 * t * t) / _SQRT_2PI


def _norm_pdf_derivative(t):
    t = np.asarray(t, dtype=float)
    return -t * _norm_pdf(t)


def gaussian_null():
    """Standard normal null model.

    The cdf/quantile pair is backed by scipy's ``ndtr``/``ndtri``, which
    invert each other well below the 1e-10 contract checked in the tests.
    """
    return NullModel(
        name="gaussian",
        cdf=ndtr,
        pdf=_norm_pdf,
        pdf_derivative=_norm_pdf_derivative,
        quantile=ndtri,
        is_gaussian=True,
    )


def _laplace_cdf(t):
    t = np.asarray(t, dtype=float)
    return np.where(t < 0.0, 0.5 * np.exp(t / _LAPLACE_B),
                    1.0 - 0.5 * np.exp(-t / _LAPLACE_B))


def _laplace_pdf(t):
    t = np.asarray(t, dtype=float)
    return np.exp(-np.abs(t) / _LAPLACE_B) / (2.0 * _LAPLACE_B)


def _laplace_pdf_derivative(t):
    t = np.asarray(t, dtype=float)
    return -np.sign(t) * _laplace_pdf(t) / _LAPLACE_B


def _laplace_quantile(p):
    p = np.asarray(p, dtype=float)
    return np.where(p < 0.5, _LAPLACE_B * np.log(2.0 * p),
                    -_LAPLACE_B * np.log(2.0 * (1.0 - p)))


def laplace_null():
    """Unit-variance Laplace null model (scale 1/sqrt(2)).

    Note that its location score is piecewise constant, so the tail
    information matrix is exactly singular on [0, inf); the transform's
    condition guard rejects this null, which is the intended behaviour.
    It remains available for the quadrature machinery and diagnostics.
    """
    return NullModel(
        name="laplace",
        cdf=_laplace_cdf,
        pdf=_laplace_pdf,
        pdf_derivative=_laplace_pdf_derivative,
        quantile=_laplace_quantile,
        score_breakpoints=(0.0,),
    )


def _t_scale(df):
    return math.sqrt(df / (df - 2.0))


def _t_pdf_raw(df, x):
    x = np.asarray(x, dtype=float)
    log_c = gammaln((df + 1.0) / 2.0) - gammaln(df / 2.0) - 0.5 * math.log(df * math.pi)
    return np.exp(log_c - 0.5 * (df + 1.0) * np.log1p(x * x / df))


def _t_cdf(df, scale, t):
    return stdtr(df, scale * np.asarray(t, dtype=float))


def _t_pdf(df, scale, t):
    return scale * _t_pdf_raw(df, scale * np.asarray(t, dtype=float))


def _t_pdf_derivative(df, scale, t):
    x = scale * np.asarray(t, dtype=float)
    return scale * scale * _t_pdf_raw(df, x) * (-(df + 1.0) * x / (df + x * x))


def _t_quantile(df, scale, p):
    return stdtrit(df, np.asarray(p, dtype=float)) / scale


def student_t_null(df=6.0):
    """Unit-variance Student t null model (df > 2).

    The raw t variate is divided by sqrt(df / (df - 2)), so the law has
    variance one; all score functions are smooth and the tail
    information matrix stays invertible at every finite point.
    """
    if not df > 2.0:
        raise ValueError(f"degrees of freedom must exceed 2, got {df}")
    scale = _t_scale(df)
    return NullModel(
        name=f"student-t({df:g})",
        cdf=partial(_t_cdf, df, scale),
        pdf=partial(_t_pdf, df, scale),
        pdf_derivative=partial(_t_pdf_derivative, df, scale),
        quantile=partial(_t_quantile, df, scale),
    )


_NULL_BUILDERS = {
    "gaussian": gaussian_null,
    "laplace": laplace_null,
    "student-t": student_t_null,
}


def get_null(name):
    """Look up a built-in null model by name."""
    try:
        return _NULL_BUILDERS[name]()
    except KeyError:
        options = ", ".join(sorted(_NULL_BUILDERS))
        raise ValueError(f"unknown null model {name!r}; options: {options}") from None


def score_h(null, t):
    """Augmented score vector(s) at ``t``.

    Returns shape ``t.shape + (3,)`` (a plain 3-vector for scalar input).
    For the Gaussian null this reduces to ``(1, t, t**2 - 1)``.
    """
    t = np.asarray(t, dtype=float)
    f = np.asarray(null.pdf(t), dtype=float)
    if np.any(f < 1e-300):
        worst = float(np.asarray(t).ravel()[np.argmin(np.asarray(f).ravel())])
        raise EvaluationRangeError(
            f"null density underflows at t={worst}; score is not evaluable"
        )
    fp = np.asarray(null.pdf_derivative(t), dtype=float)
    return np.stack([np.ones_like(t), -fp / f, -(f + t * fp) / f], axis=-1)


@dataclass(frozen=True)
class ErrorSampler:
    """Seeded sampler for one error law of the simulation study."""

    name: str
    kind: str
    params: tuple = ()

    def sample(self, rng, size):
        if self.kind == "normal":
            return self.params[0] * rng.standard_normal(size)
        if self.kind == "laplace":
            return rng.laplace(0.0, self.params[0], size)
        if self.kind == "skew-normal":
            alpha, omega = self.params
            delta = alpha / math.sqrt(1.0 + alpha * alpha)
            u = np.abs(rng.standard_normal(size))
            v = rng.standard_normal(size)
            draw = omega * (delta * u + math.sqrt(1.0 - delta * delta) * v)
            return draw - omega * delta * math.sqrt(2.0 / math.pi)
        if self.kind == "student-t":
            return rng.standard_t(self.params[0], size)
        if self.kind == "zero":
            return np.zeros(size)
        raise ValueError(f"unknown sampler kind {self.kind!r}")


def alternative_samplers():
    """The four error scenarios of the simulation study, keyed by name.

    The skew-normal uses the stochastic representation
    ``omega * (delta*|U| + sqrt(1-delta^2)*V)`` centred at its analytic
    mean, with delta = alpha/sqrt(1+alpha^2).
    """
    return {
        "normal": ErrorSampler("normal", "normal", (0.5,)),
        "laplace": ErrorSampler("laplace", "laplace", (0.5,)),
        "skew-normal": ErrorSampler("skew-normal", "skew-normal", (3.0, 1.0)),
        "student-t": ErrorSampler("student-t", "student-t", (6.0,)),
    }


def get_sampler(name):
    """Look up a built-in error sampler by name."""
    samplers = alternative_samplers()
    samplers["zero"] = ErrorSampler("zero", "zero")
    try:
        return samplers[name]
    except KeyError:
        options = ", ".join(sorted(samplers))
        raise ValueError(f"unknown error law {name!r}; options: {options}") from None


def check_fisher_information(null):
    """Diagnostic quadrature of the location-scale Fisher integral.

    Returns the value of ``integral (1 + t^2) (f'/f)^2 f dt`` and emits a
    warning when the quadrature fails to converge or the value is not
    finite.  Never raises: finiteness is a precondition of the theory,
    not something this package enforces.
    """

    def integrand(t):
        f = null.pdf(t)
        if f <= 0.0:
            return 0.0
        fp = null.pdf_derivative(t)
        return (1.0 + t * t) * (fp / f) ** 2 * f

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        value, abserr = quad(integrand, -np.inf, np.inf, limit=200)
    if caught or not np.isfinite(value) or abserr > max(1e-6, 1e-6 * abs(value)):
        warnings.warn(
            f"Fisher-information quadrature for null {null.name!r} is unreliable "
            f"(value={value}, abserr={abserr}); the finite-information "
            "precondition may fail",
            stacklevel=2,
        )
    return float(value)
