"""Special functions and quadrature primitives used by the coverage integrals."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

from scipy import integrate, special

__all__ = [
    "QuadratureSpec",
    "QuadratureError",
    "DEFAULT_QUADRATURE",
    "erfc",
    "erfcx",
    "bessel_i0",
    "gauss_2f1",
    "integrate_finite",
    "integrate_semi_infinite",
]


@dataclass(frozen=True)
class QuadratureSpec:
    """Accuracy contract for a numerical integral.

    ``truncation_mass`` bounds the relative contribution of the last finite
    panel before the remaining tail of a semi-infinite integral is handed to
    the mapped (infinite-interval) rule.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_subdivisions: int = 2048
    truncation_mass: float = 1e-9

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError(f"rel_tol must be > 0, got {self.rel_tol}")
        if not self.abs_tol > 0:
            raise ValueError(f"abs_tol must be > 0, got {self.abs_tol}")
        if self.max_subdivisions < 8:
            raise ValueError(f"max_subdivisions must be >= 8, got {self.max_subdivisions}")
        if not 0 < self.truncation_mass <= 1e-3:
            raise ValueError(f"truncation_mass must lie in (0, 1e-3], got {self.truncation_mass}")

    def tighter(self, factor: float = 10.0) -> "QuadratureSpec":
        """Spec for an inner integral nested inside an integral using ``self``."""
        return QuadratureSpec(
            rel_tol=self.rel_tol / factor,
            abs_tol=self.abs_tol / factor,
            max_subdivisions=self.max_subdivisions,
            truncation_mass=self.truncation_mass,
        )


DEFAULT_QUADRATURE = QuadratureSpec()


class QuadratureError(ArithmeticError):
    """Adaptive quadrature failed to meet its tolerance.

    Carries the best estimate and its error bound so callers can decide
    whether the result is still usable.
    """

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(f"{message} (estimate={estimate!r}, error={error!r})")
        self.estimate = estimate
        self.error = error


def erfc(x: float) -> float:
    """Complementary error function 2/sqrt(pi) * int_x^inf exp(-t^2) dt."""
    return math.erfc(x)


def erfcx(x: float) -> float:
    """Scaled complementary error function exp(x^2) * erfc(x).

    Evaluated as one fused function: the two factors separately overflow and
    underflow near x = 27 in double precision.
    """
    return float(special.erfcx(x))


def bessel_i0(x: float) -> float:
    """Modified Bessel function of the first kind, order zero."""
    if x < 0:
        raise ValueError(f"bessel_i0 requires x >= 0, got {x}")
    value = float(special.i0(x))
    if math.isinf(value):
        raise OverflowError(f"I0({x}) exceeds the double-precision range")
    return value


def _quad(f, a, b, spec: QuadratureSpec, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(
            f,
            a,
            b,
            epsabs=spec.abs_tol,
            epsrel=spec.rel_tol,
            limit=spec.max_subdivisions,
            full_output=1,
            **kwargs,
        )
    value, err, info = out[0], out[1], out[2]
    if len(out) > 3:
        # ier != 0; accept only when the reported error is still close to target
        target = max(spec.abs_tol, spec.rel_tol * abs(value))
        if not (err <= 100 * target) or not math.isfinite(value):
            raise QuadratureError(
                f"quadrature on [{a}, {b}] did not converge: {out[3]}", value, err
            )
    return value, err


def integrate_finite(
    f: Callable[[float], float],
    a: float,
    b: float,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
    full_output: bool = False,
):
    """Adaptive Gauss-Kronrod integral of ``f`` over ``[a, b]``."""
    value, err = _quad(f, a, b, spec)
    return (value, err) if full_output else value


def _log_tail(f, a):
    # x = a e^s turns algebraic tails x^-q into exponential ones in s
    a = max(a, 1e-300)

    s_max = math.log(1e120 / a) if a < 1e120 else 0.0

    def g(s):
        if s > s_max:
            return 0.0
        x = a * math.exp(s)
        try:
            return f(x) * x
        except OverflowError:
            # only reachable far out in the tail, where powers of x overflow
            return 0.0

    return g


def integrate_semi_infinite(
    f: Callable[[float], float],
    h: float = 0.0,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
    scale: float | None = None,
    full_output: bool = False,
    max_panels: int = 16,
):
    """Integral of ``f`` over ``[h, inf)``.

    The range is covered by finite panels of doubling width starting at
    ``scale`` (a characteristic length of the integrand; defaults to
    ``max(h, 1)``). Panels stop once one contributes at most
    ``spec.truncation_mass`` of the running total, or after ``max_panels``;
    the remaining tail is integrated in the logarithmic variable
    ``s = log(x / a)`` with the mapped infinite-interval rule, which handles
    both exponential and algebraic decay.

    Parameters
    ----------
    f : callable
        Scalar integrand, continuous on ``[h, inf)``.
    h : float
        Lower limit, ``h >= 0``.
    spec : QuadratureSpec
        Tolerances. The finite panels and the tail each get the full budget.
    scale : float, optional
        Width of the first panel.
    full_output : bool
        Also return the accumulated absolute error estimate.

    Raises
    ------
    QuadratureError
        If any piece fails to converge within ``spec.max_subdivisions``.
    """
    if h < 0:
        raise ValueError(f"lower limit must be >= 0, got {h}")
    width = float(scale) if scale else max(h, 1.0)
    if not width > 0 or not math.isfinite(width):
        raise ValueError(f"scale must be positive and finite, got {scale}")

    total = 0.0
    err = 0.0
    a = float(h)
    for k in range(max_panels):
        b = a + width
        piece, piece_err = _quad(f, a, b, spec)
        total += piece
        err += piece_err
        a = b
        width *= 2.0
        if k >= 1 and total != 0.0 and abs(piece) <= spec.truncation_mass * abs(total):
            break
    tail, tail_err = _quad(_log_tail(f, a), 0.0, math.inf, spec)
    total += tail
    err += tail_err
    return (total, err) if full_output else total


def gauss_2f1(a: float, b: float, c: float, t: float, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Gauss hypergeometric function 2F1(a, b; c; t) for t <= 0 and c > b > 0.

    Uses the Euler integral

        Gamma(c) / (Gamma(b) Gamma(c - b)) * int_0^1 z^(b-1) (1-z)^(c-b-1) (1-tz)^(-a) dz

    after the change of variable z = u^(1/b), which removes the z^(b-1)
    endpoint singularity and spreads out the transition region when |t| is
    large. A remaining (1-u)^(c-b-1) singularity with c - b - 1 < 0 is
    absorbed into an algebraic quadrature weight.
    """
    if not (b > 0 and c > b):
        raise ValueError(f"gauss_2f1 requires c > b > 0, got b={b}, c={c}")
    if t > 0:
        raise ValueError(f"gauss_2f1 is only implemented for t <= 0, got t={t}")
    if t == 0:
        return 1.0

    inv_b = 1.0 / b
    gamma_exp = c - b - 1.0
    norm = math.exp(math.lgamma(c) - math.lgamma(b) - math.lgamma(c - b)) * inv_b

    # (1 - t z)^(-a) turns over near u = |t|^(-b); tell the integrator where
    u0 = abs(t) ** (-b)
    points = []
    while u0 < 0.5 and len(points) < 40:
        points.append(u0)
        u0 *= 10.0

    if gamma_exp >= 0:
        def g(u):
            z = u**inv_b
            return (1.0 - z) ** gamma_exp * (1.0 - t * z) ** (-a)

        if points:
            value, _ = _quad(g, 0.0, 1.0, spec, points=points)
        else:
            value, _ = _quad(g, 0.0, 1.0, spec)
    else:
        def g(u):
            z = u**inv_b
            ratio = inv_b if u >= 1.0 else (1.0 - z) / (1.0 - u)
            return ratio**gamma_exp * (1.0 - t * z) ** (-a)

        if points:
            # algebraic weight only on the last piece, where the singularity sits
            split = points[-1]
            head, _ = _quad(lambda u: g(u) * (1.0 - u) ** gamma_exp, 0.0, split, spec,
                            points=points[:-1] or None)
            tail, _ = _quad(g, split, 1.0, spec, weight="alg", wvar=(0.0, gamma_exp))
            value = head + tail
        else:
            value, _ = _quad(g, 0.0, 1.0, spec, weight="alg", wvar=(0.0, gamma_exp))
    return norm * value
