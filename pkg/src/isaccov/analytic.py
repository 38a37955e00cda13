"""Numerical evaluation of the ISAC coverage-probability integrals.

The communication and sensing coverage probabilities are single integrals
over the serving distance ``r`` whose integrands contain the interference
kernel

    F(eps, alpha, w, h) = int_h^inf x w(x) / (eps x^alpha + 1) dx

with ``w`` the LoS probability, the NLoS probability, 1 or 0. All thresholds
here are linear; convert from dB at the boundary with
:func:`isaccov.channel.db_to_linear`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .channel import (
    BlockageParams,
    FadingParams,
    PathLossParams,
    association_mass,
    nearest_pdf,
    visible_area_function,
)
from .specfun import (
    DEFAULT_QUADRATURE,
    QuadratureSpec,
    erfcx,
    gauss_2f1,
    integrate_semi_infinite,
)

__all__ = [
    "NetworkParams",
    "CoverageResult",
    "Weight",
    "KernelDivergenceError",
    "f_kernel",
    "f_kernel_closed",
    "comm_coverage",
    "sens_coverage",
    "sens_exponent_terms",
    "trc_share",
    "corollary1",
    "corollary2",
    "special_case_1",
    "special_case_2",
    "special_case_3",
    "special_case_4",
    "special_case_5",
    "special_case_6",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class NetworkParams:
    """Deployment, noise and detection thresholds.

    Noise powers are in watts. Signals are modelled with unit transmit
    power, so the noise enters every SINR divided by ``tx_power``.
    """

    lambda_bs: float
    noise_comm: float = 0.0
    noise_sens: float = 0.0
    threshold_comm: float = 1.0
    threshold_sens: float = 1.0
    tx_power: float = 1.0

    def __post_init__(self):
        if not self.lambda_bs > 0:
            raise ValueError(f"lambda_bs must be positive, got {self.lambda_bs}")
        if self.noise_comm < 0 or self.noise_sens < 0:
            raise ValueError("noise powers must be nonnegative")
        if not (self.threshold_comm > 0 and self.threshold_sens > 0):
            raise ValueError("thresholds must be positive (linear scale)")
        if not self.tx_power > 0:
            raise ValueError("tx_power must be positive")

    @property
    def eff_noise_comm(self) -> float:
        return self.noise_comm / self.tx_power

    @property
    def eff_noise_sens(self) -> float:
        return self.noise_sens / self.tx_power

    def replace(self, **changes) -> "NetworkParams":
        from dataclasses import replace
        return replace(self, **changes)


@dataclass(frozen=True)
class CoverageResult:
    value: float
    method: str  # "analytic", "closed_form" or "monte_carlo"
    quadrature_error: float | None = None
    ci: tuple[float, float] | None = None

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"coverage must lie in [0, 1], got {self.value}")
        if (self.ci is not None) != (self.method == "monte_carlo"):
            raise ValueError("a confidence interval is required for, and only for, monte_carlo results")

    def __float__(self):
        return self.value


def _result(value: float, method: str, err: float | None = None) -> CoverageResult:
    # the exponential-series CCDF is not exactly a probability; clip round-off
    return CoverageResult(min(1.0, max(0.0, value)), method, err)


class KernelDivergenceError(ValueError):
    """The interference kernel integral does not converge."""


@dataclass(frozen=True)
class Weight:
    """Probability weight inside the interference kernel."""

    kind: str  # "los", "nlos", "unit", "zero"
    blockage: BlockageParams | None = None

    @classmethod
    def los(cls, b: BlockageParams) -> "Weight":
        return cls("los", b)

    @classmethod
    def nlos(cls, b: BlockageParams) -> "Weight":
        return cls("nlos", b)


Weight.UNIT = Weight("unit")
Weight.ZERO = Weight("zero")


def f_kernel(
    epsilon: float,
    alpha: float,
    weight: Weight,
    h: float = 0.0,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
) -> float:
    """Interference kernel by quadrature.

    >>> round(f_kernel(1.0, 4.0, Weight.UNIT, 1.0), 7)
    0.3926991
    """
    if weight.kind == "zero":
        return 0.0
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if h < 0:
        raise ValueError(f"h must be nonnegative, got {h}")

    b = weight.blockage
    if weight.kind == "unit":
        if alpha <= 2:
            raise KernelDivergenceError(f"unit-weight kernel diverges for alpha={alpha} <= 2")

        def g(x):
            return x / (epsilon * x**alpha + 1.0)
    elif weight.kind == "los":
        if b.beta == 0 and alpha <= 2:
            raise KernelDivergenceError(f"LoS kernel without distance blockage diverges for alpha={alpha} <= 2")
        beta, p = b.beta, b.p

        def g(x):
            return x * math.exp(-(beta * x + p)) / (epsilon * x**alpha + 1.0)
    elif weight.kind == "nlos":
        if b.is_blockage_free:
            return 0.0
        if alpha <= 2:
            raise KernelDivergenceError(f"NLoS kernel diverges for alpha={alpha} <= 2")
        beta, p = b.beta, b.p

        def g(x):
            return -x * math.expm1(-(beta * x + p)) / (epsilon * x**alpha + 1.0)
    else:
        raise ValueError(f"unknown weight kind {weight.kind!r}")

    knee = epsilon ** (-1.0 / alpha)
    scale = max(knee, h)
    if b is not None and b.beta > 0:
        scale = min(scale, 1.0 / b.beta)
    return integrate_semi_infinite(g, h, spec, scale=scale)


def f_kernel_closed(epsilon: float, alpha: float, h: float, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Unit-weight kernel through the hypergeometric closed form (alpha > 2, h > 0)."""
    if alpha <= 2:
        raise KernelDivergenceError(f"unit-weight kernel diverges for alpha={alpha} <= 2")
    if not (h > 0 and epsilon > 0):
        raise ValueError(f"f_kernel_closed needs h > 0 and epsilon > 0, got h={h}, epsilon={epsilon}")
    t = -(h ** (-alpha)) / epsilon
    hyp = gauss_2f1(1.0, (alpha - 2.0) / alpha, 2.0 - 2.0 / alpha, t, spec)
    return h ** (2.0 - alpha) * hyp / (epsilon * (alpha - 2.0))


def _serving_pdf(lambda_bs: float, b: BlockageParams) -> Callable[[float], float]:
    # nearest-visible density; reduces to the PPP nearest-neighbour law without blockage
    if b.is_blockage_free:
        return lambda r: nearest_pdf(r, lambda_bs)
    beta, p = b.beta, b.p

    def pdf(r):
        u = visible_area_function(r, b)
        return TWO_PI * lambda_bs * r * math.exp(-(beta * r + p + TWO_PI * lambda_bs * u))

    return pdf


def _outer_scale(lambda_bs: float, b: BlockageParams) -> float:
    scale = 1.0 / math.sqrt(math.pi * lambda_bs)
    if b.beta > 0:
        scale = min(scale, 1.0 / b.beta)
    return scale


class _KernelCache:
    """Memoised interference kernels for one coverage evaluation."""

    def __init__(self, spec: QuadratureSpec):
        self.spec = spec
        self._store: dict = {}

    def __call__(self, eps, alpha, weight, h):
        key = (eps, alpha, weight, h)
        try:
            return self._store[key]
        except KeyError:
            if weight.kind == "unit":
                val = f_kernel_closed(eps, alpha, h, self.spec)
            else:
                val = f_kernel(eps, alpha, weight, h, self.spec)
            self._store[key] = val
            return val


def _comm_exponent(r, n, net, pl, b, fading, kernel, T, noise):
    """Exponent of the conditional coverage term for series index ``n``."""
    series = fading.series
    u_n = series[n][1]
    scaled = u_n * r**pl.alpha_l * T
    expo = scaled * noise / pl.k_l
    if b.is_blockage_free:
        los_w, nlos_w = Weight.UNIT, Weight.ZERO
    else:
        los_w, nlos_w = Weight.los(b), Weight.nlos(b)
    interf = 0.0
    for w_m, u_m in series:
        interf += w_m * kernel(u_m / scaled, pl.alpha_l, los_w, r)
    if nlos_w.kind != "zero":
        interf += kernel(fading.mu_n_comm * pl.k_l / (scaled * pl.k_n), pl.alpha_n, nlos_w, 0.0)
    return expo + TWO_PI * net.lambda_bs * interf


def _comm_integral(net, pl, b, fading, spec, noise):
    series = fading.require_series()
    inner = spec.tighter(10.0)
    kernel = _KernelCache(inner)
    pdf = _serving_pdf(net.lambda_bs, b)
    T = net.threshold_comm
    scale = _outer_scale(net.lambda_bs, b)
    total = 0.0
    err = 0.0
    for n, (w_n, _) in enumerate(series):
        def integrand(r, n=n):
            density = pdf(r) if r > 0.0 else 0.0
            if density == 0.0:
                return 0.0
            e = _comm_exponent(r, n, net, pl, b, fading, kernel, T, noise)
            return math.exp(-e) * density

        val, e = integrate_semi_infinite(integrand, 0.0, spec, scale=scale, full_output=True)
        total += w_n * val
        err += abs(w_n) * e
    return total, err


def comm_coverage(
    net: NetworkParams,
    pl: PathLossParams,
    b: BlockageParams,
    fading: FadingParams,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
) -> CoverageResult:
    """Communication coverage probability under nearest-visible association.

    Each term of the exponential series is integrated over the serving
    distance separately, so the alternating series weights are applied only
    to converged, positive integrals.
    """
    value, err = _comm_integral(net, pl, b, fading, spec, net.eff_noise_comm)
    return _result(value, "analytic", err)


def sens_exponent_terms(
    r: float,
    net: NetworkParams,
    pl: PathLossParams,
    b: BlockageParams,
    fading: FadingParams,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
    kernel=None,
) -> dict[str, float]:
    """The four additive pieces of the sensing exponent at serving distance ``r``.

    Keys: ``noise``, ``los``, ``nlos``, ``trc``. The interference pieces
    already include the ``2 pi lambda`` factor.
    """
    kernel = kernel or _KernelCache(spec)
    T = net.threshold_sens
    s = r**pl.alpha_r * T / (fading.mean_rcs * pl.k_r)
    if b.is_blockage_free:
        los_w, nlos_w = Weight.UNIT, Weight.ZERO
    else:
        los_w, nlos_w = Weight.los(b), Weight.nlos(b)
    los = sum(w_n * kernel(u_n / (s * pl.k_l), pl.alpha_l, los_w, r) for w_n, u_n in fading.series)
    nlos = 0.0
    if nlos_w.kind != "zero":
        nlos = kernel(fading.mu_n_sens / (s * pl.k_n), pl.alpha_n, nlos_w, 0.0)
    trc = kernel(r**pl.alpha_l / (r**pl.alpha_r * T), pl.alpha_l, los_w, r)
    c = TWO_PI * net.lambda_bs
    return {"noise": s * net.eff_noise_sens, "los": c * los, "nlos": c * nlos, "trc": c * trc}


def _sens_integral(net, pl, b, fading, spec, include_trc):
    fading.require_series()
    kernel = _KernelCache(spec.tighter(10.0))
    pdf = _serving_pdf(net.lambda_bs, b)

    def integrand(r):
        density = pdf(r) if r > 0.0 else 0.0
        if density == 0.0:
            return 0.0
        terms = sens_exponent_terms(r, net, pl, b, fading, kernel=kernel)
        e = terms["noise"] + terms["los"] + terms["nlos"]
        if include_trc:
            e += terms["trc"]
        return math.exp(-e) * density

    return integrate_semi_infinite(integrand, 0.0, spec, scale=_outer_scale(net.lambda_bs, b), full_output=True)


def sens_coverage(
    net: NetworkParams,
    pl: PathLossParams,
    b: BlockageParams,
    fading: FadingParams,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
    include_trc: bool = True,
) -> CoverageResult:
    """Sensing coverage probability: echo SINR at the serving BS above threshold.

    Interference has LoS and NLoS direct components plus the target
    reflection cascade (other BSs' signals scattered by the target). Set
    ``include_trc=False`` to drop the cascade term, as in cooperative sensing.
    """
    value, err = _sens_integral(net, pl, b, fading, spec, include_trc)
    return _result(value, "analytic", err)


def trc_share(
    net: NetworkParams,
    pl: PathLossParams,
    b: BlockageParams,
    fading: FadingParams,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
) -> float:
    """Integrand-weighted mean fraction of the sensing exponent due to the cascade term.

    Weighted by the sensing coverage integrand itself, so distances that
    do not contribute to coverage do not count.
    """
    fading.require_series()
    kernel = _KernelCache(spec.tighter(10.0))
    pdf = _serving_pdf(net.lambda_bs, b)

    def parts(r):
        density = pdf(r) if r > 0.0 else 0.0
        if density == 0.0:
            return 0.0, 0.0
        terms = sens_exponent_terms(r, net, pl, b, fading, kernel=kernel)
        total = sum(terms.values())
        weight = math.exp(-total) * density
        return weight, (weight * terms["trc"] / total if total > 0 else 0.0)

    scale = _outer_scale(net.lambda_bs, b)
    mass = integrate_semi_infinite(lambda r: parts(r)[0], 0.0, spec, scale=scale)
    if mass == 0.0:
        return 0.0
    return integrate_semi_infinite(lambda r: parts(r)[1], 0.0, spec, scale=scale) / mass


_NO_BLOCKAGE = BlockageParams(0.0, 0.0)


def corollary1(net, pl, fading, spec=DEFAULT_QUADRATURE) -> CoverageResult:
    """Communication coverage without blockage (nearest-BS association, all links LoS)."""
    if pl.alpha_l <= 2:
        raise KernelDivergenceError(f"coverage without blockage needs alpha_l > 2, got {pl.alpha_l}")
    value, err = _comm_integral(net, pl, _NO_BLOCKAGE, fading, spec, net.eff_noise_comm)
    return _result(value, "analytic", err)


def corollary2(net, pl, fading, spec=DEFAULT_QUADRATURE, include_trc=True) -> CoverageResult:
    """Sensing coverage without blockage; ``include_trc=False`` drops the cascade term."""
    if pl.alpha_l <= 2:
        raise KernelDivergenceError(f"coverage without blockage needs alpha_l > 2, got {pl.alpha_l}")
    value, err = _sens_integral(net, pl, _NO_BLOCKAGE, fading, spec, include_trc)
    return _result(value, "analytic", err)


def _arctan_kernel(a: float) -> float:
    # (pi - 2 arctan(sqrt(a))) / (4 sqrt(a)), written with arctan(1/sqrt(a)) to keep digits for large a
    q = math.sqrt(a)
    return math.atan(1.0 / q) / (2.0 * q)


def _theta_comm(T, fading):
    series = fading.require_series()
    return [sum(w_m * _arctan_kernel(u_m / (u_n * T)) for w_m, u_m in series) for _, u_n in series]


def _theta_sens(T, pl, fading):
    series = fading.require_series()
    return sum(w_n * _arctan_kernel(u_n * fading.mean_rcs * pl.k_r / (T * pl.k_l)) for w_n, u_n in series)


# the K = 10 series weights alternate in sign with magnitudes in the hundreds,
# so closed-form kernels need near machine precision to survive the cancellation
_CLOSED_FORM_QUADRATURE = QuadratureSpec(rel_tol=1e-14, abs_tol=1e-300)


def _hyp_kernel(ratio: float, alpha: float) -> float:
    # 2F1(1, (a-2)/a; 2-2/a; -1/ratio) / (ratio (a-2))
    value = gauss_2f1(1.0, (alpha - 2.0) / alpha, 2.0 - 2.0 / alpha, -1.0 / ratio, _CLOSED_FORM_QUADRATURE)
    return value / (ratio * (alpha - 2.0))


def _noisy_closed_form(lambda_bs, theta, vartheta):
    if vartheta == 0:
        return 1.0 / (1.0 + 2.0 * theta)
    psi = math.pi * (1.0 + 2.0 * theta) / (2.0 * math.sqrt(vartheta))
    return 0.5 * math.pi * lambda_bs * math.sqrt(math.pi / vartheta) * erfcx(lambda_bs * psi)


def special_case_1(net: NetworkParams, pl: PathLossParams, fading: FadingParams) -> CoverageResult:
    """Communication coverage, no blockage, with noise, alpha_l = 4 (erfc form)."""
    if pl.alpha_l != 4:
        raise ValueError(f"special case 1 requires alpha_l = 4, got {pl.alpha_l}")
    T = net.threshold_comm
    thetas = _theta_comm(T, fading)
    value = 0.0
    for (w_n, u_n), theta in zip(fading.series, thetas):
        vartheta = u_n * T * net.eff_noise_comm / pl.k_l
        value += w_n * _noisy_closed_form(net.lambda_bs, theta, vartheta)
    return _result(value, "closed_form")


def special_case_2(T: float, alpha_l: float, fading: FadingParams) -> float:
    """Interference-limited communication coverage without blockage, alpha_l > 2.

    Does not depend on the BS density.
    """
    if alpha_l <= 2:
        raise ValueError(f"special case 2 requires alpha_l > 2, got {alpha_l}")
    series = fading.require_series()
    value = 0.0
    for w_n, u_n in series:
        xi = sum(w_m * _hyp_kernel(u_m / (u_n * T), alpha_l) for w_m, u_m in series)
        value += w_n / (1.0 + 2.0 * xi)
    return value


def special_case_3(T: float, fading: FadingParams) -> float:
    """Interference-limited communication coverage without blockage, alpha_l = 4."""
    return sum(w_n / (1.0 + 2.0 * theta) for (w_n, _), theta in zip(fading.require_series(), _theta_comm(T, fading)))


def special_case_4(net: NetworkParams, pl: PathLossParams, fading: FadingParams) -> CoverageResult:
    """Sensing coverage without blockage or cascade interference, noise, alpha_l = alpha_r = 4."""
    if pl.alpha_l != 4 or pl.alpha_r != 4:
        raise ValueError("special case 4 requires alpha_l = alpha_r = 4")
    T = net.threshold_sens
    theta = _theta_sens(T, pl, fading)
    vartheta = T * net.eff_noise_sens / (fading.mean_rcs * pl.k_r)
    return _result(_noisy_closed_form(net.lambda_bs, theta, vartheta), "closed_form")


def special_case_5(T: float, alpha_l: float, pl: PathLossParams, fading: FadingParams) -> float:
    """Sensing coverage without blockage, noise or cascade, alpha_l = alpha_r > 2.

    Only the gains of ``pl`` are used; both exponents are ``alpha_l``.
    """
    if alpha_l <= 2:
        raise ValueError(f"special case 5 requires alpha_l > 2, got {alpha_l}")
    series = fading.require_series()
    xi = sum(w_n * _hyp_kernel(u_n * fading.mean_rcs * pl.k_r / (T * pl.k_l), alpha_l) for w_n, u_n in series)
    return 1.0 / (1.0 + 2.0 * xi)


def special_case_6(T: float, pl: PathLossParams, fading: FadingParams) -> float:
    """Sensing coverage without blockage, noise or cascade, alpha_l = alpha_r = 4."""
    return 1.0 / (1.0 + 2.0 * _theta_sens(T, pl, fading))


def coverage_hole_mass(lambda_bs: float, b: BlockageParams) -> float:
    """Low-threshold limit of both coverage probabilities."""
    return association_mass(lambda_bs, b)
