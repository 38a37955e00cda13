"""Propagation, blockage, fading and association-distance models.

Everything here is shared by the analytic and the Monte Carlo paths. Gains
are linear; conversion from dB happens in the constructors named ``from_db``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import i0e

from .specfun import bessel_i0

__all__ = [
    "db_to_linear",
    "linear_to_db",
    "dbm_to_watt",
    "PathLossParams",
    "BooleanBlockage",
    "BlockageParams",
    "FadingParams",
    "RICIAN_SERIES",
    "rician_series",
    "path_loss",
    "prob_los",
    "prob_nlos",
    "visible_area_function",
    "nearest_visible_pdf",
    "nearest_pdf",
    "association_mass",
    "rician_power_pdf_exact",
    "rician_power_pdf_approx",
    "rician_power_ccdf_approx",
    "sample_rician_power",
    "sample_rayleigh_power",
    "sample_rcs",
    "derive_beta_p",
]


def db_to_linear(x_db):
    if np.ndim(x_db):
        return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)
    return 10.0 ** (float(x_db) / 10.0)


def linear_to_db(x):
    if np.ndim(x):
        return 10.0 * np.log10(x)
    return 10.0 * math.log10(x)


def dbm_to_watt(x_dbm: float) -> float:
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class PathLossParams:
    """Gains and exponents of the LoS, NLoS and echo (radar) path-loss laws.

    With ``consistent=True`` the echo law must follow the monostatic radar
    equation, ``k_r = k_l / (4 pi)`` and ``alpha_r = 2 alpha_l``.
    """

    k_l: float
    k_n: float
    k_r: float
    alpha_l: float
    alpha_n: float
    alpha_r: float
    consistent: bool = False

    def __post_init__(self):
        if min(self.k_l, self.k_n, self.k_r) <= 0:
            raise ValueError("path-loss gains must be positive")
        if self.alpha_l < 2:
            raise ValueError(f"alpha_l must be >= 2, got {self.alpha_l}")
        if self.alpha_n <= 2 or self.alpha_r <= 2:
            raise ValueError("alpha_n and alpha_r must be > 2")
        if self.consistent:
            if not math.isclose(self.k_r, self.k_l / (4 * math.pi), rel_tol=1e-12):
                raise ValueError("consistency mode requires k_r = k_l / (4 pi)")
            if not math.isclose(self.alpha_r, 2 * self.alpha_l, rel_tol=1e-12):
                raise ValueError("consistency mode requires alpha_r = 2 alpha_l")

    @classmethod
    def from_db(cls, k_l_db, k_n_db, k_r_db, alpha_l, alpha_n, alpha_r, consistent=False):
        return cls(db_to_linear(k_l_db), db_to_linear(k_n_db), db_to_linear(k_r_db),
                   alpha_l, alpha_n, alpha_r, consistent)

    @classmethod
    def radar_consistent(cls, k_l, k_n, alpha_l, alpha_n):
        """Echo law derived from the LoS law by the monostatic radar equation."""
        return cls(k_l, k_n, k_l / (4 * math.pi), alpha_l, alpha_n, 2 * alpha_l, consistent=True)


@dataclass(frozen=True)
class BooleanBlockage:
    """Rectangle blockages with PPP centres, i.i.d. sizes and uniform orientation."""

    lambda_bk: float
    mean_len: float
    mean_wid: float
    size_dist: str = "fixed"  # "fixed" or "uniform" on [0, 2 * mean]

    def __post_init__(self):
        if self.lambda_bk < 0 or self.mean_len < 0 or self.mean_wid < 0:
            raise ValueError("Boolean blockage parameters must be nonnegative")
        if self.size_dist not in ("fixed", "uniform"):
            raise ValueError(f"unknown size distribution {self.size_dist!r}")


@dataclass(frozen=True)
class BlockageParams:
    """Linear blockage rate ``beta`` (1/m) and blocked area fraction ``p``."""

    beta: float
    p: float
    boolean_model: BooleanBlockage | None = None

    def __post_init__(self):
        if self.beta < 0 or self.p < 0:
            raise ValueError(f"beta and p must be nonnegative, got beta={self.beta}, p={self.p}")
        if self.boolean_model is not None:
            beta, p = derive_beta_p(self.boolean_model.lambda_bk, self.boolean_model.mean_len,
                                    self.boolean_model.mean_wid)
            if not (math.isclose(beta, self.beta, rel_tol=1e-12, abs_tol=1e-300)
                    and math.isclose(p, self.p, rel_tol=1e-12, abs_tol=1e-300)):
                raise ValueError("beta and p are inconsistent with the Boolean blockage model")

    @classmethod
    def from_boolean(cls, lambda_bk, mean_len, mean_wid, size_dist="fixed"):
        beta, p = derive_beta_p(lambda_bk, mean_len, mean_wid)
        return cls(beta, p, BooleanBlockage(lambda_bk, mean_len, mean_wid, size_dist))

    @property
    def is_blockage_free(self) -> bool:
        return self.beta == 0 and self.p == 0


def derive_beta_p(lambda_bk: float, mean_len: float, mean_wid: float) -> tuple[float, float]:
    """Blockage pair (beta, p) of a Boolean rectangle field."""
    beta = 2.0 * lambda_bk * (mean_len + mean_wid) / math.pi
    p = lambda_bk * mean_len * mean_wid
    return beta, p


# Exponential-series fit of the Rician power density: (w_n, u_n), n = 1..4.
# K=5 weights sum to 0.994; kept exactly as tabulated.
RICIAN_SERIES_VERSION = "1"
RICIAN_SERIES: dict[int, tuple[tuple[float, float], ...]] = {
    1: ((-0.8993, 1.2475), (5.9324, 1.4298), (-5.4477, 1.7436), (1.4145, 2.0326)),
    5: ((42.243, 2.9576), (-189.99, 3.7559), (192.97, 4.1436), (-44.229, 4.7715)),
    10: ((177.75, 3.8741), (-338.04, 4.3761), (297.00, 5.3985), (-135.71, 5.9937)),
}


def rician_series(K: float) -> tuple[tuple[float, float], ...]:
    """Tabulated exponential-series coefficients for Rician factor ``K``."""
    key = int(K)
    if key != K or key not in RICIAN_SERIES:
        raise KeyError(f"no exponential-series coefficients for K={K}; available: {sorted(RICIAN_SERIES)}")
    return RICIAN_SERIES[key]


@dataclass(frozen=True)
class FadingParams:
    """Small-scale fading and target model.

    ``series`` may be empty when only the Monte Carlo path is used with a
    Rician factor that has no tabulated fit.
    """

    rician_K: float
    series: tuple[tuple[float, float], ...]
    mu_n_comm: float = 1.0
    mu_n_sens: float = 1.0
    mean_rcs: float = 100.0

    def __post_init__(self):
        if self.rician_K < 0:
            raise ValueError("rician_K must be nonnegative")
        object.__setattr__(self, "series", tuple((float(w), float(u)) for w, u in self.series))
        if self.series:
            if any(u <= 0 for _, u in self.series):
                raise ValueError("series rates u_n must be positive")
            total = sum(w for w, _ in self.series)
            if abs(total - 1.0) > 1e-2:
                raise ValueError(f"series weights must sum to 1 within 1e-2, got {total}")
        if self.mu_n_comm <= 0 or self.mu_n_sens <= 0:
            raise ValueError("Rayleigh rates must be positive")
        if self.mean_rcs <= 0:
            raise ValueError("mean_rcs must be positive")

    @classmethod
    def tabulated(cls, K=10, mu_n_comm=1.0, mu_n_sens=1.0, mean_rcs=100.0):
        return cls(K, rician_series(K), mu_n_comm, mu_n_sens, mean_rcs)

    def require_series(self):
        if not self.series:
            raise ValueError(f"no exponential-series coefficients for K={self.rician_K}; "
                             "the analytic path needs a tabulated K")
        return self.series


def path_loss(kind: str, r, pl: PathLossParams):
    """Large-scale gain ``k * r**-alpha`` for ``kind`` in {"los", "nlos", "echo"}."""
    if np.any(np.asarray(r) <= 0):
        raise ValueError("path loss is singular at r <= 0")
    kind = kind.lower()
    if kind == "los":
        k, a = pl.k_l, pl.alpha_l
    elif kind == "nlos":
        k, a = pl.k_n, pl.alpha_n
    elif kind == "echo":
        k, a = pl.k_r, pl.alpha_r
    else:
        raise ValueError(f"unknown path kind {kind!r}")
    return k * np.power(r, -a) if np.ndim(r) else k * r**-a


def prob_los(r, b: BlockageParams):
    """Probability that a link of length ``r`` is unblocked, exp(-(beta r + p))."""
    if np.ndim(r):
        return np.exp(-(b.beta * np.asarray(r, dtype=float) + b.p))
    return math.exp(-(b.beta * r + b.p))


def prob_nlos(r, b: BlockageParams):
    if np.ndim(r):
        return -np.expm1(-(b.beta * np.asarray(r, dtype=float) + b.p))
    return -math.expm1(-(b.beta * r + b.p))


def _one_minus_1py_exp(y: float) -> float:
    # 1 - (1 + y) e^-y; series below y = 0.05 avoids cancellation
    if y == 0.0:
        return 0.0
    if y < 0.05:
        term = y * y / 2.0
        total = 0.0
        k = 2
        while True:
            total += term * (k - 1)
            k += 1
            term *= -y / k
            if abs(term) * k <= 1e-17 * total:
                break
        return total
    return -math.expm1(-y) - y * math.exp(-y)


def visible_area_function(r: float, b: BlockageParams) -> float:
    """U(r) = e^-p / beta^2 [1 - (beta r + 1) e^(-beta r)]; tends to r^2/2 as beta, p -> 0."""
    if b.beta == 0:
        return math.exp(-b.p) * r * r / 2.0
    return math.exp(-b.p) * _one_minus_1py_exp(b.beta * r) / (b.beta * b.beta)


def nearest_visible_pdf(r: float, lambda_bs: float, b: BlockageParams) -> float:
    """Density of the distance to the nearest unblocked BS.

    The density is defective: its total mass is ``association_mass``.
    """
    if lambda_bs <= 0:
        raise ValueError("lambda_bs must be positive")
    if b.beta == 0:
        raise ValueError("nearest_visible_pdf needs beta > 0; use nearest_pdf for the blockage-free law")
    if r < 0:
        raise ValueError("r must be nonnegative")
    u = visible_area_function(r, b)
    return 2 * math.pi * lambda_bs * r * math.exp(-(b.beta * r + b.p + 2 * math.pi * lambda_bs * u))


def nearest_pdf(r: float, lambda_bs: float) -> float:
    """Density of the distance to the nearest point of a PPP of intensity ``lambda_bs``."""
    if lambda_bs <= 0:
        raise ValueError("lambda_bs must be positive")
    if r < 0:
        raise ValueError("r must be nonnegative")
    return 2 * math.pi * lambda_bs * r * math.exp(-lambda_bs * math.pi * r * r)


def association_mass(lambda_bs: float, b: BlockageParams) -> float:
    """Probability that at least one BS is visible, 1 - exp(-2 pi e^-p lambda / beta^2)."""
    if b.beta == 0:
        return 1.0
    return -math.expm1(-2 * math.exp(-b.p) * lambda_bs * math.pi / (b.beta * b.beta))


def rician_power_pdf_exact(x: float, K: float) -> float:
    """Unit-mean power density of a Rician envelope (scaled noncentral chi-square, 2 dof)."""
    if x < 0:
        return 0.0
    arg = 2 * math.sqrt(K * (1 + K) * x)
    if arg > 700:
        # I0(z) e^-z stays finite; regroup the exponent
        return (1 + K) * math.exp(-K - (1 + K) * x + arg) * float(i0e(arg))
    return (1 + K) * math.exp(-K - (1 + K) * x) * bessel_i0(arg)


def rician_power_pdf_approx(x, series: Sequence[tuple[float, float]]):
    """Exponential-series approximation sum_n w_n u_n exp(-u_n x)."""
    x = np.asarray(x, dtype=float)
    out = sum(w * u * np.exp(-u * x) for w, u in series)
    return float(out) if out.ndim == 0 else out


def rician_power_ccdf_approx(x, series: Sequence[tuple[float, float]]):
    """Exponential-series CCDF sum_n w_n exp(-u_n x)."""
    x = np.asarray(x, dtype=float)
    out = sum(w * np.exp(-u * x) for w, u in series)
    return float(out) if out.ndim == 0 else out


def sample_rician_power(K: float, rng: np.random.Generator, size=None):
    """Unit-mean Rician power |sqrt(K/(K+1)) + CN(0, 1/(K+1))|^2."""
    los = math.sqrt(K / (K + 1.0))
    sd = math.sqrt(0.5 / (K + 1.0))
    re = los + sd * rng.standard_normal(size)
    im = sd * rng.standard_normal(size)
    return re * re + im * im


def sample_rayleigh_power(mu: float, rng: np.random.Generator, size=None):
    """Exponential power with rate ``mu``."""
    return rng.exponential(1.0 / mu, size)


def sample_rcs(mean_rcs: float, rng: np.random.Generator, size=None):
    """Swerling-I radar cross-section: exponential with mean ``mean_rcs``."""
    return rng.exponential(mean_rcs, size)
