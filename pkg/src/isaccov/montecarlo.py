"""Snapshot Monte Carlo for communication and sensing coverage.

A snapshot draws a PPP of base stations around the typical node at the
origin, decides which links are line of sight, and draws fading and radar
cross-section values. Each snapshot uses its own counter-based random
streams keyed by ``(seed, snapshot index, purpose)``, so results do not
depend on evaluation order.

Two geometry modes exist for sensing. ``matched`` measures every interferer
distance from the sensing target, which is what the analytic sensing
integral assumes. ``exact`` measures direct interference at the serving BS
with fresh LoS draws on those links.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import (
    BlockageParams,
    FadingParams,
    PathLossParams,
    db_to_linear,
    sample_rayleigh_power,
    sample_rcs,
    sample_rician_power,
)

__all__ = [
    "Scenario",
    "Snapshot",
    "Estimate",
    "Rectangles",
    "R_MIN",
    "substream",
    "sample_bs_field",
    "sample_rectangles",
    "los_indicator",
    "los_test",
    "segments_clear",
    "comm_snapshot",
    "sens_snapshot",
    "estimate_coverage",
    "wilson_interval",
]

log = logging.getLogger(__name__)

R_MIN = 1.0  # distances below this are clamped, in metres
_Z95 = 1.959963984540054

_TAGS = {"bs": 0, "los": 1, "fading": 2, "rcs": 3, "blockers": 4, "los_exact": 5}


@dataclass(frozen=True)
class Scenario:
    """Sampling recipe for one family of network snapshots.

    Attributes
    ----------
    area_radius : float
        Nominal network radius in metres.
    lambda_bs : float
        BS density in 1/m^2.
    blockage : BlockageParams
        Blockage law. ``blockage_mode="boolean"`` requires its
        ``boolean_model``.
    blockage_mode : str
        ``"bernoulli"`` draws each link's LoS state independently with
        probability ``exp(-(beta r + p))``; ``"boolean"`` drops explicit
        rectangles and tests every link against them.
    geometry_mode : str
        ``"matched"`` or ``"exact"`` (sensing only, see module docs).
    rcs_mode : str
        ``"independent"`` draws a separate RCS for the desired echo and for
        each reflected interference path; ``"shared"`` uses one value.
    seed : int
        Root seed for every snapshot stream.
    extend_disk : bool
        Generate BSs in a disk of radius
        ``max(area_radius, 5/beta, 5/sqrt(pi lambda))`` so edge truncation
        stays below Monte Carlo noise. With ``False`` the disk is
        ``area_radius`` exactly.
    include_trc : bool
        Keep the target-reflected interference in sensing snapshots.
    """

    area_radius: float
    lambda_bs: float
    blockage: BlockageParams
    blockage_mode: str = "bernoulli"
    geometry_mode: str = "matched"
    rcs_mode: str = "independent"
    seed: int = 0
    extend_disk: bool = True
    include_trc: bool = True

    def __post_init__(self):
        if not self.area_radius > 0:
            raise ValueError(f"area_radius must be positive, got {self.area_radius}")
        if not self.lambda_bs >= 0:
            raise ValueError(f"lambda_bs must be nonnegative, got {self.lambda_bs}")
        if self.blockage_mode not in ("bernoulli", "boolean"):
            raise ValueError(f"unknown blockage_mode {self.blockage_mode!r}")
        if self.blockage_mode == "boolean" and self.blockage.boolean_model is None:
            raise ValueError("boolean blockage_mode needs BlockageParams.boolean_model")
        if self.geometry_mode not in ("matched", "exact"):
            raise ValueError(f"unknown geometry_mode {self.geometry_mode!r}")
        if self.rcs_mode not in ("independent", "shared"):
            raise ValueError(f"unknown rcs_mode {self.rcs_mode!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def generation_radius(self) -> float:
        if not self.extend_disk:
            return self.area_radius
        radius = self.area_radius
        if self.blockage.beta > 0:
            radius = max(radius, 5.0 / self.blockage.beta)
        if self.lambda_bs > 0:
            radius = max(radius, 5.0 / math.sqrt(math.pi * self.lambda_bs))
        return radius


@dataclass
class Snapshot:
    """One sampled network seen from the typical node at the origin.

    ``sinr`` is ``None`` exactly when no BS is visible (a coverage hole).
    """

    bs_positions: np.ndarray
    serving_index: int | None
    los_flags: np.ndarray
    fading_draws: np.ndarray
    rcs_draws: np.ndarray = field(default_factory=lambda: np.empty(0))
    sinr: float | None = None
    clamped: int = 0

    def __post_init__(self):
        if (self.serving_index is None) != (self.sinr is None):
            raise ValueError("sinr must be present iff a serving BS exists")


@dataclass(frozen=True)
class Estimate:
    mean: float
    ci_low: float
    ci_high: float
    n: int

    @property
    def half_width(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)

    @property
    def std_error(self) -> float:
        return math.sqrt(self.mean * (1.0 - self.mean) / self.n)


@dataclass(frozen=True)
class Rectangles:
    """Blockage rectangles: centres, side lengths and orientation angles (radians)."""

    cx: np.ndarray
    cy: np.ndarray
    length: np.ndarray
    width: np.ndarray
    angle: np.ndarray

    def __len__(self):
        return len(self.cx)


def substream(seed: int, index: int, purpose: str) -> np.random.Generator:
    """Independent generator for one (snapshot, purpose) pair."""
    ss = np.random.SeedSequence([int(seed), int(index), _TAGS[purpose]])
    return np.random.Generator(np.random.Philox(ss))


def _uniform_disk(rng, n, radius):
    rad = radius * np.sqrt(rng.random(n))
    phi = rng.uniform(0.0, 2.0 * math.pi, n)
    return np.column_stack((rad * np.cos(phi), rad * np.sin(phi)))


def sample_bs_field(scenario: Scenario, stream: np.random.Generator) -> np.ndarray:
    """BS positions, shape ``(n, 2)``, from a PPP in the generation disk."""
    radius = scenario.generation_radius
    n = stream.poisson(scenario.lambda_bs * math.pi * radius**2)
    return _uniform_disk(stream, n, radius)


def sample_rectangles(
    blockage: BlockageParams, radius: float, stream: np.random.Generator
) -> Rectangles:
    """Boolean blockage field covering every segment inside a disk of ``radius``.

    Centres fall in a disk enlarged by the largest possible half-diagonal so
    rectangles straddling the boundary are kept.
    """
    model = blockage.boolean_model
    if model is None:
        raise ValueError("BlockageParams has no boolean_model")
    span = 2.0 if model.size_dist == "uniform" else 1.0
    margin = 0.5 * span * math.hypot(model.mean_len, model.mean_wid)
    outer = radius + margin
    n = stream.poisson(model.lambda_bk * math.pi * outer**2)
    centres = _uniform_disk(stream, n, outer)
    if model.size_dist == "fixed":
        length = np.full(n, model.mean_len)
        width = np.full(n, model.mean_wid)
    else:
        length = stream.uniform(0.0, 2.0 * model.mean_len, n)
        width = stream.uniform(0.0, 2.0 * model.mean_wid, n)
    angle = stream.uniform(0.0, math.pi, n)
    return Rectangles(centres[:, 0], centres[:, 1], length, width, angle)


def los_indicator(link_length, scenario: Scenario, stream: np.random.Generator):
    """Bernoulli LoS draw(s) with probability ``exp(-(beta r + p))``."""
    r = np.asarray(link_length, dtype=float)
    b = scenario.blockage
    flags = stream.random(r.shape) < np.exp(-(b.beta * r + b.p))
    return bool(flags) if flags.ndim == 0 else flags


def segments_clear(p0: np.ndarray, p1: np.ndarray, rects: Rectangles) -> np.ndarray:
    """For each segment ``p0[k] -> p1[k]``, whether it avoids every rectangle interior.

    Each segment is moved into every rectangle's frame and clipped against
    the box slabs (Liang-Barsky). Touching an edge does not block.
    """
    p0, p1 = np.broadcast_arrays(np.atleast_2d(np.asarray(p0, dtype=float)),
                                 np.atleast_2d(np.asarray(p1, dtype=float)))
    n_seg = len(p0)
    if len(rects) == 0 or n_seg == 0:
        return np.ones(n_seg, dtype=bool)
    c, s = np.cos(rects.angle), np.sin(rects.angle)
    # (segments, rectangles) arrays in rectangle-local coordinates
    ax = p0[:, :1] - rects.cx
    ay = p0[:, 1:] - rects.cy
    dx = p1[:, :1] - p0[:, :1]
    dy = p1[:, 1:] - p0[:, 1:]
    u0 = ax * c + ay * s
    v0 = -ax * s + ay * c
    du = dx * c + dy * s
    dv = -dx * s + dy * c
    t_lo = np.zeros(u0.shape)
    t_hi = np.ones(u0.shape)
    inside = np.ones(u0.shape, dtype=bool)
    for origin, delta, half in ((u0, du, 0.5 * rects.length), (v0, dv, 0.5 * rects.width)):
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (-half - origin) / delta
            tb = (half - origin) / delta
        moving = delta != 0
        t_lo = np.where(moving, np.maximum(t_lo, np.minimum(ta, tb)), t_lo)
        t_hi = np.where(moving, np.minimum(t_hi, np.maximum(ta, tb)), t_hi)
        inside &= moving | (np.abs(origin) < half)
    blocked = inside & (t_lo < t_hi)
    return ~blocked.any(axis=1)


def los_test(segment, rects: Rectangles) -> bool:
    """True iff the open segment ``(a, b)`` crosses no rectangle interior."""
    a, b = segment
    return bool(segments_clear(np.asarray([a], float), np.asarray([b], float), rects)[0])


def wilson_interval(successes: int, n: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("n must be positive")
    phat = successes / n
    denom = 1.0 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / n + z * z / (4 * n * n)) / denom
    # clamp round-off so the interval always brackets the point estimate
    return min(phat, max(0.0, centre - half)), max(phat, min(1.0, centre + half))


def _clamp(d: np.ndarray) -> tuple[np.ndarray, int]:
    low = d < R_MIN
    n = int(low.sum())
    if n:
        log.debug("clamped %d link distance(s) below %.1f m", n, R_MIN)
        d = np.where(low, R_MIN, d)
    return d, n


def _visibility(scenario: Scenario, pos, dist, index, rects=None) -> np.ndarray:
    # LoS state of every BS-to-origin link
    if scenario.blockage_mode == "boolean":
        return segments_clear(np.zeros((1, 2)), pos, rects)
    return los_indicator(dist, scenario, substream(scenario.seed, index, "los"))


def _field(scenario: Scenario, index: int):
    pos = sample_bs_field(scenario, substream(scenario.seed, index, "bs"))
    rects = None
    if scenario.blockage_mode == "boolean":
        rects = sample_rectangles(
            scenario.blockage, scenario.generation_radius, substream(scenario.seed, index, "blockers")
        )
    dist, clamped = _clamp(np.hypot(pos[:, 0], pos[:, 1]))
    los = np.asarray(_visibility(scenario, pos, dist, index, rects), dtype=bool).reshape(-1)
    return pos, dist, los, rects, clamped


def _direct_fading(fading: FadingParams, los, rng, mu):
    # Rician power on LoS links, exponential power with rate mu on NLoS links
    n = len(los)
    rician = sample_rician_power(fading.rician_K, rng, n)
    rayleigh = sample_rayleigh_power(mu, rng, n)
    return np.where(los, rician, rayleigh)


def comm_snapshot(
    scenario: Scenario,
    pl: PathLossParams,
    fading: FadingParams,
    noise_eff: float = 0.0,
    index: int = 0,
) -> Snapshot:
    """Downlink SINR at a typical user served by its nearest visible BS.

    ``noise_eff`` is the noise power divided by the transmit power.
    """
    pos, dist, los, _, clamped = _field(scenario, index)
    g = _direct_fading(fading, los, substream(scenario.seed, index, "fading"), fading.mu_n_comm)
    if not los.any():
        return Snapshot(pos, None, los, g, clamped=clamped)
    serving = int(np.flatnonzero(los)[np.argmin(dist[los])])
    rx = np.where(los, pl.k_l * dist ** -pl.alpha_l, pl.k_n * dist ** -pl.alpha_n) * g
    signal = rx[serving]
    interference = rx.sum() - signal
    sinr = _ratio(signal, interference + noise_eff)
    return Snapshot(pos, serving, los, g, sinr=sinr, clamped=clamped)


def _ratio(signal, denom):
    return math.inf if denom <= 0 else float(signal / denom)


def sens_snapshot(
    scenario: Scenario,
    pl: PathLossParams,
    fading: FadingParams,
    noise_eff: float = 0.0,
    index: int = 0,
) -> Snapshot:
    """Echo SINR at the BS serving a typical sensing target at the origin.

    Interference at the serving BS is direct LoS (Rician) and NLoS
    (exponential) power from the other BSs, plus their signals reflected
    by the target (cascaded through the target's LoS links).
    """
    pos, dist, los, rects, clamped = _field(scenario, index)
    if not los.any():
        g = np.empty(0)
        return Snapshot(pos, None, los, g, clamped=clamped)
    serving = int(np.flatnonzero(los)[np.argmin(dist[los])])
    r0 = dist[serving]
    others = np.ones(len(pos), dtype=bool)
    others[serving] = False

    if scenario.geometry_mode == "matched":
        d_direct = dist
        los_direct = los
    else:
        d_direct, extra = _clamp(np.hypot(pos[:, 0] - pos[serving, 0], pos[:, 1] - pos[serving, 1]))
        clamped += extra
        if scenario.blockage_mode == "boolean":
            los_direct = segments_clear(np.broadcast_to(pos[serving], pos.shape), pos, rects)
        else:
            los_direct = los_indicator(d_direct, scenario, substream(scenario.seed, index, "los_exact"))
        los_direct = np.asarray(los_direct, dtype=bool).reshape(-1)

    g = _direct_fading(fading, los_direct, substream(scenario.seed, index, "fading"), fading.mu_n_sens)
    direct = np.where(los_direct, pl.k_l * d_direct ** -pl.alpha_l, pl.k_n * d_direct ** -pl.alpha_n) * g

    rcs_rng = substream(scenario.seed, index, "rcs")
    if scenario.rcs_mode == "shared":
        rcs = np.full(len(pos), sample_rcs(fading.mean_rcs, rcs_rng))
    else:
        rcs = sample_rcs(fading.mean_rcs, rcs_rng, len(pos))
    cascade = rcs * pl.k_r * dist ** -pl.alpha_l * r0 ** -pl.alpha_l
    interference = direct[others].sum()
    if scenario.include_trc:
        interference += cascade[others & los].sum()
    signal = rcs[serving] * pl.k_r * r0 ** -pl.alpha_r
    sinr = _ratio(signal, interference + noise_eff)
    return Snapshot(pos, serving, los, g, rcs_draws=rcs, sinr=sinr, clamped=clamped)


def _sinr_samples(task, scenario, pl, fading, noise_eff, n_snapshots):
    draw = comm_snapshot if task == "comm" else sens_snapshot
    out = np.full(n_snapshots, -np.inf)
    clamped = 0
    for i in range(n_snapshots):
        snap = draw(scenario, pl, fading, noise_eff, i)
        clamped += snap.clamped
        if snap.sinr is not None:
            out[i] = snap.sinr
    if clamped:
        log.info("%s: %d link distance(s) clamped to %.1f m over %d snapshots", task, clamped, R_MIN, n_snapshots)
    return out


def estimate_coverage(
    task: str,
    thresholds_db,
    scenario: Scenario,
    pl: PathLossParams,
    fading: FadingParams,
    noise_eff: float = 0.0,
    n_snapshots: int = 10_000,
) -> list[Estimate]:
    """Coverage estimates with 95% Wilson intervals, one per threshold.

    Every threshold is scored on the same snapshots, so the estimates are
    pathwise nonincreasing in the threshold. Uncovered snapshots count as
    failures at every threshold.
    """
    if task not in ("comm", "sens"):
        raise ValueError(f"task must be 'comm' or 'sens', got {task!r}")
    if n_snapshots < 100:
        raise ValueError(f"n_snapshots must be >= 100, got {n_snapshots}")
    sinr = _sinr_samples(task, scenario, pl, fading, noise_eff, n_snapshots)
    estimates = []
    for t_db in np.atleast_1d(thresholds_db):
        hits = int(np.count_nonzero(sinr > db_to_linear(float(t_db))))
        low, high = wilson_interval(hits, n_snapshots)
        estimates.append(Estimate(hits / n_snapshots, low, high, n_snapshots))
    return estimates
