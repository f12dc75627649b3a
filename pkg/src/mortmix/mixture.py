"""Age-at-death mixture: components, exact discretization, reparametrization.

The continuous model mixes an infant component at age zero, an optional
Gaussian adulthood component and an old-age component (skew-normal by
default).  Discretization integrates the density over unit age intervals
by differencing the CDF at half-integer edges, folding the two boundary
cells so the resulting vector is an exact probability simplex:

    p_0   = F(1/2)
    p_x   = F(x + 1/2) - F(x - 1/2)    for 0 < x < max_age
    p_max = 1 - F(max_age - 1/2)

Latent states live on an unconstrained scale (logits for weights, logs for
scales) so the random-walk dynamics and the sampler never see constraints.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Union

import numpy as np
from scipy import special as sp

from .special import SkewNormalParams

__all__ = [
    "AgeGrid",
    "ModelVariant",
    "MixtureParams",
    "LatentState",
    "BETA_SUPPORT",
    "state_to_natural",
    "natural_to_state",
    "to_unconstrained",
    "from_unconstrained",
    "mixture_cdf",
    "discretize",
    "discretize_batch",
    "multinomial_loglik",
]

# Fixed support of the scaled-Beta old-age alternative.
BETA_SUPPORT = (75.0, 110.0)

_INFANT_KINDS = ("dirac", "half_normal")
_ADULT_KINDS = ("gaussian", "none")
_OLD_KINDS = ("skew_normal", "scaled_beta")


@dataclass(frozen=True)
class AgeGrid:
    """Integer ages 0 .. max_age, the last cell open-ended (max_age+)."""

    max_age: int = 110

    def __post_init__(self):
        if not (isinstance(self.max_age, (int, np.integer)) and self.max_age >= 1):
            raise ValueError(f"max_age must be an integer >= 1, got {self.max_age}")

    @property
    def n_cells(self) -> int:
        return self.max_age + 1

    @cached_property
    def ages(self) -> np.ndarray:
        return np.arange(self.n_cells)

    @cached_property
    def interior_edges(self) -> np.ndarray:
        """Half-integer cell edges 1/2, 3/2, ..., max_age - 1/2."""
        return np.arange(self.max_age) + 0.5


@dataclass(frozen=True)
class ModelVariant:
    """Structural choice of mixture components.

    infant:  "dirac" (point mass at age 0) or "half_normal" (scale gamma)
    adult:   "gaussian" or "none"
    old_age: "skew_normal" or "scaled_beta" (Beta(a, b) rescaled to [75, 110])
    """

    infant: str = "dirac"
    adult: str = "gaussian"
    old_age: str = "skew_normal"

    def __post_init__(self):
        if self.infant not in _INFANT_KINDS:
            raise ValueError(f"infant must be one of {_INFANT_KINDS}, got {self.infant!r}")
        if self.adult not in _ADULT_KINDS:
            raise ValueError(f"adult must be one of {_ADULT_KINDS}, got {self.adult!r}")
        if self.old_age not in _OLD_KINDS:
            raise ValueError(f"old_age must be one of {_OLD_KINDS}, got {self.old_age!r}")

    @cached_property
    def state_names(self) -> tuple[str, ...]:
        """Ordered names of the unconstrained state coordinates.

        Default layout: (logit_pi1, logit_pi2, mu, log_sigma, xi, log_omega,
        alpha), where logit_pi2 is the conditional logit log(pi2 / pi0).
        Without the adult component the weight block shrinks to a single
        logit(pi2).  The scaled-Beta old-age block is (log_beta_a,
        log_beta_b); a half-normal infant appends log_gamma.
        """
        names: list[str] = []
        if self.adult == "gaussian":
            names += ["logit_pi1", "logit_pi2", "mu", "log_sigma"]
        else:
            names += ["logit_pi2"]
        if self.old_age == "skew_normal":
            names += ["xi", "log_omega", "alpha"]
        else:
            names += ["log_beta_a", "log_beta_b"]
        if self.infant == "half_normal":
            names += ["log_gamma"]
        return tuple(names)

    @property
    def dim(self) -> int:
        return len(self.state_names)

    def to_dict(self) -> dict:
        return {"infant": self.infant, "adult": self.adult, "old_age": self.old_age}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelVariant":
        unknown = set(d) - {"infant", "adult", "old_age"}
        if unknown:
            raise ValueError(f"unknown ModelVariant fields: {sorted(unknown)}")
        return cls(**dict(d))


DEFAULT_VARIANT = ModelVariant()

# Natural-parameter keys produced per variant (besides the weights).
_NATURAL_KEYS = {
    "dirac": (),
    "half_normal": ("gamma",),
    "gaussian": ("mu", "sigma"),
    "none": (),
    "skew_normal": ("xi", "omega", "alpha"),
    "scaled_beta": ("beta_a", "beta_b"),
}


@dataclass(frozen=True)
class MixtureParams:
    """Natural parameters of the default three-component mixture.

    pi1 weights the Gaussian adulthood bump, pi2 the skew-normal old-age
    hump; the infant mass is implicit, pi0 = 1 - pi1 - pi2.
    """

    pi1: float
    pi2: float
    mu: float
    sigma: float
    sn: SkewNormalParams

    def __post_init__(self):
        for name in ("pi1", "pi2"):
            w = getattr(self, name)
            if not (np.isfinite(w) and 0.0 <= w <= 1.0):
                raise ValueError(f"weight {name} must lie in [0, 1], got {w}")
        if self.pi1 + self.pi2 > 1.0:
            raise ValueError(f"pi1 + pi2 = {self.pi1 + self.pi2} exceeds 1")
        if not (np.isfinite(self.sigma) and self.sigma > 0.0):
            raise ValueError(f"adult scale sigma must be positive, got {self.sigma}")
        if not np.isfinite(self.mu):
            raise ValueError("adult mean mu must be finite")

    @property
    def pi0(self) -> float:
        return 1.0 - self.pi1 - self.pi2


@dataclass(frozen=True)
class LatentState:
    """One unconstrained state vector tagged with its variant."""

    values: np.ndarray
    variant: ModelVariant = DEFAULT_VARIANT

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.variant.dim,):
            raise ValueError(
                f"state has shape {v.shape}, variant needs ({self.variant.dim},)"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("state coordinates must be finite")
        object.__setattr__(self, "values", v)

    def natural(self) -> dict[str, float]:
        nat = state_to_natural(self.values, self.variant)
        return {k: float(v) for k, v in nat.items()}


def state_to_natural(states, variant: ModelVariant = DEFAULT_VARIANT) -> dict[str, np.ndarray]:
    """Map unconstrained states (..., K) to natural-parameter arrays (...).

    Weights: pi1 = expit(logit_pi1), pi2 = (1 - pi1) * expit(logit_pi2),
    pi0 = 1 - pi1 - pi2 (never stored; the simplex holds by construction).
    """
    s = np.asarray(states, dtype=np.float64)
    names = variant.state_names
    if s.shape[-1] != len(names):
        raise ValueError(f"states last axis is {s.shape[-1]}, expected {len(names)}")
    col = {name: s[..., i] for i, name in enumerate(names)}

    nat: dict[str, np.ndarray] = {}
    if variant.adult == "gaussian":
        pi1 = sp.expit(col["logit_pi1"])
        pi2 = (1.0 - pi1) * sp.expit(col["logit_pi2"])
        nat["pi1"] = pi1
        nat["mu"] = col["mu"]
        nat["sigma"] = np.exp(col["log_sigma"])
    else:
        pi1 = np.zeros(np.shape(col["logit_pi2"]))
        pi2 = sp.expit(col["logit_pi2"])
        nat["pi1"] = pi1
    nat["pi2"] = pi2
    nat["pi0"] = 1.0 - pi1 - pi2

    if variant.old_age == "skew_normal":
        nat["xi"] = col["xi"]
        nat["omega"] = np.exp(col["log_omega"])
        nat["alpha"] = col["alpha"]
    else:
        nat["beta_a"] = np.exp(col["log_beta_a"])
        nat["beta_b"] = np.exp(col["log_beta_b"])

    if variant.infant == "half_normal":
        nat["gamma"] = np.exp(col["log_gamma"])
    return nat


def _check_open_unit(name: str, w) -> None:
    if not (0.0 < w < 1.0):
        raise ValueError(f"weight {name} = {w} must lie strictly inside (0, 1)")


def natural_to_state(nat: Mapping[str, float], variant: ModelVariant = DEFAULT_VARIANT) -> np.ndarray:
    """Inverse of state_to_natural for a single parameter set.

    Raises ValueError naming the offending weight if any mixture weight
    sits on the boundary {0, 1} (the logits would be infinite).
    """
    pi2 = float(nat["pi2"])
    out: dict[str, float] = {}
    if variant.adult == "gaussian":
        pi1 = float(nat["pi1"])
        _check_open_unit("pi1", pi1)
        pi0 = 1.0 - pi1 - pi2
        _check_open_unit("pi2", pi2)
        if not pi0 > 0.0:
            raise ValueError(f"weight pi0 = {pi0} must lie strictly inside (0, 1)")
        out["logit_pi1"] = np.log(pi1) - np.log1p(-pi1)
        out["logit_pi2"] = np.log(pi2) - np.log(pi0)
        out["mu"] = float(nat["mu"])
        out["log_sigma"] = np.log(float(nat["sigma"]))
    else:
        if float(nat.get("pi1", 0.0)) != 0.0:
            raise ValueError("variant has no adult component but pi1 != 0")
        _check_open_unit("pi2", pi2)
        out["logit_pi2"] = np.log(pi2) - np.log1p(-pi2)

    if variant.old_age == "skew_normal":
        out["xi"] = float(nat["xi"])
        out["log_omega"] = np.log(float(nat["omega"]))
        out["alpha"] = float(nat["alpha"])
    else:
        out["log_beta_a"] = np.log(float(nat["beta_a"]))
        out["log_beta_b"] = np.log(float(nat["beta_b"]))

    if variant.infant == "half_normal":
        out["log_gamma"] = np.log(float(nat["gamma"]))
    return np.array([out[name] for name in variant.state_names], dtype=np.float64)


def to_unconstrained(params: MixtureParams) -> np.ndarray:
    """Unconstrained 7-vector of the default mixture parametrization."""
    nat = {
        "pi1": params.pi1,
        "pi2": params.pi2,
        "mu": params.mu,
        "sigma": params.sigma,
        "xi": params.sn.xi,
        "omega": params.sn.omega,
        "alpha": params.sn.alpha,
    }
    return natural_to_state(nat, DEFAULT_VARIANT)


def from_unconstrained(state) -> MixtureParams:
    """Inverse of to_unconstrained; any real 7-vector is valid input."""
    nat = state_to_natural(np.asarray(state, dtype=np.float64), DEFAULT_VARIANT)
    return MixtureParams(
        pi1=float(nat["pi1"]),
        pi2=float(nat["pi2"]),
        mu=float(nat["mu"]),
        sigma=float(nat["sigma"]),
        sn=SkewNormalParams(float(nat["xi"]), float(nat["omega"]), float(nat["alpha"])),
    )


def _natural_mapping(params, variant: ModelVariant) -> dict:
    if isinstance(params, MixtureParams):
        if variant != DEFAULT_VARIANT:
            raise ValueError("MixtureParams only describes the default variant; "
                             "pass a natural-parameter mapping instead")
        return {
            "pi0": params.pi0, "pi1": params.pi1, "pi2": params.pi2,
            "mu": params.mu, "sigma": params.sigma,
            "xi": params.sn.xi, "omega": params.sn.omega, "alpha": params.sn.alpha,
        }
    if isinstance(params, LatentState):
        if params.variant != variant:
            raise ValueError("LatentState variant disagrees with requested variant")
        return state_to_natural(params.values, variant)
    nat = dict(params)
    if "pi0" not in nat:
        nat["pi0"] = 1.0 - np.asarray(nat.get("pi1", 0.0)) - np.asarray(nat["pi2"])
    needed = {"pi2"} | set(_NATURAL_KEYS[variant.infant]) | set(_NATURAL_KEYS[variant.old_age])
    if variant.adult == "gaussian":
        needed |= {"pi1", "mu", "sigma"}
    missing = needed - set(nat)
    if missing:
        raise ValueError(f"missing natural parameters for variant: {sorted(missing)}")
    return nat


def _cdf_arrays(x, nat: Mapping, variant: ModelVariant) -> np.ndarray:
    """Mixture CDF at x given natural-parameter arrays, numpy broadcasting."""
    x = np.asarray(x, dtype=np.float64)
    pi0 = np.asarray(nat["pi0"], dtype=np.float64)
    pi2 = np.asarray(nat["pi2"], dtype=np.float64)

    if variant.infant == "dirac":
        infant = (x >= 0.0).astype(np.float64)
    else:
        gamma = np.asarray(nat["gamma"], dtype=np.float64)
        infant = np.where(x > 0.0, sp.erf(x / (np.sqrt(2.0) * gamma)), 0.0)
    total = pi0 * infant

    if variant.adult == "gaussian":
        pi1 = np.asarray(nat["pi1"], dtype=np.float64)
        mu = np.asarray(nat["mu"], dtype=np.float64)
        sigma = np.asarray(nat["sigma"], dtype=np.float64)
        total = total + pi1 * sp.ndtr((x - mu) / sigma)

    if variant.old_age == "skew_normal":
        z = (x - np.asarray(nat["xi"], dtype=np.float64)) / np.asarray(nat["omega"], dtype=np.float64)
        old = sp.ndtr(z) - 2.0 * sp.owens_t(z, np.asarray(nat["alpha"], dtype=np.float64))
    else:
        lo, hi = BETA_SUPPORT
        u = np.clip((x - lo) / (hi - lo), 0.0, 1.0)
        a = np.asarray(nat["beta_a"], dtype=np.float64)
        b = np.asarray(nat["beta_b"], dtype=np.float64)
        old = sp.betainc(a, b, u)
    total = total + pi2 * old
    return np.clip(total, 0.0, 1.0)


def mixture_cdf(x, params, variant: ModelVariant = DEFAULT_VARIANT):
    """Mixture CDF at ages x.

    params may be a MixtureParams (default variant), a LatentState, or a
    mapping of natural parameters (pi1, pi2, mu, sigma, xi, omega, alpha,
    and gamma / beta_a / beta_b for the alternatives).  Scalar parameters
    broadcast against array x.
    """
    nat = _natural_mapping(params, variant)
    return _cdf_arrays(x, nat, variant)


def _fold_edges(cdf_at_edges: np.ndarray) -> np.ndarray:
    """Assemble cell probabilities from CDF values at interior edges.

    cdf_at_edges has shape (..., max_age); output (..., max_age + 1).
    """
    first = cdf_at_edges[..., :1]
    interior = np.diff(cdf_at_edges, axis=-1)
    last = 1.0 - cdf_at_edges[..., -1:]
    probs = np.concatenate([first, interior, last], axis=-1)
    # interior differences of a monotone CDF can round to -1e-17; clamp
    np.maximum(probs, 0.0, out=probs)
    return probs


def discretize(params, variant: ModelVariant = DEFAULT_VARIANT, grid: AgeGrid = AgeGrid()) -> np.ndarray:
    """Exact cell probabilities over the age grid (sums to 1 by construction)."""
    nat = _natural_mapping(params, variant)
    edges = grid.interior_edges
    nat_b = {k: np.asarray(v, dtype=np.float64)[..., None] for k, v in nat.items()}
    cdf = _cdf_arrays(edges, nat_b, variant)
    return _fold_edges(cdf)


def discretize_batch(states, variant: ModelVariant, grid: AgeGrid) -> np.ndarray:
    """Cell probabilities for a batch of unconstrained states (m, K) -> (m, A)."""
    states = np.asarray(states, dtype=np.float64)
    if states.ndim != 2:
        raise ValueError("discretize_batch expects a 2-D (m, K) state array")
    nat = state_to_natural(states, variant)
    nat_b = {k: v[:, None] for k, v in nat.items()}
    cdf = _cdf_arrays(grid.interior_edges[None, :], nat_b, variant)
    return _fold_edges(cdf)


def _loglik_terms(deaths, probs) -> np.ndarray:
    """sum_x D_x log p_x along the last axis, with 0 log 0 = 0. No validation."""
    return sp.xlogy(deaths, probs).sum(axis=-1)


def log_multinomial_coef(deaths) -> np.ndarray:
    """log n! / prod_x D_x! along the last axis."""
    d = np.asarray(deaths, dtype=np.float64)
    return sp.gammaln(d.sum(axis=-1) + 1.0) - sp.gammaln(d + 1.0).sum(axis=-1)


def multinomial_loglik(deaths, probs) -> float:
    """Exact multinomial log-likelihood including the combinatorial coefficient.

    deaths: nonnegative integer counts per age cell; probs: matching
    probability vector.  Cells with D_x = 0 contribute nothing even when
    p_x = 0; a cell with D_x > 0 and p_x = 0 yields -inf.
    """
    d = np.asarray(deaths, dtype=np.float64)
    p = np.asarray(probs, dtype=np.float64)
    if d.ndim != 1 or p.ndim != 1 or d.shape != p.shape:
        raise ValueError(f"deaths {d.shape} and probs {p.shape} must be equal-length vectors")
    if np.any(d < 0.0) or np.any(d != np.floor(d)):
        raise ValueError("death counts must be nonnegative integers")
    if np.any(p < 0.0) or abs(p.sum() - 1.0) > 1e-8:
        raise ValueError("probs must form a probability simplex")
    return float(log_multinomial_coef(d) + _loglik_terms(d, p))
