"""Temporal dynamics of the latent states and their conjugate updates.

Each unconstrained coordinate k of country j follows a random walk with
drift: the initial state is Gaussian, theta_{j0k} ~ N(m_k, s_k^2), and

    theta_{jtk} = beta_{jk} + theta_{j,t-1,k} + innovation,  t = 1..T,

with innovation variance eta2_{jk}.  Drifts get Gaussian priors
beta_{jk} ~ N(m_beta_k, s_beta_k^2) and variances inverse-gamma priors
eta2_{jk} ~ InvGamma(a_k, b_k).  Under Gaussian innovations all three of
beta, eta2 and theta_0 have closed-form full conditionals, implemented
here; a Student-t innovation law breaks that conjugacy and the sampler
falls back to Metropolis moves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import special as sp

from .mixture import DEFAULT_VARIANT, ModelVariant

__all__ = [
    "Hyperparams",
    "CountryDynamics",
    "InnovationLaw",
    "GAUSSIAN",
    "log_state_prior",
    "gibbs_update_beta",
    "gibbs_update_eta2",
    "gibbs_update_theta0",
]

_LOG_2PI = math.log(2.0 * math.pi)


def _normal_logpdf(x, mean, var):
    x = np.asarray(x, dtype=np.float64)
    return -0.5 * (_LOG_2PI + np.log(var) + (x - mean) ** 2 / var)


def _invgamma_logpdf(x, a, b):
    x = np.asarray(x, dtype=np.float64)
    return a * np.log(b) - sp.gammaln(a) - (a + 1.0) * np.log(x) - b / x


@dataclass(frozen=True)
class InnovationLaw:
    """Distribution family of the random-walk innovations.

    kind "gaussian" or "student_t"; dof only matters for the latter and
    must exceed 2 so the innovation variance is finite.
    """

    kind: str = "gaussian"
    dof: float = 5.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "student_t"):
            raise ValueError(f"unknown innovation kind {self.kind!r}")
        if self.kind == "student_t" and not self.dof > 2.0:
            raise ValueError(f"student_t dof must exceed 2, got {self.dof}")

    @property
    def conjugate(self) -> bool:
        return self.kind == "gaussian"

    def logpdf(self, x, mean, var):
        """Log transition density with location mean and squared scale var."""
        if self.kind == "gaussian":
            return _normal_logpdf(x, mean, var)
        nu = self.dof
        z2 = (np.asarray(x, dtype=np.float64) - mean) ** 2 / var
        const = sp.gammaln(0.5 * (nu + 1.0)) - sp.gammaln(0.5 * nu) - 0.5 * math.log(nu * math.pi)
        return const - 0.5 * np.log(var) - 0.5 * (nu + 1.0) * np.log1p(z2 / nu)

    def draw_standard(self, rng: np.random.Generator, size):
        """Unit-scale innovations (multiply by sqrt(var) to use)."""
        if self.kind == "gaussian":
            return rng.standard_normal(size)
        return rng.standard_t(self.dof, size)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "dof": self.dof}

    @classmethod
    def from_dict(cls, d: Mapping) -> "InnovationLaw":
        unknown = set(d) - {"kind", "dof"}
        if unknown:
            raise ValueError(f"unknown InnovationLaw fields: {sorted(unknown)}")
        return cls(**dict(d))


GAUSSIAN = InnovationLaw()


def _as_vector(x, dim: int, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim == 0:
        v = np.full(dim, float(v))
    if v.shape != (dim,):
        raise ValueError(f"{name} must be a scalar or length-{dim} vector, got shape {v.shape}")
    return v


@dataclass(frozen=True)
class Hyperparams:
    """Per-coordinate hyperparameters, aligned with the variant state names.

    m, s       mean / sd of the initial-state prior
    m_beta,
    s_beta     mean / sd of the drift prior
    a, b       shape / rate of the InvGamma prior on innovation variances
    """

    m: np.ndarray
    s: np.ndarray
    m_beta: np.ndarray
    s_beta: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        dim = np.asarray(self.m, dtype=np.float64).size
        for name in ("m", "s", "m_beta", "s_beta", "a", "b"):
            object.__setattr__(self, name, _as_vector(getattr(self, name), dim, name))
        for name in ("s", "s_beta", "a", "b"):
            v = getattr(self, name)
            if not np.all(v > 0.0):
                raise ValueError(f"hyperparameter {name} must be positive everywhere")

    @property
    def dim(self) -> int:
        return self.m.size

    @classmethod
    def defaults(cls, variant: ModelVariant = DEFAULT_VARIANT) -> "Hyperparams":
        """Weakly informative defaults, centred per coordinate meaning.

        The adult mean starts near age 50 and the old-age location near
        age 70; every other coordinate is centred at zero.  Initial sds
        are 10, drifts get N(0, 1), variances InvGamma(0.01, 0.01).
        """
        centre = {"mu": 50.0, "xi": 70.0}
        m = np.array([centre.get(name, 0.0) for name in variant.state_names])
        k = variant.dim
        return cls(m=m, s=np.full(k, 10.0), m_beta=np.zeros(k), s_beta=np.ones(k),
                   a=np.full(k, 0.01), b=np.full(k, 0.01))

    def to_dict(self) -> dict:
        return {name: getattr(self, name).tolist()
                for name in ("m", "s", "m_beta", "s_beta", "a", "b")}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Hyperparams":
        unknown = set(d) - {"m", "s", "m_beta", "s_beta", "a", "b"}
        if unknown:
            raise ValueError(f"unknown Hyperparams fields: {sorted(unknown)}")
        return cls(**{k: np.asarray(v, dtype=np.float64) for k, v in d.items()})


@dataclass
class CountryDynamics:
    """One country's latent trajectory and dynamics parameters.

    theta0 (K,), trajectory (T, K) for times 1..T, drift beta (K,),
    innovation variances eta2 (K,).
    """

    theta0: np.ndarray
    trajectory: np.ndarray
    beta: np.ndarray
    eta2: np.ndarray

    def __post_init__(self):
        self.theta0 = np.asarray(self.theta0, dtype=np.float64)
        self.trajectory = np.asarray(self.trajectory, dtype=np.float64)
        self.beta = np.asarray(self.beta, dtype=np.float64)
        self.eta2 = np.asarray(self.eta2, dtype=np.float64)
        k = self.theta0.size
        if self.trajectory.ndim != 2 or self.trajectory.shape[1] != k:
            raise ValueError("trajectory must have shape (T, K) matching theta0")
        if self.beta.shape != (k,) or self.eta2.shape != (k,):
            raise ValueError("beta and eta2 must match theta0's length")
        if not np.all(self.eta2 > 0.0):
            raise ValueError("innovation variances must be positive")

    @property
    def n_times(self) -> int:
        return self.trajectory.shape[0]

    def increments(self) -> np.ndarray:
        """First differences theta_t - theta_{t-1}, shape (T, K)."""
        prev = np.vstack([self.theta0[None, :], self.trajectory[:-1]])
        return self.trajectory - prev


def log_state_prior(dyn: CountryDynamics, hyper: Hyperparams,
                    law: InnovationLaw = GAUSSIAN, flat_priors: bool = False) -> float:
    """Joint log density of one country's states, drifts and variances.

    Includes the initial-state prior, all transition terms and (unless
    flat_priors) the drift and variance hyperpriors.  Flat priors mean
    improper uniform on beta and on log eta2, contributing a constant.
    """
    if hyper.dim != dyn.theta0.size:
        raise ValueError("hyperparameter dimension disagrees with the state")
    total = _normal_logpdf(dyn.theta0, hyper.m, hyper.s ** 2).sum()
    prev = np.vstack([dyn.theta0[None, :], dyn.trajectory[:-1]])
    total += law.logpdf(dyn.trajectory, prev + dyn.beta, dyn.eta2).sum()
    if not flat_priors:
        total += _normal_logpdf(dyn.beta, hyper.m_beta, hyper.s_beta ** 2).sum()
        total += _invgamma_logpdf(dyn.eta2, hyper.a, hyper.b).sum()
    return float(total)


def gibbs_update_beta(increments, eta2: float, m_beta: float, s_beta: float,
                      rng: np.random.Generator) -> float:
    """Draw the drift from its Gaussian full conditional.

    increments are the observed first differences d_t for one (j, k);
    the posterior is N(v (sum d_t / eta2 + m_beta / s_beta^2), v) with
    v = (T / eta2 + 1 / s_beta^2)^-1.  An infinite s_beta yields the
    flat-prior limit and then requires T >= 1.
    """
    d = np.asarray(increments, dtype=np.float64)
    n = d.size
    prior_prec = 0.0 if math.isinf(s_beta) else 1.0 / (s_beta * s_beta)
    prec = n / eta2 + prior_prec
    if prec <= 0.0:
        raise ValueError("flat drift prior needs at least one increment")
    v = 1.0 / prec
    mean = v * (d.sum() / eta2 + (0.0 if prior_prec == 0.0 else m_beta * prior_prec))
    return mean + math.sqrt(v) * rng.standard_normal()


def gibbs_update_eta2(increments, beta: float, a: float, b: float,
                      rng: np.random.Generator) -> float:
    """Draw the innovation variance from its InvGamma full conditional.

    Posterior shape a + T/2 and rate b + sum (d_t - beta)^2 / 2; a = b = 0
    gives the flat-prior limit (uniform on log eta2) and then requires
    T >= 1.
    """
    d = np.asarray(increments, dtype=np.float64)
    n = d.size
    shape = a + 0.5 * n
    if shape <= 0.0:
        raise ValueError("flat variance prior needs at least one increment")
    rate = b + 0.5 * float(((d - beta) ** 2).sum())
    return max(rate, 1e-300) / rng.gamma(shape)


def gibbs_update_theta0(theta1: float, beta: float, eta2: float,
                        m: float, s: float, rng: np.random.Generator) -> float:
    """Draw the initial state from its Gaussian full conditional.

    Combines the N(m, s^2) prior with the single outgoing transition to
    theta_1: precision 1/s^2 + 1/eta2, mean v (m/s^2 + (theta1 - beta)/eta2).
    """
    prec = 1.0 / (s * s) + 1.0 / eta2
    v = 1.0 / prec
    mean = v * (m / (s * s) + (theta1 - beta) / eta2)
    return mean + math.sqrt(v) * rng.standard_normal()


# --- vectorized forms used by the sampler's sweep, one draw per (j, k) ---

def _gibbs_beta_all(increments: np.ndarray, eta2: np.ndarray, hyper: Hyperparams,
                    flat_priors: bool, rng: np.random.Generator) -> np.ndarray:
    """increments (p, T, K), eta2 (p, K) -> drift draws (p, K)."""
    n = increments.shape[1]
    if flat_priors:
        prior_prec = 0.0
        prior_term = 0.0
    else:
        prior_prec = 1.0 / hyper.s_beta ** 2
        prior_term = hyper.m_beta * prior_prec
    if n == 0 and flat_priors:
        raise ValueError("flat drift prior needs at least one increment")
    v = 1.0 / (n / eta2 + prior_prec)
    mean = v * (increments.sum(axis=1) / eta2 + prior_term)
    return mean + np.sqrt(v) * rng.standard_normal(eta2.shape)


def _gibbs_eta2_all(increments: np.ndarray, beta: np.ndarray, hyper: Hyperparams,
                    flat_priors: bool, rng: np.random.Generator) -> np.ndarray:
    """increments (p, T, K), beta (p, K) -> variance draws (p, K)."""
    n = increments.shape[1]
    a = 0.0 if flat_priors else hyper.a
    b = 0.0 if flat_priors else hyper.b
    shape = a + 0.5 * n
    if np.any(np.asarray(shape) <= 0.0):
        raise ValueError("flat variance prior needs at least one increment")
    rate = b + 0.5 * ((increments - beta[:, None, :]) ** 2).sum(axis=1)
    return np.maximum(rate, 1e-300) / rng.gamma(shape, size=beta.shape)


def _gibbs_theta0_all(theta1: np.ndarray, beta: np.ndarray, eta2: np.ndarray,
                      hyper: Hyperparams, rng: np.random.Generator) -> np.ndarray:
    """theta1, beta, eta2 (p, K) -> initial-state draws (p, K)."""
    prior_prec = 1.0 / hyper.s ** 2
    v = 1.0 / (prior_prec + 1.0 / eta2)
    mean = v * (hyper.m * prior_prec + (theta1 - beta) / eta2)
    return mean + np.sqrt(v) * rng.standard_normal(beta.shape)
