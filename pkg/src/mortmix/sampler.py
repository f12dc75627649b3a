"""Adaptive Metropolis-within-Gibbs over latent state trajectories.

States are updated in Metropolis blocks with multivariate Gaussian random
walk proposals whose covariance adapts during burn-in (running empirical
covariance, scaled toward a target acceptance rate, plus an epsilon * I
floor) and is frozen afterwards so the post-burn-in kernel is Markov.
Drifts, innovation variances and initial states use their conjugate
Gaussian / inverse-gamma full conditionals under Gaussian innovations,
and scalar adaptive Metropolis under the Student-t innovation law.

The Metropolis full conditional of a state block at time t includes the
data term of every touched (country, t) cell plus both adjacent
transition densities: incoming t-1 -> t and outgoing t -> t+1 (absent
for t = T).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Mapping

import numpy as np

from .dynamics import (GAUSSIAN, Hyperparams, InnovationLaw, _gibbs_beta_all,
                       _gibbs_eta2_all, _gibbs_theta0_all, _invgamma_logpdf,
                       _normal_logpdf, CountryDynamics, log_state_prior)
from .errors import NumericalError
from .mixture import (DEFAULT_VARIANT, AgeGrid, ModelVariant, _loglik_terms,
                      discretize_batch, log_multinomial_coef)

if TYPE_CHECKING:
    from .data import DeathPanel

__all__ = [
    "SamplerConfig",
    "AdaptiveProposal",
    "Block",
    "BlockContext",
    "PosteriorDraws",
    "run_chain",
    "metropolis_log_ratio",
    "initialize_states",
    "effective_sample_size",
    "log_joint",
]

BLOCKINGS = ("per_tk", "per_jt", "scalar")


@dataclass(frozen=True)
class SamplerConfig:
    """Chain length, blocking and adaptation knobs.

    blocking: "per_tk" proposes one coordinate jointly across countries
    (default), "per_jt" proposes one country-year's whole state vector,
    "scalar" proposes single coordinates.  target_accept defaults to
    0.234 for multivariate blocks and 0.44 for scalar ones.
    """

    n_iter: int = 2000
    burn_in: int = 1000
    thin: int = 1
    n_chains: int = 1
    seed: int = 0
    blocking: str = "per_tk"
    adapt_interval: int = 200
    target_accept: float | None = None
    adapt_epsilon: float = 1e-6
    initial_step: float = 0.1
    variant: ModelVariant = DEFAULT_VARIANT
    innovation: InnovationLaw = GAUSSIAN
    flat_priors: bool = False

    def __post_init__(self):
        if self.n_iter < 1:
            raise ValueError("n_iter must be >= 1")
        if not 0 <= self.burn_in < self.n_iter:
            raise ValueError("burn_in must satisfy 0 <= burn_in < n_iter")
        if not 1 <= self.thin <= self.n_iter:
            raise ValueError("thin must satisfy 1 <= thin <= n_iter")
        if self.n_chains < 1:
            raise ValueError("n_chains must be >= 1")
        if self.blocking not in BLOCKINGS:
            raise ValueError(f"blocking must be one of {BLOCKINGS}, got {self.blocking!r}")
        if self.adapt_interval < 1:
            raise ValueError("adapt_interval must be >= 1")
        if self.target_accept is not None and not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")
        if self.adapt_epsilon <= 0.0 or self.initial_step <= 0.0:
            raise ValueError("adapt_epsilon and initial_step must be positive")

    @property
    def n_stored(self) -> int:
        return (self.n_iter - self.burn_in) // self.thin

    def target_for(self, dim: int) -> float:
        if self.target_accept is not None:
            return self.target_accept
        return 0.44 if dim == 1 else 0.234

    def to_dict(self) -> dict:
        return {
            "n_iter": self.n_iter, "burn_in": self.burn_in, "thin": self.thin,
            "n_chains": self.n_chains, "seed": self.seed, "blocking": self.blocking,
            "adapt_interval": self.adapt_interval, "target_accept": self.target_accept,
            "adapt_epsilon": self.adapt_epsilon, "initial_step": self.initial_step,
            "variant": self.variant.to_dict(), "innovation": self.innovation.to_dict(),
            "flat_priors": self.flat_priors,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SamplerConfig":
        d = dict(d)
        unknown = set(d) - {f.name for f in cls.__dataclass_fields__.values()}
        allowed = {"n_iter", "burn_in", "thin", "n_chains", "seed", "blocking",
                   "adapt_interval", "target_accept", "adapt_epsilon", "initial_step",
                   "variant", "innovation", "flat_priors"}
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown SamplerConfig fields: {sorted(unknown)}")
        if "variant" in d:
            d["variant"] = ModelVariant.from_dict(d["variant"])
        if "innovation" in d:
            d["innovation"] = InnovationLaw.from_dict(d["innovation"])
        return cls(**d)


class AdaptiveProposal:
    """Gaussian random-walk proposal with frozen-after-burn-in adaptation.

    Keeps a running (Welford) mean and covariance of observed states.
    Every adaptation step the proposal covariance is rebuilt as
    scale * (empirical_cov + epsilon * I) and scale is nudged by
    exp(observed_rate - target); until enough observations accumulate the
    empirical part stays at initial_step**2 * I.  Starting scale is the
    classic 2.38**2 / dim.
    """

    def __init__(self, dim: int, target_accept: float, epsilon: float = 1e-6,
                 initial_step: float = 0.1):
        if dim < 1:
            raise ValueError("proposal dimension must be >= 1")
        if not 0.0 < target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")
        self.dim = dim
        self.target_accept = target_accept
        self.epsilon = float(epsilon)
        self.initial_step = float(initial_step)
        self.scale = 2.38 ** 2 / dim
        self._mean = np.zeros(dim)
        self._m2 = np.zeros((dim, dim))
        self.n_obs = 0
        self._attempts = 0
        self._accepts = 0
        self._root = math.sqrt(self.scale) * self.initial_step * np.eye(dim)

    # --- covariance bookkeeping ---

    def observe(self, value) -> None:
        x = np.asarray(value, dtype=np.float64)
        self.n_obs += 1
        delta = x - self._mean
        self._mean += delta / self.n_obs
        self._m2 += np.outer(delta, x - self._mean)

    def record(self, accepted: bool) -> None:
        self._attempts += 1
        self._accepts += int(accepted)

    @property
    def covariance(self) -> np.ndarray:
        """Current proposal covariance (the matrix actually proposed from)."""
        return self._root @ self._root.T

    def empirical_covariance(self) -> np.ndarray:
        if self.n_obs < 2:
            return self.initial_step ** 2 * np.eye(self.dim)
        return self._m2 / (self.n_obs - 1)

    def adapt(self) -> None:
        """Consume the acceptance window and refresh scale and covariance."""
        if self._attempts:
            rate = self._accepts / self._attempts
            self.scale *= math.exp(rate - self.target_accept)
        self._attempts = 0
        self._accepts = 0
        if self.n_obs >= max(20, 2 * self.dim):
            cov = self.empirical_covariance()
        else:
            cov = self.initial_step ** 2 * np.eye(self.dim)
        cov = self.scale * (cov + self.epsilon * np.eye(self.dim))
        try:
            self._root = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            cov += self.scale * 1e-8 * np.eye(self.dim)
            self._root = np.linalg.cholesky(cov)

    def propose(self, current, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(self.dim)
        return np.asarray(current, dtype=np.float64) + self._root @ z


@dataclass(frozen=True)
class Block:
    """One Metropolis block: which state coordinates move together.

    kind "tk" moves coordinate k at time t jointly across all countries;
    "jt" moves the whole state of country j at time t; "scalar" moves a
    single (j, t, k) coordinate.  t runs 1..T (slot 0 is the initial
    state, which has its own update).
    """

    kind: str
    t: int
    j: int | None = None
    k: int | None = None

    def label(self, names: tuple[str, ...]) -> str:
        if self.kind == "tk":
            return f"t{self.t}.{names[self.k]}"
        if self.kind == "jt":
            return f"j{self.j}.t{self.t}"
        return f"j{self.j}.t{self.t}.{names[self.k]}"


@dataclass
class BlockContext:
    """Everything metropolis_log_ratio needs besides the two block values.

    deaths: counts by cell (p, T, n_ages); theta: full current states
    (p, T+1, K); cur_loglik optionally carries the cached data log-
    likelihood terms of the touched cells (without the multinomial
    coefficient, which cancels).
    """

    deaths: np.ndarray
    grid: AgeGrid
    variant: ModelVariant
    law: InnovationLaw
    theta: np.ndarray
    beta: np.ndarray
    eta2: np.ndarray
    block: Block
    cur_loglik: np.ndarray | None = None


def _block_pieces(values, ctx: BlockContext):
    """Assemble touched state rows and transition slices for one block value."""
    b = ctx.block
    theta = ctx.theta
    v = np.asarray(values, dtype=np.float64)
    if b.kind == "tk":
        rows = theta[:, b.t, :].copy()
        rows[:, b.k] = v
        coord = v[:, None]
        ks = [b.k]
        prev = theta[:, b.t - 1, ks]
        nxt = theta[:, b.t + 1, ks] if b.t < theta.shape[1] - 1 else None
        beta = ctx.beta[:, ks]
        eta2 = ctx.eta2[:, ks]
        deaths = ctx.deaths[:, b.t - 1, :]
    elif b.kind == "jt":
        rows = v[None, :]
        coord = rows
        prev = theta[b.j, b.t - 1, :][None, :]
        nxt = theta[b.j, b.t + 1, :][None, :] if b.t < theta.shape[1] - 1 else None
        beta = ctx.beta[b.j][None, :]
        eta2 = ctx.eta2[b.j][None, :]
        deaths = ctx.deaths[b.j, b.t - 1, :][None, :]
    elif b.kind == "scalar":
        rows = theta[b.j, b.t, :].copy()[None, :]
        rows[0, b.k] = v if v.ndim == 0 else v[0]
        coord = rows[:, [b.k]]
        prev = theta[b.j, b.t - 1, [b.k]][None, :]
        nxt = theta[b.j, b.t + 1, [b.k]][None, :] if b.t < theta.shape[1] - 1 else None
        beta = ctx.beta[b.j, [b.k]][None, :]
        eta2 = ctx.eta2[b.j, [b.k]][None, :]
        deaths = ctx.deaths[b.j, b.t - 1, :][None, :]
    else:
        raise ValueError(f"unknown block kind {b.kind!r}")
    return rows, coord, prev, nxt, beta, eta2, deaths


def _block_ratio(current, proposed, ctx: BlockContext) -> tuple[float, np.ndarray]:
    """Log acceptance ratio and the proposed side's data loglik terms."""
    rows_c, coord_c, prev, nxt, beta, eta2, deaths = _block_pieces(current, ctx)
    rows_p, coord_p, *_ = _block_pieces(proposed, ctx)

    if ctx.cur_loglik is not None:
        lik_c = ctx.cur_loglik
    else:
        lik_c = _loglik_terms(deaths, discretize_batch(rows_c, ctx.variant, ctx.grid))
    lik_p = _loglik_terms(deaths, discretize_batch(rows_p, ctx.variant, ctx.grid))

    law = ctx.law
    logr = float(lik_p.sum() - lik_c.sum())
    logr += float((law.logpdf(coord_p, prev + beta, eta2)
                   - law.logpdf(coord_c, prev + beta, eta2)).sum())
    if nxt is not None:
        logr += float((law.logpdf(nxt, coord_p + beta, eta2)
                       - law.logpdf(nxt, coord_c + beta, eta2)).sum())
    return logr, lik_p


def metropolis_log_ratio(current, proposed, ctx: BlockContext) -> float:
    """Log Metropolis ratio for a state block under symmetric proposals.

    Equals the log joint density difference between the proposed and
    current configurations: data terms of every touched (country, time)
    cell plus the incoming and (when t < T) outgoing transition terms.
    Identical current and proposed values give exactly 0.
    """
    logr, _ = _block_ratio(current, proposed, ctx)
    return logr


@dataclass
class PosteriorDraws:
    """Stored posterior sample plus everything needed to reuse it.

    theta: (n_chains, n_stored, p, T+1, K) unconstrained states (slot 0 is
    the initial state); beta, eta2: (n_chains, n_stored, p, K); loglik:
    (n_chains, n_stored) data log-likelihood including the multinomial
    coefficient.
    """

    theta: np.ndarray
    beta: np.ndarray
    eta2: np.ndarray
    loglik: np.ndarray
    countries: list[str]
    years: np.ndarray
    param_names: tuple[str, ...]
    config: SamplerConfig
    acceptance_rates: np.ndarray
    block_labels: list[str]
    proposal_checks: list[dict] = field(default_factory=list)

    @property
    def n_chains(self) -> int:
        return self.theta.shape[0]

    @property
    def n_stored(self) -> int:
        return self.theta.shape[1]

    def pooled(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """theta, beta, eta2 with the chain axis folded into the draw axis."""
        c, s = self.n_chains, self.n_stored
        return (self.theta.reshape(c * s, *self.theta.shape[2:]),
                self.beta.reshape(c * s, *self.beta.shape[2:]),
                self.eta2.reshape(c * s, *self.eta2.shape[2:]))


def _build_blocks(p: int, n_times: int, dim: int, blocking: str) -> list[Block]:
    blocks: list[Block] = []
    if blocking == "per_tk":
        for t in range(1, n_times):
            for k in range(dim):
                blocks.append(Block("tk", t=t, k=k))
    elif blocking == "per_jt":
        for j in range(p):
            for t in range(1, n_times):
                blocks.append(Block("jt", t=t, j=j))
    else:
        for j in range(p):
            for t in range(1, n_times):
                for k in range(dim):
                    blocks.append(Block("scalar", t=t, j=j, k=k))
    return blocks


def _block_dim(block: Block, p: int, dim: int) -> int:
    return {"tk": p, "jt": dim, "scalar": 1}[block.kind]


def initialize_states(panel: "DeathPanel", hyper: Hyperparams, cfg: SamplerConfig,
                      rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw a finite-likelihood starting point (theta, beta, eta2).

    Initial states come from the initial-state prior, held constant over
    time; drifts start at their prior mean and variances at the prior
    mode.  If any (country, year) cell has -inf log-likelihood the draw
    is retried with the prior progressively shrunk toward its centre, up
    to 100 times, then NumericalError reports the offending cell.
    """
    variant = cfg.variant
    k = variant.dim
    if hyper.dim != k:
        raise ValueError(f"hyperparameters have dim {hyper.dim}, variant needs {k}")
    p, n_years = panel.n_countries, panel.n_years
    deaths = panel.counts_by_cell()

    # feasibility factorizes over countries, so retry each one separately
    theta0 = np.empty((p, k))
    for j in range(p):
        ok = False
        bad_t = 0
        for attempt in range(100):
            shrink = 0.9 ** attempt
            cand = hyper.m + shrink * hyper.s * rng.standard_normal(k)
            probs = discretize_batch(np.tile(cand, (n_years, 1)), variant, panel.grid)
            lik = _loglik_terms(deaths[j], probs)
            if np.all(np.isfinite(lik)):
                theta0[j] = cand
                ok = True
                break
            bad_t = int(np.argmin(lik))
        if not ok:
            raise NumericalError(
                f"non-finite log-likelihood at initialization for country index {j}, "
                f"year index {bad_t} after 100 shrunken prior draws")
    theta = np.repeat(theta0[:, None, :], n_years + 1, axis=1)
    beta = np.broadcast_to(hyper.m_beta, (p, k)).copy()
    eta2_init = 1e-4 if cfg.flat_priors else np.maximum(hyper.b / (hyper.a + 1.0), 1e-4)
    eta2 = np.broadcast_to(eta2_init, (p, k)).copy()
    return theta, beta, eta2


def log_joint(panel: "DeathPanel", theta: np.ndarray, beta: np.ndarray,
              eta2: np.ndarray, hyper: Hyperparams,
              variant: ModelVariant = DEFAULT_VARIANT,
              law: InnovationLaw = GAUSSIAN, flat_priors: bool = False) -> float:
    """Full log joint density: data terms (with coefficients) plus priors.

    Reference implementation used by tests and diagnostics; the sampler's
    incremental ratios must agree with differences of this quantity.
    """
    p, n_years = panel.n_countries, panel.n_years
    k = variant.dim
    deaths = panel.counts_by_cell().reshape(p * n_years, panel.grid.n_cells)
    probs = discretize_batch(theta[:, 1:, :].reshape(p * n_years, k), variant, panel.grid)
    total = float(_loglik_terms(deaths, probs).sum() + log_multinomial_coef(deaths).sum())
    for j in range(p):
        dyn = CountryDynamics(theta[j, 0], theta[j, 1:], beta[j], eta2[j])
        total += log_state_prior(dyn, hyper, law, flat_priors)
    return total


def _student_t_param_sweep(theta, beta, eta2, hyper, law, flat_priors,
                           proposals, rng, adapting):
    """Scalar Metropolis updates of theta0, beta and log eta2 per (j, k)."""
    p, _, k = theta.shape
    for j in range(p):
        for kk in range(k):
            d = np.diff(theta[j, :, kk])
            # initial state: proper prior times first transition
            prop0 = proposals[("theta0", j, kk)]
            cur = theta[j, 0, kk]
            cand = float(prop0.propose([cur], rng)[0])

            def target0(x):
                out = _normal_logpdf(x, hyper.m[kk], hyper.s[kk] ** 2)
                out += law.logpdf(theta[j, 1, kk], x + beta[j, kk], eta2[j, kk])
                return float(out)

            accept = math.log(rng.random()) < target0(cand) - target0(cur)
            if accept:
                theta[j, 0, kk] = cand
                d = np.diff(theta[j, :, kk])
            prop0.record(accept)
            if adapting:
                prop0.observe([theta[j, 0, kk]])

            # drift
            propb = proposals[("beta", j, kk)]
            cur = beta[j, kk]
            cand = float(propb.propose([cur], rng)[0])

            def target_beta(x):
                out = law.logpdf(d, x, eta2[j, kk]).sum()
                if not flat_priors:
                    out += _normal_logpdf(x, hyper.m_beta[kk], hyper.s_beta[kk] ** 2)
                return float(out)

            accept = math.log(rng.random()) < target_beta(cand) - target_beta(cur)
            if accept:
                beta[j, kk] = cand
            propb.record(accept)
            if adapting:
                propb.observe([beta[j, kk]])

            # innovation variance, sampled as zeta = log eta2
            propv = proposals[("eta2", j, kk)]
            cur = math.log(eta2[j, kk])
            cand = float(propv.propose([cur], rng)[0])

            def target_zeta(z):
                out = law.logpdf(d, beta[j, kk], math.exp(z)).sum()
                if not flat_priors:
                    # InvGamma density in eta2 plus the log-scale Jacobian
                    out += _invgamma_logpdf(math.exp(z), hyper.a[kk], hyper.b[kk]) + z
                return float(out)

            accept = math.log(rng.random()) < target_zeta(cand) - target_zeta(cur)
            if accept:
                eta2[j, kk] = math.exp(cand)
            propv.record(accept)
            if adapting:
                propv.observe([math.log(eta2[j, kk])])


def _run_single_chain(panel: "DeathPanel", hyper: Hyperparams, cfg: SamplerConfig,
                      seed_seq: np.random.SeedSequence):
    rng = np.random.default_rng(seed_seq)
    variant, law = cfg.variant, cfg.innovation
    k = variant.dim
    p, n_years = panel.n_countries, panel.n_years
    grid = panel.grid
    deaths = panel.counts_by_cell()
    coef_total = float(log_multinomial_coef(deaths.reshape(p * n_years, -1)).sum())

    theta, beta, eta2 = initialize_states(panel, hyper, cfg, rng)
    lik_cache = _loglik_terms(
        deaths.reshape(p * n_years, -1),
        discretize_batch(theta[:, 1:, :].reshape(p * n_years, k), variant, grid),
    ).reshape(p, n_years)

    blocks = _build_blocks(p, n_years + 1, k, cfg.blocking)
    proposals = [AdaptiveProposal(_block_dim(b, p, k), cfg.target_for(_block_dim(b, p, k)),
                                  cfg.adapt_epsilon, cfg.initial_step) for b in blocks]
    accept_post = np.zeros(len(blocks))
    attempts_post = 0

    hyper_proposals: dict = {}
    if not law.conjugate:
        for j in range(p):
            for kk in range(k):
                for what in ("theta0", "beta", "eta2"):
                    hyper_proposals[(what, j, kk)] = AdaptiveProposal(
                        1, cfg.target_for(1), cfg.adapt_epsilon, cfg.initial_step)

    n_stored = cfg.n_stored
    out_theta = np.empty((n_stored, p, n_years + 1, k))
    out_beta = np.empty((n_stored, p, k))
    out_eta2 = np.empty((n_stored, p, k))
    out_loglik = np.empty(n_stored)
    stored = 0
    freeze_snapshot: list[tuple[float, np.ndarray]] | None = None

    for it in range(cfg.n_iter):
        adapting = it < cfg.burn_in
        for bi, block in enumerate(blocks):
            if block.kind == "tk":
                cur = theta[:, block.t, block.k].copy()
                cache = lik_cache[:, block.t - 1]
            elif block.kind == "jt":
                cur = theta[block.j, block.t, :].copy()
                cache = lik_cache[block.j, block.t - 1][None]
            else:
                cur = theta[block.j, block.t, [block.k]].copy()
                cache = lik_cache[block.j, block.t - 1][None]
            prop = proposals[bi]
            cand = prop.propose(cur, rng)
            ctx = BlockContext(deaths, grid, variant, law, theta, beta, eta2,
                               block, cur_loglik=cache)
            logr, lik_p = _block_ratio(cur, cand, ctx)
            accepted = math.log(rng.random()) < logr
            if accepted:
                if block.kind == "tk":
                    theta[:, block.t, block.k] = cand
                    lik_cache[:, block.t - 1] = lik_p
                elif block.kind == "jt":
                    theta[block.j, block.t, :] = cand
                    lik_cache[block.j, block.t - 1] = lik_p[0]
                else:
                    theta[block.j, block.t, block.k] = cand[0]
                    lik_cache[block.j, block.t - 1] = lik_p[0]
            prop.record(accepted)
            if adapting:
                if block.kind == "tk":
                    prop.observe(theta[:, block.t, block.k])
                elif block.kind == "jt":
                    prop.observe(theta[block.j, block.t, :])
                else:
                    prop.observe(theta[block.j, block.t, [block.k]])
            else:
                accept_post[bi] += int(accepted)
        if not adapting:
            attempts_post += 1

        if law.conjugate:
            theta[:, 0, :] = _gibbs_theta0_all(theta[:, 1, :], beta, eta2, hyper, rng)
            incr = np.diff(theta, axis=1)
            beta = _gibbs_beta_all(incr, eta2, hyper, cfg.flat_priors, rng)
            eta2 = _gibbs_eta2_all(incr, beta, hyper, cfg.flat_priors, rng)
        else:
            _student_t_param_sweep(theta, beta, eta2, hyper, law, cfg.flat_priors,
                                   hyper_proposals, rng, adapting)

        if adapting and (it + 1) % cfg.adapt_interval == 0:
            for prop in proposals:
                prop.adapt()
            for prop in hyper_proposals.values():
                prop.adapt()

        if it == cfg.burn_in - 1 or (cfg.burn_in == 0 and it == 0 and freeze_snapshot is None):
            freeze_snapshot = [(prop.scale, prop.covariance) for prop in proposals]

        if it >= cfg.burn_in and (it - cfg.burn_in + 1) % cfg.thin == 0:
            out_theta[stored] = theta
            out_beta[stored] = beta
            out_eta2[stored] = eta2
            out_loglik[stored] = coef_total + lik_cache.sum()
            stored += 1

    if freeze_snapshot is None:
        freeze_snapshot = [(prop.scale, prop.covariance) for prop in proposals]
    final_snapshot = [(prop.scale, prop.covariance) for prop in proposals]
    check = {
        "scale_frozen": all(a[0] == b[0] for a, b in zip(freeze_snapshot, final_snapshot)),
        "cov_frozen": all(np.array_equal(a[1], b[1])
                          for a, b in zip(freeze_snapshot, final_snapshot)),
    }
    rates = accept_post / max(attempts_post, 1)
    labels = [b.label(variant.state_names) for b in blocks]
    return (out_theta[:stored], out_beta[:stored], out_eta2[:stored],
            out_loglik[:stored], rates, labels, check)


def run_chain(panel: "DeathPanel", hyper: Hyperparams | None,
              cfg: SamplerConfig) -> PosteriorDraws:
    """Run the posterior sampler; chains are seeded by SeedSequence spawning.

    Results are bit-for-bit deterministic given (panel, hyper, cfg).
    """
    if hyper is None:
        hyper = Hyperparams.defaults(cfg.variant)
    if hyper.dim != cfg.variant.dim:
        raise ValueError("hyperparameter dimension disagrees with the variant")
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_chains)
    theta_all, beta_all, eta2_all, ll_all, rates_all, checks = [], [], [], [], [], []
    labels: list[str] = []
    for ci in range(cfg.n_chains):
        th, be, e2, ll, rates, labels, check = _run_single_chain(panel, hyper, cfg, children[ci])
        theta_all.append(th)
        beta_all.append(be)
        eta2_all.append(e2)
        ll_all.append(ll)
        rates_all.append(rates)
        checks.append(check)
    return PosteriorDraws(
        theta=np.stack(theta_all),
        beta=np.stack(beta_all),
        eta2=np.stack(eta2_all),
        loglik=np.stack(ll_all),
        countries=list(panel.countries),
        years=panel.years.copy(),
        param_names=cfg.variant.state_names,
        config=cfg,
        acceptance_rates=np.stack(rates_all),
        block_labels=labels,
        proposal_checks=checks,
    )


def effective_sample_size(draws) -> float:
    """Geyer initial monotone sequence estimator of the effective sample size.

    Autocovariances come from one FFT; consecutive pairs are summed, kept
    while positive and forced monotone nonincreasing.  A constant chain
    reports ESS 0 with a degeneracy warning; the estimate is capped at n.
    """
    x = np.asarray(draws, dtype=np.float64)
    if x.ndim != 1 or x.size < 10:
        raise ValueError("draws must be a 1-D array with at least 10 elements")
    n = x.size
    if np.all(x == x[0]):
        warnings.warn("degenerate (constant) chain: ESS reported as 0", stacklevel=2)
        return 0.0
    xc = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n] / n
    rho = acov / acov[0]

    m_max = n // 2
    pair_sum = 0.0
    prev_pair = np.inf
    for m in range(m_max):
        gam = rho[2 * m] + (rho[2 * m + 1] if 2 * m + 1 < n else 0.0)
        if gam <= 0.0:
            break
        gam = min(gam, prev_pair)
        prev_pair = gam
        pair_sum += gam
    tau = max(-1.0 + 2.0 * pair_sum, 1e-12)
    return float(min(n / tau, n))
