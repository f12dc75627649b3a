"""Death-count panels, synthetic data generation and the draw store.

Panel files are long CSV with columns (country, year, age, deaths); the
top age group may be written "110+" and is folded into the last cell.
Fractional counts (common in adjusted-count sources) are rounded
half-to-even and then reconciled by largest remainder so every
(country, year) total is preserved exactly.

Posterior draws persist as a columnar CSV (one row per stored draw,
%.17g so floats round-trip bit-exactly) next to a JSON manifest carrying
the config echo, seed, layout, acceptance rates, per-column effective
sample sizes and the row/column counts used to detect truncation.
"""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .dynamics import GAUSSIAN, InnovationLaw
from .errors import DataError
from .mixture import AgeGrid, DEFAULT_VARIANT, ModelVariant, discretize_batch
from .sampler import PosteriorDraws, SamplerConfig, effective_sample_size

__all__ = [
    "DeathPanel",
    "SyntheticSpec",
    "load_panel",
    "save_panel",
    "generate_synthetic",
    "save_draws",
    "load_draws",
    "round_counts_preserving_totals",
]

STORE_FORMAT_VERSION = 1


@dataclass
class DeathPanel:
    """Complete panel of death counts D[x, j, t] on a common age grid.

    countries: labels, length p; years: equally spaced ints, length T;
    deaths: int64 array (n_ages, p, T).
    """

    countries: list[str]
    years: np.ndarray
    grid: AgeGrid
    deaths: np.ndarray

    def __post_init__(self):
        self.countries = [str(c) for c in self.countries]
        self.years = np.asarray(self.years, dtype=np.int64)
        self.deaths = np.asarray(self.deaths)
        if self.deaths.dtype.kind not in "iu":
            if np.any(self.deaths != np.floor(self.deaths)):
                raise DataError("death counts must be integers; round first")
            self.deaths = self.deaths.astype(np.int64)
        else:
            self.deaths = self.deaths.astype(np.int64)
        expected = (self.grid.n_cells, len(self.countries), self.years.size)
        if self.deaths.shape != expected:
            raise DataError(f"deaths has shape {self.deaths.shape}, expected {expected}")
        if np.any(self.deaths < 0):
            raise DataError("death counts must be nonnegative")
        if self.years.size == 0:
            raise DataError("panel needs at least one year")
        if self.years.size > 1:
            steps = np.diff(self.years)
            if steps[0] <= 0 or np.any(steps != steps[0]):
                raise DataError("years must be strictly increasing and equally spaced")
        if len(set(self.countries)) != len(self.countries):
            raise DataError("country labels must be unique")

    @property
    def n_countries(self) -> int:
        return len(self.countries)

    @property
    def n_years(self) -> int:
        return self.years.size

    @property
    def totals(self) -> np.ndarray:
        """Deaths per (country, year), shape (p, T)."""
        return self.deaths.sum(axis=0)

    @property
    def year_step(self) -> int:
        return int(self.years[1] - self.years[0]) if self.years.size > 1 else 1

    def counts_by_cell(self) -> np.ndarray:
        """Counts reshaped (p, T, n_ages), C-contiguous for the sampler."""
        return np.ascontiguousarray(np.moveaxis(self.deaths, 0, -1))

    def subset_years(self, years) -> "DeathPanel":
        years = np.asarray(years, dtype=np.int64)
        idx = np.searchsorted(self.years, years)
        if np.any(idx >= self.years.size) or np.any(self.years[idx] != years):
            missing = sorted(set(years.tolist()) - set(self.years.tolist()))
            raise DataError(f"panel lacks requested years: {missing}")
        return DeathPanel(self.countries, years, self.grid, self.deaths[:, :, idx])


def round_counts_preserving_totals(values) -> np.ndarray:
    """Round nonnegative counts to integers, preserving the exact total.

    The group total is fixed to the half-to-even rounding of the exact sum;
    individual cells start at their half-to-even rounding and the residual
    is distributed by largest remainder (ties broken by lower index), so
    every cell moves by at most one from its plain rounding.
    """
    v = np.asarray(values, dtype=np.float64)
    if np.any(v < 0.0):
        raise DataError("counts must be nonnegative")
    total = int(np.rint(v.sum()))
    base = np.rint(v).astype(np.int64)
    diff = total - int(base.sum())
    if diff != 0:
        frac = v - np.floor(v)
        if diff > 0:
            # cells whose fractional part was rounded down are raised first
            order = np.lexsort((np.arange(v.size), -frac))
            for i in order[:diff]:
                base[i] += 1
        else:
            order = np.lexsort((np.arange(v.size), frac))
            raised = 0
            for i in order:
                if base[i] > 0:
                    base[i] -= 1
                    raised += 1
                    if raised == -diff:
                        break
    return base


_TOP_AGE_RE = re.compile(r"^(\d+)\+$")


def _parse_age_column(raw: pd.Series) -> tuple[np.ndarray, int | None]:
    """Parse ages, mapping a 'N+' top group to N. Returns (ages, top_group)."""
    ages = np.empty(raw.size, dtype=np.int64)
    top: int | None = None
    as_str = raw.astype(str).str.strip()
    plus = as_str.str.match(_TOP_AGE_RE)
    if plus.any():
        tops = as_str[plus].str.slice(0, -1).astype(np.int64)
        uniq = np.unique(tops)
        if uniq.size > 1:
            raise DataError(f"conflicting open age groups: {uniq.tolist()}")
        top = int(uniq[0])
        ages[plus.to_numpy()] = top
    rest = ~plus
    try:
        parsed = pd.to_numeric(as_str[rest])
    except (ValueError, TypeError) as exc:
        raise DataError(f"unparseable age values: {exc}") from exc
    if np.any(parsed != np.floor(parsed)) or np.any(parsed < 0):
        raise DataError("ages must be nonnegative integers (or 'N+')")
    ages[rest.to_numpy()] = parsed.astype(np.int64)
    return ages, top


def load_panel(path, max_age: int | None = None) -> DeathPanel:
    """Load a long CSV (country, year, age, deaths) into a DeathPanel.

    Validation is strict: every (country, year) must cover every age cell
    exactly once, years must form one common equally spaced run across
    countries, counts must be nonnegative.  Fractional counts are rounded
    with per-(country, year) total preservation and a warning.
    """
    path = Path(path)
    try:
        df = pd.read_csv(path)
    except FileNotFoundError:
        raise DataError(f"panel file not found: {path}") from None
    except Exception as exc:
        raise DataError(f"cannot read panel csv {path}: {exc}") from exc
    needed = ["country", "year", "age", "deaths"]
    missing_cols = [c for c in needed if c not in df.columns]
    if missing_cols:
        raise DataError(f"panel csv lacks columns {missing_cols} (has {list(df.columns)})")
    if df.empty:
        raise DataError(f"panel csv {path} is empty")

    ages, top = _parse_age_column(df["age"])
    df = df.assign(age=ages)
    inferred_max = int(ages.max()) if top is None else top
    if max_age is None:
        max_age = inferred_max
    if np.any(ages > max_age):
        raise DataError(f"ages exceed max_age={max_age}")
    try:
        grid = AgeGrid(max_age)
    except ValueError as exc:
        raise DataError(f"cannot build age grid from {path}: {exc}") from exc

    deaths_raw = pd.to_numeric(df["deaths"], errors="coerce")
    if deaths_raw.isna().any():
        bad = df.loc[deaths_raw.isna(), needed].head(5)
        raise DataError(f"non-numeric death counts, e.g.\n{bad}")
    if (deaths_raw < 0).any():
        bad = df.loc[deaths_raw < 0, needed].head(5)
        raise DataError(f"negative death counts, e.g.\n{bad}")
    df = df.assign(deaths=deaths_raw.astype(np.float64))

    dup = df.duplicated(subset=["country", "year", "age"])
    if dup.any():
        bad = df.loc[dup, ["country", "year", "age"]].head(5)
        raise DataError(f"duplicate (country, year, age) rows, e.g.\n{bad}")

    countries = sorted(df["country"].astype(str).unique())
    years = np.sort(df["year"].unique().astype(np.int64))

    # completeness: every (country, year, age) cell exactly once
    expected_rows = len(countries) * years.size * grid.n_cells
    if len(df) != expected_rows:
        have = set(zip(df["country"].astype(str), df["year"].astype(int), df["age"].astype(int)))
        gaps = []
        for c in countries:
            for y in years:
                for x in range(grid.n_cells):
                    if (c, int(y), x) not in have:
                        gaps.append((c, int(y), x))
                    if len(gaps) >= 10:
                        break
                if len(gaps) >= 10:
                    break
            if len(gaps) >= 10:
                break
        raise DataError(f"panel is incomplete; first missing cells: {gaps}")

    cube = np.zeros((grid.n_cells, len(countries), years.size), dtype=np.float64)
    c_idx = {c: i for i, c in enumerate(countries)}
    y_idx = {int(y): i for i, y in enumerate(years)}
    cube[df["age"].to_numpy(),
         df["country"].astype(str).map(c_idx).to_numpy(),
         df["year"].astype(int).map(y_idx).to_numpy()] = df["deaths"].to_numpy()

    if np.any(cube != np.floor(cube)):
        warnings.warn("fractional death counts rounded with per-(country, year) "
                      "total preservation", stacklevel=2)
        out = np.empty_like(cube, dtype=np.int64)
        for j in range(cube.shape[1]):
            for t in range(cube.shape[2]):
                out[:, j, t] = round_counts_preserving_totals(cube[:, j, t])
        cube = out
    return DeathPanel(countries, years, grid, cube.astype(np.int64))


def save_panel(panel: DeathPanel, path) -> None:
    """Write a DeathPanel back to long CSV (inverse of load_panel)."""
    ages, cidx, yidx = np.meshgrid(panel.grid.ages, np.arange(panel.n_countries),
                                   np.arange(panel.n_years), indexing="ij")
    df = pd.DataFrame({
        "country": np.asarray(panel.countries, dtype=object)[cidx.ravel()],
        "year": panel.years[yidx.ravel()],
        "age": ages.ravel(),
        "deaths": panel.deaths.ravel(),
    })
    df.to_csv(path, index=False)


@dataclass(frozen=True)
class SyntheticSpec:
    """Ground truth for simulated panels.

    One set of dynamics (theta0 location, drift beta, variances eta2) is
    applied to every country with independent noise.  n is the deaths
    total per (country, year), scalar or (p, T).
    """

    p: int = 2
    T: int = 20
    n: object = 100_000
    seed: int = 0
    theta0: object = None
    beta: object = None
    eta2: object = None
    variant: ModelVariant = DEFAULT_VARIANT
    innovation: InnovationLaw = GAUSSIAN
    start_year: int = 2000
    max_age: int = 110

    def __post_init__(self):
        if self.p < 1 or self.T < 1:
            raise ValueError("p and T must be at least 1")
        n = np.asarray(self.n)
        if np.any(n < 1):
            raise ValueError("per-(country, year) totals must be >= 1")

    def resolved_dynamics(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        k = self.variant.dim
        names = self.variant.state_names
        if self.theta0 is None:
            centre = {"logit_pi1": 2.0, "logit_pi2": 2.0, "mu": 45.0, "log_sigma": np.log(12.0),
                      "xi": 80.0, "log_omega": np.log(10.0), "alpha": -2.0,
                      "log_beta_a": np.log(3.0), "log_beta_b": np.log(2.0),
                      "log_gamma": np.log(2.0)}
            theta0 = np.array([centre[name] for name in names])
        else:
            theta0 = _as_len(self.theta0, k, "theta0")
        beta = np.zeros(k) if self.beta is None else _as_len(self.beta, k, "beta")
        eta2 = np.full(k, 1e-3) if self.eta2 is None else _as_len(self.eta2, k, "eta2")
        if not np.all(eta2 > 0.0):
            raise ValueError("eta2 must be positive")
        return theta0, beta, eta2


def _as_len(x, k: int, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.shape != (k,):
        raise ValueError(f"{name} must have shape ({k},), got {v.shape}")
    return v


def generate_synthetic(spec: SyntheticSpec) -> tuple[DeathPanel, dict]:
    """Simulate a panel under known dynamics; returns (panel, truth).

    truth holds the simulated unconstrained trajectories ("theta",
    (p, T+1, K) with slot 0 the initial state), the shared "beta" and
    "eta2", the cell probabilities "probs" (p, T, A) and the layout names.
    """
    rng = np.random.default_rng(spec.seed)
    theta0, beta, eta2 = spec.resolved_dynamics()
    p, T, k = spec.p, spec.T, spec.variant.dim
    sd = np.sqrt(eta2)

    theta = np.empty((p, T + 1, k))
    theta[:, 0, :] = theta0
    for t in range(1, T + 1):
        eps = spec.innovation.draw_standard(rng, (p, k))
        theta[:, t, :] = theta[:, t - 1, :] + beta + sd * eps

    grid = AgeGrid(spec.max_age)
    probs = discretize_batch(theta[:, 1:, :].reshape(p * T, k), spec.variant, grid)
    probs = probs.reshape(p, T, grid.n_cells)

    totals = np.broadcast_to(np.asarray(spec.n, dtype=np.int64), (p, T))
    deaths = np.empty((grid.n_cells, p, T), dtype=np.int64)
    for j in range(p):
        for t in range(T):
            deaths[:, j, t] = rng.multinomial(int(totals[j, t]), probs[j, t])

    countries = [f"C{j + 1:02d}" for j in range(p)]
    years = spec.start_year + np.arange(T, dtype=np.int64)
    panel = DeathPanel(countries, years, grid, deaths)
    truth = {"theta": theta, "beta": beta, "eta2": eta2, "probs": probs,
             "param_names": spec.variant.state_names}
    return panel, truth


# --- draw store -----------------------------------------------------------

def _draw_columns(draws: PosteriorDraws) -> list[str]:
    names = draws.param_names
    cols = []
    p, n_times = len(draws.countries), draws.theta.shape[3]
    for j in range(p):
        for t in range(n_times):
            for name in names:
                cols.append(f"theta.j{j}.t{t}.{name}")
    for j in range(p):
        for name in names:
            cols.append(f"beta.j{j}.{name}")
    for j in range(p):
        for name in names:
            cols.append(f"eta2.j{j}.{name}")
    return cols


def save_draws(draws: PosteriorDraws, out_dir) -> None:
    """Persist draws as out_dir/draws.csv plus out_dir/manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    c, s = draws.n_chains, draws.n_stored
    p, n_times, k = draws.theta.shape[2], draws.theta.shape[3], draws.theta.shape[4]

    flat = np.concatenate([
        draws.theta.reshape(c * s, p * n_times * k),
        draws.beta.reshape(c * s, p * k),
        draws.eta2.reshape(c * s, p * k),
    ], axis=1)
    cols = _draw_columns(draws)
    chain_col = np.repeat(np.arange(c), s)
    iter_col = np.tile(np.arange(s), c)

    csv_path = out / "draws.csv"
    with open(csv_path, "w") as fh:
        fh.write("chain,draw,loglik," + ",".join(cols) + "\n")
        ll = draws.loglik.reshape(c * s)
        for r in range(c * s):
            row = flat[r]
            fh.write(f"{chain_col[r]},{iter_col[r]},{ll[r]:.17g},"
                     + ",".join(f"{v:.17g}" for v in row) + "\n")

    ess: dict[str, float | None] = {}
    for i, name in enumerate(cols):
        series = flat[:, i].reshape(c, s)
        if s < 10:
            ess[name] = None
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ess[name] = float(np.mean([effective_sample_size(series[ci]) for ci in range(c)]))

    manifest = {
        "format_version": STORE_FORMAT_VERSION,
        "package_version": __version__,
        "config": draws.config.to_dict(),
        "seed": draws.config.seed,
        "countries": draws.countries,
        "years": [int(y) for y in draws.years],
        "param_names": list(draws.param_names),
        "n_chains": c,
        "n_stored": s,
        "n_columns": len(cols) + 3,
        "n_rows": c * s,
        "acceptance": {"labels": draws.block_labels,
                       "rates": draws.acceptance_rates.tolist()},
        "ess": ess,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1)


def load_draws(in_dir) -> PosteriorDraws:
    """Load a draw store written by save_draws; validates shape and version."""
    src = Path(in_dir)
    man_path = src / "manifest.json"
    csv_path = src / "draws.csv"
    if not man_path.exists() or not csv_path.exists():
        raise DataError(f"draw store at {src} lacks draws.csv or manifest.json")
    with open(man_path) as fh:
        man = json.load(fh)
    if man.get("format_version") != STORE_FORMAT_VERSION:
        raise DataError(f"draw store format_version {man.get('format_version')} "
                        f"unsupported (expected {STORE_FORMAT_VERSION})")
    df = pd.read_csv(csv_path, float_precision="round_trip")
    if len(df) != man["n_rows"] or df.shape[1] != man["n_columns"]:
        raise DataError(f"draw store truncated: csv is {df.shape}, manifest says "
                        f"({man['n_rows']}, {man['n_columns']})")

    cfg = SamplerConfig.from_dict(man["config"])
    c, s = man["n_chains"], man["n_stored"]
    names = tuple(man["param_names"])
    p = len(man["countries"])
    k = len(names)
    n_times = len(man["years"]) + 1

    cols = df.columns.tolist()
    expected_cols = ["chain", "draw", "loglik"]
    body = df[cols[3:]].to_numpy(dtype=np.float64)
    if cols[:3] != expected_cols:
        raise DataError(f"draw store columns must start with {expected_cols}")
    n_theta = p * n_times * k
    theta = body[:, :n_theta].reshape(c, s, p, n_times, k)
    beta = body[:, n_theta:n_theta + p * k].reshape(c, s, p, k)
    eta2 = body[:, n_theta + p * k:].reshape(c, s, p, k)
    rates = np.asarray(man["acceptance"]["rates"], dtype=np.float64)
    return PosteriorDraws(
        theta=theta, beta=beta, eta2=eta2,
        loglik=df["loglik"].to_numpy(dtype=np.float64).reshape(c, s),
        countries=list(man["countries"]),
        years=np.asarray(man["years"], dtype=np.int64),
        param_names=names,
        config=cfg,
        acceptance_rates=rates,
        block_labels=list(man["acceptance"]["labels"]),
    )
