"""Command-line front end.

Subcommands: simulate, fit, forecast, functionals, evaluate.  Every run
takes a JSON config (--config), with --seed / --out / --threads taking
precedence over config values, writes its outputs under --out and drops
a manifest.json echoing the config, the resolved seed and SHA-256
digests of the input files.  When the output directory already holds a
draw-store manifest (fit writes one through save_draws) the run
provenance is nested under its "run" key rather than replacing it.
Exit codes: 0 success, 2 config error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .data import (DeathPanel, SyntheticSpec, generate_synthetic, load_draws,
                   load_panel, save_draws, save_panel)
from .dynamics import Hyperparams, InnovationLaw
from .errors import ConfigError, DataError, NumericalError
from .evaluation import WindowSpec, evaluate_windows, ingest_external_forecast
from .forecast import (DEFAULT_QUANTILES, ForecastConfig, forecast_states,
                       functional_bands, parameter_bands, write_band_table,
                       FUNCTIONAL_QUANTITIES)
from .mixture import ModelVariant
from .sampler import SamplerConfig, run_chain

__all__ = ["main", "cmd_simulate", "cmd_fit", "cmd_forecast",
           "cmd_functionals", "cmd_evaluate"]


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        with open(p) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {p} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


def _require(cfg: dict, key: str, command: str):
    if key not in cfg:
        raise ConfigError(f"{command} config needs a {key!r} entry")
    return cfg[key]


def _reject_unknown(cfg: dict, allowed: set[str], command: str) -> None:
    unknown = set(cfg) - allowed
    if unknown:
        raise ConfigError(f"unknown {command} config keys: {sorted(unknown)}")


def _out_dir(cfg: dict, args) -> Path:
    out = args.out or cfg.get("out")
    if not out:
        raise ConfigError("an output directory is required (--out or config 'out')")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _resolve_seed(cfg_block: dict, args) -> int:
    if args.seed is not None:
        return int(args.seed)
    return int(cfg_block.get("seed", 0))


def _write_manifest(out: Path, command: str, config: dict, seed: int,
                    inputs: list[Path], started: float, extra: dict | None = None) -> None:
    payload = {
        "command": command,
        "package_version": __version__,
        "config": config,
        "seed": seed,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "elapsed_seconds": round(time.time() - started, 3),
    }
    if extra:
        payload.update(extra)
    path = out / "manifest.json"
    if path.exists():
        # the directory already holds a draw-store manifest (written by
        # save_draws); keep its keys intact and nest the run provenance
        with open(path) as fh:
            manifest = json.load(fh)
        manifest["run"] = payload
    else:
        manifest = payload
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1)


def _sampler_config(cfg: dict, seed: int) -> SamplerConfig:
    block = dict(cfg.get("sampler", {}))
    block["seed"] = seed
    try:
        return SamplerConfig.from_dict(block)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad sampler config: {exc}") from exc


def _hyper(cfg: dict, sampler_cfg: SamplerConfig) -> Hyperparams | None:
    if "hyper" not in cfg:
        return None
    try:
        return Hyperparams.from_dict(cfg["hyper"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad hyper config: {exc}") from exc


def cmd_simulate(cfg: dict, args) -> int:
    _reject_unknown(cfg, {"synthetic", "seed", "out"}, "simulate")
    spec_block = dict(_require(cfg, "synthetic", "simulate"))
    seed = _resolve_seed(cfg, args)
    spec_block["seed"] = seed
    started = time.time()
    try:
        if "variant" in spec_block:
            spec_block["variant"] = ModelVariant.from_dict(spec_block["variant"])
        if "innovation" in spec_block:
            spec_block["innovation"] = InnovationLaw.from_dict(spec_block["innovation"])
        for key in ("theta0", "beta", "eta2"):
            if key in spec_block and spec_block[key] is not None:
                spec_block[key] = np.asarray(spec_block[key], dtype=np.float64)
        spec = SyntheticSpec(**spec_block)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad synthetic spec: {exc}") from exc
    out = _out_dir(cfg, args)
    panel, truth = generate_synthetic(spec)
    save_panel(panel, out / "panel.csv")
    with open(out / "truth.json", "w") as fh:
        json.dump({"theta": truth["theta"].tolist(),
                   "beta": truth["beta"].tolist(),
                   "eta2": truth["eta2"].tolist(),
                   "param_names": list(truth["param_names"])}, fh)
    _write_manifest(out, "simulate", cfg, seed, [], started,
                    {"countries": panel.countries,
                     "years": [int(y) for y in panel.years]})
    print(f"simulate: wrote {panel.n_countries} countries x {panel.n_years} years "
          f"to {out / 'panel.csv'}")
    return 0


def cmd_fit(cfg: dict, args) -> int:
    _reject_unknown(cfg, {"panel", "sampler", "hyper", "seed", "out"}, "fit")
    panel_path = Path(_require(cfg, "panel", "fit"))
    seed = _resolve_seed(cfg, args)
    started = time.time()
    sampler_cfg = _sampler_config(cfg, seed)
    panel = load_panel(panel_path)
    hyper = _hyper(cfg, sampler_cfg)
    out = _out_dir(cfg, args)
    draws = run_chain(panel, hyper, sampler_cfg)
    save_draws(draws, out)
    mean_rate = float(draws.acceptance_rates.mean()) if draws.acceptance_rates.size else float("nan")
    _write_manifest(out, "fit", cfg, seed, [panel_path], started,
                    {"n_stored": draws.n_stored, "n_chains": draws.n_chains,
                     "mean_acceptance": mean_rate})
    print(f"fit: {draws.n_chains} chain(s) x {draws.n_stored} stored draws "
          f"-> {out} (mean block acceptance {mean_rate:.3f})")
    return 0


def _bands_from_cfg(cfg: dict, args, command: str, need_horizon: bool) -> int:
    draws_dir = Path(_require(cfg, "draws", command))
    seed = _resolve_seed(cfg, args)
    started = time.time()
    quantiles = tuple(cfg.get("quantiles", DEFAULT_QUANTILES))
    horizon = cfg.get("horizon")
    if need_horizon and horizon is None:
        raise ConfigError(f"{command} config needs a 'horizon' entry")
    draws = load_draws(draws_dir)
    fc = None
    if horizon is not None:
        try:
            fc_cfg = ForecastConfig(horizon=int(horizon), quantiles=quantiles)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        fc = forecast_states(draws, fc_cfg, rng=np.random.default_rng(
            np.random.SeedSequence([seed, 7])))
    quantities = cfg.get("quantities", ["age_at_death"])
    for q in quantities:
        if q not in FUNCTIONAL_QUANTITIES:
            raise ConfigError(f"unknown functional quantity {q!r} "
                              f"(valid: {FUNCTIONAL_QUANTITIES})")
    a_frac = float(cfg.get("a", 0.5))
    out = _out_dir(cfg, args)
    bands = [functional_bands(draws, q, forecast=fc, quantiles=quantiles, a=a_frac)
             for q in quantities]
    write_band_table(out / "functionals.csv", bands)
    if cfg.get("parameters", command == "forecast"):
        pbands = parameter_bands(draws, forecast=fc, quantiles=quantiles)
        write_band_table(out / "parameters.csv", pbands.values())
    inputs = [draws_dir / "draws.csv", draws_dir / "manifest.json"]
    _write_manifest(out, command, cfg, seed, inputs, started,
                    {"quantities": list(quantities), "horizon": horizon})
    print(f"{command}: wrote {out / 'functionals.csv'}")
    return 0


def cmd_forecast(cfg: dict, args) -> int:
    _reject_unknown(cfg, {"draws", "horizon", "quantiles", "quantities",
                          "parameters", "a", "seed", "out"}, "forecast")
    return _bands_from_cfg(cfg, args, "forecast", need_horizon=True)


def cmd_functionals(cfg: dict, args) -> int:
    _reject_unknown(cfg, {"draws", "horizon", "quantiles", "quantities",
                          "parameters", "a", "seed", "out"}, "functionals")
    return _bands_from_cfg(cfg, args, "functionals", need_horizon=False)


def cmd_evaluate(cfg: dict, args) -> int:
    _reject_unknown(cfg, {"panels", "panel", "window", "sampler", "hyper",
                          "quantities", "metrics", "competitors", "seed", "out"},
                    "evaluate")
    seed = _resolve_seed(cfg, args)
    started = time.time()
    if "panels" in cfg:
        panel_paths = {str(k): Path(v) for k, v in cfg["panels"].items()}
    elif "panel" in cfg:
        panel_paths = {"all": Path(cfg["panel"])}
    else:
        raise ConfigError("evaluate config needs 'panel' or 'panels'")
    try:
        window = WindowSpec(**cfg.get("window", {}))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad window spec: {exc}") from exc
    sampler_cfg = _sampler_config(cfg, seed)
    hyper = _hyper(cfg, sampler_cfg)
    panels = {label: load_panel(p) for label, p in panel_paths.items()}
    competitor_files = [Path(p) for p in cfg.get("competitors", [])]
    competitors: dict = {}
    for path in competitor_files:
        table = ingest_external_forecast(path)
        for (method, country, year), probs in table.items():
            competitors.setdefault(method, {})[(method, country, year)] = probs
    quantities = tuple(cfg.get("quantities", ["age_at_death"]))
    metrics = tuple(cfg.get("metrics", ["mae", "mse"]))
    out = _out_dir(cfg, args)
    table, reports = evaluate_windows(panels, window, sampler_cfg, hyper=hyper,
                                      quantities=quantities, metrics=metrics,
                                      competitors=competitors,
                                      threads=max(1, args.threads or 1))
    table.to_csv(out / "scores.csv", index=False)
    rows = []
    for (quantity, sample, metric), report in reports.items():
        frame = report.as_frame()
        frame.insert(0, "metric", metric)
        frame.insert(0, "sample", sample)
        frame.insert(0, "quantity", quantity)
        rows.append(frame)
    if rows:
        import pandas as pd
        pd.concat(rows, ignore_index=True).to_csv(out / "report.csv", index=False)
    inputs = list(panel_paths.values()) + competitor_files
    _write_manifest(out, "evaluate", cfg, seed, inputs, started,
                    {"n_windows": len(set(table["window"])),
                     "labels": sorted(panels)})
    print(f"evaluate: {len(set(table['window']))} windows x {len(panels)} panel(s) "
          f"-> {out / 'scores.csv'}")
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "forecast": cmd_forecast,
    "functionals": cmd_functionals,
    "evaluate": cmd_evaluate,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mortmix",
        description="Dynamic mixture modelling of age-at-death distributions.")
    parser.add_argument("--version", action="version", version=f"mortmix {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("simulate", "generate a synthetic death panel with known dynamics"),
        ("fit", "run the posterior sampler on a death panel"),
        ("forecast", "forecast states and write functional bands"),
        ("functionals", "write life-table functional bands from a draw store"),
        ("evaluate", "rolling-window forecast evaluation"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, default=None,
                       help="top-level seed (overrides config)")
        p.add_argument("--out", default=None,
                       help="output directory (overrides config)")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for independent windows")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
