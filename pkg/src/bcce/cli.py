"""Command line front end.

Every subcommand builds a small flat config and hands it to one runner,
which owns the output directory: a ``manifest.json`` with one entry per
(task, format, prior, n) cell, written atomically after every cell, and
one CSV per task rendered from the manifest. Reruns over the same
directory with an unchanged config and seed skip finished cells, so the
rendered CSVs are byte identical; ``--force`` recomputes everything.

Cell values are seeded from the run seed and the cell key, never from
execution order, so results do not depend on scheduling or on which
other cells appear in the config.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from threading import Lock

import click
import numpy as np
from numpy.random import SeedSequence

from . import __version__
from .auctions import make_auction
from .dual_verify import (dual_gap_strict, dual_gap_weak,
                          monotone_step_family, perturbation_family,
                          power_curve_family)
from .learning import bcce_violation, bootstrap_schedule, hedge_self_play
from .lp_model import build_concentration_lp, build_wasserstein_lp
from .lp_solve import export_mps, solve
from .metrics import distribution_distance, fineness, theorem_bound
from .priors import DomainError, Prior

__all__ = ["main", "run_cells", "normalize_config", "fit_trend"]

MANIFEST_VERSION = 1

TASKS = ("wasserstein", "concentration", "learn", "bounds",
         "dual_strict", "dual_weak", "export")

CSV_COLUMNS = ("format", "prior", "params", "n", "scheme", "notion",
               "value", "status", "runtime_s")

DEFAULTS = {
    "formats": ["first_price", "all_pay"],
    "priors": [{"family": "uniform"}],
    "n_values": [4],
    "scheme": "naive",
    "notion": "bcce",
    "n_buyers": 2,
    "tasks": ["wasserstein"],
    "tau_max": None,
    "rounds": None,
    "window": None,
    "workers": 1,
    "method": "auto",
    "mps_threshold": 14,
}


def normalize_config(config: dict) -> dict:
    out = dict(DEFAULTS)
    unknown = set(config) - set(DEFAULTS)
    if unknown:
        raise DomainError(f"unknown config keys: {sorted(unknown)}")
    out.update(config)
    for task in out["tasks"]:
        if task not in TASKS:
            raise DomainError(f"unknown task {task!r}")
    for p in out["priors"]:
        Prior.from_dict(p)  # validates
    if "concentration" in out["tasks"] and out["window"] is None:
        raise DomainError("concentration needs a window")
    if "learn" in out["tasks"] and out["tau_max"] is None \
            and out["rounds"] is None:
        out["tau_max"] = 10
    return out


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _cell_seed(seed: int, key: str) -> SeedSequence:
    digest = hashlib.sha256(key.encode()).digest()
    return SeedSequence(entropy=(int(seed),
                                 int.from_bytes(digest[:8], "big")))


def _prior_fields(prior: Prior):
    return prior.family, prior.label()


# -- per-cell computations ----------------------------------------------------

def _lp_cell(task, fmt, prior, n, cfg, out_dir, key):
    auction = make_auction(fmt, cfg["n_buyers"], prior, n, cfg["scheme"])
    if task == "wasserstein":
        problem = build_wasserstein_lp(auction, prior, cfg["notion"])
    else:
        problem = build_concentration_lp(auction, prior, cfg["window"],
                                         cfg["notion"])
    if n > cfg["mps_threshold"] or task == "export":
        mps_dir = os.path.join(out_dir, "mps")
        os.makedirs(mps_dir, exist_ok=True)
        path = os.path.join(mps_dir, key.replace(":", "_") + ".mps")
        export_mps(problem, path)
        return {"value": None, "status": "exported",
                "mps": os.path.relpath(path, out_dir)}
    sol = solve(problem, cfg["method"])
    status = "ok" if sol.status == "Optimal" else "failed"
    return {"value": sol.objective if status == "ok" else None,
            "status": status, "iterations": sol.iterations,
            "solver": sol.method,
            "primal_infeasibility": sol.max_primal_infeasibility,
            "lp_status": sol.status}


def _learn_cell(fmt, prior, n, cfg, seed_seq):
    auction = make_auction(fmt, cfg["n_buyers"], prior, n, cfg["scheme"])
    if cfg["tau_max"] is not None:
        result = bootstrap_schedule(auction, cfg["tau_max"], seed=seed_seq)
        dist = result.aggregate
        rounds = result.total_rounds
    else:
        run = hedge_self_play(auction, cfg["rounds"], seed=seed_seq)
        dist = run.distribution()
        rounds = run.n_rounds
    value = distribution_distance(dist, prior)
    rho = bcce_violation(dist).rho
    return {"value": value, "status": "ok", "rho": rho,
            "rounds": rounds, "support": dist.support_size}


def _bounds_cell(fmt, prior, n, cfg):
    auction = make_auction(fmt, cfg["n_buyers"], prior, n, cfg["scheme"])
    delta = fineness(auction, v_max=prior.v_max)
    report = theorem_bound(fmt, prior, cfg["n_buyers"], delta,
                           auction.max_bid)
    return {"value": report.value, "status": "ok", "delta": delta,
            "K": report.constants.K, "degenerate": report.degenerate}


def _dual_cell(task, fmt, prior, cfg):
    N = cfg["n_buyers"]
    gaps = []
    if task == "dual_strict":
        for lam in power_curve_family():
            gaps.append(dual_gap_strict(fmt, prior, N, lam))
        for lam in perturbation_family(fmt, prior, N):
            gaps.append(dual_gap_strict(fmt, prior, N, lam))
    else:
        for lam in power_curve_family():
            gaps.append(dual_gap_weak(fmt, prior, N, lam))
        for lam in monotone_step_family():
            gaps.append(dual_gap_weak(fmt, prior, N, lam))
    value = float(min(gaps))
    status = "ok" if value >= -1e-7 else "failed"
    return {"value": value, "status": status, "n_strategies": len(gaps)}


def _run_cell(task, fmt, prior, n, cfg, out_dir, key, seed):
    start = time.perf_counter()
    try:
        if task in ("wasserstein", "concentration", "export"):
            cell = _lp_cell(task, fmt, prior, n, cfg, out_dir, key)
        elif task == "learn":
            cell = _learn_cell(fmt, prior, n, cfg, _cell_seed(seed, key))
        elif task == "bounds":
            cell = _bounds_cell(fmt, prior, n, cfg)
        else:
            cell = _dual_cell(task, fmt, prior, cfg)
    except Exception as exc:  # record and continue
        cell = {"value": None, "status": "failed", "error": f"{exc}"}
    cell["runtime_s"] = time.perf_counter() - start
    fam, params = _prior_fields(prior)
    cell.update({"task": task, "format": fmt, "prior": fam, "params": params,
                 "n": n, "scheme": cfg["scheme"], "notion": cfg["notion"]})
    return cell


def _cell_keys(cfg):
    keys = []
    for task in cfg["tasks"]:
        for fmt in cfg["formats"]:
            for pd in cfg["priors"]:
                prior = Prior.from_dict(pd)
                label = prior.family + (
                    f"({prior.label()})" if prior.label() else "")
                if task in ("dual_strict", "dual_weak"):
                    key = f"{task}:{fmt}:{label}"
                    keys.append((key, task, fmt, prior, None))
                    continue
                for n in cfg["n_values"]:
                    key = f"{task}:{fmt}:{label}:{cfg['scheme']}:n{n}"
                    if task == "concentration":
                        key += f":w{cfg['window']:g}"
                    keys.append((key, task, fmt, prior, n))
    return keys


def _write_json_atomic(path: str, payload: dict):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _fmt_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def _render_csvs(out_dir: str, manifest: dict):
    by_task = {}
    for key, cell in manifest["cells"].items():
        by_task.setdefault(cell["task"], []).append(cell)
    for task, cells in by_task.items():
        cells.sort(key=lambda c: (c["format"], c["prior"], c["params"],
                                  c["n"] if c["n"] is not None else -1))
        lines = [",".join(CSV_COLUMNS)]
        for c in cells:
            row = [c["format"], c["prior"], c["params"],
                   "" if c["n"] is None else str(c["n"]),
                   c["scheme"], c["notion"], _fmt_value(c["value"]),
                   c["status"], f"{c['runtime_s']:.3f}"]
            lines.append(",".join(row))
        with open(os.path.join(out_dir, f"{task}.csv"), "w") as fh:
            fh.write("\n".join(lines) + "\n")


def run_cells(config: dict, out_dir: str, seed: int = 0,
              force: bool = False) -> dict:
    """Execute every cell of the config into ``out_dir``; returns the
    manifest. Finished cells of a previous identical run are reused."""
    cfg = normalize_config(config)
    os.makedirs(out_dir, exist_ok=True)
    chash = config_hash(cfg)
    mpath = os.path.join(out_dir, "manifest.json")
    manifest = {"version": MANIFEST_VERSION, "config_hash": chash,
                "seed": int(seed), "config": cfg, "cells": {}}
    if not force and os.path.exists(mpath):
        try:
            with open(mpath) as fh:
                prev = json.load(fh)
            if prev.get("config_hash") == chash \
                    and prev.get("seed") == int(seed) \
                    and prev.get("version") == MANIFEST_VERSION:
                manifest["cells"] = prev.get("cells", {})
        except (OSError, ValueError):
            pass

    keys = _cell_keys(cfg)
    todo = [item for item in keys if item[0] not in manifest["cells"]]
    lock = Lock()

    def work(item):
        key, task, fmt, prior, n = item
        cell = _run_cell(task, fmt, prior, n, cfg, out_dir, key, seed)
        with lock:
            manifest["cells"][key] = cell
            _write_json_atomic(mpath, manifest)
        return key

    workers = max(1, int(cfg["workers"]))
    if workers == 1 or len(todo) <= 1:
        for item in todo:
            work(item)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, todo))

    # drop cells no longer in the config (config hash equality makes this
    # a no-op in practice) and render
    wanted = {k for k, *_ in keys}
    manifest["cells"] = {k: v for k, v in manifest["cells"].items()
                         if k in wanted}
    _write_json_atomic(mpath, manifest)
    _render_csvs(out_dir, manifest)
    return manifest


def run_ok(manifest: dict) -> bool:
    return all(c["status"] in ("ok", "exported")
               for c in manifest["cells"].values())


def fit_trend(ns, values):
    """Least squares fit of a degree (1, 2) rational value(n) =
    (a n + b) / (n^2 + c n + d), linearized as
    a n + b - c (v n) - d v = v n^2. Needs at least four points; exact
    on value = K / n."""
    ns = np.asarray(ns, dtype=float)
    v = np.asarray(values, dtype=float)
    if ns.size < 4:
        raise DomainError("need at least four points")
    rows = np.column_stack([ns, np.ones_like(ns), -v * ns, -v])
    target = v * ns * ns
    coef, _, rank, _ = np.linalg.lstsq(rows, target, rcond=None)
    a, b, c, d = coef
    pred = (a * ns + b) / (ns * ns + c * ns + d)
    scale = float(np.linalg.norm(v))
    residual = float(np.linalg.norm(pred - v) / scale) if scale > 0 else 0.0
    return {"coefficients": coef, "residual": residual,
            "rank_deficient": bool(rank < 4), "predicted": pred}


# -- click wiring ---------------------------------------------------------------

# options shared by the single-task commands
def _common(fn):
    fn = click.option("--out", "out_dir", required=True,
                      type=click.Path(file_okay=False))(fn)
    fn = click.option("--seed", default=0, show_default=True, type=int)(fn)
    fn = click.option("--force", is_flag=True, default=False)(fn)
    fn = click.option("--format", "formats", multiple=True,
                      type=click.Choice(["first_price", "all_pay"]),
                      default=("first_price",), show_default=True)(fn)
    fn = click.option("--prior", "prior_spec", default="uniform",
                      show_default=True,
                      help="family[:key=val,...] e.g. power_law:alpha=0.5")(fn)
    fn = click.option("--n", "n_values", multiple=True, type=int,
                      default=(4,), show_default=True)(fn)
    fn = click.option("--scheme", default="naive", show_default=True,
                      type=click.Choice(["naive", "half_bids"]))(fn)
    return fn


def _parse_prior(spec: str) -> dict:
    if ":" not in spec:
        return {"family": spec}
    fam, rest = spec.split(":", 1)
    d = {"family": fam}
    for part in rest.split(","):
        k, val = part.split("=")
        d[k] = float(val)
    return d


def _finish(manifest):
    bad = [k for k, c in manifest["cells"].items()
           if c["status"] not in ("ok", "exported")]
    for k in sorted(manifest["cells"]):
        c = manifest["cells"][k]
        click.echo(f"{k}: {c['status']}"
                   + (f" value={_fmt_value(c['value'])}"
                      if c["value"] is not None else ""))
    if bad:
        raise SystemExit(1)


@click.group()
@click.version_option(version=__version__)
def main():
    """Equilibrium distance toolkit for discretized auctions."""


@main.command("solve-lp")
@_common
@click.option("--notion", default="bcce", show_default=True,
              type=click.Choice(["bcce", "bce"]))
@click.option("--method", default="auto", show_default=True,
              type=click.Choice(["auto", "ipm", "simplex"]))
def solve_lp(out_dir, seed, force, formats, prior_spec, n_values, scheme,
             notion, method):
    """Distance-maximizing LP over the pair relaxation."""
    cfg = {"tasks": ["wasserstein"], "formats": list(formats),
           "priors": [_parse_prior(prior_spec)], "n_values": list(n_values),
           "scheme": scheme, "notion": notion, "method": method}
    _finish(run_cells(cfg, out_dir, seed, force))


@main.command("concentration")
@_common
@click.option("--window", required=True, type=float)
@click.option("--notion", default="bcce", show_default=True,
              type=click.Choice(["bcce", "bce"]))
def concentration(out_dir, seed, force, formats, prior_spec, n_values,
                  scheme, window, notion):
    """Minimal near-equilibrium mass over the pair relaxation."""
    cfg = {"tasks": ["concentration"], "formats": list(formats),
           "priors": [_parse_prior(prior_spec)], "n_values": list(n_values),
           "scheme": scheme, "notion": notion, "window": window}
    _finish(run_cells(cfg, out_dir, seed, force))


@main.command("learn")
@_common
@click.option("--tau-max", type=int, default=None,
              help="doubling epochs; total rounds 2^tau_max - 1")
@click.option("--rounds", type=int, default=None,
              help="single run round count (power of two)")
def learn(out_dir, seed, force, formats, prior_spec, n_values, scheme,
          tau_max, rounds):
    """Self-play aggregate and its distance / obedience violation."""
    cfg = {"tasks": ["learn"], "formats": list(formats),
           "priors": [_parse_prior(prior_spec)], "n_values": list(n_values),
           "scheme": scheme, "tau_max": tau_max, "rounds": rounds}
    _finish(run_cells(cfg, out_dir, seed, force))


@main.command("bounds")
@_common
def bounds(out_dir, seed, force, formats, prior_spec, n_values, scheme):
    """Theoretical distance bound at each grid fineness."""
    cfg = {"tasks": ["bounds"], "formats": list(formats),
           "priors": [_parse_prior(prior_spec)], "n_values": list(n_values),
           "scheme": scheme}
    _finish(run_cells(cfg, out_dir, seed, force))


@main.command("verify-dual")
@_common
@click.option("--variant", default="strict", show_default=True,
              type=click.Choice(["strict", "weak"]))
def verify_dual(out_dir, seed, force, formats, prior_spec, n_values, scheme,
                variant):
    """Minimal dual certificate gap over the strategy sweep families."""
    cfg = {"tasks": [f"dual_{variant}"], "formats": list(formats),
           "priors": [_parse_prior(prior_spec)]}
    _finish(run_cells(cfg, out_dir, seed, force))


@main.command("export-mps")
@_common
@click.option("--notion", default="bcce", show_default=True,
              type=click.Choice(["bcce", "bce"]))
def export_mps_cmd(out_dir, seed, force, formats, prior_spec, n_values,
                   scheme, notion):
    """Write the relaxation LP in MPS format without solving."""
    cfg = {"tasks": ["export"], "formats": list(formats),
           "priors": [_parse_prior(prior_spec)], "n_values": list(n_values),
           "scheme": scheme, "notion": notion}
    _finish(run_cells(cfg, out_dir, seed, force))


@main.command("sweep")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True,
              type=click.Path(file_okay=False))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--force", is_flag=True, default=False)
def sweep(config_path, out_dir, seed, force):
    """Run every cell of a JSON config."""
    with open(config_path) as fh:
        cfg = json.load(fh)
    _finish(run_cells(cfg, out_dir, seed, force))


if __name__ == "__main__":
    main()
