"""Experiment orchestration: assumptions, spin/harmonic verification, light cones.

Each run computes everything first and writes its output files in one pass at
the end, so a failing run leaves no partial output. Outputs are deterministic
byte-for-byte for a fixed config and seed.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bounds as bnd
from . import harmonic as harm
from .config import ConfigError, RunConfig
from .lattice import assumption_constants
from .lindblad import GKSLModel, commutator_norm_curves
from .operators import operator_norm, support_distance

# Absorbs summation rounding in the fitted constants before certification.
SAFETY = 1.0 + 1e-12

THREADS_ENV = "LIEBROB_THREADS"


def _max_workers() -> int:
    value = os.environ.get(THREADS_ENV, "").strip()
    if not value:
        return 1
    try:
        return max(1, int(value))
    except ValueError:
        return 1


def _thread_map(fn, items):
    """Order-preserving map, parallel when LIEBROB_THREADS allows it."""
    items = list(items)
    workers = min(_max_workers(), max(1, len(items)))
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _write_json(path: Path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_lightcone_csv(path: Path, arrivals) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("distance", "arrival"))
        for distance, arrival in arrivals:
            writer.writerow((repr(distance), repr(arrival)))


def run_assumptions(config: RunConfig, out_dir) -> dict:
    """Emit the lattice decay constants as constants.json."""
    consts = assumption_constants(config.lattice, config.eta)
    payload = {
        "eta": consts.eta,
        "p0": consts.p0,
        "extensivity_sup": consts.extensivity_sup,
    }
    if consts.n_lambda is None:
        payload["note"] = (
            "n_lambda and p1 are undefined on a single-site lattice:"
            " the off-site kernel sum is empty"
        )
    else:
        payload["n_lambda"] = consts.n_lambda
        payload["p1"] = consts.p1
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "constants.json", payload)
    return payload


def _spin_pairs(config: RunConfig, model: GKSLModel):
    """Embedded observable pairs with their support distances."""
    if not config.pairs:
        raise ConfigError("/pairs", "no observable pairs configured")
    pairs = []
    for x_name, y_name in config.pairs:
        ox = config.observables[x_name]
        oy = config.observables[y_name]
        if set(ox.support) & set(oy.support):
            raise ConfigError(
                "/pairs", f"observables {x_name!r} and {y_name!r} have overlapping"
                " supports; the bounds require disjoint supports"
            )
        d_xy = support_distance(ox.support, oy.support, config.lattice)
        pairs.append((x_name, y_name, ox, oy, d_xy))
    return pairs


def _spin_lhs(config: RunConfig, model: GKSLModel):
    """Exact commutator-norm curves for every configured pair."""
    if config.time is None or config.time.kind != "r":
        raise ConfigError("/time", "spin runs need a time section with r_points")
    r_grid = config.time.grid()
    pairs = _spin_pairs(config, model)
    curves = commutator_norm_curves(
        model, [(ox, oy) for _, _, ox, oy, _ in pairs], config.time.t, r_grid
    )
    return r_grid, pairs, curves


def _lightcone_from_curves(r_grid, t, pairs, curves, epsilon):
    """Per-distance max LHS over the dt grid, then threshold arrivals."""
    dt_grid = [t - r for r in reversed(r_grid)]
    field: dict[float, np.ndarray] = {}
    for (_, _, _, _, d_xy), curve in zip(pairs, curves):
        values = np.array([v for _, v in reversed(curve)])
        key = float(d_xy)
        field[key] = np.maximum(field[key], values) if key in field else values
    return bnd.lightcone_arrivals(dt_grid, field, epsilon), dt_grid, field


def run_verify_spin(config: RunConfig, out_dir, guard_dim: int | None = None) -> dict:
    """Certify Theorems 1-3 against exact spin dynamics; write report files."""
    if config.spin_model is None:
        raise ConfigError("/model", "verify-spin requires a spin model")
    model = config.spin_model
    if guard_dim is not None:
        model = dataclasses.replace(model, guard_dim=guard_dim)
    lattice = config.lattice
    eta = config.eta
    t = config.time.t if config.time else None

    consts = assumption_constants(lattice, eta)
    cert = bnd.lambda0_fit(model, eta)
    p0 = consts.p0 * SAFETY
    lambda0 = cert.lambda0 * SAFETY
    n_lam = consts.n_lambda * SAFETY if consts.n_lambda is not None else None
    p1 = consts.p1 * SAFETY if consts.p1 is not None else None

    r_grid, pairs, curves = _spin_lhs(config, model)

    try:
        jm = bnd.build_j_matrix(model, 0.0, t)
    except ValueError:
        jm = None  # terms on three or more sites: matrix-exponential bound inapplicable
    exp3 = {}
    if jm is not None:
        for r in r_grid:
            dt = t - float(r)
            exp3[dt] = bnd.theorem3_matrix(jm, dt)

    report = bnd.BoundReport()
    for (_, _, ox, oy, d_xy), curve in zip(pairs, curves):
        ox_norm = operator_norm(ox.matrix)
        oy_norm = operator_norm(oy.matrix)
        params1 = bnd.commutator_theorem1_params(
            ox_norm, oy_norm, len(ox.support), len(oy.support), p0, lambda0, eta
        )
        single_site = len(ox.support) == 1 and len(oy.support) == 1
        for r, lhs in curve:
            dt = t - r
            rhs1 = bnd.theorem1_bound(params1, dt, d_xy)
            rhs2 = None
            if n_lam is not None:
                rhs2 = bnd.theorem2_bound(
                    lambda0, p1, n_lam, 2.0 * ox_norm, oy_norm,
                    len(ox.support), len(oy.support), eta, dt, d_xy,
                )
            rhs3 = None
            if jm is not None and single_site:
                rhs3 = float(
                    2.0 * ox_norm * oy_norm * exp3[dt][ox.support[0], oy.support[0]]
                )
            flags = []
            slacks = []
            for name, rhs in (("thm1", rhs1), ("thm2", rhs2), ("thm3", rhs3)):
                if rhs is None:
                    slacks.append(None)
                    continue
                slacks.append(math.inf if lhs == 0.0 else rhs / lhs)
                if lhs > rhs * (1.0 + bnd.VIOLATION_TOLERANCE):
                    flags.append(name)
            report.rows.append(bnd.BoundRow(
                x_sites=ox.support, y_sites=oy.support, distance=d_xy, t=t, r=r,
                lhs=lhs, rhs1=rhs1, rhs2=rhs2, rhs3=rhs3,
                slack1=slacks[0], slack2=slacks[1], slack3=slacks[2],
                flags=tuple(flags),
            ))

    arrivals, _, _ = _lightcone_from_curves(r_grid, t, pairs, curves, config.epsilon)
    report.lightcone = arrivals

    counts = report.violation_counts()
    summary = {
        "mode": "verify-spin",
        "eta": eta,
        "constants": {
            "p0": consts.p0,
            "extensivity_sup": consts.extensivity_sup,
            "n_lambda": consts.n_lambda,
            "p1": consts.p1,
        },
        "lambda0": cert.lambda0,
        "lambda0_basis": cert.basis,
        "kappa": jm.kappa if jm is not None else None,
        "kappa_below_one": bool(jm is not None and jm.kappa < 1.0),
        "onsite_terms_excluded_from_j": bool(jm is not None and jm.onsite_excluded),
        "theorem3_applicable": jm is not None,
        "rows": len(report.rows),
        "violations": counts,
        "violation_count": sum(counts.values()),
        "max_slack": report.max_finite_slack(),
        "min_slack": report.min_slack(),
        "epsilon": config.epsilon,
        "lightcone": [{"distance": d, "arrival": a} for d, a in arrivals],
    }

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report.write_csv(out_dir / "report.csv")
    _write_json(out_dir / "summary.json", summary)
    _write_lightcone_csv(out_dir / "lightcone.csv", arrivals)
    return summary


_HARMONIC_KINDS = ("QQ", "QP", "PQ", "PP")


def _harmonic_blocks(values: np.ndarray, n: int) -> dict[str, np.ndarray]:
    return {
        "QQ": values[:n, :n],
        "QP": values[:n, n:],
        "PQ": values[n:, :n],
        "PP": values[n:, n:],
    }


def run_verify_harmonic(config: RunConfig, out_dir) -> dict:
    """Certify the harmonic bound against the exact kernel dynamics."""
    if config.harmonic_model is None:
        raise ConfigError("/model", "verify-harmonic requires a harmonic model")
    if config.time is None or config.time.kind != "dt":
        raise ConfigError("/time", "harmonic runs need a time section with dt_points")
    model = config.harmonic_model
    lattice = config.lattice
    eta = config.eta
    eta_warning = eta <= lattice.ndim
    if eta_warning:
        print(
            f"warning: eta = {eta} is not above the lattice dimension"
            f" {lattice.ndim}; the kernel-decay assumption degrades",
            file=sys.stderr,
        )

    consts = assumption_constants(lattice, eta)
    p0 = consts.p0 * SAFETY
    c0 = harm.c0_fit(model, eta) * SAFETY
    kernel = harm.build_kernel(model)
    n = model.n_sites
    dt_grid = config.time.grid()

    dist = lattice.dist
    off_diag = ~np.eye(n, dtype=bool)
    distances = np.unique(dist[off_diag])
    rate = 2.0 * p0 * (c0 + p0 * c0 * c0)

    norms = _thread_map(
        lambda dt: harm.harmonic_commutator_norms(kernel, float(dt)), dt_grid
    )

    rows = []
    violation_count = 0
    per_kind = {kind: 0 for kind in _HARMONIC_KINDS}
    field: dict[float, list[float]] = {float(d): [] for d in distances}
    for dt, cm in zip(dt_grid, norms):
        dt = float(dt)
        rhs_matrix = math.exp(rate * dt) / (2.0 * p0 * (1.0 + dist) ** eta)
        blocks = _harmonic_blocks(cm.values, n)
        step_max: dict[float, float] = {float(d): 0.0 for d in distances}
        for kind in _HARMONIC_KINDS:
            lhs = blocks[kind]
            viol = (lhs > rhs_matrix * (1.0 + bnd.VIOLATION_TOLERANCE)) & off_diag
            n_viol = int(viol.sum())
            violation_count += n_viol
            per_kind[kind] += n_viol
            for d in distances:
                mask = (dist == d) & off_diag
                lhs_max = float(lhs[mask].max())
                rhs = float(math.exp(rate * dt) / (2.0 * p0 * (1.0 + d) ** eta))
                slack = math.inf if lhs_max == 0.0 else rhs / lhs_max
                cell_viol = int((lhs[mask] > rhs * (1.0 + bnd.VIOLATION_TOLERANCE)).sum())
                rows.append((float(d), kind, dt, lhs_max, rhs, slack, cell_viol))
                key = float(d)
                step_max[key] = max(step_max[key], lhs_max)
        for key, value in step_max.items():
            field[key].append(value)

    arrivals = bnd.lightcone_arrivals([float(x) for x in dt_grid], field, config.epsilon)

    symplectic = None
    if np.all(model.m == 0):  # closed system: the flow must preserve sigma
        symplectic = max(
            _thread_map(lambda dt: harm.symplectic_defect(kernel, float(dt)), dt_grid)
        )

    finite_slacks = [row[5] for row in rows if math.isfinite(row[5])]
    summary = {
        "mode": "verify-harmonic",
        "eta": eta,
        "eta_above_lattice_dimension": not eta_warning,
        "constants": {"p0": consts.p0, "extensivity_sup": consts.extensivity_sup},
        "c0": c0 / SAFETY,
        "growth_rate": rate,
        "sites": n,
        "dt_points": len(dt_grid),
        "rows": len(rows),
        "violation_count": violation_count,
        "violations": per_kind,
        "max_slack": max(finite_slacks) if finite_slacks else None,
        "min_slack": min(finite_slacks) if finite_slacks else None,
        "epsilon": config.epsilon,
        "note": "x = y pairs are excluded: the bound is stated for distinct sites",
        "symplectic_defect": symplectic,
        "lightcone": [{"distance": d, "arrival": a} for d, a in arrivals],
    }

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "report.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("distance", "pair_kind", "dt", "lhs_max", "rhs",
                         "slack_min", "violations"))
        for d, kind, dt, lhs_max, rhs, slack, cell_viol in rows:
            writer.writerow((repr(d), kind, repr(dt), repr(lhs_max), repr(rhs),
                             repr(slack), cell_viol))
    _write_json(out_dir / "summary.json", summary)
    _write_lightcone_csv(out_dir / "lightcone.csv", arrivals)
    return summary


def run_lightcone(config: RunConfig, out_dir) -> dict:
    """Emit threshold-arrival times for the configured model's exact dynamics."""
    out_dir = Path(out_dir)
    if config.spin_model is not None:
        r_grid, pairs, curves = _spin_lhs(config, config.spin_model)
        arrivals, _, _ = _lightcone_from_curves(
            r_grid, config.time.t, pairs, curves, config.epsilon
        )
    elif config.harmonic_model is not None:
        if config.time is None or config.time.kind != "dt":
            raise ConfigError("/time", "harmonic runs need a time section with dt_points")
        kernel = harm.build_kernel(config.harmonic_model)
        n = config.harmonic_model.n_sites
        dist = config.lattice.dist
        off_diag = ~np.eye(n, dtype=bool)
        distances = np.unique(dist[off_diag])
        dt_grid = config.time.grid()
        field: dict[float, list[float]] = {float(d): [] for d in distances}
        for dt in dt_grid:
            cm = harm.harmonic_commutator_norms(kernel, float(dt))
            for d in distances:
                mask2 = np.kron(np.ones((2, 2), dtype=bool), (dist == d) & off_diag)
                field[float(d)].append(float(cm.values[mask2].max()))
        arrivals = bnd.lightcone_arrivals([float(x) for x in dt_grid], field,
                                          config.epsilon)
    else:
        raise ConfigError("/model", "the lightcone command requires a model")
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_lightcone_csv(out_dir / "lightcone.csv", arrivals)
    return {
        "mode": "lightcone",
        "epsilon": config.epsilon,
        "lightcone": [{"distance": d, "arrival": a} for d, a in arrivals],
    }
