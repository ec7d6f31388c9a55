"""Monte Carlo experiments over RST replications.

Every replication draws its cloud from Stream(master seed, replication index),
so results do not depend on scheduling. Replications run on a thread pool and
are reduced in index order.
"""
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

import config
from errors import ConfigError
from experiments.stats import (
    CI_LEVEL,
    Estimate,
    log_slope_fit,
    mean_estimate,
    one_sided_less,
    proportion_estimate,
    relative_change,
    slope_fit,
)
from geometry.hypgeom import HPoint, distances, unit_vector
from geometry.radial import uniform_directions
from geometry.regions import Ball, Cone, Difference, Intersection
from percolation.covering_blocks import (
    bad_probability_bound,
    build_block_graph,
    component_rows,
    fit_block_constant,
)
from sampling.ppp import Stream, resample_inside, sample_ball
from tree.arcs import arc_formula_check, crossing_in_cap, crossing_table
from tree.deviations import HorizonConfig, cap_union_measure, level_functionals, trace_estimate
from tree.rst import build, descendants, good_vertices, rebuild_outside, straightness_profile

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1"
ROW_COLUMNS = ["level", "statistic", "estimate", "ci_low", "ci_high", "stderr", "n"]

DEFAULT_PARAMS = {
    "levelcount": {"cap_probes": 8},
    "mbd": {"p": None},
    "density": {},
    "straightness": {"epsilon": 0.5},
    "stab": {"delta_prime": 0.3, "r_values": [2.0, 3.0], "h_values": [1.0, 2.0, 3.0], "k": 20},
    "emptying": {"r": 2.0, "h": 2.0, "delta": 0.95, "delta_prime": 0.3, "k": 5, "theta_tol": 1e-3},
    "calibration": {"statistic": "mbd", "p": None},
    "blocks": {"deltas": [0.05, 0.1, 0.2, 0.4], "r_min": 2, "r_max": 6, "c1_method": "analytic"},
}
KINDS = tuple(DEFAULT_PARAMS)
LEVEL_KINDS = ("levelcount", "mbd", "density", "straightness", "calibration")


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    d: int = 1
    lam: float = 1.0
    horizon: float = 8.0
    margin: float = 2.0
    shell: float = field(default_factory=lambda: config.SHELL)
    levels: tuple = (2.0, 3.0, 4.0, 5.0)
    reps: int = 100
    seed: int = 0
    kappa: float = 1.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in DEFAULT_PARAMS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}, expected one of {', '.join(KINDS)}")
        object.__setattr__(self, "params", {**DEFAULT_PARAMS[self.kind], **self.params})
        object.__setattr__(self, "levels", tuple(float(r) for r in self.levels))

    @property
    def cloud_radius(self):
        return self.horizon + self.shell

    @property
    def p(self):
        return self.params.get("p") or 2 * self.d

    def horizon_config(self, horizon=None):
        return HorizonConfig(self.horizon if horizon is None else horizon, self.margin, self.kappa, seed=self.seed)

    def to_dict(self):
        return asdict(self)

    def validate(self):
        if self.reps < 1:
            raise ConfigError(f"replication count must be >= 1, got {self.reps}")
        if self.d < 1 or self.lam < 0:
            raise ConfigError("need d >= 1 and lambda >= 0")
        if not 0 < self.margin < self.horizon or self.shell <= 0 or self.kappa <= 0:
            raise ConfigError("need 0 < margin < horizon, shell > 0 and kappa > 0")
        trusted = self.horizon - self.margin
        if self.kind in LEVEL_KINDS:
            if not self.levels:
                raise ConfigError("level grid is empty")
            bad = [r for r in self.levels if not 1.0 <= r <= trusted]
            if bad:
                raise ConfigError(f"levels {bad} fall outside [1, {trusted:g}] (censored by the horizon)")
        if self.kind in ("mbd", "calibration") and self.p < 1.5 * self.d:
            raise ConfigError(f"moment order p={self.p} must be >= 3d/2")
        if self.kind == "straightness" and not 0 < self.params["epsilon"] < 1:
            raise ConfigError("epsilon must lie in (0, 1)")
        if self.kind == "stab":
            top = max(self.params["r_values"]) + max(self.params["h_values"]) + self.params["delta_prime"]
            if top + self.margin > self.horizon:
                raise ConfigError(f"stabilization probe reaches {top:g}, beyond horizon − margin")
            if self.params["k"] < 1 or self.params["delta_prime"] <= 0:
                raise ConfigError("stabilization needs k >= 1 and delta_prime > 0")
        if self.kind == "emptying":
            pr = self.params
            if not 0 < pr["delta_prime"] < pr["delta"] / 3.0:
                raise ConfigError("emptying needs 0 < delta_prime < delta / 3")
            if pr["r"] + 1.0 + pr["h"] + pr["delta_prime"] + self.margin > self.horizon:
                raise ConfigError("emptying probe is censored by the horizon")
        if self.kind == "calibration" and self.params["statistic"] not in ("mbd", "thick"):
            raise ConfigError("calibration statistic must be 'mbd' or 'thick'")
        if self.kind == "blocks":
            pr = self.params
            if not 1 <= pr["r_min"] <= pr["r_max"] or pr["r_max"] + 1 > self.cloud_radius:
                raise ConfigError("blocks need 1 <= r_min <= r_max and r_max + 1 <= cloud radius")
            if any(not 0 < delta < 1 for delta in pr["deltas"]):
                raise ConfigError("every delta must lie in (0, 1)")


def _plain(value):
    """JSON-ready copy: numpy scalars unwrapped, non-finite floats as null."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    return value


@dataclass
class ExperimentReport:
    kind: str
    config: dict
    rows: list
    summary: dict
    seeds: list
    tables: dict = field(default_factory=dict)
    ci_level: float = CI_LEVEL
    wall_clock: Optional[float] = None
    schema_version: str = SCHEMA_VERSION

    def to_dict(self, include_wall_clock=False):
        data = {
            "schema_version": self.schema_version,
            "kind": self.kind,
            "config": self.config,
            "ci_level": self.ci_level,
            "rows": self.rows,
            "summary": self.summary,
            "seeds": self.seeds,
            "tables": self.tables,
        }
        if include_wall_clock:
            data["wall_clock"] = self.wall_clock
        return _plain(data)

    def to_json(self, include_wall_clock=False):
        return json.dumps(self.to_dict(include_wall_clock), sort_keys=True, indent=2, allow_nan=False)

    def frame(self):
        return pd.DataFrame(_plain(self.rows), columns=ROW_COLUMNS)

    def row(self, level, statistic):
        return next(r for r in self.rows if r["level"] == level and r["statistic"] == statistic)

    def save(self, json_path=None, csv_path=None, include_wall_clock=False):
        if json_path:
            Path(json_path).write_text(self.to_json(include_wall_clock))
            logger.info(f"✅ Report written to {json_path}")
        if csv_path:
            csv_path = Path(csv_path)
            self.frame().to_csv(csv_path, index=False)
            for name, table in self.tables.items():
                pd.DataFrame(_plain(table)).to_csv(csv_path.with_name(f"{csv_path.stem}_{name}.csv"), index=False)
            logger.info(f"✅ Rows written to {csv_path}")


def _row(level, statistic, est: Estimate):
    return {
        "level": float(level),
        "statistic": statistic,
        "estimate": est.estimate,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
        "stderr": est.stderr,
        "n": est.n,
    }


def _exact(value):
    return Estimate(float(value), float(value), float(value), 0.0, 1, "exact")


# --- emptying construction ---

def emptying_region(r, h, delta_prime, theta, u):
    """U = (B(r+h+δ′) \\ (B̄(r) ∪ B(z₂, δ′))) ∩ Cone(u, θ) with z₂ = (r+h; u).

    B(r) is taken closed so that z₁ = (r; u) itself survives the deletion.
    """
    d = np.asarray(u).size - 1
    origin = HPoint.origin(d)
    z2 = HPoint(r + h, u)
    shell = Difference(Ball(origin, r + h + delta_prime), (Ball(origin, r, closed=True), Ball(z2, delta_prime)))
    return Intersection((shell, Cone(u, theta)))


def f_event_items(tree, z1, h, delta_prime, hcfg, k, stream):
    """Items (i)–(iv) of the F event around z₂ = (r₁+h; u₁) for the good vertex z₁.

    Items are evaluated cheapest first and left as None once one fails.
    Item (iv) asks D(z) \\ {z} to avoid B(r₁+h+δ′); z itself sits in B(z₂, δ′).
    """
    cloud = tree.cloud
    r1, u1 = float(cloud.radii[z1]), cloud.directions[z1]
    z2 = HPoint(r1 + h, u1)
    inside = np.flatnonzero(distances(cloud.radii, cloud.directions, z2.radius, z2.direction) < delta_prime)
    items = {"z1": int(z1), "z": None, "i": len(inside) == 1, "ii": None, "iii": None, "iv": None, "eligible": False}
    if not items["i"]:
        return items
    z = int(inside[0])
    items["z"] = z
    members = descendants(tree, z).members - {z}
    items["iv"] = all(cloud.radii[m] >= r1 + h + delta_prime for m in members)
    if not items["iv"]:
        return items
    items["ii"] = trace_estimate(tree, z, hcfg).thick
    if not items["ii"]:
        return items
    items["iii"] = _stable(tree, r1, [z], k, stream)
    items["eligible"] = bool(items["iii"])
    return items


def _stable(tree, r, vertices, k, stream):
    """D(y) unchanged for every y in vertices under k independent resamplings of B(r)."""
    cloud = tree.cloud
    before = [descendants(tree, int(y)).members for y in vertices]
    n_old = int(np.searchsorted(cloud.radii, r, side="left"))
    for j in range(k):
        new_cloud = resample_inside(cloud, r, stream.child(j))
        new_tree = rebuild_outside(tree, new_cloud, r)
        offset = int(np.searchsorted(new_cloud.radii, r, side="left")) - n_old
        for y, members in zip(vertices, before):
            if descendants(new_tree, int(y) + offset).members != {m + offset for m in members}:
                return False
    return True


def _reparents(cloud, z, z1, region):
    """A(z) = z₁ once the points of the region are deleted."""
    removed = region.contains_many(cloud.radii, cloud.directions)
    r_z = cloud.radii[z]
    cand = np.flatnonzero(~removed & (cloud.radii < r_z))
    if not cand.size:
        return False
    dist = distances(r_z, cloud.directions[z], cloud.radii[cand], cloud.directions[cand])
    k = int(np.argmin(dist))
    return int(cand[k]) == z1 and dist[k] < r_z


class ExperimentManager:
    def __init__(self, jobs=None):
        self.jobs = config.JOBS if jobs is None else int(jobs)
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        self._arc_checks = {}

    def run(self, cfg):
        cfg.validate()
        self._arc_checks = {}
        runner = {
            "levelcount": self.run_levelcount,
            "mbd": self.run_mbd_moments,
            "density": self.run_density_thick,
            "straightness": self.run_straightness,
            "stab": self.run_stab_probe,
            "emptying": self.run_emptying_demo,
            "calibration": self.run_calibration,
            "blocks": self.run_blocks,
        }[cfg.kind]
        started = time.perf_counter()
        logger.info(f"Running {cfg.kind}: d={cfg.d} λ={cfg.lam} R_h={cfg.horizon} reps={cfg.reps} jobs={self.jobs}")
        report = runner(cfg)
        report.wall_clock = time.perf_counter() - started
        logger.info(f"✅ {cfg.kind} finished in {report.wall_clock:.1f}s")
        return report

    def sweep(self, cfg, lambdas, horizons):
        """One report per (λ, R_h) pair, in grid order."""
        reports = []
        for lam in lambdas:
            for horizon in horizons:
                params = {**cfg.to_dict(), "lam": float(lam), "horizon": float(horizon)}
                reports.append(self.run(ExperimentConfig(**params)))
        return reports

    @staticmethod
    def sweep_frame(reports):
        frames = []
        for report in reports:
            frame = report.frame()
            frame.insert(0, "horizon", report.config["horizon"])
            frame.insert(0, "lambda", report.config["lam"])
            frame.insert(0, "kind", report.kind)
            frames.append(frame)
        return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=ROW_COLUMNS)

    # --- plumbing ---

    def _replicate(self, cfg, task):
        results = {}
        if self.jobs == 1:
            for rep in range(cfg.reps):
                results[rep] = task(rep)
        else:
            with ThreadPoolExecutor(max_workers=self.jobs) as pool:
                futures = {pool.submit(task, rep): rep for rep in range(cfg.reps)}
                for future in as_completed(futures):
                    results[futures[future]] = future.result()
        return [results[rep] for rep in range(cfg.reps)]

    def _tree(self, cfg, rep, radius=None):
        stream = Stream(cfg.seed, rep)
        cloud = sample_ball(cfg.d, cfg.lam, cfg.cloud_radius if radius is None else radius, stream)
        tree = build(cloud)
        self._arc_checks[rep] = arc_formula_check(tree)
        return tree, stream

    @staticmethod
    def _seeds(cfg):
        return [Stream(cfg.seed, rep).describe() for rep in range(cfg.reps)]

    def _arc_summary(self):
        checks = [self._arc_checks[rep] for rep in sorted(self._arc_checks)]
        ratios = [c["worst_ratio"] for c in checks if c["worst_ratio"] is not None]
        tally = {
            "bent_arcs": sum(c["bent_arcs"] for c in checks),
            "violating_arcs": sum(c["violating_arcs"] for c in checks),
            "worst_ratio": max(ratios) if ratios else None,
        }
        if tally["violating_arcs"]:
            logger.warning(
                f"⚠️ Closed-form φ leaves [0, 1] on {tally['violating_arcs']}/{tally['bent_arcs']} bent arcs "
                f"(worst arccos argument {tally['worst_ratio']:.4g}); arcs use the chord direction"
            )
        return tally

    def _report(self, cfg, rows, summary, tables=None):
        summary = {**summary, "arc_formula": self._arc_summary()}
        return ExperimentReport(cfg.kind, cfg.to_dict(), rows, summary, self._seeds(cfg), tables or {})

    # --- experiments ---

    def run_levelcount(self, cfg):
        probes = int(cfg.params["cap_probes"])

        def one(rep):
            tree, stream = self._tree(cfg, rep)
            centers = uniform_directions(stream.child(1).generator(), probes, cfg.d)
            counts, moments = [], []
            for r in cfg.levels:
                _, _, _, dirs = crossing_table(tree, r)
                counts.append(len(dirs))
                in_cap = [np.count_nonzero(crossing_in_cap(dirs, c, math.exp(-r))) for c in centers]
                moments.append(float(np.mean(np.square(in_cap))))
            return counts, moments

        results = self._replicate(cfg, one)
        counts = np.array([c for c, _ in results], dtype=float).reshape(cfg.reps, len(cfg.levels))
        moments = np.array([m for _, m in results], dtype=float).reshape(cfg.reps, len(cfg.levels))
        rows, count_means, moment_means = [], [], []
        for j, r in enumerate(cfg.levels):
            count_est, moment_est = mean_estimate(counts[:, j]), mean_estimate(moments[:, j])
            rows += [_row(r, "count", count_est), _row(r, "cap_second_moment", moment_est)]
            count_means.append(count_est.estimate)
            moment_means.append(moment_est.estimate)
        summary = {
            "count_slope": log_slope_fit(cfg.levels, count_means),
            "cap_moment_slope": slope_fit(cfg.levels, moment_means),
            "predicted_slope": cfg.d,
        }
        return self._report(cfg, rows, summary)

    def _mbd_sums(self, tree, hcfg, levels, p):
        return [float(sum(row.mbd ** p for row in level_functionals(tree, r, hcfg))) for r in levels]

    def run_mbd_moments(self, cfg):
        p = cfg.p
        hcfg = cfg.horizon_config()

        def one(rep):
            tree, _ = self._tree(cfg, rep)
            return self._mbd_sums(tree, hcfg, cfg.levels, p)

        sums = np.array(self._replicate(cfg, one), dtype=float).reshape(cfg.reps, len(cfg.levels))
        rows, means = [], []
        for j, r in enumerate(cfg.levels):
            est = mean_estimate(sums[:, j])
            rows.append(_row(r, f"mbd_sum_p{p:g}", est))
            means.append(est.estimate)
        fit = log_slope_fit(cfg.levels, means)
        predicted = cfg.d - p
        summary = {
            "p": p,
            "slope": fit,
            "predicted_slope": predicted,
            "relative_deviation": None if fit is None else abs(fit["slope"] - predicted) / abs(predicted),
        }
        return self._report(cfg, rows, summary)

    def run_density_thick(self, cfg):
        hcfg = cfg.horizon_config()

        def one(rep):
            tree, stream = self._tree(cfg, rep)
            rng = stream.child(3).generator()
            _, _, _, hits = crossing_table(tree, hcfg.horizon)
            union = cap_union_measure(hits, hcfg.cap_radius, cfg.d, rng, hcfg.mc_samples)
            per_level, traces = [], []
            for r in cfg.levels:
                rows = level_functionals(tree, r, hcfg, rng)
                sigma = np.array([row.sigma_proxy for row in rows])
                per_level.append({
                    "count": len(rows),
                    "thick": sum(row.thick for row in rows),
                    "sigma_sum": float(sigma.sum()),
                    "sigma_sq": float(np.square(sigma).sum()),
                    "sigma_union": union,
                })
                if rep == 0:
                    traces += [row.as_row() for row in rows]
            return per_level, traces

        results = self._replicate(cfg, one)
        rows = []
        summary = {"thick_ci_excludes_zero": {}}
        for j, r in enumerate(cfg.levels):
            stats_j = [levels[j] for levels, _ in results]
            count = sum(s["count"] for s in stats_j)
            thick = proportion_estimate(sum(s["thick"] for s in stats_j), count)
            cs = [s["sigma_sum"] ** 2 / s["sigma_sq"] for s in stats_j if s["sigma_sq"] > 0]
            rows += [
                _row(r, "thick_fraction", thick),
                _row(r, "count", mean_estimate([s["count"] for s in stats_j])),
                _row(r, "cauchy_schwarz", mean_estimate(cs)),
                _row(r, "sigma_sum", mean_estimate([s["sigma_sum"] for s in stats_j])),
                _row(r, "sigma_union", mean_estimate([s["sigma_union"] for s in stats_j])),
            ]
            summary["thick_ci_excludes_zero"][f"{r:g}"] = bool(count) and thick.ci_low > 0
        return self._report(cfg, rows, summary, {"traces": results[0][1]})

    def run_straightness(self, cfg):
        epsilon = cfg.params["epsilon"]

        def one(rep):
            tree, _ = self._tree(cfg, rep)
            return straightness_profile(tree, epsilon, cfg.levels, cfg.horizon, cfg.margin)

        results = self._replicate(cfg, one)
        rows, fractions = [], []
        for j, r in enumerate(cfg.levels):
            flagged = sum(res[j]["flagged"] for res in results)
            total = sum(res[j]["vertices"] for res in results)
            pooled = proportion_estimate(flagged, total)
            per_rep = [res[j]["fraction"] for res in results if res[j]["vertices"]]
            rows += [_row(r, "violation_fraction", pooled), _row(r, "violation_fraction_mean", mean_estimate(per_rep))]
            fractions.append(pooled.estimate)
        decreasing = all(a > b for a, b in zip(fractions, fractions[1:]))
        return self._report(cfg, rows, {"epsilon": epsilon, "strictly_decreasing": decreasing})

    def run_stab_probe(self, cfg):
        pr = cfg.params
        u = unit_vector(cfg.d)
        r_values, h_values = [float(r) for r in pr["r_values"]], [float(h) for h in pr["h_values"]]

        def one(rep):
            tree, stream = self._tree(cfg, rep)
            cloud = tree.cloud
            out = {}
            for a, r in enumerate(r_values):
                for h in h_values:
                    near = distances(cloud.radii, cloud.directions, r + h, u) < pr["delta_prime"]
                    vertices = np.flatnonzero(near)
                    out[(r, h)] = _stable(tree, r, vertices, int(pr["k"]), stream.child(1).child(a)) if vertices.size else True
            return out

        results = self._replicate(cfg, one)
        rows, summary = [], {"nondecreasing_in_h": {}, "at_max_h": {}}
        for r in r_values:
            ests = []
            for h in h_values:
                est = proportion_estimate(sum(res[(r, h)] for res in results), cfg.reps)
                rows.append(_row(r, f"stable_h{h:g}", est))
                ests.append(est)
            # a decrease counts only when a later interval lies wholly below an earlier one
            summary["nondecreasing_in_h"][f"{r:g}"] = all(
                later.ci_high >= earlier.ci_low for i, earlier in enumerate(ests) for later in ests[i + 1:]
            )
            summary["at_max_h"][f"{r:g}"] = ests[-1].estimate
        return self._report(cfg, rows, summary)

    def _bisect_theta(self, cloud, z, z1, pr):
        u = cloud.directions[z1]
        r1 = float(cloud.radii[z1])

        def region(theta):
            return emptying_region(r1, pr["h"], pr["delta_prime"], theta, u)

        if not _reparents(cloud, z, z1, region(math.pi)):
            return None
        lo, hi = 0.0, math.pi
        while hi - lo > pr["theta_tol"]:
            mid = (lo + hi) / 2.0
            if _reparents(cloud, z, z1, region(mid)):
                hi = mid
            else:
                lo = mid
        return hi

    def run_emptying_demo(self, cfg):
        pr = cfg.params
        hcfg = cfg.horizon_config()

        def one(rep):
            tree, stream = self._tree(cfg, rep)
            cloud = tree.cloud
            candidates = good_vertices(tree, pr["delta"], pr["r"], pr["r"] + 1.0)
            for z1 in candidates:
                items = f_event_items(tree, int(z1), pr["h"], pr["delta_prime"], hcfg, int(pr["k"]),
                                      stream.child(2).child(int(z1)))
                if items["eligible"]:
                    break
            else:
                return {"eligible": False, "candidates": int(len(candidates))}
            z, z1 = items["z"], items["z1"]
            if tree.parent[z] == z1:
                # already parented: no deletion, so no threshold either
                return {"eligible": True, "trivial": True, "success": True, "theta": None,
                        "candidates": int(len(candidates))}
            theta = self._bisect_theta(cloud, z, z1, pr)
            if theta is None:
                return {"eligible": True, "trivial": False, "success": False, "theta": None,
                        "candidates": int(len(candidates))}
            region = emptying_region(float(cloud.radii[z1]), pr["h"], pr["delta_prime"], theta, cloud.directions[z1])
            removed = np.flatnonzero(region.contains_many(cloud.radii, cloud.directions))
            edited = build(cloud.without(removed))
            new_z = z - int(np.count_nonzero(removed < z))
            new_z1 = z1 - int(np.count_nonzero(removed < z1))
            success = int(edited.parent[new_z]) == new_z1 and trace_estimate(edited, new_z, hcfg).survived
            return {"eligible": True, "trivial": False, "success": bool(success), "theta": theta,
                    "candidates": int(len(candidates))}

        results = self._replicate(cfg, one)
        eligible = [res for res in results if res["eligible"]]
        edited = [res for res in eligible if not res["trivial"]]
        successes = sum(res["success"] for res in eligible)
        thetas = [res["theta"] for res in edited if res["theta"] is not None]
        level = pr["r"]
        rows = [
            _row(level, "eligible", proportion_estimate(len(eligible), cfg.reps)),
            _row(level, "reparent_success", proportion_estimate(successes, len(eligible))),
            _row(level, "edited_success", proportion_estimate(sum(res["success"] for res in edited), len(edited))),
            _row(level, "theta_threshold", mean_estimate(thetas)),
        ]
        summary = {
            "eligible": len(eligible),
            "already_parented": len(eligible) - len(edited),
            "edited": len(edited),
            "successes": successes,
            "all_succeeded": successes == len(eligible),
            "candidates_examined": sum(res["candidates"] for res in results),
            "budget_replications": cfg.reps,
        }
        if not eligible:
            logger.warning(f"⚠️ No eligible replication within {cfg.reps} replications")
        return self._report(cfg, rows, summary)

    def run_calibration(self, cfg):
        statistic = cfg.params["statistic"]
        p = cfg.p
        horizons = (cfg.horizon, cfg.horizon + 1.0)

        def one(rep):
            tree, _ = self._tree(cfg, rep, radius=cfg.cloud_radius + 1.0)
            out = []
            for horizon in horizons:
                hcfg = cfg.horizon_config(horizon)
                if statistic == "mbd":
                    out.append(self._mbd_sums(tree, hcfg, cfg.levels, p))
                else:
                    values = []
                    for r in cfg.levels:
                        rows = level_functionals(tree, r, hcfg)
                        values.append(sum(row.thick for row in rows) / len(rows) if rows else 0.0)
                    out.append(values)
            return out

        results = np.array(self._replicate(cfg, one), dtype=float).reshape(cfg.reps, 2, len(cfg.levels))
        rows, changes = [], {}
        for j, r in enumerate(cfg.levels):
            base, extended = mean_estimate(results[:, 0, j]), mean_estimate(results[:, 1, j])
            rows += [
                _row(r, f"{statistic}_base", base),
                _row(r, f"{statistic}_extended", extended),
                _row(r, f"{statistic}_difference", mean_estimate(results[:, 1, j] - results[:, 0, j])),
            ]
            changes[f"{r:g}"] = relative_change(base.estimate, extended.estimate)
        summary = {
            "statistic": statistic,
            "relative_change": changes,
            "max_relative_change": max(changes.values()),
            "within_5pct": max(changes.values()) < 0.05,
        }
        return self._report(cfg, rows, summary)

    def run_blocks(self, cfg):
        pr = cfg.params
        deltas = [float(x) for x in pr["deltas"]]
        r_min, r_max = int(pr["r_min"]), int(pr["r_max"])

        def one(rep):
            tree, _ = self._tree(cfg, rep)
            out = []
            for delta in deltas:
                graph = build_block_graph(tree, delta, r_min, r_max)
                degree = int(graph.degrees.max()) if len(graph) else 0
                out.append((int(graph.bad.sum()), len(graph), graph.largest_component(), degree,
                            component_rows(graph, r_min, r_max)))
            return out

        results = self._replicate(cfg, one)
        c1 = fit_block_constant(cfg.d, range(r_min, r_max + 1), pr["c1_method"])
        rows = []
        summary = {"c1": c1, "max_degree": 0, "within_bound": {}, "largest_component_mean": {}}
        histogram = {}
        for j, delta in enumerate(deltas):
            bad = sum(res[j][0] for res in results)
            total = sum(res[j][1] for res in results)
            freq = proportion_estimate(bad, total)
            bound = bad_probability_bound(delta, cfg.lam, cfg.d, c1)
            largest = mean_estimate([res[j][2] for res in results])
            rows += [
                _row(r_min, f"badness_delta{delta:g}", freq),
                _row(r_min, f"bound_delta{delta:g}", _exact(bound)),
                _row(r_min, f"largest_component_delta{delta:g}", largest),
            ]
            summary["within_bound"][f"{delta:g}"] = freq.estimate <= bound + 3.0 * freq.stderr
            summary["largest_component_mean"][f"{delta:g}"] = largest.estimate
            summary["max_degree"] = max(summary["max_degree"], max(res[j][3] for res in results))
            for res in results:
                for entry in res[j][4]:
                    key = (delta, entry["componentSize"])
                    histogram[key] = histogram.get(key, 0) + entry["count"]
        smallest = [res[0][2] for res in results]
        widest = [res[-1][2] for res in results]
        summary["mann_whitney_p"] = one_sided_less(smallest, widest) if len(deltas) > 1 else None
        components = [
            {"delta": delta, "rMin": r_min, "rMax": r_max, "componentSize": size, "count": count}
            for (delta, size), count in sorted(histogram.items())
        ]
        return self._report(cfg, rows, summary, {"components": components})
