"""Command-line harness: dims | simulate | check | zoom | render.

Every command is a pure function of the config file and the seed, so
reruns produce byte-identical summaries.  The GWF_LAB_THREADS variable
caps internal worker pools and never affects results.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from gwflab.branching import (
    extinction_by_generation,
    extinction_probability,
    kesten_stigum_stats,
    offspring_to_json,
    reduced_offspring,
    sample_surviving,
)
from gwflab.config import ExperimentConfig, load_config
from gwflab.dimensions import (
    box_counts,
    box_dim_estimate,
    dimension_report,
    section_count_check,
    window_samples,
)
from gwflab.errors import ConfigError, DomainError, GWFLabError, ResourceLimitError, SamplingError
from gwflab.microsets import check_zoom_identity_ssc, zoom_sequence
from gwflab.reporting import (
    dump_json,
    figure_box_counts,
    figure_cloud,
    figure_zoom,
    write_cloud_csv,
    write_json,
    write_pgm,
    write_table_csv,
)
from gwflab.rng import derive_key, philox_generator
from gwflab.similarity import attractor_cloud, check_declared_osc, check_ssc, wsc_profile
from gwflab.trees import EXTINCT, project_tree, reduce_to_horizon, serialize_tree

SCHEMA_VERSION = 1


def _projection_scale(config: ExperimentConfig) -> float:
    # every branch must cross the section before the horizon truncates it
    floor = config.ifs.r_max**config.horizon * (1.0 + 1e-9)
    return max(min(config.rho_schedule), floor)


def _surviving_reduced(config: ExperimentConfig, tag: int):
    tree, attempts = sample_surviving(
        config.offspring, config.horizon, derive_key(config.seed, tag)
    )
    reduced = reduce_to_horizon(tree, config.horizon)
    assert reduced is not EXTINCT  # survival to the horizon was just verified
    return tree, reduced, attempts


def cmd_dims(config: ExperimentConfig, outdir: Path | None) -> int:
    report = dimension_report(config.ifs, config.offspring)
    reduced = reduced_offspring(config.offspring)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "dimensions": report.as_dict(),
        "reduced_offspring": offspring_to_json(reduced),
        "osc_declared": config.ifs.osc_box is not None,
    }
    print(dump_json(payload))
    if outdir is not None:
        outdir.mkdir(parents=True, exist_ok=True)
        write_json(outdir / "dims.json", payload)
    return 0


def _box_scales(cloud) -> list:
    lo = max(4.0 * cloud.epsilon, 1e-12) * 1.05
    hi = max(cloud.extent() / 4.0, lo * 16.0)
    return np.geomspace(lo, hi, 6).tolist()


def cmd_simulate(config: ExperimentConfig, outdir: Path) -> int:
    ifs, law = config.ifs, config.offspring
    outdir.mkdir(parents=True, exist_ok=True)
    for sub in ("trees", "clouds", "tables", "figures", "rasters"):
        (outdir / sub).mkdir(exist_ok=True)

    report = dimension_report(ifs, law)
    reduced_law = reduced_offspring(law)
    sandwich_ok = (
        report.min_support_dim - 1e-10
        <= report.almost_sure_dim
        <= report.max_support_dim + 1e-10
    )

    k = config.extra("kesten", "k", min(config.horizon, 10))
    ks_trials = config.extra("kesten", "trials", config.trials)
    ks = kesten_stigum_stats(law, k, ks_trials, derive_key(config.seed, 1))
    expected_survival = float(1.0 - extinction_by_generation(law, k)[-1])
    surv_se = math.sqrt(
        max(expected_survival * (1.0 - expected_survival), 1e-12) / ks.trials
    )
    kesten_mean_ok = abs(ks.mean - 1.0) <= 3.0 * max(ks.standard_error, 1e-12)
    kesten_survival_ok = abs(ks.survival_fraction - expected_survival) <= 3.0 * surv_se

    section_scales = config.extra(
        "sections", "scales", [r for r in config.rho_schedule if r < ifs.r_min]
    ) or [ifs.r_min**2]
    section_samples = config.extra("sections", "samples", 100)
    family = [set(fs) for fs in reduced_law.support()]
    violations = 0
    for j in range(section_samples):
        _, reduced_tree, _ = _surviving_reduced(config, 1000 + j)
        found = section_count_check(
            reduced_tree, ifs, family, section_scales, family_depth=config.horizon
        )
        violations += len(found)

    proj_scale = _projection_scale(config)
    cloud = attractor_cloud(ifs, min(config.rho_schedule))
    write_cloud_csv(cloud, outdir / "clouds" / "attractor.csv")
    trees_to_save = config.extra("sections", "trees_to_save", 2)
    tree_files = []
    cloud_files = ["clouds/attractor.csv"]
    for j in range(trees_to_save):
        tree, reduced_tree, _ = _surviving_reduced(config, 2000 + j)
        name = f"sample_{j:03d}"
        (outdir / "trees" / f"{name}.tree").write_text(serialize_tree(tree))
        tree_files.append(f"trees/{name}.tree")
        sample_cloud = project_tree(reduced_tree, ifs, proj_scale)
        write_cloud_csv(sample_cloud, outdir / "clouds" / f"{name}.csv")
        cloud_files.append(f"clouds/{name}.csv")
        if j == 0:
            first_sample_cloud = sample_cloud

    box_rs = _box_scales(cloud)
    box_ns = [box_counts(cloud, r) for r in box_rs]
    box_slope = box_dim_estimate(cloud, box_rs)
    write_table_csv(
        outdir / "tables" / "box_counts.csv",
        ["r", "count"],
        list(zip(box_rs, box_ns)),
    )
    pair_base = max(box_rs[0], 4.0 * cloud.epsilon * 1.05)
    pairs = [(min(pair_base * 16, 0.9), pair_base)]
    windows = window_samples(cloud, pairs, min(64, len(cloud)), seed=derive_key(config.seed, 3))
    write_table_csv(
        outdir / "tables" / "windows.csv",
        [f"x{i}" for i in range(ifs.ambient_dim)] + ["R", "r", "count", "ratio"],
        [list(w.center) + [w.R, w.r, w.count, w.ratio] for w in windows],
    )

    if ifs.ambient_dim <= 2:
        write_pgm(cloud, outdir / "rasters" / "attractor.pgm")
        write_pgm(first_sample_cloud, outdir / "rasters" / "sample_000.pgm")
        figure_cloud(cloud, outdir / "figures" / "attractor.png", title="attractor")
        figure_cloud(first_sample_cloud, outdir / "figures" / "sample_000.png", title="sample")
    figure_box_counts(box_rs, box_ns, box_slope, outdir / "figures" / "box_counts.png")

    summary = {
        "schema_version": SCHEMA_VERSION,
        "seed": config.seed,
        "horizon": config.horizon,
        "dimensions": report.as_dict(),
        "reduced_offspring": offspring_to_json(reduced_law),
        "kesten_stigum": {
            "k": k,
            "trials": ks.trials,
            "mean": ks.mean,
            "variance": ks.variance,
            "survival_fraction": ks.survival_fraction,
            "expected_survival": expected_survival,
        },
        "box_dimension": {"scales": box_rs, "counts": box_ns, "slope": box_slope},
        "section_check": {
            "samples": section_samples,
            "scales": section_scales,
            "violations": violations,
        },
        "checks": {
            "dimension_sandwich": bool(sandwich_ok),
            "kesten_mean_within_3se": bool(kesten_mean_ok),
            "kesten_survival_within_3se": bool(kesten_survival_ok),
            "section_bounds_hold": violations == 0,
        },
        "artifacts": {
            "trees": tree_files,
            "clouds": cloud_files,
            "tables": ["tables/box_counts.csv", "tables/windows.csv"],
        },
    }
    write_json(outdir / "summary.json", summary)
    print(dump_json(summary))
    return 0


def cmd_check(config: ExperimentConfig, outdir: Path | None) -> int:
    ifs = config.ifs
    depth = config.extra("check", "depth", 8)
    verdict = check_ssc(ifs, depth)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "ssc": {
            "kind": verdict.kind,
            "gap": verdict.gap,
            "depth": verdict.depth,
            "epsilon": verdict.epsilon,
            "tau": verdict.tau,
        },
    }
    if ifs.osc_box is not None:
        osc = check_declared_osc(ifs)
        payload["osc"] = {
            "passed": osc.passed,
            "heuristic": osc.heuristic,
            "containment_failures": list(osc.containment_failures),
            "overlapping_pairs": [list(p) for p in osc.overlapping_pairs],
        }
    else:
        payload["osc"] = None
    wsc_scales = config.extra("check", "wsc_scales", [ifs.r_min**j for j in (2, 3, 4)])
    profile = wsc_profile(
        ifs, wsc_scales, ball_samples=config.extra("check", "ball_samples", 48),
        seed=derive_key(config.seed, 4),
    )
    payload["wsc_profile"] = {repr(s): c for s, c in profile.items()}

    if verdict.separated and config.offspring.is_supercritical:
        node_budget = config.extra("check", "zoom_nodes", 16)
        zoom_rho = config.extra("check", "zoom_rho", ifs.r_min**3)
        max_node_depth = config.extra("check", "node_depth", 3)
        _, reduced_tree, _ = _surviving_reduced(config, 3000)
        eligible = [w for w in reduced_tree.nodes() if 0 < len(w) <= max_node_depth]
        gen = philox_generator(config.seed, 5)
        if eligible:
            take = min(node_budget, len(eligible))
            chosen = [eligible[i] for i in sorted(gen.choice(len(eligible), take, replace=False))]
        else:
            chosen = []
        results = []
        for node in chosen:
            out = check_zoom_identity_ssc(
                reduced_tree, ifs, node, zoom_rho, verdict=verdict
            )
            results.append(
                {"node": list(node), "status": out.status, "d_h": out.d_h, "threshold": out.threshold}
            )
        payload["zoom_identity"] = {
            "rho": zoom_rho,
            "nodes": len(results),
            "passes": sum(1 for r in results if r["status"] == "pass"),
            "failures": [r for r in results if r["status"] == "fail"],
            "preconditions": sum(1 for r in results if r["status"] == "precondition_failed"),
            "results": results,
        }
    else:
        payload["zoom_identity"] = None

    print(dump_json(payload))
    if outdir is not None:
        outdir.mkdir(parents=True, exist_ok=True)
        write_json(outdir / "check.json", payload)
    return 0


def _digits_to_word(text: str) -> tuple:
    import string

    digits = string.digits + string.ascii_lowercase
    return tuple(digits.index(ch) for ch in text)


def cmd_zoom(config: ExperimentConfig, outdir: Path) -> int:
    ifs = config.ifs
    outdir.mkdir(parents=True, exist_ok=True)
    rho = config.extra("zoom", "rho", ifs.r_min**3)
    band = config.extra("zoom", "band", None)
    raw_path = config.extra("zoom", "path", None)
    _, reduced_tree, _ = _surviving_reduced(config, 4000)
    if raw_path is not None:
        path = _digits_to_word(str(raw_path))
    else:
        depth = config.extra("zoom", "depth", min(4, config.horizon - 1))
        node = ()
        for _ in range(depth):
            kids = reduced_tree.children(node)
            if not kids:
                break
            node = node + (kids[0],)
        path = node
    result = zoom_sequence(reduced_tree, ifs, path, rho, band=band)
    rows = []
    for k, step in enumerate(result.steps):
        name = f"step_{k:02d}"
        write_cloud_csv(step.miniset_cloud, outdir / f"{name}.csv")
        rows.append(
            [
                k,
                "".join(str(s) for s in step.node) or "-",
                step.map.ratio,
                step.d_h_to_prev if step.d_h_to_prev is not None else float("nan"),
                len(step.miniset_cloud),
            ]
        )
    write_table_csv(outdir / "steps.csv", ["k", "node", "expansion", "d_h_to_prev", "points"], rows)
    if ifs.ambient_dim <= 2:
        figure_zoom(result.steps, outdir / "zoom.png")
    payload = {
        "schema_version": SCHEMA_VERSION,
        "path": "".join(str(s) for s in path),
        "rho": rho,
        "steps": len(result.steps),
        "approximant": result.approximant,
        "threshold": result.threshold,
        "tail_d_h": result.steps[-1].d_h_to_prev if len(result.steps) > 1 else None,
    }
    write_json(outdir / "zoom.json", payload)
    print(dump_json(payload))
    return 0


def cmd_render(config: ExperimentConfig, outdir: Path) -> int:
    ifs = config.ifs
    outdir.mkdir(parents=True, exist_ok=True)
    pixels = config.extra("render", "pixels", 512)
    rho = config.extra("render", "rho", min(config.rho_schedule))
    cloud = attractor_cloud(ifs, rho)
    write_cloud_csv(cloud, outdir / "attractor.csv")
    artifacts = ["attractor.csv"]
    if ifs.ambient_dim <= 2:
        write_pgm(cloud, outdir / "attractor.pgm", pixels=pixels)
        figure_cloud(cloud, outdir / "attractor.png", title="attractor")
        artifacts += ["attractor.pgm", "attractor.png"]
    if config.offspring.is_supercritical:
        _, reduced_tree, _ = _surviving_reduced(config, 5000)
        sample_cloud = project_tree(reduced_tree, ifs, _projection_scale(config))
        write_cloud_csv(sample_cloud, outdir / "sample.csv")
        artifacts.append("sample.csv")
        if ifs.ambient_dim <= 2:
            write_pgm(sample_cloud, outdir / "sample.pgm", pixels=pixels)
            figure_cloud(sample_cloud, outdir / "sample.png", title="sample")
            artifacts += ["sample.pgm", "sample.png"]
    payload = {"schema_version": SCHEMA_VERSION, "rho": rho, "pixels": pixels, "artifacts": artifacts}
    write_json(outdir / "render.json", payload)
    print(dump_json(payload))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gwflab",
        description="Random fractal laboratory: dimension solvers, sampling, verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("dims", "exact dimension values and the reduced offspring law"),
        ("simulate", "sample trees and clouds, run estimators and count checks"),
        ("check", "separation verdicts and microset zoom verification"),
        ("zoom", "miniset windows along one coding path"),
        ("render", "rasterize attractor and sample clouds"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", help="path to the experiment config JSON")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--trials", type=int, default=None, help="override the trial count")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            config.seed = args.seed
        if args.trials is not None:
            if args.trials < 1:
                raise ConfigError("--trials must be at least 1")
            config.trials = args.trials
        outdir = Path(args.out) if args.out is not None else Path(config.output_dir)
        if args.command == "dims":
            return cmd_dims(config, outdir if args.out is not None else None)
        if args.command == "simulate":
            return cmd_simulate(config, outdir)
        if args.command == "check":
            return cmd_check(config, outdir if args.out is not None else None)
        if args.command == "zoom":
            return cmd_zoom(config, outdir)
        if args.command == "render":
            return cmd_render(config, outdir)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except DomainError as err:
        print(f"domain error: {err}", file=sys.stderr)
        return 2
    except (ResourceLimitError, SamplingError) as err:
        print(f"resource error: {err}", file=sys.stderr)
        return 3
    except GWFLabError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
