"""Command-line pipeline: simulate -> features -> classify, plus log ingest.

Subcommands operate on an output directory laid out as::

    out/
      config.json                 frozen experiment config + hash
      fields/<design>/<run>.csv   quantized field series (+ provenance header)
      trajectories/<design>/<run>.csv
      features/<design>.csv       one labeled feature table per design
      reports/accuracy.csv        per-(design, velocity, repeat, fold) accuracy
      reports/summary.csv         per-(design, velocity) mean/std
      reports/stats.csv           ANOVA + Tukey rows per velocity
      reports/accuracy_box.svg
      ingested/                   per-pass CSVs carved from recorded logs

Exit codes: 0 success, 2 configuration/usage error, 3 data error,
4 internal failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import features, ingest, learn, magnetics, mechanics, surface

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


class DataError(Exception):
    """Missing or unusable input data; maps to exit code 3."""


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_config(args) -> cfgmod.ExperimentConfig:
    if getattr(args, "config", None):
        cfg = cfgmod.from_toml(args.config)
    elif getattr(args, "preset", None):
        cfg = cfgmod.preset(args.preset)
    else:
        raise cfgmod.ConfigError("provide --preset or --config")
    if getattr(args, "seed", None) is not None:
        cfg = cfgmod.ExperimentConfig(
            seed=args.seed,
            designs=cfg.designs,
            sweep=cfg.sweep,
            scan_duration_s=cfg.scan_duration_s,
            preload_depth_um=cfg.preload_depth_um,
            sim_rate_hz=cfg.sim_rate_hz,
            output_rate_hz=cfg.output_rate_hz,
            surface_resolution=cfg.surface_resolution,
            pipeline=cfg.pipeline,
            cv_folds=cfg.cv_folds,
            cv_repeats=cfg.cv_repeats,
        )
    return cfg


def _save_config_snapshot(cfg: cfgmod.ExperimentConfig, out: Path):
    snap = {
        "schema": cfgmod.SCHEMA_VERSION,
        "config_hash": cfg.config_hash(),
        "config": cfg.to_dict(),
    }
    _atomic_write(out / "config.json", json.dumps(snap, indent=2, default=str) + "\n")


def _load_config_snapshot(out: Path) -> cfgmod.ExperimentConfig:
    path = out / "config.json"
    if not path.exists():
        raise DataError(f"{path} not found; run `simulate` first")
    snap = json.loads(path.read_text())
    c = snap["config"]
    designs = tuple(
        cfgmod.DesignConfig(
            name=d["name"],
            tip=mechanics.TipGeometry(**d["tip"]),
            stack=mechanics.ElastomerStack(**d["stack"]),
            magnet=magnetics.MagnetModel(**d["magnet"]),
            layout=magnetics.MagnetometerLayout(
                position_mm=tuple(d["layout"]["position_mm"]),
                conversion_ut_per_lsb=d["layout"]["conversion_ut_per_lsb"],
                resolution_bits=d["layout"]["resolution_bits"],
            ),
        )
        for d in c["designs"]
    )
    return cfgmod.ExperimentConfig(
        seed=c["seed"],
        designs=designs,
        sweep=cfgmod.SweepConfig(
            wavelengths_mm=tuple(c["sweep"]["wavelengths_mm"]),
            amplitudes_um=tuple(c["sweep"]["amplitudes_um"]),
            velocities_mm_s=tuple(c["sweep"]["velocities_mm_s"]),
            repetitions=c["sweep"]["repetitions"],
            directions=tuple(c["sweep"]["directions"]),
        ),
        scan_duration_s=c["scan_duration_s"],
        preload_depth_um=c["preload_depth_um"],
        sim_rate_hz=c["sim_rate_hz"],
        output_rate_hz=c["output_rate_hz"],
        surface_resolution=c["surface_resolution"],
        pipeline=features.PipelineConfig(**c["pipeline"]),
        cv_folds=c["cv_folds"],
        cv_repeats=c["cv_repeats"],
    )


def _run_id(lam, amp, vel, direction, rep) -> str:
    d = "p" if direction > 0 else "n"
    return f"wl{lam:g}_a{amp:g}_v{vel:g}_{d}_r{rep}"


def _sweep_tasks(cfg: cfgmod.ExperimentConfig):
    """Every (design, wavelength, amplitude, velocity, direction, repetition).

    The surface phase depends only on (wavelength, amplitude, repetition), so
    every design and velocity scans the same texture specimen.
    """
    tasks = []
    for design in cfg.designs:
        for wi, lam in enumerate(cfg.sweep.wavelengths_mm):
            for ai, amp in enumerate(cfg.sweep.amplitudes_um):
                for rep in range(cfg.sweep.repetitions):
                    rng = np.random.default_rng(
                        np.random.SeedSequence(cfg.seed, spawn_key=(wi, ai, rep))
                    )
                    phase = float(rng.uniform(0.0, 2.0 * np.pi))
                    for vel in cfg.sweep.velocities_mm_s:
                        for direction in cfg.sweep.directions:
                            tasks.append(
                                {
                                    "design": design,
                                    "wavelength_mm": float(lam),
                                    "amplitude_um": float(amp),
                                    "velocity_mm_s": float(vel),
                                    "direction": int(direction),
                                    "repetition": rep,
                                    "phase_rad": phase,
                                }
                            )
    return tasks


def _simulate_one(payload):
    """Worker: one scan -> (run relpath, field CSV, trajectory CSV)."""
    cfg, task, config_hash = payload
    design = task["design"]
    lam = task["wavelength_mm"]
    amp = task["amplitude_um"]
    vel = task["velocity_mm_s"]
    scan = cfg.scan_config(vel, task["direction"])
    length = cfg.scan_duration_s * vel + design.tip.contact_width_mm + 2.0
    prof = surface.generate_surface(
        surface.SumOfSinusoids(((lam, amp, task["phase_rad"]),)),
        length,
        cfg.surface_resolution,
    )
    traj = mechanics.simulate_scan(
        design.tip, design.stack, prof, scan, magnet_size_mm=design.magnet.edge_mm
    )
    fs = magnetics.trajectory_to_field(traj, design.magnet, design.layout)
    run = _run_id(lam, amp, vel, task["direction"], task["repetition"])
    header = [
        f"schema={cfgmod.SCHEMA_VERSION}",
        f"config={config_hash}",
        f"design={design.name}",
        f"label=wl{lam:g}",
        f"wavelength_mm={lam!r}",
        f"amplitude_um={amp!r}",
        f"velocity_mm_s={vel!r}",
        f"direction={task['direction']}",
        f"repetition={task['repetition']}",
        f"phase_rad={task['phase_rad']!r}",
        f"seed={cfg.seed}",
    ]
    return (
        f"{design.name}/{run}",
        magnetics.field_to_csv(fs, header_comments=header),
        mechanics.trajectory_to_csv(traj),
    )


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _save_config_snapshot(cfg, out)
    config_hash = cfg.config_hash()

    tasks = _sweep_tasks(cfg)
    pending = []
    skipped = 0
    for task in tasks:
        run = _run_id(
            task["wavelength_mm"],
            task["amplitude_um"],
            task["velocity_mm_s"],
            task["direction"],
            task["repetition"],
        )
        field_path = out / "fields" / task["design"].name / f"{run}.csv"
        if field_path.exists() and not args.force:
            skipped += 1
            continue
        pending.append((cfg, task, config_hash))

    print(
        f"simulate: {len(tasks)} runs total, {skipped} already present, "
        f"{len(pending)} to compute ({args.jobs} workers)"
    )
    if pending:
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as ex:
                results = ex.map(_simulate_one, pending, chunksize=4)
                _write_runs(out, results)
        else:
            _write_runs(out, map(_simulate_one, pending))
    print(f"simulate: done, outputs under {out}")
    return EXIT_OK


def _write_runs(out: Path, results):
    for relpath, field_csv, traj_csv in results:
        _atomic_write(out / "fields" / f"{relpath}.csv", field_csv)
        _atomic_write(out / "trajectories" / f"{relpath}.csv", traj_csv)


_META_KEYS = (
    "design",
    "label",
    "wavelength_mm",
    "amplitude_um",
    "velocity_mm_s",
    "direction",
    "repetition",
)


def _parse_field_file(path: Path):
    text = path.read_text()
    meta = {}
    for ln in text.splitlines():
        if not ln.startswith("#"):
            break
        stripped = ln[1:].strip()
        if "=" in stripped:
            key, val = stripped.split("=", 1)
            meta[key] = val
    missing = [k for k in _META_KEYS if k not in meta]
    if missing:
        raise ValueError(f"missing provenance keys {missing}")
    fs = magnetics.field_from_csv(text, meta={"source": "simulated", "path": str(path)})
    return fs, meta


def _extract_one(payload):
    path_str, pipeline = payload
    fs, meta = _parse_field_file(Path(path_str))
    vec = features.extract(fs, pipeline)
    return meta, vec.values


def cmd_features(args) -> int:
    out = Path(args.out)
    cfg = _load_config_snapshot(out)
    fields_dir = out / "fields"
    if not fields_dir.is_dir():
        raise DataError(f"{fields_dir} not found; run `simulate` first")
    design_dirs = sorted(p for p in fields_dir.iterdir() if p.is_dir())
    if not design_dirs:
        raise DataError(f"no design directories under {fields_dir}")

    failures = []
    for ddir in design_dirs:
        paths = sorted(ddir.glob("*.csv"))
        payloads = [(str(p), cfg.pipeline) for p in paths]
        rows, labels, metas = [], [], []
        results = []
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as ex:
                futures = [ex.submit(_extract_one, payload) for payload in payloads]
                for path, fut in zip(paths, futures):
                    try:
                        results.append((path, fut.result()))
                    except (ValueError, OSError) as exc:
                        failures.append((path, str(exc)))
        else:
            for payload, path in zip(payloads, paths):
                try:
                    results.append((path, _extract_one(payload)))
                except (ValueError, OSError) as exc:
                    failures.append((path, str(exc)))
        for path, (meta, values) in results:
            rows.append(values)
            labels.append(meta["label"])
            metas.append({k: meta[k] for k in _META_KEYS})
        if not rows:
            failures.append((ddir, "no usable field files"))
            continue
        dataset = features.LabeledDataset(np.array(rows), labels, metas)
        table = features.dataset_to_csv(
            dataset,
            header_comments=[f"schema={cfgmod.SCHEMA_VERSION}", f"config={cfg.config_hash()}"],
        )
        _atomic_write(out / "features" / f"{ddir.name}.csv", table)
        print(f"features: {ddir.name}: {len(rows)} vectors")

    if failures:
        print("features: corrupted or unusable inputs:", file=sys.stderr)
        for path, err in failures:
            print(f"  {path}: {err}", file=sys.stderr)
        raise DataError(f"{len(failures)} field file(s) could not be processed")
    return EXIT_OK


def _eval_seed(base_seed: int, design_idx: int, velocity_idx: int) -> int:
    ss = np.random.SeedSequence(base_seed, spawn_key=(1000 + design_idx, velocity_idx))
    return int(ss.generate_state(1)[0])


def cmd_classify(args) -> int:
    out = Path(args.out)
    cfg = _load_config_snapshot(out)
    feat_dir = out / "features"
    if not feat_dir.is_dir():
        raise DataError(f"{feat_dir} not found; run `features` first")
    tables = {}
    for path in sorted(feat_dir.glob("*.csv")):
        tables[path.stem] = features.dataset_from_csv(path.read_text())
    if not tables:
        raise DataError(f"no feature tables under {feat_dir}")

    velocities = sorted(
        {float(m["velocity_mm_s"]) for ds in tables.values() for m in ds.meta}
    )
    if args.velocity:
        requested = sorted(args.velocity)
        missing = [v for v in requested if v not in velocities]
        if missing:
            raise DataError(f"velocities {missing} not present in the feature tables")
        velocities = requested

    design_names = sorted(tables)
    plan_proto = learn.CvPlan(folds=cfg.cv_folds, repeats=cfg.cv_repeats)
    acc_rows = ["design,velocity_mm_s,repeat,fold,accuracy"]
    summary_rows = ["design,velocity_mm_s,models,mean_accuracy,std_accuracy"]
    stats_rows = [
        "velocity_mm_s,kind,group_a,group_b,statistic,p_or_qcrit,significant"
    ]
    box_data = []  # (label, accuracies) in plot order

    for vel in velocities:
        dists = {}
        for di, name in enumerate(design_names):
            ds = tables[name]
            keep = [
                i for i, m in enumerate(ds.meta) if float(m["velocity_mm_s"]) == vel
            ]
            if not keep:
                continue
            sub = features.LabeledDataset(
                vectors=ds.vectors[keep],
                labels=[ds.labels[i] for i in keep],
                meta=[ds.meta[i] for i in keep],
                layout_version=ds.layout_version,
            )
            if len(set(sub.labels)) < 2:
                raise DataError(
                    f"design {name!r} at {vel:g} mm/s has a single class; "
                    "classification needs at least 2"
                )
            plan = learn.CvPlan(
                folds=plan_proto.folds,
                repeats=plan_proto.repeats,
                seed=_eval_seed(cfg.seed, di, velocities.index(vel)),
            )
            dist = learn.evaluate(sub, plan)
            dists[name] = dist
            for idx, acc in enumerate(dist.accuracies):
                rep, fold = divmod(idx, plan.folds)
                acc_rows.append(f"{name},{vel!r},{rep},{fold},{float(acc)!r}")
            summary_rows.append(
                f"{name},{vel!r},{dist.accuracies.size},{dist.mean!r},{dist.std!r}"
            )
            box_data.append((f"{name}\n{vel:g} mm/s", dist.accuracies))
            print(
                f"classify: {name} @ {vel:g} mm/s: "
                f"{dist.mean:.3f} +/- {dist.std:.3f} ({dist.accuracies.size} models)"
            )

        if len(dists) >= 2:
            names = sorted(dists)
            groups = [dists[n].accuracies for n in names]
            f_stat, p, _, _ = learn.anova_oneway(groups)
            stats_rows.append(f"{vel!r},anova,all,all,{f_stat!r},{p!r},{p < 0.05}")
            for res in learn.tukey_hsd(groups, alpha=0.05, group_ids=names):
                stats_rows.append(
                    f"{vel!r},tukey,{res.group_a},{res.group_b},"
                    f"{res.q!r},{res.q_critical!r},{res.significant}"
                )
            print(f"classify: ANOVA @ {vel:g} mm/s: F={f_stat:.2f} p={p:.3g}")

    reports = out / "reports"
    _atomic_write(reports / "accuracy.csv", "\n".join(acc_rows) + "\n")
    _atomic_write(reports / "summary.csv", "\n".join(summary_rows) + "\n")
    _atomic_write(reports / "stats.csv", "\n".join(stats_rows) + "\n")
    _write_boxplot(reports / "accuracy_box.svg", box_data)
    print(f"classify: reports written under {reports}")
    return EXIT_OK


def _write_boxplot(path: Path, box_data):
    if not box_data:
        return
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(box_data)), 4.5))
    ax.boxplot(
        [acc for _, acc in box_data], tick_labels=[lbl for lbl, _ in box_data]
    )
    ax.set_ylabel("fold accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg")
    plt.close(fig)


def cmd_report(args) -> int:
    out = Path(args.out)
    acc_path = out / "reports" / "accuracy.csv"
    if not acc_path.exists():
        raise DataError(f"{acc_path} not found; run `classify` first")
    groups = {}
    for ln in acc_path.read_text().splitlines()[1:]:
        if not ln.strip():
            continue
        design, vel, _rep, _fold, acc = ln.split(",")
        groups.setdefault((design, float(vel)), []).append(float(acc))
    print(f"{'design':<16} {'velocity':>8} {'models':>6} {'mean':>7} {'std':>7}")
    box_data = []
    for (design, vel), accs in sorted(groups.items()):
        arr = np.asarray(accs)
        print(
            f"{design:<16} {vel:>8g} {arr.size:>6d} {arr.mean():>7.3f} {arr.std():>7.3f}"
        )
        box_data.append((f"{design}\n{vel:g} mm/s", arr))
    _write_boxplot(out / "reports" / "accuracy_box.svg", box_data)
    return EXIT_OK


def _parse_manifest(path: Path):
    entries = []
    for lineno, ln in enumerate(path.read_text().splitlines(), start=1):
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        parts = [p.strip() for p in ln.split(",")]
        if parts[0] == "path":  # header row
            continue
        if len(parts) < 4:
            raise cfgmod.ConfigError(
                f"{path}:{lineno}: need path,design,material,velocity[,direction,repetition,trial]"
            )
        entries.append(
            (
                (path.parent / parts[0]).resolve(),
                ingest.SessionMeta(
                    design=parts[1],
                    material=parts[2],
                    nominal_velocity_mm_s=float(parts[3]),
                    direction=parts[4] if len(parts) > 4 else "+x",
                    repetition=int(parts[5]) if len(parts) > 5 else 0,
                    trial=int(parts[6]) if len(parts) > 6 else 0,
                ),
            )
        )
    if not entries:
        raise cfgmod.ConfigError(f"{path}: manifest lists no log files")
    return entries


def cmd_ingest(args) -> int:
    out = Path(args.out)
    entries = _parse_manifest(Path(args.manifest))
    index_rows = ["source,pass,design,material,nominal_velocity_mm_s,measured_velocity_mm_s,direction,flags,file"]
    errors = []
    n_passes = 0
    for log_path, meta in entries:
        try:
            parsed = ingest.parse_log(log_path.read_bytes())
            bz = [r.bz_lsb for r in parsed.records]
            start = ingest.detect_contact(bz)
            if start is None:
                raise ValueError("no contact detected in the z field channel")
            passes = ingest.segment_passes(parsed.records[start:], meta)
            if not passes:
                raise ValueError("no passes with sufficient travel after contact")
        except (OSError, ValueError, ingest.MalformedLogError) as exc:
            errors.append((log_path, str(exc)))
            continue
        stem = log_path.stem
        for k, p in enumerate(passes):
            rel = f"{stem}_pass{k}.csv"
            header = [
                f"schema={cfgmod.SCHEMA_VERSION}",
                f"source={log_path.name}",
                f"design={meta.design}",
                f"material={meta.material}",
                f"nominal_velocity_mm_s={meta.nominal_velocity_mm_s!r}",
                f"measured_velocity_mm_s={p.measured_velocity_mm_s!r}",
                f"direction={p.direction}",
                f"flags={';'.join(p.flags)}",
            ]
            _atomic_write(
                out / "ingested" / rel,
                magnetics.field_to_csv(p.fieldseries, header_comments=header),
            )
            index_rows.append(
                f"{log_path.name},{k},{meta.design},{meta.material},"
                f"{meta.nominal_velocity_mm_s!r},{p.measured_velocity_mm_s!r},"
                f"{p.direction},{';'.join(p.flags)},{rel}"
            )
            n_passes += 1
        print(f"ingest: {log_path.name}: {len(passes)} pass(es)")
    if n_passes:
        _atomic_write(out / "ingested" / "passes.csv", "\n".join(index_rows) + "\n")
    if errors:
        print("ingest: failed files:", file=sys.stderr)
        for path, err in errors:
            print(f"  {path}: {err}", file=sys.stderr)
    if errors and n_passes == 0:
        raise DataError("all log files failed to ingest")
    print(f"ingest: wrote {n_passes} pass file(s) under {out / 'ingested'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ridgesense",
        description="Simulated scans, feature extraction, and texture classification "
        "for a magnet-elastomer tactile sensor.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, jobs=True):
        p.add_argument("--out", required=True, help="output directory")
        if jobs:
            p.add_argument("--jobs", type=int, default=1, help="worker processes")

    p_sim = sub.add_parser("simulate", help="run the sweep of simulated scans")
    p_sim.add_argument("--preset", choices=cfgmod.PRESET_NAMES)
    p_sim.add_argument("--config", help="TOML experiment config file")
    p_sim.add_argument("--seed", type=int, help="override the config seed")
    p_sim.add_argument("--force", action="store_true", help="recompute existing runs")
    add_common(p_sim)

    p_feat = sub.add_parser("features", help="extract feature tables from field CSVs")
    add_common(p_feat)

    p_cls = sub.add_parser("classify", help="cross-validated accuracy + statistics")
    p_cls.add_argument(
        "--velocity",
        type=float,
        action="append",
        help="restrict to these scan velocities (repeatable)",
    )
    add_common(p_cls, jobs=False)

    p_rep = sub.add_parser("report", help="summarize an existing accuracy table")
    add_common(p_rep, jobs=False)

    p_ing = sub.add_parser("ingest", help="segment recorded logs into passes")
    p_ing.add_argument("--manifest", required=True, help="CSV manifest of log files")
    add_common(p_ing, jobs=False)

    return parser


_COMMANDS = {
    "simulate": cmd_simulate,
    "features": cmd_features,
    "classify": cmd_classify,
    "report": cmd_report,
    "ingest": cmd_ingest,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except cfgmod.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError, ingest.MalformedLogError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
