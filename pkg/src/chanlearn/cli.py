"""Command-line entry point: compare / sweep / distance / train / predict.

Scenario files are flat key=value text ('#' starts a comment). Every subcommand
writes CSV outputs plus a plain-text summary on stdout and is byte-reproducible
for a fixed scenario. Partial outputs are removed if a command fails.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import fields, replace

import numpy as np

from . import featpipe, gscm, harness, neuralnet, optim
from .harness import Scenario


class CliError(Exception):
    pass


_LIST_KEYS = {"knn_k_list"}
_BOOL_KEYS = {"reg_include_bias"}
_POSITIONS_KEYS = {"small_cell_positions"}


def _parse_value(key: str, raw: str, target_type):
    raw = raw.strip()
    if key in _POSITIONS_KEYS:
        pts = []
        for chunk in raw.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            x, y = chunk.split(",")
            pts.append((float(x), float(y)))
        return tuple(pts)
    if key in _LIST_KEYS:
        return tuple(int(v) for v in raw.split(",") if v.strip())
    if key in _BOOL_KEYS:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    return target_type(raw)


def load_scenario(path: str, overrides=()) -> Scenario:
    """Parse a key=value scenario file and apply overrides last."""
    field_types = {f.name: f.type for f in fields(Scenario)}
    py_types = {"float": float, "int": int, "bool": bool, "tuple": tuple}
    values = {}

    def apply(key, raw, where):
        key = key.strip()
        if key not in field_types:
            raise CliError(f"{where}: unknown scenario key {key!r}")
        try:
            typ = py_types.get(field_types[key], float)
            values[key] = _parse_value(key, raw, typ)
        except (ValueError, TypeError) as exc:
            raise CliError(f"{where}: bad value for {key!r}: {exc}") from exc

    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise CliError(f"cannot read scenario file {path}: {exc}") from exc

    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, raw = line.split("=", 1)
        apply(key, raw, f"{path}:{lineno}")

    for item in overrides:
        if "=" not in item:
            raise CliError(f"--set {item!r}: expected KEY=VALUE")
        key, raw = item.split("=", 1)
        apply(key, raw, f"--set {item!r}")

    try:
        return Scenario(**values)
    except ValueError as exc:
        raise CliError(f"invalid scenario: {exc}") from exc


def _print_aggregate(rows) -> None:
    print(f"{'algorithm':<12} {'antennas':>8} {'scatterers':>10} {'mean_acc':>9} {'std_acc':>8} {'runs':>5}")
    for alg, n_ant, n_scat, mean, std, n in rows:
        print(f"{alg:<12} {n_ant:>8} {n_scat:>10} {mean:>9.4f} {std:>8.4f} {n:>5}")


class _OutputTracker:
    """Records files written by one command so failures leave no partial output."""

    def __init__(self, out_dir):
        self.out_dir = out_dir
        self.paths = []
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name):
        p = os.path.join(self.out_dir, name)
        self.paths.append(p)
        return p

    def cleanup(self):
        for p in self.paths:
            if os.path.exists(p):
                os.remove(p)


def cmd_compare(scenario: Scenario, out: _OutputTracker) -> int:
    results = harness.run_experiment(scenario)
    rows = harness.aggregate(results)
    harness.write_results_csv(results, out.path("results.csv"))
    harness.write_aggregate_csv(rows, out.path("aggregate.csv"))
    dataset_seed = harness.derive_seed(scenario.master_seed, 0)
    scat = gscm.place_scatterers(
        harness.derive_seed(dataset_seed, 0),
        scenario.n_scatterers,
        scenario.make_geometry(np.empty((0, 2)), np.empty(0, dtype=complex)),
    )
    gains = gscm.draw_scatterer_gains(
        harness.derive_seed(dataset_seed, 1), scenario.n_scatterers
    )
    harness.write_geometry_csv(
        scenario.make_geometry(scat, gains), out.path("layout.csv")
    )
    _print_aggregate(rows)
    return 0


def cmd_sweep(scenario: Scenario, out: _OutputTracker, antennas, scatterers) -> int:
    results = harness.sweep(scenario, antennas, scatterers)
    rows = harness.aggregate(results)
    harness.write_results_csv(results, out.path("sweep_results.csv"))
    harness.write_aggregate_csv(rows, out.path("sweep_aggregate.csv"))
    _print_aggregate(rows)
    return 0


def cmd_distance(scenario: Scenario, out: _OutputTracker, n_pairs: int) -> int:
    rows = harness.distance_study(scenario, n_pairs)
    harness.write_distance_csv(rows, out.path("distance.csv"))
    minima = harness.decile_minima(rows)
    print("decile  min_channel_dist")
    for i, m in enumerate(minima):
        print(f"{i:>6}  {m:.6f}")
    return 0


def _write_channel_csv(samples, n_antennas: int, path) -> None:
    header = []
    for i in range(n_antennas):
        header += [f"re_{i}", f"im_{i}"]
    header.append("label")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for s in samples:
            row = []
            for v in s.h_o.entries:
                row += [repr(float(v.real)), repr(float(v.imag))]
            row.append(s.label)
            w.writerow(row)


def cmd_train(scenario: Scenario, out: _OutputTracker) -> int:
    run_seed = harness.derive_seed(scenario.master_seed, 0)
    dataset = harness.generate_dataset(scenario, run_seed)
    train, test = harness.split(
        dataset, scenario.train_fraction, harness.derive_seed(run_seed, 3)
    )
    codebook = harness.build_features(train, test, scenario)
    shape = neuralnet.NetShape(
        (scenario.n_antennas, scenario.hidden_units, scenario.n_small_cells)
    )
    params, report = optim.train(
        train,
        shape,
        scenario.lambda_reg,
        optim.OptimOptions(max_iters=scenario.max_iters),
        seed=harness.derive_seed(run_seed, 4),
        reg_include_bias=scenario.reg_include_bias,
    )

    neuralnet.save_params(params, out.path("model.txt"))
    report.write_csv(out.path("training_report.csv"))
    with open(out.path("codebook.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level_index", "codepoint", "upper_boundary"])
        for row in featpipe.codebook_rows(codebook):
            w.writerow([row[0], repr(row[1]), repr(row[2])])
    _write_channel_csv(train, scenario.n_antennas, out.path("train_data.csv"))
    _write_channel_csv(test, scenario.n_antennas, out.path("test_data.csv"))

    accs = {}
    for name, part in (("train", train), ("test", test)):
        x = np.vstack([s.feature.values for s in part])
        labels = np.array([s.label for s in part])
        accs[name] = float(np.mean(neuralnet.predict_batch(params, x) == labels))
    with open(out.path("metrics.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["split", "accuracy"])
        for name, acc in accs.items():
            w.writerow([name, repr(acc)])
    print(f"train accuracy: {accs['train']:.4f}")
    print(f"test accuracy:  {accs['test']:.4f}")
    print(f"optimizer stop: {report.stop_reason} after {report.iterations} iterations")
    return 0


def _load_codebook(path) -> featpipe.Codebook:
    with open(path, newline="") as fh:
        rows = [row for row in csv.DictReader(fh)]
    return featpipe.codebook_from_rows(
        [(int(r["level_index"]), float(r["codepoint"]), 0.0) for r in rows]
    )


def cmd_predict(model_dir: str, input_path: str, output_path: str) -> int:
    params = neuralnet.load_params(os.path.join(model_dir, "model.txt"))
    codebook = _load_codebook(os.path.join(model_dir, "codebook.csv"))
    with open(input_path, newline="") as fh:
        reader = csv.DictReader(fh)
        field_names = reader.fieldnames or []
        rows = list(reader)
    n_re = sum(1 for c in field_names if c.startswith("re_"))
    n_im = sum(1 for c in field_names if c.startswith("im_"))
    if n_re != n_im or n_re == 0:
        raise CliError(
            f"input needs matching re_*/im_* columns, found {n_re} re and {n_im} im"
        )
    if n_re != params.shape.n_inputs:
        raise CliError(
            f"dimension mismatch: input has {n_re} antennas, model expects "
            f"{params.shape.n_inputs}"
        )
    predictions = []
    for r in rows:
        h = np.array(
            [float(r[f"re_{i}"]) + 1j * float(r[f"im_{i}"]) for i in range(n_re)]
        )
        feat = featpipe.make_feature(h, codebook)
        predictions.append(neuralnet.predict(params, feat))
    with open(output_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(field_names + ["predicted_cell"])
        for r, p in zip(rows, predictions):
            w.writerow([r[c] for c in field_names] + [p])
    print(f"wrote {len(rows)} predictions to {output_path}")
    return 0


def _int_list(raw: str):
    return [int(v) for v in raw.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chanlearn",
        description="Channel synthesis and learned small-cell selection experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--scenario", required=True, help="key=value scenario file")
        p.add_argument("--out", required=True, help="output directory for CSVs")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a scenario key (repeatable)",
        )
        p.add_argument("--jobs", type=int, default=None, help="parallel runs")

    p = sub.add_parser("compare", help="run every algorithm on one scenario")
    add_common(p)

    p = sub.add_parser("sweep", help="grid over antenna and scatterer counts")
    add_common(p)
    p.add_argument("--antennas", type=_int_list, default=[50, 100])
    p.add_argument("--scatterers", type=_int_list, default=[20, 100])

    p = sub.add_parser("distance", help="channel vs geographical distance study")
    add_common(p)
    p.add_argument("--pairs", type=int, default=2000)

    p = sub.add_parser("train", help="train one model and export it")
    add_common(p)

    p = sub.add_parser("predict", help="predict cells for raw array responses")
    p.add_argument("--model", required=True, help="directory holding model.txt and codebook.csv")
    p.add_argument("--input", required=True, help="CSV of raw responses (re_0,im_0,...)")
    p.add_argument("--output", required=True, help="output CSV path")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "predict":
            return cmd_predict(args.model, args.input, args.output)
        scenario = load_scenario(args.scenario, args.overrides)
        if args.jobs is not None:
            if args.jobs < 1:
                raise CliError("--jobs must be >= 1")
            scenario = replace(scenario, jobs=args.jobs)
        out = _OutputTracker(args.out)
        try:
            if args.command == "compare":
                return cmd_compare(scenario, out)
            if args.command == "sweep":
                return cmd_sweep(scenario, out, args.antennas, args.scatterers)
            if args.command == "distance":
                return cmd_distance(scenario, out, args.pairs)
            if args.command == "train":
                return cmd_train(scenario, out)
            raise CliError(f"unknown command {args.command!r}")
        except BaseException:
            out.cleanup()
            raise
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
