"""Command-line interface: ``hotspot-meta <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Every output file starts with comment lines echoing the configuration and
its SHA-256, so runs can be traced and compared.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import warnings

import numpy as np

from .config import RunConfig, header_lines, load_config
from .errors import DataError, HotspotError
from .features import extract_all, read_samples, write_samples
from .geom import fragment_layout, generate_layout, read_layout, write_layout
from .metrics import compute_report, sweep_tradeoff, write_report_csv
from .modelio import load_model, save_model
from .oracle import label_fragments, read_labels, simulate_all, write_labels
from .pipeline import BASE_NAMES, calibrate_detailed, predict, run_benchmark, sweep_grid

DETECTION_COLUMNS = ["fragment_id", "t_meta", "score"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser, out_help: str) -> None:
    p.add_argument("--seed", type=int, default=0, help="PRNG seed (default 0)")
    p.add_argument("--config", help="JSON file of config overrides")
    p.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    p.add_argument("--out", required=True, help=out_help)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hotspot-meta", description="Meta-classifier lithography hotspot detection.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic layout")
    _common(p, "layout file to write")

    p = sub.add_parser("label", help="label fragments with the lithography oracle")
    p.add_argument("--layout", required=True)
    _common(p, "labels CSV to write")

    p = sub.add_parser("extract", help="extract density features for labelled fragments")
    p.add_argument("--layout", required=True)
    p.add_argument("--labels", required=True)
    _common(p, "samples CSV to write")

    p = sub.add_parser("calibrate", help="train the base classifiers and calibrate the meta layer")
    p.add_argument("--samples", required=True)
    _common(p, "model file to write (calibration-set detections go to OUT.calib.csv)")

    p = sub.add_parser("predict", help="detect hotspots in a layout")
    p.add_argument("--model", required=True)
    p.add_argument("--layout", required=True)
    _common(p, "detections CSV to write")

    p = sub.add_parser("eval", help="score detections against labels")
    p.add_argument("--detections", required=True)
    p.add_argument("--labels", required=True)
    _common(p, "report CSV to write")

    p = sub.add_parser("sweep", help="accuracy / false-alarm trade-off over thresholds")
    p.add_argument("--detections", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--points", type=int, default=64, help="number of score-quantile thresholds")
    _common(p, "trade-off CSV to write")

    p = sub.add_parser("bench", help="seeded end-to-end run writing every artifact")
    _common(p, "output directory")
    return parser


def _config(args) -> RunConfig:
    return load_config(args.config) if args.config else RunConfig()


def _header(cfg: RunConfig, args, extra: str = "") -> list[str]:
    lines = header_lines(cfg)
    lines.append(f"# command={args.command} seed={args.seed}{extra}")
    return lines


def write_detections(path, detections, header) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in header:
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DETECTION_COLUMNS)
        for d in detections:
            w.writerow([d.fragment_id, d.t_meta, repr(float(d.score))])


def read_detections(path):
    """Returns ``(ids, t_meta, scores)``."""
    try:
        with open(path, encoding="utf-8") as fh:
            rows = [line for line in fh if not line.startswith("#")]
    except OSError as exc:
        raise DataError(f"cannot read detections {path}: {exc}") from exc
    reader = csv.reader(rows)
    if next(reader, None) != DETECTION_COLUMNS:
        raise DataError(f"{path}: expected header {','.join(DETECTION_COLUMNS)}")
    ids, dec, scores = [], [], []
    for n, row in enumerate(reader, 2):
        try:
            fid, t, s = row
            ids.append(int(fid))
            dec.append(int(t))
            scores.append(float(s))
        except ValueError as exc:
            raise DataError(f"{path}: record {n}: {exc}") from exc
    return np.array(ids, dtype=np.int64), np.array(dec), np.array(scores)


def _aligned_labels(label_path, ids, source):
    labels = {lab.fragment_id: lab.t_litho for lab in read_labels(label_path)}
    missing = [int(i) for i in ids if int(i) not in labels]
    if missing:
        raise DataError(f"{source}: fragment {missing[0]} has no label in {label_path}")
    return np.array([labels[int(i)] for i in ids], dtype=np.float64)


def cmd_gen(args, cfg):
    layout = generate_layout(args.seed, cfg.gen)
    write_layout(layout, args.out, _header(cfg, args))


def cmd_label(args, cfg):
    layout = read_layout(args.layout)
    frags = fragment_layout(layout, cfg.features.frag_len)
    labels = label_fragments(simulate_all(layout, frags, cfg.oracle, args.threads), cfg.oracle, cfg.target_class)
    write_labels(labels, args.out, _header(cfg, args))


def cmd_extract(args, cfg):
    layout = read_layout(args.layout)
    frags = fragment_layout(layout, cfg.features.frag_len)
    ids, X = extract_all(layout, frags, cfg.features.window, cfg.features.grid, args.threads)
    t = _aligned_labels(args.labels, ids, args.layout)
    write_samples(args.out, ids, t, X, _header(cfg, args))


def cmd_calibrate(args, cfg):
    ids, t, X = read_samples(args.samples)
    cal = calibrate_detailed(ids, X, t, cfg.calib, config_json=cfg.to_json())
    save_model(cal.model, args.out)
    write_detections(args.out + ".calib.csv", predict(cal.model, ids, X), _header(cfg, args))


def cmd_predict(args, cfg):
    model = load_model(args.model)
    layout = read_layout(args.layout)
    frags = fragment_layout(layout, cfg.features.frag_len)
    ids, X = extract_all(layout, frags, cfg.features.window, cfg.features.grid, args.threads)
    write_detections(args.out, predict(model, ids, X), _header(cfg, args))


def cmd_eval(args, cfg):
    ids, dec, scores = read_detections(args.detections)
    t = _aligned_labels(args.labels, ids, args.detections)
    report = compute_report(dec, t, cfg.calib.psi_alpha, cfg.calib.psi_beta)
    write_report_csv(args.out, [report], _header(cfg, args))


def cmd_sweep(args, cfg):
    if args.points < 2:
        raise UsageError("--points must be at least 2")
    ids, _, scores = read_detections(args.detections)
    t = _aligned_labels(args.labels, ids, args.detections)
    if scores.shape[0] == 0:
        raise DataError(f"{args.detections}: no detections to sweep")
    rows = sweep_tradeoff(scores, t, sweep_grid(scores, args.points), cfg.calib.psi_alpha, cfg.calib.psi_beta)
    write_report_csv(args.out, rows, _header(cfg, args))


def cmd_bench(args, cfg):
    os.makedirs(args.out, exist_ok=True)
    res = run_benchmark(args.seed, cfg, args.threads)
    head = _header(cfg, args)
    path = lambda name: os.path.join(args.out, name)  # noqa: E731
    write_layout(res.layout, path("layout.txt"), head)
    write_labels(res.labels, path("labels.csv"), head)
    write_samples(path("samples.csv"), res.ids, res.t, res.X, head)
    save_model(res.model, path("model.epic"))
    test_ids = res.ids[res.test_idx]
    write_detections(path("detections.csv"), predict(res.model, test_ids, res.X[res.test_idx]), head)
    with open(path("split.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(head) + "\nfragment_id,split\n")
        part = np.full(res.ids.shape[0], "test", dtype=object)
        part[res.calib_idx] = "calib"
        fh.writelines(f"{int(i)},{p}\n" for i, p in zip(res.ids, part))
    for name, report in res.reports.items():
        write_report_csv(path(f"report_{name}.csv"), [report], head + [f"# classifier={name} split=test"])
    for name, rows in res.sweeps.items():
        write_report_csv(path(f"sweep_{name}.csv"), rows, head + [f"# classifier={name} split=test"])
    summary = [f"{name}: hit {r.hit}/{r.actual_hotspots} extra {r.extra} accuracy {r.accuracy:.3f} "
               f"false_alarm {r.false_alarm_ratio:.2f}X psi {r.psi:.4f}" for name, r in res.reports.items()]
    print("\n".join(summary))


COMMANDS = {
    "gen": cmd_gen, "label": cmd_label, "extract": cmd_extract, "calibrate": cmd_calibrate,
    "predict": cmd_predict, "eval": cmd_eval, "sweep": cmd_sweep, "bench": cmd_bench,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        cfg = _config(args)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except HotspotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
