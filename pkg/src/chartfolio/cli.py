"""Command-line pipelines: ingest, render, label, split, summarize,
classify, analyze, mc, backtest, sweep-alpha.

Every subcommand writes its artifacts plus a manifest.json into its output
directory, holds a lock file for the duration of the run, and is
byte-reproducible given the same inputs and seed. Exit codes: 0 success,
1 input error, 2 internal invariant violation, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from . import __version__
from .errors import ChartfolioError, InputError
from . import analytics, backtest, chartgen, classifier, dataset, marketdata, montecarlo

LOCK_NAME = ".chartfolio.lock"
DATA_DIR_ENV = "CHARTFOLIO_DATA_DIR"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit 64 instead of argparse's 2
        print(f"error: {message}", file=sys.stderr)
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _resolve_input(raw: str) -> Path:
    """Resolve an input path, falling back to $CHARTFOLIO_DATA_DIR."""
    path = Path(raw)
    if path.exists() or path.is_absolute():
        return path
    root = os.environ.get(DATA_DIR_ENV)
    if root:
        candidate = Path(root) / path
        if candidate.exists():
            return candidate
    return path


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


class _OutputDir:
    """Creates the output directory and holds its lock for the run."""

    def __init__(self, path: Path):
        self.path = path
        self.lock = path / LOCK_NAME

    def __enter__(self) -> Path:
        self.path.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise InputError(
                f"output directory {self.path} is locked by another run "
                f"(remove {self.lock} if that run is dead)"
            ) from None
        with os.fdopen(fd, "w") as handle:
            handle.write(str(os.getpid()))
        return self.path

    def __exit__(self, *exc) -> None:
        try:
            self.lock.unlink()
        except OSError:
            pass


def _write_manifest(
    out_dir: Path,
    argv: Sequence[str],
    seed: int | None,
    inputs: Sequence[Path] = (),
    configs: Sequence[Path] = (),
) -> None:
    manifest = {
        "command": list(argv),
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "seed": seed,
        "input_digests": {str(p): _sha256(p) for p in inputs},
        "config_digests": {str(p): _sha256(p) for p in configs},
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_grid(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise InputError(f"grid must be lo:hi:step, got {text!r}")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError as exc:
        raise InputError(f"bad grid {text!r}") from exc
    if step <= 0 or hi < lo:
        raise InputError(f"bad grid bounds {text!r}")
    values = []
    k = 0
    while True:
        value = round(lo + k * step, 10)
        if value > hi + 1e-12:
            break
        values.append(value)
        k += 1
    return values


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_ingest(args, argv) -> int:
    src = _resolve_input(args.in_path)
    if src.is_dir():
        files = sorted(src.glob("*.csv"))
        if not files:
            raise InputError(f"no CSV files in {src}")
    elif src.exists():
        files = [src]
    else:
        raise InputError(f"input {src} does not exist")

    out = Path(args.out)
    schema = marketdata.CsvSchema(tz=args.tz)
    sessions: list[marketdata.TradingSession] = []
    with _OutputDir(out.parent if out.suffix else out) as out_dir:
        all_errors = 0
        skipped = 0
        for path in files:
            result = marketdata.load_bars_csv(path, schema)
            for err in result.row_errors:
                print(f"{path}:{err.line}: {err.message}", file=sys.stderr)
            all_errors += len(result.row_errors)
            for session, reason in result.skipped():
                print(
                    f"skipped {session.ticker} {session.date}: {reason}",
                    file=sys.stderr,
                )
                skipped += 1
            sessions.extend(result.clean_sessions())
        sessions.sort(key=lambda s: (s.ticker, s.date))
        target = out if out.suffix else out_dir / "sessions.csv"
        marketdata.write_sessions_csv(sessions, target)
        _write_manifest(target.parent, argv, None, inputs=files)
    print(
        f"ingested {len(sessions)} sessions from {len(files)} files "
        f"({skipped} skipped, {all_errors} bad rows) -> {target}"
    )
    return 0


def _cmd_render(args, argv) -> int:
    sessions_path = _resolve_input(args.sessions)
    spec = chartgen.RenderSpec()
    configs = []
    if args.spec:
        spec_path = _resolve_input(args.spec)
        spec = chartgen.RenderSpec.from_file(spec_path)
        configs.append(spec_path)
    result = marketdata.load_bars_csv(sessions_path)
    with _OutputDir(Path(args.out_dir)) as out_dir:
        count = 0
        for session in result.clean_sessions():
            bars = marketdata.slice_first_hour(session)
            img = chartgen.render_candles(bars, spec)
            chartgen.encode_png(img, out_dir / f"{session.ticker}_{session.date}.png")
            count += 1
        _write_manifest(out_dir, argv, None, inputs=[sessions_path], configs=configs)
    print(f"rendered {count} charts -> {args.out_dir}")
    return 0


def _cmd_label(args, argv) -> int:
    sessions_path = _resolve_input(args.sessions)
    result = marketdata.load_bars_csv(sessions_path)
    for err in result.row_errors:
        print(f"{sessions_path}:{err.line}: {err.message}", file=sys.stderr)
    samples, _ = dataset.label_sessions(result.clean_sessions())

    if args.images_dir:
        images = Path(_resolve_input(args.images_dir))
        enriched = []
        for s in samples:
            candidate = images / f"{s.ticker}_{s.date}.png"
            enriched.append(
                dataset.with_image_path(s, str(candidate)) if candidate.exists() else s
            )
        samples = enriched

    out = Path(args.out)
    with _OutputDir(out.parent) as out_dir:
        dataset.write_samples_csv(samples, out)
        skip_lines = [
            f"skipped {session.ticker} {session.date}: {reason}"
            for session, reason in result.skipped()
        ]
        for line in skip_lines:
            print(line, file=sys.stderr)
        (out_dir / "skipped.txt").write_text(
            "\n".join(skip_lines) + ("\n" if skip_lines else ""), encoding="utf-8"
        )
        _write_manifest(out_dir, argv, None, inputs=[sessions_path])
    print(f"labeled {len(samples)} samples ({len(skip_lines)} skipped) -> {out}")
    return 0


def _cmd_split(args, argv) -> int:
    samples_path = _resolve_input(args.samples)
    samples = dataset.load_samples_csv(samples_path)
    parts = [p.strip() for p in args.fractions.split(",")]
    if len(parts) != 3:
        raise InputError("--fractions must be three comma-separated numbers")
    try:
        fractions = tuple(float(p) for p in parts)
    except ValueError as exc:
        raise InputError(f"bad fractions {args.fractions!r}") from exc
    split = dataset.split_dataset(samples, fractions, seed=args.seed, method=args.method)
    with _OutputDir(Path(args.out_dir)) as out_dir:
        dataset.write_samples_csv(split.train, out_dir / "train.csv")
        dataset.write_samples_csv(split.validation, out_dir / "validation.csv")
        dataset.write_samples_csv(split.test, out_dir / "test.csv")
        _write_manifest(out_dir, argv, args.seed, inputs=[samples_path])
    print(
        f"split {len(samples)} samples ({args.method}) -> "
        f"{len(split.train)}/{len(split.validation)}/{len(split.test)}"
    )
    return 0


_STAT_ROWS = (
    ("AVG", "mean"),
    ("MEDIAN", "median"),
    ("SD", "stdev"),
    ("MIN", "min"),
    ("MAX", "max"),
    ("Q1", "q1"),
    ("Q3", "q3"),
    ("N", "count"),
)


def _summary_rows(stats: dataset.SummaryStats):
    columns = [("ALL", stats.overall)] + [
        (label.name, stats.per_class.get(label)) for label in dataset.ClassLabel
    ]
    for row_name, attr in _STAT_ROWS:
        row = [row_name]
        for _, ys in columns:
            row.append("" if ys is None else _fmt(getattr(ys, attr)))
        yield row


def _cmd_summarize(args, argv) -> int:
    samples_path = _resolve_input(args.samples)
    samples = dataset.load_samples_csv(samples_path)
    stats = dataset.summarize(samples)
    with _OutputDir(Path(args.out_dir)) as out_dir:
        _write_csv(
            out_dir / "summary.csv",
            ("stat", "ALL", "C0", "C1", "C2"),
            _summary_rows(stats),
        )
        _write_manifest(out_dir, argv, None, inputs=[samples_path])
    header = f"{'':8s} {'ALL':>12s} {'C0':>12s} {'C1':>12s} {'C2':>12s}"
    print(header)
    for row in _summary_rows(stats):
        cells = [
            f"{float(c):12.4f}" if c and row[0] != "N" else f"{c:>12s}"
            for c in row[1:]
        ]
        print(f"{row[0]:8s} " + " ".join(cells))
    return 0


def _cmd_classify(args, argv) -> int:
    samples_path = _resolve_input(args.samples)
    samples = dataset.load_samples_csv(samples_path)
    inputs = [samples_path]
    configs = []

    if args.mode == "channel":
        if not args.channel:
            raise InputError("--mode channel requires --channel CONFIG")
        channel_path = _resolve_input(args.channel)
        configs.append(channel_path)
        channel = classifier.ChannelMatrix.from_file(channel_path)
        records = classifier.simulate_records(
            ((s.sample_id, s.label) for s in samples), channel, seed=args.seed
        )
    else:
        if not args.replay:
            raise InputError("--mode replay requires --replay CSV")
        replay_path = _resolve_input(args.replay)
        inputs.append(replay_path)
        loaded = classifier.replay_load(replay_path)
        for err in loaded.row_errors:
            print(f"{replay_path}:{err.line}: {err.message}", file=sys.stderr)
        records = loaded.records

    if args.alpha is not None:
        classified, abstained = classifier.alpha_filter(records, args.alpha)
        by_id = {r.sample_id: r for r in classified + abstained}
        records = [by_id[r.sample_id] for r in records]
        n_classified = len(classified)
    else:
        records = [
            replace(r, predicted=classifier.argmax_classify(r)) for r in records
        ]
        n_classified = len(records)

    with _OutputDir(Path(args.out_dir)) as out_dir:
        classifier.write_records_csv(records, out_dir / "records.csv")
        _write_manifest(out_dir, argv, args.seed, inputs=inputs, configs=configs)
    print(
        f"classified {n_classified}/{len(records)} records "
        f"(mode={args.mode}, alpha={args.alpha}) -> {args.out_dir}/records.csv"
    )
    return 0


def _confusion_text(cm: analytics.ConfusionMatrix, m: analytics.ClassMetrics) -> str:
    lines = ["True / Prediction      0      1      2    SUM"]
    for i in range(3):
        row = cm.counts[i]
        lines.append(
            f"{i:17d} {row[0]:6d} {row[1]:6d} {row[2]:6d} {int(cm.row_sums[i]):6d}"
        )
    cols = cm.col_sums
    lines.append(f"{'SUM':>17s} {cols[0]:6d} {cols[1]:6d} {cols[2]:6d} {cm.total:6d}")
    lines.append("")
    lines.append("class  precision  recall  f1-score  support")
    for j in range(3):
        lines.append(
            f"{j:5d} {m.precision[j]:10.4f} {m.recall[j]:7.4f} "
            f"{m.f1[j]:9.4f} {m.support[j]:8d}"
        )
    lines.append(f"accuracy: {m.accuracy:.4f}")
    return "\n".join(lines) + "\n"


def _emit_sweep(out_dir: Path, curve: analytics.AlphaSweepCurve) -> None:
    _write_csv(
        out_dir / "alpha_curve.csv",
        ("alpha", "classified", "fraction", "c1_fraction", "correct"),
        (
            (
                _fmt(p.alpha),
                p.classified_count,
                _fmt(p.classified_fraction),
                _fmt(p.c1_fraction),
                _fmt(p.correct_fraction),
            )
            for p in curve.points
        ),
    )
    _write_csv(
        out_dir / "correct_per_alpha.csv",
        ("alpha", "correct"),
        ((_fmt(p.alpha), _fmt(p.correct_fraction)) for p in curve.points),
    )
    _write_csv(
        out_dir / "all_per_alpha.csv",
        ("alpha", "all"),
        ((_fmt(p.alpha), _fmt(p.classified_fraction)) for p in curve.points),
    )
    _write_csv(
        out_dir / "c1_per_alpha.csv",
        ("alpha", "c1"),
        ((_fmt(p.alpha), _fmt(p.c1_fraction)) for p in curve.points),
    )


def _cmd_analyze(args, argv) -> int:
    records_path = _resolve_input(args.records)
    samples_path = _resolve_input(args.samples)
    loaded = classifier.replay_load(records_path)
    for err in loaded.row_errors:
        print(f"{records_path}:{err.line}: {err.message}", file=sys.stderr)
    samples = dataset.load_samples_csv(samples_path)
    joined = analytics.join_predictions(samples, loaded.records)
    classified = [r for r in loaded.records if r.predicted is not None]
    if not classified:
        raise InputError("no classified records to analyze")

    cfg = analytics.BinningConfig(m=args.increment)
    cm = analytics.confusion(classified)
    m = analytics.metrics(cm)

    with _OutputDir(Path(args.out_dir)) as out_dir:
        _write_csv(
            out_dir / "confusion.csv",
            ("true", "pred0", "pred1", "pred2"),
            ((i, *cm.counts[i]) for i in range(3)),
        )
        _write_csv(
            out_dir / "metrics.csv",
            ("class", "precision", "recall", "f1", "support"),
            (
                (j, _fmt(m.precision[j]), _fmt(m.recall[j]), _fmt(m.f1[j]), m.support[j])
                for j in range(3)
            ),
        )
        (out_dir / "tables.txt").write_text(_confusion_text(cm, m), encoding="utf-8")

        stats_by_pred = analytics.prediction_stats(joined)
        _write_csv(
            out_dir / "prediction_stats.csv",
            ("stat", "C0", "C1", "C2"),
            (
                (
                    row_name,
                    *(
                        _fmt(getattr(stats_by_pred[label], attr))
                        if label in stats_by_pred
                        else ""
                        for label in dataset.ClassLabel
                    ),
                )
                for row_name, attr in _STAT_ROWS
            ),
        )

        for label in dataset.ClassLabel:
            values = [
                jp.yield_ratio for jp in joined if jp.predicted is label
            ]
            if len(values) < 2:
                continue
            ds = analytics.dist_stats(values, increment=args.increment)
            _write_csv(
                out_dir / f"dist_{label.name.lower()}.csv",
                ("yield", "count"),
                ((_fmt(k), v) for k, v in ds.histogram.items()),
            )

        bins = analytics.proportions_per_yield(joined, cfg)
        _write_csv(
            out_dir / "class_predictions_yields.csv",
            ("yield", "C0", "C1", "C2", "count"),
            (
                (_fmt(k), *(_fmt(p) for p in yb.proportions), yb.count)
                for k, yb in bins.items()
            ),
        )

        try:
            ols_fits = analytics.proportion_regressions(joined, cfg)
            ols_rows = [
                (
                    label.name,
                    _fmt(fit.beta0),
                    _fmt(fit.p_value0),
                    _fmt(fit.beta1),
                    _fmt(fit.p_value1),
                    _fmt(fit.adj_r_squared),
                    fit.n,
                )
                for label, fit in ols_fits.items()
            ]
        except InputError as exc:
            print(f"note: proportion OLS not fitted: {exc}", file=sys.stderr)
            ols_rows = []
        _write_csv(
            out_dir / "ols.csv",
            ("class", "beta0", "p0", "beta1", "p1", "adj_r_squared", "n"),
            ols_rows,
        )

        per_class = analytics.per_class_regressions(joined, cfg)
        _write_csv(
            out_dir / "class_level_ols.csv",
            ("true", "pred", "beta0", "p0", "beta1", "p1", "r_squared", "n"),
            (
                (
                    t.name,
                    p.name,
                    *(
                        ("", "", "", "", "", "")
                        if fit is None
                        else (
                            _fmt(fit.beta0),
                            _fmt(fit.p_value0),
                            _fmt(fit.beta1),
                            _fmt(fit.p_value1),
                            _fmt(fit.r_squared),
                            fit.n,
                        )
                    ),
                )
                for (t, p), fit in per_class.items()
            ),
        )

        mnl_points = [
            (jp.yield_ratio, jp.predicted) for jp in joined if jp.predicted is not None
        ]
        try:
            fit = analytics.mnl_fit(mnl_points)
            mnl_lines = [
                "multinomial logit (base C0)",
                f"        C1: intercept {fit.intercepts[0]:.4f} (p={fit.p_intercepts[0]:.4f})"
                f"  slope {fit.slopes[0]:.4f} (p={fit.p_slopes[0]:.4f})",
                f"        C2: intercept {fit.intercepts[1]:.4f} (p={fit.p_intercepts[1]:.4f})"
                f"  slope {fit.slopes[1]:.4f} (p={fit.p_slopes[1]:.4f})",
                f"LL = {fit.log_likelihood:.3f}",
                f"LLR chi2 = {fit.llr_chi2:.3f} (p={fit.llr_p_value:.4f})",
                f"converged = {fit.converged} in {fit.iterations} iterations",
            ]
            (out_dir / "mnl.txt").write_text("\n".join(mnl_lines) + "\n", encoding="utf-8")
            grid = _parse_grid("0.745:1.295:0.001")
            _write_csv(
                out_dir / "class_probability_predictions.csv",
                ("yield", "p0", "p1", "p2"),
                (
                    (_fmt(x), *(_fmt(p) for p in analytics.mnl_predict_probs(fit, x)))
                    for x in grid
                ),
            )
        except InputError as exc:
            (out_dir / "mnl.txt").write_text(f"not fitted: {exc}\n", encoding="utf-8")

        if args.alpha_grid:
            curve = analytics.alpha_sweep(loaded.records, _parse_grid(args.alpha_grid))
            _emit_sweep(out_dir, curve)

        _write_manifest(out_dir, argv, None, inputs=[records_path, samples_path])
    print(f"analysis artifacts -> {args.out_dir}")
    return 0


def _cmd_sweep_alpha(args, argv) -> int:
    records_path = _resolve_input(args.records)
    loaded = classifier.replay_load(records_path)
    for err in loaded.row_errors:
        print(f"{records_path}:{err.line}: {err.message}", file=sys.stderr)
    curve = analytics.alpha_sweep(loaded.records, _parse_grid(args.grid))
    with _OutputDir(Path(args.out_dir)) as out_dir:
        _emit_sweep(out_dir, curve)
        if args.gamma1 is not None:
            result = analytics.alpha_star_search(
                curve, gamma1=args.gamma1, gamma0=args.gamma0
            )
            lines = [
                f"candidates: {', '.join(f'{a:g}' for a in result.candidates)}",
                f"flat: {result.flat}",
            ]
            for alpha, value in result.derivative_diagnostic.items():
                lines.append(f"diagnostic f'/f + g'/g at {alpha:g}: {value:.6g}")
            (out_dir / "alpha_star.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
        _write_manifest(out_dir, argv, None, inputs=[records_path])
    print(f"swept {len(curve.points)} thresholds -> {args.out_dir}")
    return 0


def _cmd_mc(args, argv) -> int:
    config_path = _resolve_input(args.config)
    exp = montecarlo.experiment_from_file(config_path, repetitions=args.reps, seed=args.seed)
    result = montecarlo.run_experiment(exp)
    with _OutputDir(Path(args.out_dir)) as out_dir:
        rows = [(i, _fmt(float(w))) for i, w in enumerate(result.final_wealth)]
        rows.append(("mean", _fmt(result.mean)))
        _write_csv(out_dir / "results.csv", ("repetition", "final_wealth"), rows)
        summary = (
            f"repetitions: {exp.repetitions}\n"
            f"draws_per_repetition: {exp.draws_per_repetition}\n"
            f"mean: {result.mean!r}\n"
            f"median: {result.median!r}\n"
            f"stdev: {result.stdev!r}\n"
            f"min: {result.min!r}\n"
            f"max: {result.max!r}\n"
            f"mean_yield_per_draw: {result.mean_yield_per_draw!r}\n"
        )
        (out_dir / "summary.txt").write_text(summary, encoding="utf-8")
        _write_manifest(out_dir, argv, exp.seed, configs=[config_path])
    print(
        f"mc: mean {result.mean:.2f}, median {result.median:.2f} over "
        f"{exp.repetitions} repetitions -> {args.out_dir}"
    )
    return 0


def _cmd_backtest(args, argv) -> int:
    opps_path = _resolve_input(args.opps)
    opps = backtest.load_opportunities_csv(opps_path)
    beta = math.inf if args.beta.lower() in ("inf", "unbounded") else float(args.beta)
    mode = "daily_batch" if args.mode in ("daily", "daily_batch") else "sequential"
    policy = backtest.parse_policy(args.policy, seed=args.seed)
    cfg = backtest.BacktestConfig(
        initial_wealth=args.v0, policy=policy, per_position_cap=beta, mode=mode
    )
    report = backtest.run_backtest(opps, cfg)
    with _OutputDir(Path(args.out_dir)) as out_dir:
        _write_csv(
            out_dir / "ledger.csv",
            ("sample_id", "date", "size", "net_return", "wealth_after"),
            (
                (
                    f.sample_id,
                    f.date.isoformat(),
                    _fmt(f.size),
                    _fmt(f.net_return),
                    _fmt(f.wealth_after),
                )
                for f in report.ledger
            ),
        )
        _write_csv(
            out_dir / "wealth_by_day.csv",
            ("date", "wealth"),
            ((d.isoformat(), _fmt(w)) for d, w in report.wealth_by_day),
        )
        ppt = report.profit_per_trade
        text = (
            f"policy: {args.policy}\n"
            f"mode: {mode}\n"
            f"initial wealth: {report.initial_wealth:.2f}\n"
            f"final amount: {report.final_wealth:,.2f}\n"
            f"trades: {report.trade_count}\n"
            f"amount per trade: {ppt if ppt is None else format(ppt, ',.2f')}\n"
            f"mean yield per trade: {report.mean_yield_per_trade}\n"
        )
        (out_dir / "report.txt").write_text(text, encoding="utf-8")
        _write_manifest(out_dir, argv, args.seed, inputs=[opps_path])
    print(
        f"backtest: {report.final_wealth:,.2f} after {report.trade_count} trades "
        f"-> {args.out_dir}"
    )
    return 0


# ---------------------------------------------------------------------------
# Parser wiring
# ---------------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="chartfolio", description=__doc__)
    parser.add_argument("--version", action="version", version=f"chartfolio {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="group raw OHLCV CSV into session records")
    p.add_argument("--in", dest="in_path", required=True, help="CSV file or directory")
    p.add_argument("--out", required=True, help="output sessions CSV path")
    p.add_argument("--tz", default=None, help="timezone for naive timestamps")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("render", help="render first-hour candlestick charts")
    p.add_argument("--sessions", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--spec", default=None, help="render spec key=value file")
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("label", help="label complete sessions by the 2%% rule")
    p.add_argument("--sessions", required=True)
    p.add_argument("--out", required=True, help="output samples CSV path")
    p.add_argument("--images-dir", default=None)
    p.set_defaults(func=_cmd_label)

    p = sub.add_parser("split", help="train/validation/test split")
    p.add_argument("--samples", required=True)
    p.add_argument("--fractions", default="0.66,0.19,0.15")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--method", choices=("random", "chronological"), default="random")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("summarize", help="yield summary statistics per class")
    p.add_argument("--samples", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_summarize)

    p = sub.add_parser("classify", help="channel simulation or softmax replay")
    p.add_argument("--samples", required=True)
    p.add_argument("--mode", choices=("channel", "replay"), required=True)
    p.add_argument("--channel", default=None, help="channel config for channel mode")
    p.add_argument("--replay", default=None, help="replay CSV for replay mode")
    p.add_argument("--alpha", type=float, default=None, help="approval threshold")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("analyze", help="confusion, stats, regressions, curves")
    p.add_argument("--records", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--alpha-grid", default=None, help="lo:hi:step")
    p.add_argument("--increment", type=float, default=0.001)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("sweep-alpha", help="performance across approval thresholds")
    p.add_argument("--records", required=True)
    p.add_argument("--grid", default="0.34:0.95:0.005")
    p.add_argument("--gamma1", type=float, default=None, help="mean yield when correct")
    p.add_argument("--gamma0", type=float, default=0.0, help="mean yield when wrong")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_sweep_alpha)

    p = sub.add_parser("mc", help="truncated-normal Monte Carlo experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_mc)

    p = sub.add_parser("backtest", help="sequential or daily-batch trading run")
    p.add_argument("--opps", required=True)
    p.add_argument("--policy", required=True, help="all|predicted_c1|true_c1|random:P")
    p.add_argument("--v0", type=float, required=True)
    p.add_argument("--beta", default="inf")
    p.add_argument("--mode", choices=("sequential", "daily", "daily_batch"), default="sequential")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_backtest)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError:
        return 64
    try:
        return args.func(args, argv)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ChartfolioError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
