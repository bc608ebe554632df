"""The `signeval` command: validation, the three evaluation modes,
pipeline runs, and report re-rendering.

Exit codes: 0 success, 1 validation findings, 2 I/O or schema failure,
3 dependency (endpoint) unavailable.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from signeval import __version__
from signeval.dataset import (
    load_ground_truth,
    load_predictions,
    serialize_predictions,
    validate_document,
)
from signeval.errors import ConfigError, ProviderUnavailable, SignEvalError
from signeval.matching import MOCK_PROVIDER_ID, make_embedding_provider
from signeval.metrics import (
    e2e_sign_metrics,
    evaluate_detections,
    evaluate_recognition,
)
from signeval.model import EvalConfig
from signeval.pipeline import (
    PROMPT_VERSION,
    HttpDetectorBackend,
    HttpRecognizerBackend,
    run_end_to_end,
)
from signeval.report import render_report

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_IO = 2
EXIT_DEPENDENCY = 3


def load_config_file(path: str | Path) -> dict:
    """Minimal TOML-like `key = value` parser (strings, numbers, booleans)."""
    values: dict = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
            values[key] = raw[1:-1]
        elif raw in ("true", "false"):
            values[key] = raw == "true"
        else:
            try:
                values[key] = int(raw)
            except ValueError:
                try:
                    values[key] = float(raw)
                except ValueError:
                    values[key] = raw
    return values


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_gt(path: str):
    try:
        return load_ground_truth(path)
    except SignEvalError as exc:
        _fail(str(exc), EXIT_IO)


def _load_pred(path: str):
    try:
        return load_predictions(path)
    except SignEvalError as exc:
        _fail(str(exc), EXIT_IO)


def _result(command: str, config: dict, **sections) -> dict:
    result = {
        "tool": "signeval",
        "version": __version__,
        "prompt_version": PROMPT_VERSION,
        "command": command,
        "config": config,
        "detection": None,
        "recognition": None,
        "e2e": None,
        "validation": None,
        "diagnostics": {},
    }
    result.update(sections)
    return result


def _emit(ctx_obj: dict, result: dict, fmt: str, out: str | None):
    rendered = render_report(result, fmt)
    if not ctx_obj.get("quiet"):
        click.echo(rendered, nl=False)
    if out:
        Path(out).write_text(render_report(result, "json"), encoding="utf-8")


def _parse_floats(raw: str, name: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in raw.split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigError(f"bad {name} value {raw!r}") from exc


def _parse_range(raw: str) -> tuple[float, ...]:
    try:
        lo_s, hi_s, step_s = raw.split(":")
        lo, hi, step = float(lo_s), float(hi_s), float(step_s)
    except ValueError as exc:
        raise ConfigError(f"bad IoU range {raw!r}, expected lo:hi:step") from exc
    if step <= 0 or hi < lo:
        raise ConfigError(f"bad IoU range {raw!r}")
    thresholds = []
    k = 0
    while True:
        t = round(lo + k * step, 10)
        if t > hi + 1e-9:
            break
        thresholds.append(round(t, 4))
        k += 1
    return tuple(thresholds)


def _parse_ints(raw: str, name: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in raw.split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigError(f"bad {name} value {raw!r}") from exc


def _build_provider(embedder: str, endpoint: str | None):
    try:
        return make_embedding_provider(embedder, endpoint)
    except ConfigError as exc:
        _fail(str(exc), EXIT_IO)


@click.group()
@click.version_option(version=__version__, prog_name="signeval")
@click.option("--config", "config_path", type=click.Path(), default=None, help="Config file with key = value defaults.")
@click.option("--quiet", is_flag=True, default=False, help="Suppress stdout report rendering.")
@click.option("--format", "default_fmt", type=click.Choice(["table", "json", "csv"]), default=None, help="Default output format for all subcommands.")
@click.pass_context
def main(ctx, config_path, quiet, default_fmt):
    """Evaluate and run navigational sign understanding."""
    ctx.ensure_object(dict)
    ctx.obj["quiet"] = quiet
    ctx.obj["format"] = default_fmt
    ctx.obj["config"] = {}
    if config_path:
        try:
            ctx.obj["config"] = load_config_file(config_path)
        except ConfigError as exc:
            _fail(str(exc), EXIT_IO)


def _fmt(ctx_obj: dict, fmt: str | None, fallback: str) -> str:
    return fmt or ctx_obj.get("format") or fallback


def _cfg(ctx_obj: dict, key: str, flag_value, default):
    if flag_value is not None:
        return flag_value
    return ctx_obj.get("config", {}).get(key, default)


@main.command("validate")
@click.argument("dataset_path", type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["table", "json", "csv"]), default=None)
@click.pass_context
def cmd_validate(ctx, dataset_path, fmt):
    """Validate a ground-truth dataset file; exit 0 only when clean."""
    path = Path(dataset_path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        _fail(f"cannot parse {dataset_path}: {exc}", EXIT_IO)
    report = validate_document(doc, path.parent)
    result = _result("validate", {"dataset": str(dataset_path)}, validation=report.to_json_dict())
    _emit(ctx.obj, result, _fmt(ctx.obj, fmt, "json"), None)
    sys.exit(EXIT_OK if report.ok else EXIT_FINDINGS)


def _eval_config(ctx_obj, mode, symbol_threshold, iou_singles, iou_range, max_dets) -> EvalConfig:
    kwargs = {}
    if mode is not None:
        kwargs["text_mode"] = mode
    threshold = _cfg(ctx_obj, "eval.symbol_threshold", symbol_threshold, None)
    if threshold is not None:
        kwargs["symbol_threshold"] = float(threshold)
    if iou_singles is not None:
        kwargs["single_iou_thresholds"] = _parse_floats(iou_singles, "--iou")
    if iou_range is not None:
        kwargs["iou_thresholds"] = _parse_range(iou_range)
    if max_dets is not None:
        kwargs["max_dets"] = _parse_ints(max_dets, "--max-dets")
    return EvalConfig(**kwargs)


@main.command("eval-det")
@click.argument("gt_path", type=click.Path())
@click.argument("pred_path", type=click.Path())
@click.option("--iou", "iou_singles", default=None, help="Comma-separated single IoU thresholds for AP rows (default 0.5,0.75).")
@click.option("--iou-range", default=None, help="IoU range lo:hi:step for range rows (default 0.25:0.75:0.05).")
@click.option("--max-dets", default=None, help="Comma-separated detection caps (default 1,10,100).")
@click.option("--format", "fmt", type=click.Choice(["table", "json", "csv"]), default=None)
@click.option("--out", type=click.Path(), default=None, help="Write the result JSON here.")
@click.pass_context
def cmd_eval_detection(ctx, gt_path, pred_path, iou_singles, iou_range, max_dets, fmt, out):
    """Detection AP/AR grid for a prediction file against ground truth."""
    dataset = _load_gt(gt_path)
    predictions = _load_pred(pred_path)
    try:
        cfg = _eval_config(ctx.obj, None, None, iou_singles, iou_range, max_dets)
    except (ConfigError, SignEvalError) as exc:
        _fail(str(exc), EXIT_IO)
    report = evaluate_detections(dataset, predictions, cfg)
    result = _result("eval-det", cfg.to_json_dict(), detection=report.to_json_dict())
    _emit(ctx.obj, result, _fmt(ctx.obj, fmt, "table"), out)
    sys.exit(EXIT_OK)


@main.command("eval-rec")
@click.argument("gt_path", type=click.Path())
@click.argument("pred_path", type=click.Path())
@click.option("--mode", type=click.Choice(["strict", "relaxed", "both"]), default="both", show_default=True)
@click.option("--symbol-threshold", type=float, default=None, help="Cosine-similarity cutoff for symbol places (default 0.8).")
@click.option("--embedder", default=None, help=f"Embedding provider id (default {MOCK_PROVIDER_ID}).")
@click.option("--embedder-endpoint", default=None, help="HTTP endpoint for a remote embedder.")
@click.option("--format", "fmt", type=click.Choice(["table", "json", "csv"]), default=None)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def cmd_eval_recognition(ctx, gt_path, pred_path, mode, symbol_threshold, embedder, embedder_endpoint, fmt, out):
    """Recognition metrics for predictions keyed by (image_id, sign_id)."""
    dataset = _load_gt(gt_path)
    predictions = _load_pred(pred_path)
    embedder = _cfg(ctx.obj, "embedder.id", embedder, MOCK_PROVIDER_ID)
    endpoint = _cfg(ctx.obj, "embedder.endpoint", embedder_endpoint, None)
    provider = _build_provider(embedder, endpoint)
    modes = ("strict", "relaxed") if mode == "both" else (mode,)
    recognition: dict = {"strict": None, "relaxed": None}
    config_echo: dict = {}
    try:
        for text_mode in modes:
            cfg = _eval_config(ctx.obj, text_mode, symbol_threshold, None, None, None)
            config_echo = cfg.to_json_dict()
            recognition[text_mode] = evaluate_recognition(dataset, predictions, cfg, provider).to_json_dict()
    except ProviderUnavailable as exc:
        _fail(str(exc), EXIT_DEPENDENCY)
    except SignEvalError as exc:
        _fail(str(exc), EXIT_IO)
    config_echo["requested_mode"] = mode
    result = _result("eval-rec", config_echo, recognition=recognition)
    _emit(ctx.obj, result, _fmt(ctx.obj, fmt, "table"), out)
    sys.exit(EXIT_OK)


@main.command("eval-e2e")
@click.argument("gt_path", type=click.Path())
@click.argument("pred_path", type=click.Path())
@click.option("--iou", type=float, default=0.5, show_default=True, help="IoU gate for box assignment.")
@click.option("--mode", type=click.Choice(["strict", "relaxed"]), default="strict", show_default=True, help="Text equivalence for 'perfectly parsed'.")
@click.option("--symbol-threshold", type=float, default=None)
@click.option("--embedder", default=None)
@click.option("--embedder-endpoint", default=None)
@click.option("--count-unassigned", is_flag=True, default=False, help="Count predictions unassigned to any ground-truth box in the precision denominator.")
@click.option("--format", "fmt", type=click.Choice(["table", "json", "csv"]), default=None)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def cmd_eval_e2e(ctx, gt_path, pred_path, iou, mode, symbol_threshold, embedder, embedder_endpoint, count_unassigned, fmt, out):
    """End-to-end Precision_sign / Recall_sign."""
    dataset = _load_gt(gt_path)
    predictions = _load_pred(pred_path)
    embedder = _cfg(ctx.obj, "embedder.id", embedder, MOCK_PROVIDER_ID)
    endpoint = _cfg(ctx.obj, "embedder.endpoint", embedder_endpoint, None)
    provider = _build_provider(embedder, endpoint)
    try:
        cfg = _eval_config(ctx.obj, None, symbol_threshold, None, None, None)
        report = e2e_sign_metrics(
            dataset,
            predictions,
            cfg,
            provider,
            iou_threshold=iou,
            text_mode=mode,
            count_unmatched=count_unassigned,
        )
    except ProviderUnavailable as exc:
        _fail(str(exc), EXIT_DEPENDENCY)
    except SignEvalError as exc:
        _fail(str(exc), EXIT_IO)
    config_echo = cfg.to_json_dict()
    config_echo.update({"e2e_iou": iou, "e2e_text_mode": mode, "count_unassigned": count_unassigned})
    result = _result("eval-e2e", config_echo, e2e=report.to_json_dict())
    _emit(ctx.obj, result, _fmt(ctx.obj, fmt, "table"), out)
    sys.exit(EXIT_OK)


@main.command("run")
@click.argument("dataset_path", type=click.Path())
@click.option("--detector-endpoint", default=None)
@click.option("--detector-model", default=None)
@click.option("--query", default=None, help='Detection text query (default "navigational signs").')
@click.option("--recognizer-endpoint", default=None)
@click.option("--recognizer-model", default=None)
@click.option("--out", required=True, type=click.Path(), help="Prediction file to write; manifest.json lands beside it.")
@click.option("--cache", "cache_dir", type=click.Path(), default=None, help="Content-addressed response cache directory.")
@click.option("--parallelism", type=int, default=None, help="Concurrent backend calls (default 4).")
@click.option("--confidence-threshold", type=float, default=None, help="Drop detections below this confidence before recognition.")
@click.option("--from-gt-boxes", is_flag=True, default=False, help="Skip detection; recognize readable ground-truth crops (recognition protocol).")
@click.option("--retry-delay", type=float, default=0.5, show_default=True, help="Base backoff delay for transient backend failures.")
@click.pass_context
def cmd_run(ctx, dataset_path, detector_endpoint, detector_model, query, recognizer_endpoint, recognizer_model, out, cache_dir, parallelism, confidence_threshold, from_gt_boxes, retry_delay):
    """Run the detection + recognition pipeline over a dataset."""
    dataset = _load_gt(dataset_path)
    detector = None
    if not from_gt_boxes:
        endpoint = _cfg(ctx.obj, "detector.endpoint", detector_endpoint, None)
        model = _cfg(ctx.obj, "detector.model", detector_model, None)
        if not endpoint or not model:
            _fail("detector endpoint and model are required (flags or config)", EXIT_IO)
        detector = HttpDetectorBackend(
            endpoint=endpoint,
            model_id=model,
            query=_cfg(ctx.obj, "detector.query", query, "navigational signs"),
        )
    rec_endpoint = _cfg(ctx.obj, "recognizer.endpoint", recognizer_endpoint, None)
    rec_model = _cfg(ctx.obj, "recognizer.model", recognizer_model, None)
    if not rec_endpoint or not rec_model:
        _fail("recognizer endpoint and model are required (flags or config)", EXIT_IO)
    recognizer = HttpRecognizerBackend(endpoint=rec_endpoint, model_id=rec_model)
    try:
        output = run_end_to_end(
            dataset,
            detector,
            recognizer,
            cache_dir=_cfg(ctx.obj, "run.cache", cache_dir, None),
            parallelism=int(_cfg(ctx.obj, "run.parallelism", parallelism, 4)),
            confidence_threshold=confidence_threshold,
            from_gt_boxes=from_gt_boxes,
            retry_base_delay=retry_delay,
        )
    except SignEvalError as exc:
        _fail(str(exc), EXIT_IO)
    out_path = Path(out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(serialize_predictions(output.predictions), encoding="utf-8")
    manifest_path = out_path.parent / "manifest.json"
    manifest_path.write_text(
        json.dumps(output.manifest, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    records = output.manifest["diagnostics"]["records"]
    unavailable = sum(1 for r in records if "BackendUnavailable" in str(r.get("error", "")))
    attempted = len(output.manifest["calls"])
    successes = attempted - sum(1 for r in records if "error" in r)
    if not ctx.obj.get("quiet"):
        click.echo(
            f"wrote {out_path} and {manifest_path} "
            f"(cache hits={output.cache_hits} misses={output.cache_misses}, "
            f"diagnostics={len(records)})",
            err=True,
        )
    if unavailable and successes == 0:
        click.echo(
            f"error: all {attempted} backend calls failed; endpoints unavailable and cache cold",
            err=True,
        )
        sys.exit(EXIT_DEPENDENCY)
    sys.exit(EXIT_OK)


@main.command("report")
@click.argument("result_path", type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["table", "json", "csv"]), default=None)
@click.pass_context
def cmd_report(ctx, result_path, fmt):
    """Re-render a previously written result JSON."""
    try:
        result = json.loads(Path(result_path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        _fail(f"cannot parse {result_path}: {exc}", EXIT_IO)
    click.echo(render_report(result, _fmt(ctx.obj, fmt, "table")), nl=False)
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
