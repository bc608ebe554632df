"""Rendering of run results as aligned text tables, JSON, or CSV.

Table layouts follow the benchmark's reporting conventions: an AP/AR grid with a
MaxDets column, recognition precision/recall split Txt(E)/Txt(S)/Sym,
accuracy split Text(E)/Text(S)/Sym/Overall(E)/Overall(S), and the
end-to-end Precision_sign/Recall_sign pair.

Ratios print with 4 decimals; accuracy and end-to-end tables print as
percentages with 1 decimal. JSON always carries ratios in [0, 1].
"""

from __future__ import annotations

import io
import json
from csv import writer as csv_writer

CSV_HEADER = ("section", "metric", "size", "max_dets", "kind", "mode", "value")


def _ratio(value: dict | None) -> str:
    if value is None:
        return "n/a"
    return f"{value['value']:.4f}"


def _percent(value: dict | None) -> str:
    if value is None:
        return "n/a"
    return f"{value['value'] * 100:.1f}"


def render_json(result: dict) -> str:
    return json.dumps(result, ensure_ascii=False, indent=2) + "\n"


def _table(rows: list[tuple[str, ...]]) -> list[str]:
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = []
    for row in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return lines


def _detection_lines(report: dict) -> list[str]:
    rows = [("Metric", "MaxDets", "Value")]
    for cell in report["cells"]:
        rows.append(
            (
                f"{cell['label']} ({cell['size']})",
                str(cell["max_dets"]),
                _ratio(cell["value"]),
            )
        )
    lines = ["Detection", "---------"]
    lines.extend(_table(rows))
    counts = report["counts"]
    lines.append(
        f"images={counts['images']} ground_truth={counts['ground_truth']} "
        f"predictions={counts['predictions']} "
        f"unknown_image_predictions={counts['unknown_image_predictions']}"
    )
    return lines


def _recognition_lines(recognition: dict) -> list[str]:
    strict = recognition.get("strict")
    relaxed = recognition.get("relaxed")
    any_report = strict or relaxed
    lines = ["Recognition", "-----------"]

    def cue_value(report: dict | None, kind: str, field: str) -> str:
        if report is None:
            return "n/a"
        return _ratio(report["cues"][kind][field])

    rows = [("Metric", "Txt(E)", "Txt(S)", "Sym")]
    sym_source = strict if strict is not None else relaxed
    for field in ("precision", "recall"):
        rows.append(
            (
                field.capitalize(),
                cue_value(strict, "text", field),
                cue_value(relaxed, "text", field),
                cue_value(sym_source, "symbol", field),
            )
        )
    lines.extend(_table(rows))
    lines.append("")

    def acc(report: dict | None, key: str) -> str:
        if report is None:
            return "n/a"
        if key == "overall":
            return _percent(report["success_rate"])
        return _percent(report["accuracy"][key])

    rows = [
        ("Accuracy", "Text (E)", "Text (S)", "Sym", "Overall (E)", "Overall (S)"),
        (
            "%",
            acc(strict, "text"),
            acc(relaxed, "text"),
            acc(sym_source, "symbol"),
            acc(strict, "overall"),
            acc(relaxed, "overall"),
        ),
    ]
    lines.extend(_table(rows))
    if any_report:
        signs = any_report["signs"]
        lines.append(
            f"signs={signs['evaluated']} "
            f"excluded_unreadable={signs['excluded_unreadable_predictions']} "
            f"excluded_unknown={signs['excluded_unknown_predictions']}"
        )
        lines.append(
            f"mode={'strict+relaxed' if strict and relaxed else (strict or relaxed)['mode']} "
            f"symbol_threshold={any_report['symbol_threshold']} "
            f"embedder={any_report['embedder']}"
        )
    return lines


def _e2e_lines(report: dict) -> list[str]:
    counts = report["counts"]
    rows = [
        ("Metric", "Value (%)", "Numerator", "Denominator"),
        (
            "Precision_sign",
            _percent(report["precision_sign"]),
            str(counts["perfect"]),
            str(counts["assigned_readable"]),
        ),
        (
            "Recall_sign",
            _percent(report["recall_sign"]),
            str(counts["perfect"]),
            str(counts["readable_gt"]),
        ),
    ]
    lines = ["End-to-end", "----------"]
    lines.extend(_table(rows))
    lines.append(
        f"iou={report['iou_threshold']} text_mode={report['text_mode']} "
        f"symbol_threshold={report['symbol_threshold']} "
        f"assigned_unreadable={counts['assigned_unreadable']} "
        f"unassigned_predictions={counts['unassigned_predictions']} "
        f"unknown_image_predictions={counts['unknown_image_predictions']}"
    )
    return lines


def render_table(result: dict) -> str:
    lines: list[str] = []
    if result.get("detection"):
        lines.extend(_detection_lines(result["detection"]))
        lines.append("")
    if result.get("recognition"):
        lines.extend(_recognition_lines(result["recognition"]))
        lines.append("")
    if result.get("e2e"):
        lines.extend(_e2e_lines(result["e2e"]))
        lines.append("")
    if result.get("validation") is not None:
        validation = result["validation"]
        lines.append("Validation")
        lines.append("----------")
        for violation in validation["violations"]:
            lines.append(
                f"{violation['code']}: {violation['pointer']} {violation['message']}"
            )
        lines.append(f"violations={len(validation['violations'])}")
        lines.append(f"summary={json.dumps(validation['summary'], ensure_ascii=False)}")
        lines.append("")
    while lines and not lines[-1]:
        lines.pop()
    return "\n".join(lines) + "\n"


def render_csv(result: dict) -> str:
    """Flat CSV; header order is fixed and documented in the README."""
    buffer = io.StringIO()
    rows = csv_writer(buffer, lineterminator="\n")
    rows.writerow(CSV_HEADER)
    if result.get("detection"):
        for cell in result["detection"]["cells"]:
            rows.writerow(
                (
                    "detection",
                    cell["label"],
                    cell["size"],
                    cell["max_dets"],
                    "",
                    "",
                    _ratio(cell["value"]),
                )
            )
    if result.get("recognition"):
        for mode in ("strict", "relaxed"):
            report = result["recognition"].get(mode)
            if report is None:
                continue
            for kind in ("overall", "text", "symbol"):
                for field in ("precision", "recall"):
                    rows.writerow(
                        (
                            "recognition",
                            field,
                            "",
                            "",
                            kind,
                            mode,
                            _ratio(report["cues"][kind][field]),
                        )
                    )
            rows.writerow(
                ("recognition", "success_rate", "", "", "overall", mode, _ratio(report["success_rate"]))
            )
            for kind in ("text", "symbol"):
                rows.writerow(
                    (
                        "recognition",
                        "accuracy",
                        "",
                        "",
                        kind,
                        mode,
                        _ratio(report["accuracy"][kind]),
                    )
                )
    if result.get("e2e"):
        report = result["e2e"]
        rows.writerow(("e2e", "precision_sign", "", "", "", report["text_mode"], _ratio(report["precision_sign"])))
        rows.writerow(("e2e", "recall_sign", "", "", "", report["text_mode"], _ratio(report["recall_sign"])))
    return buffer.getvalue()


def render_report(result: dict, fmt: str = "table") -> str:
    """Deterministic rendering of a run result in the requested format."""
    if fmt == "json":
        return render_json(result)
    if fmt == "csv":
        return render_csv(result)
    if fmt == "table":
        return render_table(result)
    raise ValueError(f"unknown format: {fmt!r}")
