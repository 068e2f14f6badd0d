"""Text rendering of command results; values are rounded to 4 decimals here and nowhere else."""
import math
from typing import List

from src.data_access.models.model_file import FORMAT_VERSION, ModelHeader
from src.data_access.models.network_model import EvaluationReport, TrainedNetwork
from src.presentation.schemas.run_config import MetricsFormat


def _num(value: float) -> str:
    return "nan" if math.isnan(value) else f"{value:.4f}"


def format_report(report: EvaluationReport, fmt: MetricsFormat) -> str:
    labels = report.class_labels
    if MetricsFormat(fmt) is MetricsFormat.CSV:
        lines = ["metric,value", f"accuracy,{_num(report.accuracy)}", f"error_rate,{_num(report.error_rate)}"]
        lines += [f"per_class_{label},{_num(acc)}" for label, acc in zip(labels, report.per_class_accuracy)]
        lines += [
            f"confusion_{labels[i]}_{labels[j]},{int(report.confusion[i, j])}"
            for i in range(len(labels))
            for j in range(len(labels))
        ]
        return "\n".join(lines)

    width = max([len(label) for label in labels] + [6])
    lines = [
        f"samples     {report.n_samples}",
        f"accuracy    {_num(report.accuracy)}",
        f"error_rate  {_num(report.error_rate)}",
        "per-class accuracy:",
    ]
    lines += [f"  {label:>{width}}  {_num(acc)}" for label, acc in zip(labels, report.per_class_accuracy)]
    lines.append("confusion matrix (rows true, columns predicted):")
    lines.append("  " + " " * width + "".join(f"  {label:>{width}}" for label in labels))
    for i, label in enumerate(labels):
        row = "".join(f"  {int(count):>{width}}" for count in report.confusion[i])
        lines.append(f"  {label:>{width}}{row}")
    return "\n".join(lines)


def format_train_summary(net: TrainedNetwork, seconds: float) -> str:
    lines: List[str] = []
    for k, layer in enumerate(net.layers, start=1):
        lines.append(
            f"layer {k} ({layer.kind}): {layer.input_dim} -> {layer.atoms}, "
            f"iterations {layer.iterations}, objective {layer.loss_trace[0]:.6e} -> {layer.final_objective:.6e}, "
            f"{layer.stop_reason}"
        )
    final = net.final
    first = final.loss_trace[0] if final.loss_trace else 0.0
    lines.append(
        f"layer {net.depth} (final): {final.D.shape[0]} -> {final.atoms}, "
        f"iterations {final.iterations}, objective {first:.6e} -> {final.final_objective:.6e}, "
        f"{final.stop_reason}"
    )
    lines.append(f"greedy objective: {net.greedy_objective:.6e}")
    lines.append(f"wall time: {seconds:.2f}s")
    return "\n".join(lines)


def format_inspect(header: ModelHeader) -> str:
    guard = header.guard
    lines = [
        f"format version: {FORMAT_VERSION}",
        f"variant: {header.variant.value}",
        f"activation: {header.activation.value}",
        f"guard: clamp_margin={guard.clamp_margin} noise_sigma={guard.noise_sigma} seed={guard.seed}",
        f"rng: {header.rng}",
    ]
    for k, layer in enumerate(header.layers, start=1):
        lines.append(f"layer {k}: {layer.input_dim} -> {layer.atoms} ({layer.kind})")
    final = header.final
    lines.append(f"layer {len(header.layers) + 1}: {final.input_dim} -> {final.atoms} (final)")
    lines.append(
        f"final layer: {final.atoms} atoms -> {final.classes} classes, mu={final.mu}, "
        f"{'LC-KSVD2' if final.has_w else 'LC-KSVD1'}"
    )
    lines.append("classes: " + " ".join(f"{i}={label}" for i, label in enumerate(header.class_labels)))
    mode = header.normalization["mode"] if header.normalization else "none"
    lines.append(f"normalization: {mode}")
    return "\n".join(lines)
