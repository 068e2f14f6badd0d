from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, write_to_textfile
from functools import wraps
import time
from typing import Callable, Any

REGISTRY = CollectorRegistry()

# Training metrics
LAYER_TRAINING_DURATION = Histogram(
    'ddnn_layer_training_seconds',
    'Wall time spent training one layer',
    ['kind'],
    registry=REGISTRY,
)

SOLVER_ITERATIONS = Counter(
    'ddnn_solver_iterations_total',
    'Completed alternating-minimization sweeps',
    ['kind'],
    registry=REGISTRY,
)

LAYER_FINAL_OBJECTIVE = Gauge(
    'ddnn_layer_final_objective',
    'Last recorded objective of a trained layer',
    ['layer'],
    registry=REGISTRY,
)

# Command metrics
COMMAND_COUNT = Counter(
    'ddnn_commands_total',
    'CLI commands executed',
    ['command', 'status'],
    registry=REGISTRY,
)

COMMAND_DURATION = Histogram(
    'ddnn_command_duration_seconds',
    'CLI command duration',
    ['command'],
    registry=REGISTRY,
)


def track_service_metrics(service: str, operation: str):
    """Decorator to track the duration of a training call"""
    def decorator(func: Callable[..., Any]) -> Callable[..., Any]:
        @wraps(func)
        def sync_wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            try:
                return func(*args, **kwargs)
            finally:
                duration = time.perf_counter() - start_time
                LAYER_TRAINING_DURATION.labels(kind=f"{service}.{operation}").observe(duration)

        return sync_wrapper

    return decorator


def record_layer(kind: str, layer: int, iterations: int, final_objective: float) -> None:
    SOLVER_ITERATIONS.labels(kind=kind).inc(iterations)
    LAYER_FINAL_OBJECTIVE.labels(layer=str(layer)).set(final_objective)


def write_metrics(path: str) -> None:
    """Dump the registry in the Prometheus text format"""
    write_to_textfile(path, REGISTRY)
