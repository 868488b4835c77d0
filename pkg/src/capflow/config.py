"""Default tolerances. Every field can be overridden from the CLI config."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    unit_norm: float = 1e-12
    orthogonality: float = 1e-10
    frame_condition: float = 1e12
    flow_radius: float = 1e-9
    on_boundary: float = 1e-8
    slice: float = 1e-10
    artanh_clamp: float = 1e-12
    fd_step: float = 1e-5
    fd_step_second: float = 1e-4
    metric_det: float = 1e-10
    contact_angle: float = 1e-4
    quad_order: int = 8
    quad_h: float = 0.2
    zero_tol_constant: float = 5.0
    slope_rel: float = 1e-7
    jacobi_max: int = 400
    jacobi_sweeps: int = 60
    balance_residual: float = 1e-8
    balance_max_iter: int = 200

    def override(self, **values) -> "Tolerances":
        known = {f.name for f in fields(self)}
        unknown = set(values) - known
        if unknown:
            raise KeyError(f"unknown tolerance(s): {sorted(unknown)}")
        return replace(self, **values)


DEFAULT = Tolerances()


def worker_count(default: int = 1) -> int:
    """Worker threads from CAPFLOW_WORKERS (at least 1)."""
    raw = os.environ.get("CAPFLOW_WORKERS", "")
    try:
        return max(1, int(raw)) if raw.strip() else default
    except ValueError:
        return default


def parallel_map(fn, items, workers: int | None = None) -> list:
    """Order-preserving map, threaded when more than one worker is configured."""
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
