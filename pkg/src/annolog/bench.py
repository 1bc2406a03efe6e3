"""Runtime and memory measurements over a ladder of synthetic graph sizes."""
from __future__ import annotations

import csv
import io
import resource
import statistics
import time
from dataclasses import asdict, dataclass

from . import demos
from .engine import run

COLUMNS = ["nodes", "edges", "ground_atoms", "timesteps", "runtime_s", "memory_mb"]


@dataclass
class BenchRow:
    nodes: int
    edges: int
    ground_atoms: int
    timesteps: int
    runtime_s: float
    memory_mb: float


def _peak_mb() -> float:
    # ru_maxrss is reported in kilobytes on Linux
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0


def measure(program: demos.Program, repetitions: int = 1, workers: int = 1) -> tuple[float, float, int]:
    """Median wall-clock seconds and median peak-resident growth (MB) of full runs."""
    times, mems = [], []
    atoms = 0
    for _ in range(repetitions):
        before = _peak_mb()
        start = time.perf_counter()
        world, _ = run(program.graph, program.registry, program.rules, program.facts,
                       program.config(workers=workers))
        times.append(time.perf_counter() - start)
        mems.append(max(0.0, _peak_mb() - before))
        atoms = len(world)
    return statistics.median(times), statistics.median(mems), atoms


def ladder(nodes=(1000, 2000, 5000, 10000), timesteps=(2, 5, 15), density: float = 4.10e-4,
           seed: int = 0, repetitions: int = 1, workers: int = 1, progress=None) -> list[BenchRow]:
    """Disruption program over buyer-supplier DAGs, one row per (nodes, timesteps)."""
    rows = []
    for n in nodes:
        for horizon in timesteps:
            program = demos.disruption(nodes=n, density=density, seed=seed, horizon=horizon)
            runtime, memory, atoms = measure(program, repetitions, workers)
            row = BenchRow(n, len(program.graph.edges), atoms, horizon, runtime, memory)
            rows.append(row)
            if progress is not None:
                progress(row)
    return rows


def to_csv(rows: list[BenchRow]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        d = asdict(row)
        d["runtime_s"] = f"{row.runtime_s:.4f}"
        d["memory_mb"] = f"{row.memory_mb:.2f}"
        writer.writerow(d)
    return buf.getvalue()
