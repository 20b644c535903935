"""Pressure-wave benchmark in a thin-walled channel.

The channel (0, 5) x (0, 0.5) is at rest at t = 0. A cosine pressure pulse enters through
the left side, the right side is traction free, and the wave travels along the elastic
top and bottom walls until it reflects at the outlet.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from fsi_thinwall.forms import (
    ELEMENT_PAIRS,
    FsiOperators,
    assemble_boundary_pressure_load,
    assemble_operators,
)
from fsi_thinwall.io import sample_fields, write_csv, write_vtk
from fsi_thinwall.mesh import BoundaryTag, build_rect_mesh
from fsi_thinwall.scheme import (
    STRUCTURE_ENDS,
    EnergyMonitor,
    PhysicalParams,
    ProblemData,
    SchemeState,
    create_stepper,
    zero_state,
)
from fsi_thinwall.utils import ensure_output_dir

logger = logging.getLogger(__name__)


def pin(t: float, p_max: float = 1.3333e4, t_max: float = 0.003) -> float:
    """Inlet pressure (p_max / 2) (1 - cos(2 pi t / t_max)) for t <= t_max, zero after.

    Raises:
        ValueError: If t is negative
    """
    if t < 0:
        raise ValueError(f"Inlet pressure needs t >= 0, got t={t}")
    if t > t_max:
        return 0.0
    return 0.5 * p_max * (1.0 - math.cos(2.0 * math.pi * t / t_max))


@dataclass
class BenchConfig:
    """Benchmark parameters.

    Attributes:
        lx: Channel length
        ly: Channel height
        rho_f: Fluid density
        mu: Fluid viscosity
        rho_s: Wall density
        eps_s: Wall thickness
        young: Young's modulus E
        poisson: Poisson ratio
        radius: Reference radius R
        p_max: Peak inlet pressure
        t_max: Pulse duration
        beta: Traction stabilization parameter
        M: Cells across the channel; the mesh is 10M x M
        tau: Time step
        snapshot_times: Times at which the fields are written
        element: "th" or "mini"
        structure_ends: "natural", "pinned" or "periodic"
        refined_vtk: Write snapshots on the once-refined mesh
        reflection_fraction: Negative-pressure threshold of the reflection detector
    """

    lx: float = 5.0
    ly: float = 0.5
    rho_f: float = 1.0
    mu: float = 0.035
    rho_s: float = 1.1
    eps_s: float = 0.1
    young: float = 0.75e6
    poisson: float = 0.5
    radius: float = 0.5
    p_max: float = 1.3333e4
    t_max: float = 0.003
    beta: float = 0.5
    M: int = 16
    tau: float = 1e-4
    snapshot_times: List[float] = field(default_factory=lambda: [0.003, 0.009, 0.016, 0.026])
    element: str = "th"
    structure_ends: str = "natural"
    refined_vtk: bool = False
    reflection_fraction: float = 0.2

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not 0 <= self.poisson < 1:
            raise ValueError(f"Poisson ratio must lie in [0, 1), got {self.poisson}")
        if self.structure_ends not in STRUCTURE_ENDS:
            raise ValueError(
                f"Unknown structure ends '{self.structure_ends}', expected one of {STRUCTURE_ENDS}"
            )
        if self.element not in ELEMENT_PAIRS:
            raise ValueError(
                f"Unknown element '{self.element}', expected one of {sorted(ELEMENT_PAIRS)}"
            )
        if any(t < 0 for t in self.snapshot_times):
            raise ValueError(f"Snapshot times must be >= 0, got {self.snapshot_times}")
        self.M = int(self.M)
        self.snapshot_times = sorted(float(t) for t in self.snapshot_times)

    @property
    def C0(self) -> float:
        return self.young * self.eps_s / (2.0 * (1.0 + self.poisson))

    @property
    def C1(self) -> float:
        return self.young * self.eps_s / (self.radius**2 * (1.0 - self.poisson**2))

    def physical_params(self) -> PhysicalParams:
        return PhysicalParams(
            rho_f=self.rho_f,
            mu=self.mu,
            rho_s=self.rho_s,
            eps_s=self.eps_s,
            C0=self.C0,
            C1=self.C1,
            beta=self.beta,
        )

    def pin(self, t: float) -> float:
        return pin(t, self.p_max, self.t_max)

    def snapshot_steps(self) -> List[int]:
        """Step index of every snapshot time (rounded to the nearest step)."""
        steps = []
        for t in self.snapshot_times:
            k = int(round(t / self.tau))
            if not math.isclose(k * self.tau, t, rel_tol=1e-9, abs_tol=1e-12):
                logger.warning(
                    f"Snapshot time {t} is not a multiple of tau={self.tau}; "
                    f"using t={k * self.tau:.6g}"
                )
            steps.append(k)
        return steps


class PressurePulseProblem(ProblemData):
    """Pressure pulse on the left side, zero outlet pressure, no sources."""

    def __init__(self, config: BenchConfig):
        self.config = config

    def fluid_load(self, ops: FsiOperators, t: float) -> np.ndarray:
        return np.zeros(ops.n_u)

    def structure_load(self, ops: FsiOperators, t: float) -> np.ndarray:
        return np.zeros(ops.S.n_dofs)

    def boundary_load(self, ops: FsiOperators, t: float) -> np.ndarray:
        # the outlet pressure is zero and contributes nothing
        return assemble_boundary_pressure_load(
            ops.V, BoundaryTag.SIGMA_LEFT, self.config.pin(t), ops.S.n_points
        )


@dataclass
class Snapshot:
    """Fields at one snapshot time."""

    step: int
    time: float
    u: np.ndarray
    p: np.ndarray
    eta: np.ndarray


@dataclass
class SnapshotAnalysis:
    """Wave-front diagnostics of a snapshot series.

    Attributes:
        rows: Per snapshot (time, x of max |p|, max p, min p)
        first_reflected: Index of the first snapshot showing the reflected wave, if any
        peaks_increasing: Peak locations strictly increase before the reflection
        negative_after_reflection: A negative pressure region exists after the reflection
    """

    rows: List[Dict[str, float]]
    first_reflected: Optional[int]
    peaks_increasing: bool
    negative_after_reflection: bool

    @property
    def passed(self) -> bool:
        return self.peaks_increasing and self.negative_after_reflection


def analyze_snapshots(
    ops: FsiOperators, snapshots: Sequence[Snapshot], reflection_fraction: float = 0.2
) -> SnapshotAnalysis:
    """Locate the pressure peak of every snapshot and detect the reflected wave.

    A snapshot is reflected when its minimum pressure drops below
    ``-reflection_fraction`` times the largest |p| of the earlier snapshots.
    """
    xs = ops.mesh.vertices[:, 0]
    rows = []
    for snap in snapshots:
        p = ops.Q.vertex_values(snap.p)[0]
        k = int(np.argmax(np.abs(p)))
        rows.append(
            {
                "time": snap.time,
                "x_peak": float(xs[k]),
                "p_max": float(p.max()),
                "p_min": float(p.min()),
            }
        )

    first = None
    largest = 0.0
    for i, row in enumerate(rows):
        if i > 0 and row["p_min"] < -reflection_fraction * largest:
            first = i
            break
        largest = max(largest, abs(row["p_max"]), abs(row["p_min"]))

    before = rows if first is None else rows[:first]
    peaks = [r["x_peak"] for r in before]
    increasing = len(peaks) >= 2 and all(b > a for a, b in zip(peaks, peaks[1:]))
    negative = first is not None and any(r["p_min"] < 0 for r in rows[first:])
    if first is None:
        logger.warning("No reflected wave detected in the snapshot series")
    return SnapshotAnalysis(
        rows=rows,
        first_reflected=first,
        peaks_increasing=increasing,
        negative_after_reflection=negative,
    )


def top_wall_displacement(ops: FsiOperators, snapshots: Sequence[Snapshot]) -> pd.DataFrame:
    """Vertical wall displacement along the top Sigma line, one column per snapshot."""
    coords = ops.S.node_coords
    top = np.flatnonzero(np.isclose(coords[:, 1], ops.mesh.ly))
    top = top[np.argsort(coords[top, 0])]
    table = pd.DataFrame({"x": coords[top, 0]})
    for snap in snapshots:
        table[f"eta2_t{snap.time:.6g}"] = snap.eta[ops.S.n + top]
    return table


@dataclass
class BenchResult:
    """Outcome of a benchmark run."""

    config: BenchConfig
    snapshots: List[Snapshot]
    energy: pd.DataFrame
    analysis: SnapshotAnalysis
    final: SchemeState
    outputs: List[Path] = field(default_factory=list)


def build_bench_operators(config: BenchConfig) -> FsiOperators:
    mesh = build_rect_mesh(10 * config.M, config.M, config.lx, config.ly)
    return assemble_operators(mesh, config.element, config.mu, config.C0, config.C1)


def run_bench(config: BenchConfig, output_dir: Optional[str] = None) -> BenchResult:
    """Run the pressure-wave benchmark with the partitioned scheme.

    Args:
        config: Benchmark parameters
        output_dir: Directory for VTK snapshots and CSV tables; nothing is written when None

    Returns:
        BenchResult
    """
    ops = build_bench_operators(config)
    params = config.physical_params()
    logger.info(
        f"Benchmark: M={config.M}, tau={config.tau}, C0={config.C0:.6g}, C1={config.C1:.6g}, "
        f"p_max={config.p_max}, ends={config.structure_ends}"
    )
    stepper = create_stepper(
        "partitioned",
        ops,
        params,
        config.tau,
        PressurePulseProblem(config),
        structure_ends=config.structure_ends,
    )
    state = zero_state(ops)
    monitor = EnergyMonitor(ops, params, config.tau, state, check=config.p_max == 0)

    targets = config.snapshot_steps()
    snapshots: List[Snapshot] = []
    if 0 in targets:
        snapshots += [Snapshot(0, 0.0, state.u, state.p, state.eta)] * targets.count(0)
    for _ in range(max(targets, default=0)):
        new = stepper.advance(state)
        monitor(new, state)
        state = new
        for _ in range(targets.count(state.step)):
            snapshots.append(Snapshot(state.step, state.time, state.u, state.p, state.eta))
            logger.info(f"Snapshot at t={state.time:.6g} (step {state.step})")

    analysis = analyze_snapshots(ops, snapshots, config.reflection_fraction)
    result = BenchResult(
        config=config,
        snapshots=snapshots,
        energy=pd.DataFrame(monitor.rows()),
        analysis=analysis,
        final=state,
    )
    if output_dir is not None:
        result.outputs = write_bench_outputs(ops, result, output_dir)
    return result


def write_bench_outputs(ops: FsiOperators, result: BenchResult, output_dir: str) -> List[Path]:
    """Write the VTK snapshots, energy trace, peak table and wall displacement."""
    out = ensure_output_dir(output_dir)
    paths = []
    for k, snap in enumerate(result.snapshots):
        mesh, fields = sample_fields(
            ops, snap.u, snap.p, snap.eta, refined=result.config.refined_vtk
        )
        path = out / f"snapshot_{k:02d}.vtk"
        paths.append(write_vtk(mesh, fields, path, title=f"t={snap.time:.6g}"))
    paths.append(write_csv(result.energy, out / "energy.csv"))
    paths.append(
        write_csv(result.analysis.rows, out / "snapshots.csv", ["time", "x_peak", "p_max", "p_min"])
    )
    displacement = top_wall_displacement(ops, result.snapshots)
    paths.append(write_csv(displacement, out / "wall_displacement.csv"))
    return paths
