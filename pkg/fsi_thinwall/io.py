"""Output writers: CSV tables, legacy VTK snapshots and the run manifest."""

import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import yaml

from fsi_thinwall.forms import FsiOperators
from fsi_thinwall.mesh import Mesh, build_rect_mesh
from fsi_thinwall.utils import blob_hash

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

CSV_FLOAT_FORMAT = "%.6g"
VTK_TRIANGLE = 5


def write_csv(
    table: Union[pd.DataFrame, Sequence[Mapping[str, Any]]],
    path: PathLike,
    columns: Optional[Sequence[str]] = None,
) -> Path:
    """Write a table as CSV with six significant digits.

    Args:
        table: DataFrame or list of row dicts
        path: Output file
        columns: Column order; required to get a header for an empty list of rows

    Returns:
        Path of the written file
    """
    if isinstance(table, pd.DataFrame):
        df = table if columns is None else table.reindex(columns=list(columns))
    else:
        df = pd.DataFrame(list(table), columns=list(columns) if columns is not None else None)
    path = Path(path)
    df.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, na_rep="", lineterminator="\n")
    logger.info(f"Wrote {len(df)} rows to {path}")
    return path


def _vector_block(values: np.ndarray, n: int, name: str) -> np.ndarray:
    data = np.asarray(values, dtype=float)
    if data.shape == (2, n):
        data = data.T
    if data.ndim != 2 or data.shape[0] != n or data.shape[1] not in (2, 3):
        raise ValueError(f"Vector field '{name}' must have shape ({n}, 2|3), got {data.shape}")
    if data.shape[1] == 2:
        data = np.column_stack([data, np.zeros(n)])
    return data


def write_vtk(
    mesh: Mesh,
    fields: Mapping[str, np.ndarray],
    path: PathLike,
    title: str = "fsi-thinwall",
) -> Path:
    """Write a legacy ASCII VTK unstructured grid with point data.

    Args:
        mesh: Triangulation whose vertices carry the data
        fields: Name to per-vertex values; 1-D arrays become SCALARS, (n, 2) or (n, 3)
            arrays become VECTORS (2-D vectors padded with z = 0)
        path: Output file
        title: Header line

    Returns:
        Path of the written file

    Raises:
        ValueError: If a field does not have one value per vertex
    """
    n = mesh.n_vertices
    tris = mesh.triangles
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {n} double",
    ]
    lines += [f"{x:.16g} {y:.16g} 0" for x, y in mesh.vertices]
    lines.append(f"CELLS {tris.shape[0]} {4 * tris.shape[0]}")
    lines += [f"3 {a} {b} {c}" for a, b, c in tris]
    lines.append(f"CELL_TYPES {tris.shape[0]}")
    lines += [str(VTK_TRIANGLE)] * tris.shape[0]
    lines.append(f"POINT_DATA {n}")
    for name, values in fields.items():
        data = np.asarray(values, dtype=float)
        if data.ndim == 1:
            if data.size != n:
                raise ValueError(f"Scalar field '{name}' has {data.size} values for {n} vertices")
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [f"{v:.16g}" for v in data]
        else:
            lines.append(f"VECTORS {name} double")
            lines += [f"{a:.16g} {b:.16g} {c:.16g}" for a, b, c in _vector_block(data, n, name)]

    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    logger.info(f"Wrote VTK snapshot {path} ({n} points, {tris.shape[0]} triangles)")
    return path


def sample_fields(
    ops: FsiOperators,
    u: np.ndarray,
    p: np.ndarray,
    eta: np.ndarray,
    refined: bool = False,
) -> Tuple[Mesh, Dict[str, np.ndarray]]:
    """Sample pressure, velocity and Sigma displacement at output vertices.

    Without refinement the fields are taken at the mesh vertices; with it they are
    evaluated on the once-refined mesh, which holds every P2 node.

    Returns:
        (output mesh, {"pressure", "velocity", "displacement"}) with the displacement
        zero away from Sigma
    """
    mesh = ops.mesh
    displacement_coeffs = ops.S.extend(eta)
    if refined:
        out = build_rect_mesh(2 * mesh.nx, 2 * mesh.ny, mesh.lx, mesh.ly)
        pts = out.vertices
        pressure = ops.Q.evaluate_at(p, pts)[0]
        velocity = ops.V.evaluate_at(u, pts)
        displacement = ops.V.evaluate_at(displacement_coeffs, pts)
    else:
        out = mesh
        pts = mesh.vertices
        pressure = ops.Q.vertex_values(p)[0]
        velocity = ops.V.vertex_values(u)
        displacement = ops.V.vertex_values(displacement_coeffs)
    on_sigma = np.isclose(pts[:, 1], 0.0) | np.isclose(pts[:, 1], mesh.ly)
    displacement = np.where(on_sigma, displacement, 0.0)
    return out, {"pressure": pressure, "velocity": velocity.T, "displacement": displacement.T}


def write_manifest(
    output_dir: PathLike,
    subcommand: str,
    config: Mapping[str, Any],
    outputs: Sequence[PathLike],
    version: str,
) -> Path:
    """Write manifest.yaml with the config echo and a blob SHA-1 per output file."""
    output_dir = Path(output_dir)
    hashes = {}
    for item in sorted({Path(o) for o in outputs}):
        try:
            name = str(item.relative_to(output_dir))
        except ValueError:
            name = str(item)
        hashes[name] = blob_hash(item.read_bytes())
    manifest = {
        "subcommand": subcommand,
        "version": version,
        "config": dict(config),
        "outputs": hashes,
    }
    path = output_dir / "manifest.yaml"
    with open(path, "w") as f:
        yaml.safe_dump(manifest, f, default_flow_style=False, sort_keys=True)
    logger.info(f"Wrote manifest with {len(hashes)} outputs to {path}")
    return path
