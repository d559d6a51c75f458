"""
Output Store Module.

This module writes the artifacts of a run: comma-separated CSV files with a
header row, LF line endings and every float in 17 significant digits, plus JSON
metadata. A run directory whose command fails is renamed with a "_partial"
suffix so its files are never mistaken for a complete result.
"""

import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np
from pydantic import BaseModel

from mfront.models.results import InterfaceTrajectory, RunResult, SignedLog, SpectrumResult, SpeedMap
from mfront.utils.logger import get_logger

logger = get_logger()

PARTIAL_SUFFIX = "_partial"


def format_value(value: Any) -> str:
    """Render one CSV field; floats keep 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if value is None:
        return ""
    return str(value)


def epsilon_tag(epsilon: float) -> str:
    return f"eps{epsilon:.6g}"


class RunStore:
    """
    Task-private sink for the files of one run directory.

    Attributes:
        root (Path): Directory the files are written to
        written (List[Path]): Files written so far
    """

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.written: List[Path] = []

    def write_csv(self, name: str, header: Sequence[str], columns: Sequence[Iterable[Any]]) -> Path:
        """
        Write columns of equal length as a CSV file.

        Args:
            name: File name inside the run directory
            header: Column names
            columns: One iterable per column

        Returns:
            Path: The written file
        """
        rows = list(zip(*[list(c) for c in columns]))
        path = self.root / name
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_value(v) for v in row])
        self.written.append(path)
        logger.debug("CSV written", extra={"path": str(path), "rows": len(rows)})
        return path

    def write_json(self, name: str, payload: Dict[str, Any]) -> Path:
        path = self.root / name
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            json.dump(_convert_to_serializable(payload), handle, indent=2, sort_keys=True)
            handle.write("\n")
        self.written.append(path)
        return path

    def write_profile(self, name: str, nodes: np.ndarray, profile: np.ndarray, derivative: np.ndarray) -> Path:
        return self.write_csv(name, ("x", "U", "dU_dx"), (nodes, profile, derivative))

    def write_spectrum(self, name: str, spectrum: SpectrumResult) -> Path:
        k = range(1, spectrum.K + 1)
        return self.write_csv(name, ("k", "lambda", "residual"), (k, spectrum.eigenvalues, spectrum.residuals))

    def write_eigenfunctions(self, name: str, spectrum: SpectrumResult) -> Path:
        header = ["x"]
        columns: List[Iterable[Any]] = [spectrum.nodes]
        for k in range(spectrum.K):
            header += [f"phi_{k + 1}", f"psi_{k + 1}"]
            columns += [spectrum.phis[k], spectrum.psis[k]]
        return self.write_csv(name, header, columns)

    def write_speedmap(self, name: str, speedmap: SpeedMap) -> Path:
        log10 = speedmap.theta_log / math.log(10.0)
        return self.write_csv(
            name,
            ("xi", "sign_theta", "log10_abs_theta"),
            (speedmap.xi_grid, speedmap.theta_sign.astype(int), log10),
        )

    def write_trajectory(self, name: str, trajectory: InterfaceTrajectory) -> Path:
        with np.errstate(divide="ignore"):
            log10_distance = np.log10(trajectory.distance)
        return self.write_csv(
            name,
            ("t", "xi", "log10_dist_to_star"),
            (trajectory.times, trajectory.xi, log10_distance),
        )

    def write_pde_run(self, prefix: str, run: RunResult, nodes: np.ndarray) -> List[Path]:
        """Trajectory CSV plus one (x, u) CSV per snapshot."""
        snapshots = run.snapshots
        paths = [
            self.write_csv(
                f"{prefix}_trajectory.csv",
                ("t", "xi_hat", "v_L2", "v_Linf", "dv_L2", "v1_resid"),
                (
                    [s.t for s in snapshots],
                    [s.xi_hat for s in snapshots],
                    [s.v_norms.l2 for s in snapshots],
                    [s.v_norms.linf for s in snapshots],
                    [s.v_norms.h1_semi for s in snapshots],
                    [s.v1_resid for s in snapshots],
                ),
            )
        ]
        for i, snapshot in enumerate(snapshots):
            paths.append(self.write_csv(f"{prefix}_snapshot_{i:03d}.csv", ("x", "u"), (nodes, snapshot.u)))
        return paths

    def abandon(self) -> Path:
        """
        Rename the run directory with the "_partial" suffix.

        An existing partial directory of the same name is kept; a counter is appended instead.

        Returns:
            Path: The new location
        """
        target = self.root.with_name(self.root.name + PARTIAL_SUFFIX)
        counter = 1
        while target.exists():
            target = self.root.with_name(f"{self.root.name}{PARTIAL_SUFFIX}.{counter}")
            counter += 1
        if self.root.exists():
            self.root.rename(target)
            logger.warning("Partial outputs kept", extra={"path": str(target), "files": len(self.written)})
        self.root = target
        return target


def _convert_to_serializable(data: Any) -> Any:
    """
    Convert numpy and pydantic values to JSON-compatible Python types.

    Args:
        data: The data to convert (dict, list, model, array or primitive)

    Returns:
        The converted data structure; non-finite floats become strings
    """
    if isinstance(data, dict):
        return {str(key): _convert_to_serializable(value) for key, value in data.items()}
    elif isinstance(data, (list, tuple)):
        return [_convert_to_serializable(item) for item in data]
    elif isinstance(data, SignedLog):
        return {"sign": data.sign, "log10_abs": _convert_to_serializable(data.log10_abs)}
    elif isinstance(data, BaseModel):
        return _convert_to_serializable(data.model_dump(mode="python"))
    elif isinstance(data, np.ndarray):
        return _convert_to_serializable(data.tolist())
    elif isinstance(data, np.generic):
        return _convert_to_serializable(data.item())
    elif isinstance(data, Path):
        return str(data)
    elif isinstance(data, float):
        if math.isfinite(data):
            return data
        return str(data)
    else:
        return data


def read_csv(path: Path) -> Dict[str, np.ndarray]:
    """Read a CSV written by RunStore back into float columns keyed by header."""
    with open(path, encoding="utf-8", newline="") as handle:
        rows = list(csv.reader(handle))
    header, body = rows[0], rows[1:]
    return {name: np.array([float(r[i]) if r[i] else math.nan for r in body]) for i, name in enumerate(header)}
