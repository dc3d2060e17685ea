"""
Readers and writers for model, gains and certificate documents and
trajectory CSVs.
"""
from pathlib import Path
from typing import Any, Optional, Tuple, Type, TypeVar, Union
import hashlib
import logging

import numpy as np
from pydantic import BaseModel

from model.lcs import Controller, LCSModel
from output.schema import CertificateFile, GainsFile, ModelFile
from sim.integrator import Trajectory

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
Doc = TypeVar("Doc", bound=BaseModel)


def write_json(doc: BaseModel, path: PathLike) -> Path:
    """Write a schema document as indented JSON, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(doc.model_dump_json(indent=2), encoding="utf-8")
    logger.info(f"✓ Saved {path}")
    return path


def read_json(path: PathLike, schema: Type[Doc]) -> Doc:
    """
    Read and validate a schema document.

    Raises:
        FileNotFoundError: If the file does not exist
        pydantic.ValidationError: If the content does not match the schema
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    return schema.model_validate_json(path.read_text(encoding="utf-8"))


def write_model(model: LCSModel, path: PathLike) -> Path:
    return write_json(ModelFile.from_model(model), path)


def read_model(path: PathLike) -> LCSModel:
    return read_json(path, ModelFile).to_model()


def write_gains(
    ctrl: Controller,
    path: PathLike,
    model: str = "",
    source: str = "file",
    kappa: Optional[float] = None,
    **certification: Any
) -> Path:
    """Write gains; certification keywords (gamma3, certificate_W, pinned) go into the file as well."""
    return write_json(GainsFile.from_controller(ctrl, model=model, source=source, kappa=kappa, **certification), path)


def read_gains(path: PathLike) -> Tuple[Controller, Optional[float]]:
    """Controller and filter bandwidth stored in a gains file."""
    doc = read_json(path, GainsFile)
    return doc.to_controller(), doc.kappa


def read_gains_file(path: PathLike) -> GainsFile:
    return read_json(path, GainsFile)


def read_certificate(path: PathLike) -> CertificateFile:
    return read_json(path, CertificateFile)


def sha256_file(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def trajectory_header(n: int, m: int, n_u: int) -> str:
    return ",".join(
        ["t"] + [f"x{i + 1}" for i in range(n)] + [f"lam{i + 1}" for i in range(m)] + [f"u{i + 1}" for i in range(n_u)]
    )


def write_trajectory_csv(traj: Trajectory, path: PathLike) -> Path:
    """
    Write a trajectory as CSV with header t,x1..xn,lam1..lamm,u1..unk.

    Floats use %.17g so every value reads back exactly.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    k = len(traj)
    states = traj.states.reshape(k, -1)
    forces = traj.forces.reshape(k, -1)
    inputs = traj.inputs.reshape(k, -1)
    data = np.hstack([traj.times.reshape(k, 1), states, forces, inputs])
    header = trajectory_header(states.shape[1], forces.shape[1], inputs.shape[1])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=header, comments="")
    logger.info(f"✓ Trajectory saved to: {path} ({k} samples)")
    return path


def read_trajectory_csv(path: PathLike, model: str = "lcs") -> Trajectory:
    """
    Read a trajectory CSV written by write_trajectory_csv.

    Raises:
        ValueError: If the header does not follow the t,x..,lam..,u.. layout
    """
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        columns = f.readline().strip().split(",")
    if not columns or columns[0] != "t":
        raise ValueError(f"{path}: first column must be t")
    n = sum(1 for c in columns if c.startswith("x"))
    m = sum(1 for c in columns if c.startswith("lam"))
    n_u = sum(1 for c in columns if c.startswith("u"))
    if columns != trajectory_header(n, m, n_u).split(","):
        raise ValueError(f"{path}: unexpected header {','.join(columns)}")

    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        data = np.zeros((0, len(columns)))
    times = data[:, 0]
    return Trajectory(
        times=times,
        states=data[:, 1:1 + n],
        forces=data[:, 1 + n:1 + n + m],
        inputs=data[:, 1 + n + m:],
        model=model,
        dt=float(times[1] - times[0]) if times.size > 1 else 0.0
    )
