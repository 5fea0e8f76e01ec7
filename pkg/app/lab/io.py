# app/lab/io.py
"""Instance and table persistence.

An instance is stored as ``<name>.csv`` (one row per factor: columns a0..a{n-1}
then y, 17 significant digits) next to ``<name>.manifest.json`` carrying
m, n, family, seed, delta and the sha256 content hash.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path

import pandas as pd

from ..core.errors import EnsembleError
from .ensemble import EnsembleSpec, ProblemInstance

log = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def manifest_path(path: Path) -> Path:
    return Path(path).with_suffix(".manifest.json")


def instance_manifest(inst: ProblemInstance) -> dict:
    spec = inst.spec
    return {
        "m": inst.m,
        "n": inst.n,
        "family": spec.family.value if spec else None,
        "seed": spec.seed if spec else None,
        "delta": inst.delta,
        "sha256": inst.content_hash(),
    }


def write_instance(inst: ProblemInstance, path: Path) -> Path:
    path = Path(path).with_suffix(".csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(inst.a, columns=[f"a{j}" for j in range(inst.n)])
    df["y"] = inst.y
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    manifest_path(path).write_text(
        json.dumps(instance_manifest(inst), indent=2), encoding="utf-8"
    )
    log.info("wrote instance %s (%dx%d)", path.name, inst.m, inst.n)
    return path


def read_instance(path: Path) -> ProblemInstance:
    path = Path(path)
    if not path.exists():
        raise EnsembleError(f"instance file not found: {path}")
    df = pd.read_csv(path)
    if "y" not in df.columns:
        raise EnsembleError(f"{path.name} has no y column")
    a = df.drop(columns="y").to_numpy(dtype=float)
    spec = None
    meta_path = manifest_path(path)
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        if (meta.get("m"), meta.get("n")) != a.shape:
            raise EnsembleError(f"manifest shape {meta.get('m')}x{meta.get('n')} != {a.shape}")
        if meta.get("family") is not None:
            spec = EnsembleSpec(family=meta["family"], m=meta["m"], n=meta["n"], seed=meta["seed"])
    inst = ProblemInstance(a=a, y=df["y"].to_numpy(dtype=float), spec=spec)
    if meta_path.exists() and meta.get("sha256") not in (None, inst.content_hash()):
        log.warning("content hash of %s does not match its manifest", path.name)
    return inst


def write_table(df: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, encoding="utf-8", float_format=FLOAT_FORMAT)
    return path


def write_dat(df: pd.DataFrame, path: Path) -> Path:
    """Whitespace separated table with a '#' header line, readable by gnuplot."""
    path = Path(path)
    body = df.to_string(index=False, header=False, float_format=lambda v: FLOAT_FORMAT % v)
    path.write_text("# " + " ".join(df.columns) + "\n" + body + "\n", encoding="utf-8")
    return path


def write_json(obj: dict, path: Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=str), encoding="utf-8")
    return path

