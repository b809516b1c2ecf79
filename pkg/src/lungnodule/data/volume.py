"""MetaImage (.mhd + .raw) volumes, HU windowing and nodule annotation CSVs."""

import csv
import io
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .._io import atomic_write_bytes, atomic_write_text
from ..errors import DataError, FormatError

MET_TYPES = {
    "MET_UCHAR": np.dtype("u1"),
    "MET_CHAR": np.dtype("i1"),
    "MET_SHORT": np.dtype("i2"),
    "MET_USHORT": np.dtype("u2"),
    "MET_INT": np.dtype("i4"),
    "MET_UINT": np.dtype("u4"),
    "MET_FLOAT": np.dtype("f4"),
    "MET_DOUBLE": np.dtype("f8"),
}


@dataclass
class VolumeMeta:
    """Header of a CT volume. All per-axis tuples are in (X, Y, Z) order."""

    dims: Tuple[int, ...]
    spacing: Tuple[float, ...] = (1.0, 1.0, 1.0)
    offset: Tuple[float, ...] = (0.0, 0.0, 0.0)
    element_type: str = "MET_SHORT"
    series_uid: Optional[str] = None

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.spacing = tuple(float(s) for s in self.spacing)
        self.offset = tuple(float(o) for o in self.offset)
        if any(d <= 0 for d in self.dims):
            raise DataError(f"volume dims must be positive, got {self.dims}")
        if any(s <= 0 for s in self.spacing):
            raise DataError(f"voxel spacing must be positive, got {self.spacing}")
        if self.element_type not in MET_TYPES:
            raise DataError(f"unknown ElementType {self.element_type!r}")


@dataclass
class NoduleAnnotation:
    """A spherical nodule in world millimetres."""

    series_uid: str
    center: Tuple[float, float, float]
    diameter: float

    def __post_init__(self):
        self.center = tuple(float(c) for c in self.center)
        self.diameter = float(self.diameter)
        if not self.diameter > 0:
            raise DataError(f"nodule diameter must be positive, got {self.diameter}")
        if self.diameter > 30:
            warnings.warn(f"nodule diameter {self.diameter} mm exceeds 30 mm ({self.series_uid})", stacklevel=2)


def _parse_header(text: str) -> dict:
    fields = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        if "=" not in line:
            raise FormatError(f"MetaImage header line {lineno} has no '=': {line!r}")
        key, value = line.split("=", 1)
        fields[key.strip()] = value.strip()
    return fields


def _floats(value: str, n: int, key: str) -> Tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in value.split())
    except ValueError:
        raise FormatError(f"{key} is not numeric: {value!r}") from None
    if len(vals) != n:
        raise FormatError(f"{key} has {len(vals)} values, NDims is {n}")
    return vals


def read_mhd(header_path):
    """Read a MetaImage volume. Returns ``(VolumeMeta, voxels)`` with voxels Z x Y x X.

    Voxels come back as float32 (float64 for 32-bit integer and double
    sources) so integer HU values are exact.
    """
    header_path = Path(header_path)
    fields = _parse_header(header_path.read_text())
    for key in ("NDims", "DimSize", "ElementType", "ElementDataFile"):
        if key not in fields:
            raise FormatError(f"MetaImage header {header_path} lacks {key}")
    ndims = int(fields["NDims"])
    dims = tuple(int(v) for v in _floats(fields["DimSize"], ndims, "DimSize"))
    etype = fields["ElementType"]
    if etype not in MET_TYPES:
        raise FormatError(f"unknown ElementType {etype!r}")
    if fields.get("CompressedData", "False").lower() == "true":
        raise FormatError("compressed MetaImage data is not supported")
    spacing = _floats(fields.get("ElementSpacing", " ".join(["1"] * ndims)), ndims, "ElementSpacing")
    offset_key = next((k for k in ("Offset", "Origin", "Position") if k in fields), None)
    offset = _floats(fields[offset_key], ndims, offset_key) if offset_key else (0.0,) * ndims
    tm = fields.get("TransformMatrix")
    if tm is not None:
        mat = np.array(_floats(tm, ndims * ndims, "TransformMatrix")).reshape(ndims, ndims)
        if not np.allclose(mat, np.eye(ndims)):
            warnings.warn(f"{header_path.name}: non-identity TransformMatrix ignored; axes read as Z, Y, X", stacklevel=2)
    data_file = fields["ElementDataFile"]
    if data_file.upper() in ("LOCAL", "LIST"):
        raise FormatError(f"ElementDataFile {data_file} is not supported")
    raw_path = header_path.parent / data_file
    if not raw_path.exists():
        raise DataError(f"raw data file {raw_path} not found")
    dt = MET_TYPES[etype]
    msb = fields.get("BinaryDataByteOrderMSB", fields.get("ElementByteOrderMSB", "False")).lower() == "true"
    dt = dt.newbyteorder(">" if msb else "<")
    payload = raw_path.read_bytes()
    expected = int(np.prod(dims)) * dt.itemsize
    if len(payload) != expected:
        raise FormatError(f"{raw_path.name}: expected {expected} bytes for DimSize {dims}, found {len(payload)}")
    vox = np.frombuffer(payload, dtype=dt).reshape(dims[::-1])
    exact_in_f32 = dt.itemsize <= 2 or (dt.kind == "f" and dt.itemsize == 4)
    out_dtype = np.float32 if exact_in_f32 else np.float64
    meta = VolumeMeta(dims, spacing, offset, etype, series_uid=header_path.stem)
    return meta, vox.astype(out_dtype)


def _fmt_floats(vals) -> str:
    return " ".join(repr(float(v)) if not float(v).is_integer() else str(int(v)) for v in vals)


def write_mhd(header_path, meta: VolumeMeta, voxels) -> None:
    """Write ``voxels`` (Z x Y x X) as ``<name>.mhd`` + ``<name>.raw`` using ``meta.element_type``."""
    header_path = Path(header_path)
    vox = np.asarray(voxels)
    if tuple(vox.shape[::-1]) != tuple(meta.dims):
        raise DataError(f"voxel array shape {vox.shape} does not match dims {meta.dims} (X, Y, Z)")
    dt = MET_TYPES[meta.element_type].newbyteorder("<")
    cast = vox.astype(dt)
    if dt.kind in "iu" and not np.array_equal(cast, vox):
        raise DataError(f"voxels are not exactly representable as {meta.element_type}")
    raw_name = header_path.with_suffix(".raw").name
    n = len(meta.dims)
    header = "\n".join(
        [
            "ObjectType = Image",
            f"NDims = {n}",
            "BinaryData = True",
            "BinaryDataByteOrderMSB = False",
            "CompressedData = False",
            f"Offset = {_fmt_floats(meta.offset)}",
            f"ElementSpacing = {_fmt_floats(meta.spacing)}",
            f"DimSize = {' '.join(str(d) for d in meta.dims)}",
            f"ElementType = {meta.element_type}",
            f"ElementDataFile = {raw_name}",
            "",
        ]
    )
    atomic_write_bytes(header_path.with_suffix(".raw"), cast.tobytes())
    atomic_write_text(header_path, header)


def hu_window(values, center: float = -600.0, width: float = 1500.0) -> np.ndarray:
    """Map ``[center - width/2, center + width/2]`` linearly onto ``[0, 1]``, clipping outside."""
    if width <= 0:
        raise ValueError(f"window width must be positive, got {width}")
    v = np.asarray(values, dtype=np.float64)
    return np.clip((v - (center - width / 2.0)) / width, 0.0, 1.0).astype(np.float32)


def nodule_mask(annotation: NoduleAnnotation, meta: VolumeMeta, slice_index: int) -> np.ndarray:
    """Cross-section of a nodule sphere with one axial slice, as an H x W bool mask.

    The in-plane radius is ``sqrt(R^2 - dz^2)``; a pixel is inside when its
    centre lies within that radius of the sphere centre.
    """
    if meta.series_uid is not None and annotation.series_uid != meta.series_uid:
        raise DataError(f"annotation for series {annotation.series_uid!r} applied to volume {meta.series_uid!r}")
    nx, ny = meta.dims[0], meta.dims[1]
    nz = meta.dims[2] if len(meta.dims) > 2 else 1
    if not 0 <= slice_index < nz:
        raise IndexError(f"slice {slice_index} outside volume with {nz} slices")
    sx, sy = meta.spacing[0], meta.spacing[1]
    sz = meta.spacing[2] if len(meta.spacing) > 2 else 1.0
    ox, oy = meta.offset[0], meta.offset[1]
    oz = meta.offset[2] if len(meta.offset) > 2 else 0.0
    cx, cy, cz = annotation.center
    radius = annotation.diameter / 2.0
    dz = oz + slice_index * sz - cz
    if abs(dz) > radius:
        return np.zeros((ny, nx), dtype=bool)
    r2 = radius * radius - dz * dz
    xs = ox + np.arange(nx) * sx - cx
    ys = oy + np.arange(ny) * sy - cy
    return (ys[:, None] ** 2 + xs[None, :] ** 2) <= r2


def volume_nodule_masks(annotations: List[NoduleAnnotation], meta: VolumeMeta) -> np.ndarray:
    """Union of all nodule masks for every slice, Z x Y x X bool."""
    nz = meta.dims[2] if len(meta.dims) > 2 else 1
    out = np.zeros((nz, meta.dims[1], meta.dims[0]), dtype=bool)
    for ann in annotations:
        if meta.series_uid is not None and ann.series_uid != meta.series_uid:
            continue
        sz = meta.spacing[2] if len(meta.spacing) > 2 else 1.0
        oz = meta.offset[2] if len(meta.offset) > 2 else 0.0
        r = ann.diameter / 2.0
        lo = max(0, math.floor((ann.center[2] - r - oz) / sz))
        hi = min(nz - 1, math.ceil((ann.center[2] + r - oz) / sz))
        for k in range(lo, hi + 1):
            out[k] |= nodule_mask(ann, meta, k)
    return out


ANNOTATION_FIELDS = ("seriesuid", "coordX", "coordY", "coordZ", "diameter_mm")


def read_annotations(path) -> List[NoduleAnnotation]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(ANNOTATION_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise FormatError(f"annotation CSV {path} lacks columns {sorted(missing)}")
        out = []
        for lineno, row in enumerate(reader, 2):
            try:
                center = (float(row["coordX"]), float(row["coordY"]), float(row["coordZ"]))
                diameter = float(row["diameter_mm"])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric annotation value") from None
            out.append(NoduleAnnotation(row["seriesuid"], center, diameter))
    return out


def annotations_to_csv(annotations: List[NoduleAnnotation]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ANNOTATION_FIELDS)
    for a in annotations:
        writer.writerow([a.series_uid, *(repr(c) for c in a.center), repr(a.diameter)])
    return buf.getvalue()


def write_annotations(path, annotations: List[NoduleAnnotation]) -> None:
    atomic_write_text(path, annotations_to_csv(annotations))
