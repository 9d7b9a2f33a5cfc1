"""On-disk patch archive.

Layout: one directory per split under the archive root, one flat binary
file per array, and a single JSON manifest at the root listing every
patch with shapes, dates and a sha256 checksum per file.

Array file format (little-endian throughout):

    bytes 0-7    magic  b"BSCARR1\\n"
    bytes 8-11   uint32 ndim
    next 4*ndim  uint32 dims
    rest         float32 data, C order

Round-trips are bit-exact for float32 inputs.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import IntegrityError
from .patches import PatchSample
from .splits import SplitManifest, update_patch_counts

MAGIC = b"BSCARR1\n"
FORMAT_NAME = "burnscar-archive-v1"
ARRAY_FIELDS = ("hr_pre", "lr_pre", "lr_post", "label_hr", "label_lr")


def write_array(path, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", arr.ndim))
        f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        f.write(arr.astype("<f4", copy=False).tobytes())


def read_array(path) -> np.ndarray:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < len(MAGIC) + 4 or raw[: len(MAGIC)] != MAGIC:
        raise IntegrityError(f"{path}: bad magic or truncated header")
    (ndim,) = struct.unpack_from("<I", raw, len(MAGIC))
    off = len(MAGIC) + 4
    if len(raw) < off + 4 * ndim:
        raise IntegrityError(f"{path}: truncated dims header")
    dims = struct.unpack_from(f"<{ndim}I", raw, off)
    off += 4 * ndim
    expected = off + 4 * int(np.prod(dims, dtype=np.int64))
    if len(raw) != expected:
        raise IntegrityError(
            f"{path}: expected {expected} bytes for shape {dims}, found {len(raw)}"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=off).reshape(dims)
    # copy: decouple from the raw buffer and make the array writable
    return data.astype(np.float32, copy=True)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_archive(patches: list[PatchSample], manifest: SplitManifest, path) -> None:
    """Write patches and their split manifest under an archive root."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    update_patch_counts(manifest, patches)

    entries = []
    for p in patches:
        split = manifest.split_of(p.event_id)
        split_dir = root / split
        split_dir.mkdir(exist_ok=True)
        arrays = {}
        for fieldname in ARRAY_FIELDS:
            arr = getattr(p, fieldname)
            rel = f"{split}/{p.patch_id}.{fieldname}.arr"
            write_array(root / rel, arr)
            arrays[fieldname] = {
                "file": rel,
                "shape": list(arr.shape),
                "sha256": _sha256(root / rel),
            }
        entries.append(
            {
                "patch_id": p.patch_id,
                "event_id": p.event_id,
                "split": split,
                "is_positive": p.is_positive,
                "t1_date": p.t1_date,
                "t2_date": p.t2_date,
                "lr_bad_fraction": p.lr_bad_fraction,
                "arrays": arrays,
            }
        )

    doc = {
        "format": FORMAT_NAME,
        "split_manifest": manifest.to_dict(),
        "patches": entries,
    }
    (root / "manifest.json").write_text(json.dumps(doc, indent=2))


def read_archive(path, split: str | None = None) -> tuple[list[PatchSample], SplitManifest]:
    """Read an archive back, verifying every file checksum.

    With split given, only that split's patches are materialized (the
    manifest still covers the whole archive).
    """
    root = Path(path)
    mf_path = root / "manifest.json"
    if not mf_path.exists():
        raise IntegrityError(f"{root}: no manifest.json")
    try:
        doc = json.loads(mf_path.read_text())
    except json.JSONDecodeError as e:
        raise IntegrityError(f"{mf_path}: unparseable manifest ({e})") from e
    if doc.get("format") != FORMAT_NAME:
        raise IntegrityError(f"{mf_path}: unknown format {doc.get('format')!r}")
    manifest = SplitManifest.from_dict(doc["split_manifest"])

    patches = []
    for entry in doc["patches"]:
        if split is not None and entry["split"] != split:
            continue
        pid = entry["patch_id"]
        arrays = {}
        for fieldname in ARRAY_FIELDS:
            info = entry["arrays"][fieldname]
            fpath = root / info["file"]
            if not fpath.exists():
                raise IntegrityError(f"patch {pid}: missing file {info['file']}")
            if _sha256(fpath) != info["sha256"]:
                raise IntegrityError(f"patch {pid}: checksum mismatch in {info['file']}")
            try:
                arr = read_array(fpath)
            except IntegrityError as e:
                raise IntegrityError(f"patch {pid}: {e}") from e
            if list(arr.shape) != info["shape"]:
                raise IntegrityError(
                    f"patch {pid}: shape {list(arr.shape)} != manifest {info['shape']}"
                )
            arrays[fieldname] = arr
        patches.append(
            PatchSample(
                patch_id=pid,
                event_id=entry["event_id"],
                is_positive=entry["is_positive"],
                t1_date=entry.get("t1_date", ""),
                t2_date=entry.get("t2_date", ""),
                lr_bad_fraction=entry.get("lr_bad_fraction", 0.0),
                **arrays,
            )
        )
    return patches, manifest


def archive_hash(path) -> str:
    """Short content hash of an archive (its manifest), for reports."""
    return _sha256(Path(path) / "manifest.json")[:16]
