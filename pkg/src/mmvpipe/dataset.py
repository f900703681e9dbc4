"""Dataset discovery: pair source/target(/cost-map) files into a manifest.

Four organization modes are supported:

* ``csv``            one manifest file with columns source,target[,costmap]
* ``paired-folders`` two directories, pairing by identical filename
* ``suffix``         one directory, pairing ``<stem>_IM.*`` / ``<stem>_GT.*``
                     (and optional ``<stem>_CM.*``)
* ``presplit``       paired-folders layout repeated under train/ and val/
                     subtrees, records pre-tagged

Manifests are deterministic: records are sorted lexicographically by id and
serialize to sorted-key JSON with LF newlines, so the same filesystem state
always produces byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import AlreadySplit, DuplicateId, EmptyDataset, UnpairedSource
from .formats import IMAGE_SUFFIXES

MODES = ("csv", "paired-folders", "suffix", "presplit")
SPLITS = ("train", "val", "test", "unassigned")


@dataclass(frozen=True)
class SampleRecord:
    """One source/target pair, optionally with a cost map."""

    id: str
    source_path: str
    target_path: str
    costmap_path: str | None = None
    split: str = "unassigned"

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"unknown split tag {self.split!r}")


@dataclass(frozen=True)
class Manifest:
    """Ordered, deterministic collection of sample records."""

    records: tuple[SampleRecord, ...]
    mode: str
    params: dict

    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "params": self.params,
            "records": [
                {
                    "id": r.id,
                    "source": r.source_path,
                    "target": r.target_path,
                    "costmap": r.costmap_path,
                    "split": r.split,
                }
                for r in self.records
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Manifest":
        records = tuple(
            SampleRecord(r["id"], r["source"], r["target"], r.get("costmap"), r.get("split", "unassigned"))
            for r in doc["records"]
        )
        return cls(records, doc["mode"], doc.get("params", {}))

    def save(self, path) -> None:
        write_json(path, self.to_dict())

    @classmethod
    def load(cls, path) -> "Manifest":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def write_json(path, obj) -> None:
    """Canonical JSON: sorted keys, two-space indent, LF, UTF-8."""
    text = json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def _image_files(directory: Path) -> list[Path]:
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def _finish(records: list[SampleRecord], mode: str, params: dict) -> Manifest:
    if not records:
        raise EmptyDataset(f"{mode}: no records discovered")
    seen: set[str] = set()
    for r in records:
        if r.id in seen:
            raise DuplicateId(f"sample id {r.id!r} appears more than once")
        seen.add(r.id)
    records.sort(key=lambda r: r.id)
    return Manifest(tuple(records), mode, params)


def _pair_folders(
    source_dir: Path, target_dir: Path, costmap_dir: Path | None, split: str, id_prefix: str = ""
) -> list[SampleRecord]:
    records = []
    for src in _image_files(source_dir):
        tgt = target_dir / src.name
        if not tgt.is_file():
            raise UnpairedSource(f"{src}: no matching target in {target_dir}")
        cm = None
        if costmap_dir is not None:
            candidate = costmap_dir / src.name
            if candidate.is_file():
                cm = str(candidate.resolve())
        records.append(
            SampleRecord(id_prefix + src.stem, str(src.resolve()), str(tgt.resolve()), cm, split)
        )
    return records


def discover_pairs(mode: str, roots, costmap_root=None) -> Manifest:
    """Build a manifest from the filesystem in one of the four modes.

    ``roots`` is [csv_path] for csv mode, [directory] for suffix mode, and
    [source_dir, target_dir] otherwise; an optional cost-map directory can
    be given either as a third root or via ``costmap_root``.
    """
    roots = [Path(r) for r in roots]
    for r in roots:
        if not r.exists():
            raise FileNotFoundError(f"root {r} does not exist")
    if len(roots) >= 3 and costmap_root is None:
        costmap_root = roots[2]
    cm_dir = Path(costmap_root) if costmap_root is not None else None
    params = {
        "roots": [str(r.resolve()) for r in roots],
        "costmap_root": str(cm_dir.resolve()) if cm_dir else None,
    }

    if mode == "csv":
        return _finish(_discover_csv(roots[0]), mode, params)
    if mode == "paired-folders":
        return _finish(_pair_folders(roots[0], roots[1], cm_dir, "unassigned"), mode, params)
    if mode == "suffix":
        return _finish(_discover_suffix(roots[0]), mode, params)
    if mode == "presplit":
        records = []
        for split in ("train", "val"):
            src = roots[0] / split
            tgt = roots[1] / split
            if not src.is_dir() or not tgt.is_dir():
                raise FileNotFoundError(f"presplit mode needs {split}/ under both roots")
            sub_cm = cm_dir / split if cm_dir is not None and (cm_dir / split).is_dir() else None
            records.extend(_pair_folders(src, tgt, sub_cm, split, id_prefix=f"{split}/"))
        return _finish(records, mode, params)
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


def _discover_csv(csv_path: Path) -> list[SampleRecord]:
    base = csv_path.resolve().parent
    records = []
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = [f.strip() for f in reader.fieldnames or []]
        if fields[:2] != ["source", "target"] or fields not in (
            ["source", "target"],
            ["source", "target", "costmap"],
        ):
            raise ValueError(f"{csv_path}: header must be source,target[,costmap], got {fields}")
        for row in reader:
            src = _resolve(base, row["source"])
            tgt = _resolve(base, row["target"])
            if not src.is_file():
                raise UnpairedSource(f"{csv_path}: source {src} does not exist")
            if not tgt.is_file():
                raise UnpairedSource(f"{csv_path}: target {tgt} does not exist")
            cm_cell = (row.get("costmap") or "").strip()
            cm = None
            if cm_cell:
                cm_path = _resolve(base, cm_cell)
                if not cm_path.is_file():
                    raise UnpairedSource(f"{csv_path}: costmap {cm_path} does not exist")
                cm = str(cm_path)
            records.append(SampleRecord(src.stem, str(src), str(tgt), cm))
    return records


def _resolve(base: Path, cell: str) -> Path:
    p = Path(cell.strip())
    return p if p.is_absolute() else (base / p).resolve()


def _discover_suffix(directory: Path) -> list[SampleRecord]:
    files = _image_files(directory)
    by_stem: dict[str, dict[str, Path]] = {}
    for f in files:
        for marker in ("_IM", "_GT", "_CM"):
            if f.stem.endswith(marker):
                stem = f.stem[: -len(marker)]
                role = by_stem.setdefault(stem, {})
                if marker in role:
                    raise DuplicateId(f"{directory}: two {marker} files for stem {stem!r}")
                role[marker] = f
                break
    records = []
    for stem, roles in by_stem.items():
        if "_IM" not in roles:
            continue  # orphan GT/CM files are ignored, matching paired-folders
        if "_GT" not in roles:
            raise UnpairedSource(f"{roles['_IM']}: no {stem}_GT.* companion")
        cm = roles.get("_CM")
        records.append(
            SampleRecord(
                stem,
                str(roles["_IM"].resolve()),
                str(roles["_GT"].resolve()),
                str(cm.resolve()) if cm else None,
            )
        )
    return records


def _rank_key(seed: int, sample_id: str) -> str:
    return hashlib.sha256(f"{seed}:{sample_id}".encode()).hexdigest()


def split(manifest: Manifest, val_ratio: float, seed: int) -> Manifest:
    """Tag round(val_ratio * N) records as val, the rest as train.

    The assignment is a pure function of (seed, sorted ids): records are
    ranked by a salted hash of their id and the lowest-ranked become the
    validation set. Rounding is round-half-to-even.
    """
    if not (0.0 < val_ratio < 1.0):
        raise ValueError(f"val_ratio must be in (0, 1), got {val_ratio}")
    for r in manifest.records:
        if r.split != "unassigned":
            raise AlreadySplit(f"record {r.id!r} is already tagged {r.split!r}")
    n_val = round(val_ratio * len(manifest.records))
    ranked = sorted(manifest.ids(), key=lambda i: _rank_key(seed, i))
    val_ids = set(ranked[:n_val])
    records = tuple(
        replace(r, split="val" if r.id in val_ids else "train") for r in manifest.records
    )
    params = dict(manifest.params, val_ratio=val_ratio, split_seed=seed)
    return Manifest(records, manifest.mode, params)
