"""Listing metadata, image manifests and assembled feature tables."""

from __future__ import annotations

import csv
import math
import os
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import AssemblyError, FormatError, SchemaError

METADATA_COLUMNS = (
    "MLSNUM", "SOLDPRICE", "DOM", "ZIP", "BEDS", "BATHS", "LOTSIZE", "SQFT", "GARAGE", "AGE",
)
MANIFEST_COLUMNS = ("listing_id", "path", "image_type", "category", "zoom")
# Basic predictors carried into every feature table.
MLS_FEATURES = ("AGE", "BATHS", "BEDS", "GARAGE", "LOTSIZE", "SQFT", "ZIP")

IMAGE_TYPES = ("indoor", "outdoor", "satellite")
TYPE_CODES = {"indoor": "ind", "outdoor": "out", "satellite": "sat"}
CATEGORIES = ("kitchen", "bed", "bath", "living", "basement", "dinning")
ZOOM_RANGE = (15, 20)

_CATEGORY_ALIASES = {
    "kitchen": "kitchen",
    "bed": "bed", "bedroom": "bed",
    "bath": "bath", "bathroom": "bath",
    "living": "living", "living_room": "living", "living room": "living", "livingroom": "living",
    "basement": "basement",
    "dinning": "dinning", "dining": "dinning", "dining_room": "dinning",
    "dinning_room": "dinning", "dining room": "dinning",
}
_GARAGE_VALUES = {
    "1": 1, "0": 0, "yes": 1, "no": 0, "true": 1, "false": 0, "y": 1, "n": 0,
}


class _Missing:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "MISSING"

    def __bool__(self) -> bool:
        return False

    def __reduce__(self):
        return (_Missing, ())


MISSING = _Missing()
"""Marker for a feature that cannot be computed for a listing."""


def is_missing(value) -> bool:
    return value is MISSING


@dataclass(frozen=True, slots=True)
class ListingRecord:
    mls_num: str
    price: float
    dom: int
    zip: str
    beds: int | None
    baths: float | None
    lotsize: float | None
    sqft: float
    garage: int | None
    age: int | None

    def mls_features(self) -> dict[str, float | _Missing]:
        """Basic predictors in table form; ZIP becomes an integer code."""
        raw = {
            "AGE": self.age, "BATHS": self.baths, "BEDS": self.beds,
            "GARAGE": self.garage, "LOTSIZE": self.lotsize, "SQFT": self.sqft,
            "ZIP": zip_code(self.zip),
        }
        return {k: (MISSING if v is None else float(v)) for k, v in raw.items()}


@dataclass(frozen=True, slots=True)
class RowError:
    line: int
    message: str
    kind: str = "row"
    listing_id: str | None = None


def zip_code(zip_text: str) -> int | None:
    """Integer code from the leading five digits of a postal code."""
    digits = re.sub(r"\D", "", zip_text)[:5]
    return int(digits) if digits else None


def _parse_optional(text: str, conv, name: str, minimum=0):
    text = text.strip()
    if text == "" or text.upper() in ("NA", "N/A"):
        return None
    value = conv(text)
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {text!r}")
    return value


def _int(text: str) -> int:
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _garage(text: str) -> int:
    try:
        return _GARAGE_VALUES[text.strip().lower()]
    except KeyError:
        raise ValueError(f"GARAGE must be 0/1/yes/no/true/false, got {text!r}") from None


def parse_listing(row: Mapping[str, str]) -> ListingRecord:
    """Build a record from one metadata row, raising ValueError when malformed."""
    mls_num = row["MLSNUM"].strip()
    if not mls_num:
        raise ValueError("empty MLSNUM")
    try:
        price = float(row["SOLDPRICE"])
    except ValueError:
        raise ValueError(f"SOLDPRICE is not numeric: {row['SOLDPRICE']!r}") from None
    if not math.isfinite(price) or price <= 0:
        raise ValueError(f"SOLDPRICE must be positive, got {row['SOLDPRICE']!r}")
    try:
        dom = _int(row["DOM"])
    except ValueError:
        raise ValueError(f"DOM is not an integer: {row['DOM']!r}") from None
    if dom < 0:
        raise ValueError(f"DOM must be >= 0, got {dom}")
    sqft = float(row["SQFT"])
    if not math.isfinite(sqft) or sqft <= 0:
        raise ValueError(f"SQFT must be positive, got {row['SQFT']!r}")
    return ListingRecord(
        mls_num=mls_num,
        price=price,
        dom=dom,
        zip=row["ZIP"].strip(),
        beds=_parse_optional(row["BEDS"], _int, "BEDS"),
        baths=_parse_optional(row["BATHS"], float, "BATHS"),
        lotsize=_parse_optional(row["LOTSIZE"], float, "LOTSIZE"),
        sqft=sqft,
        garage=_parse_optional(row["GARAGE"], _garage, "GARAGE"),
        age=_parse_optional(row["AGE"], _int, "AGE"),
    )


def _check_header(fieldnames, required, path) -> None:
    if fieldnames is None:
        raise SchemaError(f"{path}: empty file, no header")
    present = {name.strip() for name in fieldnames}
    for name in required:
        if name not in present:
            raise SchemaError(f"{path}: missing column {name!r}")


def load_listings(path: str | os.PathLike) -> tuple[list[ListingRecord], list[RowError]]:
    """Parse a metadata CSV.

    Returns the valid records and a report of rejected rows (with their
    1-based line numbers in the file). Duplicate MLS numbers are rejected
    after the first occurrence.
    """
    records: list[ListingRecord] = []
    errors: list[RowError] = []
    seen: set[str] = set()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh, skipinitialspace=True)
        _check_header(reader.fieldnames, METADATA_COLUMNS, path)
        reader.fieldnames = [name.strip() for name in reader.fieldnames]
        for row in reader:
            line = reader.line_num
            try:
                rec = parse_listing(row)
            except (ValueError, TypeError, AttributeError) as exc:
                errors.append(RowError(line, str(exc)))
                continue
            if rec.mls_num in seen:
                errors.append(RowError(line, f"duplicate MLSNUM {rec.mls_num!r}"))
                continue
            seen.add(rec.mls_num)
            records.append(rec)
    return records, errors


def write_listings(records: Iterable[ListingRecord], path: str | os.PathLike) -> None:
    def fmt(v):
        return "" if v is None else str(v)

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METADATA_COLUMNS)
        for r in records:
            writer.writerow([
                r.mls_num, fmt(r.price), r.dom, r.zip, fmt(r.beds), fmt(r.baths),
                fmt(r.lotsize), fmt(r.sqft), fmt(r.garage), fmt(r.age),
            ])


# -- image manifest ------------------------------------------------------


@dataclass(frozen=True, slots=True)
class ImageAsset:
    listing_id: str
    path: str
    image_type: str
    category: str | None = None
    zoom: int | None = None

    def __post_init__(self):
        if self.image_type not in IMAGE_TYPES:
            raise SchemaError(f"unknown image_type {self.image_type!r}")
        if self.category is not None and self.image_type != "indoor":
            raise SchemaError(f"category given for {self.image_type} image {self.path!r}")
        if self.image_type == "satellite":
            if self.zoom is None:
                raise SchemaError(f"satellite image {self.path!r} has no zoom")
            if not ZOOM_RANGE[0] <= self.zoom <= ZOOM_RANGE[1]:
                raise SchemaError(f"zoom {self.zoom} outside {ZOOM_RANGE} for {self.path!r}")
        elif self.zoom is not None:
            raise SchemaError(f"zoom given for {self.image_type} image {self.path!r}")

    @property
    def image_id(self) -> str:
        return self.path

    @property
    def type_code(self) -> str:
        return TYPE_CODES[self.image_type]


def normalize_category(label: str | None) -> str:
    """Map a free-form room label onto the fixed vocabulary, else ``"other"``."""
    if label is None:
        return "other"
    return _CATEGORY_ALIASES.get(label.strip().lower(), "other")


@dataclass
class Manifest:
    assets: list[ImageAsset]
    errors: list[RowError] = field(default_factory=list)

    def __post_init__(self):
        self.by_listing: dict[str, list[ImageAsset]] = defaultdict(list)
        for a in self.assets:
            self.by_listing[a.listing_id].append(a)
        self.by_listing = dict(self.by_listing)

    @property
    def counts(self) -> Counter:
        return Counter(a.image_type for a in self.assets)

    def for_listing(self, listing_id: str) -> list[ImageAsset]:
        return self.by_listing.get(listing_id, [])

    def failed_listings(self) -> set[str]:
        return {e.listing_id for e in self.errors if e.kind == "asset"}


def iter_manifest(
    path: str | os.PathLike, image_root: str | os.PathLike | None = None
) -> Iterator[tuple[int, ImageAsset | RowError]]:
    """Stream manifest rows as ``(line, asset)`` or ``(line, error)`` pairs.

    Asset errors (dangling paths) carry the listing id so callers can
    quarantine the listing.
    """
    root = Path(image_root) if image_root is not None else None
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader.fieldnames, MANIFEST_COLUMNS, path)
        reader.fieldnames = [name.strip() for name in reader.fieldnames]
        for row in reader:
            line = reader.line_num
            lid = (row["listing_id"] or "").strip()
            rel = (row["path"] or "").strip()
            image_type = (row["image_type"] or "").strip().lower()
            category = (row["category"] or "").strip() or None
            zoom_text = (row["zoom"] or "").strip()
            try:
                zoom = _int(zoom_text) if zoom_text else None
                if image_type == "indoor":
                    category = normalize_category(category)
                asset = ImageAsset(lid, rel, image_type, category, zoom)
            except (SchemaError, ValueError) as exc:
                yield line, RowError(line, str(exc), kind="schema")
                continue
            if root is not None and not (root / rel).is_file():
                yield line, RowError(line, f"image not found: {rel}", kind="asset", listing_id=lid)
                continue
            yield line, asset


def load_manifest(
    path: str | os.PathLike, image_root: str | os.PathLike | None = None, strict: bool = False
) -> Manifest:
    """Load an image manifest.

    With ``strict`` the first schema error is raised instead of reported.
    """
    assets, errors = [], []
    for _, item in iter_manifest(path, image_root):
        if isinstance(item, RowError):
            if strict and item.kind == "schema":
                raise SchemaError(f"{path}:{item.line}: {item.message}")
            errors.append(item)
        else:
            assets.append(item)
    return Manifest(assets, errors)


def write_manifest(assets: Iterable[ImageAsset], path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for a in assets:
            writer.writerow([
                a.listing_id, a.path, a.image_type, a.category or "",
                "" if a.zoom is None else a.zoom,
            ])


# -- feature tables ------------------------------------------------------


class FeatureTable:
    """Listing-indexed matrix of named features.

    Missing cells are stored as NaN in ``values``; ``cell`` hands them back
    as :data:`MISSING`. Tables are read-only once built.
    """

    def __init__(self, listing_ids: Iterable[str], columns: Iterable[str], values):
        self.listing_ids = tuple(listing_ids)
        self.columns = tuple(columns)
        if len(set(self.columns)) != len(self.columns):
            dupes = sorted(c for c, n in Counter(self.columns).items() if n > 1)
            raise AssemblyError(f"duplicate column names: {dupes}")
        if len(set(self.listing_ids)) != len(self.listing_ids):
            raise AssemblyError("duplicate listing ids")
        arr = np.array(values, dtype=np.float64).reshape(len(self.listing_ids), len(self.columns))
        arr.flags.writeable = False
        self.values = arr
        self._col_index = {c: i for i, c in enumerate(self.columns)}
        self._row_index = {r: i for i, r in enumerate(self.listing_ids)}

    def __repr__(self) -> str:
        return f"FeatureTable({len(self.listing_ids)} rows x {len(self.columns)} columns)"

    def __len__(self) -> int:
        return len(self.listing_ids)

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    def has_column(self, name: str) -> bool:
        return name in self._col_index

    def column(self, name: str) -> np.ndarray:
        return self.select([name])[:, 0]

    def select(self, names: Iterable[str]) -> np.ndarray:
        names = list(names)
        absent = [n for n in names if n not in self._col_index]
        if absent:
            raise SchemaError(f"columns not in table: {absent}")
        return self.values[:, [self._col_index[n] for n in names]]

    def row(self, listing_id: str) -> np.ndarray:
        return self.values[self._row_index[listing_id]]

    def cell(self, listing_id: str, column: str):
        v = self.values[self._row_index[listing_id], self._col_index[column]]
        return MISSING if np.isnan(v) else float(v)

    def take(self, listing_ids: Iterable[str]) -> "FeatureTable":
        ids = list(listing_ids)
        rows = [self._row_index[i] for i in ids]
        return FeatureTable(ids, self.columns, self.values[rows])

    def equals(self, other: "FeatureTable") -> bool:
        return (
            self.listing_ids == other.listing_ids
            and self.columns == other.columns
            and np.array_equal(self.values, other.values, equal_nan=True)
        )


def _fmt_cell(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def write_feature_table(table: FeatureTable, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("listing_id",) + table.columns)
        for lid, row in zip(table.listing_ids, table.values):
            writer.writerow([lid] + [_fmt_cell(v) for v in row])


def load_feature_table(path: str | os.PathLike) -> FeatureTable:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty feature table") from None
        if not header or header[0] != "listing_id":
            raise SchemaError(f"{path}: first column must be listing_id")
        ids, rows = [], []
        for row in reader:
            if len(row) != len(header):
                raise FormatError(f"{path}:{reader.line_num}: expected {len(header)} cells")
            ids.append(row[0])
            cells = []
            for text in row[1:]:
                if text == "":
                    cells.append(math.nan)
                    continue
                v = float(text)
                if not math.isfinite(v):
                    raise FormatError(f"{path}:{reader.line_num}: non-finite cell {text!r}")
                cells.append(v)
            rows.append(cells)
    return FeatureTable(ids, header[1:], np.array(rows, dtype=np.float64).reshape(len(ids), len(header) - 1))


def exact_mean(values: Iterable[float]) -> float:
    """Order-independent mean (correctly rounded sum)."""
    values = list(values)
    return math.fsum(values) / len(values)


def _reduce_image_records(records: Iterable[Mapping[str, object]]) -> dict[str, object]:
    # Listing-level value is the mean over images; MISSING cells are skipped.
    pooled: dict[str, list[float]] = defaultdict(list)
    names: set[str] = set()
    for rec in records:
        for name, value in rec.items():
            names.add(name)
            if value is MISSING:
                continue
            value = float(value)
            if not math.isfinite(value):
                raise AssemblyError(f"non-finite value for {name!r}")
            pooled[name].append(value)
    return {n: (exact_mean(pooled[n]) if pooled[n] else MISSING) for n in names}


def assemble_features(
    listings: Iterable[ListingRecord],
    image_features: Mapping[str, Iterable[Mapping[str, object]]] | None = None,
    aggregates: Mapping[str, Mapping[str, object]] | None = None,
    columns: Iterable[str] = (),
    include_mls: bool = True,
) -> FeatureTable:
    """Merge per-image and per-listing features into one table.

    Per-image records are averaged per feature name. ``columns`` adds
    expected feature names so a corpus lacking some image type still gets
    the full schema. Rows are sorted by listing id, columns by name.
    """
    image_features = image_features or {}
    aggregates = aggregates or {}
    listings = list(listings)
    known = {r.mls_num for r in listings}
    for source in (image_features, aggregates):
        unknown = sorted(set(source) - known)
        if unknown:
            raise AssemblyError(f"features for unknown listings: {unknown[:5]}")

    rows: dict[str, dict[str, object]] = {}
    for rec in listings:
        img = _reduce_image_records(image_features.get(rec.mls_num, ()))
        agg = dict(aggregates.get(rec.mls_num, {}))
        mls = rec.mls_features() if include_mls else {}
        clash = (set(img) & set(agg)) | (set(img) & set(mls)) | (set(agg) & set(mls))
        if clash:
            raise AssemblyError(f"duplicate feature names for {rec.mls_num}: {sorted(clash)}")
        rows[rec.mls_num] = {**mls, **img, **agg}

    names = set(columns)
    for cells in rows.values():
        names.update(cells)
    ordered = sorted(names)
    ids = sorted(rows)
    values = np.full((len(ids), len(ordered)), np.nan)
    for i, lid in enumerate(ids):
        for j, name in enumerate(ordered):
            v = rows[lid].get(name, MISSING)
            if v is MISSING:
                continue
            v = float(v)
            if not math.isfinite(v):
                raise AssemblyError(f"non-finite value for {name!r} in {lid}")
            values[i, j] = v
    return FeatureTable(ids, ordered, values)
