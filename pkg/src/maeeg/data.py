"""EEG-like records: synthetic corpus, EEGB binary files, CSV ingestion, batching.

EEGB layout (little-endian)::

    magic  b"EEGB"
    u16    version (= 1)
    u16    channels
    u32    sample_rate
    u32    record_count
    per record:
        u32 subject, u32 session, u8 label, u32 L,
        channels * L float32 samples, channel-major
"""

from __future__ import annotations

import csv
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from maeeg.core.rng import Rng
from maeeg.errors import (
    BadMagicError,
    ConfigError,
    DataError,
    ParseError,
    TruncatedFileError,
    VersionMismatchError,
)

log = logging.getLogger(__name__)

CHANNELS = 6
SAMPLE_RATE = 100
STAGES = ("wake", "N1", "N2", "N3", "REM")
VALID_LENGTHS = (3000, 10000)

EEGB_MAGIC = b"EEGB"
EEGB_VERSION = 1
_HEADER = struct.Struct("<4sHHII")
_RECORD = struct.Struct("<IIBI")


@dataclass
class EegRecord:
    signal: np.ndarray  # (6, L) float32
    label: int
    subject_id: int = 0
    session_id: int = 0
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.signal = np.asarray(self.signal, dtype=np.float32)
        if self.signal.ndim != 2 or self.signal.shape[0] != CHANNELS:
            raise DataError(f"record must have shape ({CHANNELS}, L), got {self.signal.shape}")
        if not 0 <= int(self.label) < len(STAGES):
            raise DataError(f"label must lie in [0, {len(STAGES) - 1}], got {self.label}")
        self.label = int(self.label)

    @property
    def length(self) -> int:
        return self.signal.shape[1]


@dataclass
class Dataset:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def subset(self, indices) -> "Dataset":
        return Dataset([self.records[int(i)] for i in indices])

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.int64)

    def signals(self) -> np.ndarray:
        return np.stack([r.signal for r in self.records])

    def require_nonempty(self, what: str = "dataset"):
        if not self.records:
            raise DataError(f"{what} is empty")


# ----------------------------------------------------------------------
# synthetic corpus


@dataclass(frozen=True)
class ClassRecipe:
    name: str
    freq: float          # dominant frequency, Hz
    freq_jitter: float   # half-width of the per-record frequency draw
    amplitude: float
    bursts: bool = False
    burst_rate: float = 0.0      # expected bursts per second
    burst_duration: float = 1.0  # seconds


DEFAULT_RECIPES = (
    ClassRecipe("wake", 10.0, 1.0, 1.0),
    ClassRecipe("N1", 5.0, 0.5, 0.8),
    ClassRecipe("N2", 13.0, 0.5, 1.6, bursts=True, burst_rate=0.25, burst_duration=1.0),
    ClassRecipe("N3", 1.0, 0.5, 2.5),
    ClassRecipe("REM", 6.5, 0.5, 0.4),
)


@dataclass(frozen=True)
class SynthSpec:
    records_per_class: int = 40
    subjects: int = 5
    sessions_per_subject: int = 4
    length: int = 3000
    noise: float = 0.3
    seed: int = 0
    recipes: tuple = DEFAULT_RECIPES

    def __post_init__(self):
        if len(self.recipes) != len(STAGES):
            raise ConfigError(f"need {len(STAGES)} class recipes, got {len(self.recipes)}")
        if len({r.freq for r in self.recipes}) != len(self.recipes):
            raise ConfigError("class recipes must differ in dominant band")
        if self.records_per_class < 1 or self.subjects < 1 or self.sessions_per_subject < 1:
            raise ConfigError("records_per_class, subjects and sessions_per_subject must be >= 1")
        if self.length < 96:
            raise ConfigError(f"length {self.length} is shorter than one token")


def synth_record(label: int, length: int, rng: Rng, recipes=DEFAULT_RECIPES,
                 noise: float = 0.3, gain: float = 1.0) -> EegRecord:
    """One record: class-band sinusoids with per-channel phase, bursts, white noise.

    Draw order: frequency, then per channel (gain, phase), then burst
    envelope (bursty classes only), then noise.
    """
    if not 0 <= label < len(recipes):
        raise DataError(f"label must lie in [0, {len(recipes) - 1}], got {label}")
    recipe = recipes[label]
    t = np.arange(length) / SAMPLE_RATE
    freq = recipe.freq + rng.uniform(-recipe.freq_jitter, recipe.freq_jitter)
    ch_gain = rng.uniform(0.8, 1.2, size=CHANNELS)
    phase = rng.uniform(0.0, 2 * np.pi, size=CHANNELS)
    carrier = np.sin(2 * np.pi * freq * t[None, :] + phase[:, None]) * ch_gain[:, None]
    envelope = np.ones(length)
    if recipe.bursts:
        duration = length / SAMPLE_RATE
        n_bursts = max(1, int(rng.integers(0, 2 * recipe.burst_rate * duration + 1)))
        centers = rng.uniform(0.0, duration, size=n_bursts)
        envelope = np.zeros(length)
        for c in centers:
            envelope += np.exp(-0.5 * ((t - c) / (recipe.burst_duration / 4)) ** 2)
        envelope = np.minimum(envelope, 1.0)
    signal = gain * recipe.amplitude * carrier * envelope[None, :]
    signal = signal + rng.normal(0.0, noise, size=(CHANNELS, length))
    return EegRecord(signal.astype(np.float32), label)


def synth_dataset(spec: SynthSpec) -> Dataset:
    """Balanced corpus; record ``i`` has label ``i % 5``.

    Subjects cycle over groups of five records and sessions over groups of
    ``5 * subjects`` records, so every subject/session holds every class.
    """
    base = Rng(spec.seed).child("synth")
    n_classes = len(spec.recipes)
    subject_gain = [float(base.child("subject", s).uniform(0.8, 1.2)) for s in range(spec.subjects)]
    records = []
    for i in range(spec.records_per_class * n_classes):
        label = i % n_classes
        subject = (i // n_classes) % spec.subjects
        session = (i // (n_classes * spec.subjects)) % spec.sessions_per_subject
        rec = synth_record(label, spec.length, base.child("record", i), spec.recipes,
                           spec.noise, subject_gain[subject])
        rec.subject_id, rec.session_id = subject, session
        records.append(rec)
    return Dataset(records)


# ----------------------------------------------------------------------
# splits and label budgets


def split_dataset(ds: Dataset, rng: Rng, fractions=(0.6, 0.2, 0.2)):
    """Stratified-by-label split into (train, val, test) by record."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must sum to 1, got {fractions}")
    parts = [[], [], []]
    labels = ds.labels
    for label in np.unique(labels):
        idx = np.flatnonzero(labels == label)
        idx = idx[rng.child("split", int(label)).permutation(len(idx))]
        n_train = int(round(fractions[0] * len(idx)))
        n_val = int(round(fractions[1] * len(idx)))
        parts[0].extend(idx[:n_train])
        parts[1].extend(idx[n_train : n_train + n_val])
        parts[2].extend(idx[n_train + n_val :])
    return tuple(ds.subset(sorted(p)) for p in parts)


def select_label_budget(ds: Dataset, rng: Rng, fraction: float | None = None,
                        n_subjects: int | None = None) -> Dataset:
    """Restrict ``ds`` to a label budget.

    ``fraction`` keeps ``max(1, round(fraction * S))`` of each subject's ``S``
    sessions; ``n_subjects`` keeps every record of that many subjects.  Both
    selections are seeded by ``rng``.
    """
    if (fraction is None) == (n_subjects is None):
        raise ConfigError("give exactly one of fraction or n_subjects")
    subjects = sorted({r.subject_id for r in ds})
    if n_subjects is not None:
        if not 1 <= n_subjects <= len(subjects):
            raise ConfigError(f"n_subjects must lie in [1, {len(subjects)}], got {n_subjects}")
        chosen = set(int(s) for s in rng.child("subjects").choice(subjects, n_subjects, replace=False))
        return Dataset([r for r in ds if r.subject_id in chosen])
    if not 0.0 < fraction <= 1.0:
        raise ConfigError(f"label fraction must lie in (0, 1], got {fraction}")
    keep = set()
    for s in subjects:
        sessions = sorted({r.session_id for r in ds if r.subject_id == s})
        n_keep = max(1, round(fraction * len(sessions)))
        picked = rng.child("sessions", s).choice(sessions, n_keep, replace=False)
        keep.update((s, int(p)) for p in picked)
    return Dataset([r for r in ds if (r.subject_id, r.session_id) in keep])


def batch_iter(ds: Dataset, batch_size: int, rng: Rng, epoch: int = 0):
    """Yield shuffled batches of records; the final partial batch is kept."""
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    order = rng.child("epoch", epoch).permutation(len(ds))
    for start in range(0, len(ds), batch_size):
        yield [ds.records[int(i)] for i in order[start : start + batch_size]]


def stack(records) -> tuple[np.ndarray, np.ndarray]:
    signals = np.stack([r.signal for r in records])
    labels = np.array([r.label for r in records], dtype=np.int64)
    return signals, labels


# ----------------------------------------------------------------------
# EEGB binary format


def write_eegb(ds: Dataset, path) -> None:
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(_HEADER.pack(EEGB_MAGIC, EEGB_VERSION, CHANNELS, SAMPLE_RATE, len(ds)))
        for rec in ds:
            fh.write(_RECORD.pack(rec.subject_id, rec.session_id, rec.label, rec.length))
            fh.write(np.ascontiguousarray(rec.signal, dtype="<f4").tobytes())


def read_eegb(path) -> Dataset:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if len(blob) < _HEADER.size:
        if not EEGB_MAGIC.startswith(blob[:4]):
            raise BadMagicError(f"{path}: bad magic at offset 0: {blob[:4]!r}")
        raise TruncatedFileError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, version, channels, rate, count = _HEADER.unpack_from(blob, 0)
    if magic != EEGB_MAGIC:
        raise BadMagicError(f"{path}: bad magic at offset 0: expected {EEGB_MAGIC!r}, got {magic!r}")
    if version != EEGB_VERSION:
        raise VersionMismatchError(f"{path}: EEGB version {version}, this reader supports {EEGB_VERSION}")
    if channels != CHANNELS:
        raise DataError(f"{path}: {channels} channels, expected {CHANNELS}")
    offset = _HEADER.size
    records = []
    for i in range(count):
        if offset + _RECORD.size > len(blob):
            raise TruncatedFileError(f"{path}: record {i} header truncated at offset {offset}")
        subject, session, label, length = _RECORD.unpack_from(blob, offset)
        offset += _RECORD.size
        n_bytes = 4 * channels * length
        if offset + n_bytes > len(blob):
            raise TruncatedFileError(f"{path}: record {i} samples truncated at offset {offset}")
        signal = np.frombuffer(blob, dtype="<f4", count=channels * length, offset=offset)
        offset += n_bytes
        records.append(EegRecord(signal.reshape(channels, length).astype(np.float32), label,
                                 subject, session, rate))
    if offset != len(blob):
        raise ParseError(f"{path}: {len(blob) - offset} trailing bytes after {count} records")
    return Dataset(records)


# ----------------------------------------------------------------------
# CSV ingestion


@dataclass(frozen=True)
class CsvLayout:
    """How sample data appears in an ingestion CSV.

    ``wide``: header ``subject,session,label`` followed by ``6 * L`` sample
    columns, channel-major.  ``file``: header ``subject,session,label,file``
    where ``file`` points (relative to the CSV) at a ``.npy`` array or a
    headerless CSV of 6 rows.
    """

    mode: str = "wide"
    strict: bool = True
    allowed_lengths: tuple = VALID_LENGTHS

    def __post_init__(self):
        if self.mode not in ("wide", "file"):
            raise ConfigError(f"unknown CSV layout mode {self.mode!r}")


def _cell_float(value: str, row: int, col: int) -> float:
    try:
        return float(value)
    except ValueError:
        raise ParseError(f"non-numeric cell {value!r} at row {row}, column {col}") from None


def _cell_int(value: str, row: int, col: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise ParseError(f"non-integer cell {value!r} at row {row}, column {col}") from None


def _load_signal_file(path: Path) -> np.ndarray:
    if not path.exists():
        raise DataError(f"referenced signal file {path} does not exist")
    if path.suffix == ".npy":
        return np.load(path)
    return np.loadtxt(path, delimiter=",", ndmin=2)


def read_csv(path, layout: CsvLayout = CsvLayout()) -> Dataset:
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    records = []
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty CSV")
        header = [h.strip().lower() for h in header]
        if header[:3] != ["subject", "session", "label"]:
            raise DataError(f"{path}: header must start with subject,session,label; got {header[:3]}")
        if layout.mode == "file" and header[3:] != ["file"]:
            raise DataError(f"{path}: file layout expects a single 'file' column after label")
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            subject = _cell_int(row[0], row_no, 1)
            session = _cell_int(row[1], row_no, 2)
            label = _cell_int(row[2], row_no, 3)
            if not 0 <= label < len(STAGES):
                raise DataError(f"row {row_no}: label {label} outside [0, {len(STAGES) - 1}]")
            if layout.mode == "wide":
                values = np.array([_cell_float(v, row_no, c) for c, v in enumerate(row[3:], start=4)])
                if values.size % CHANNELS:
                    raise DataError(f"row {row_no}: {values.size} samples not divisible by {CHANNELS} channels")
                signal = values.reshape(CHANNELS, -1)
            else:
                signal = np.asarray(_load_signal_file(path.parent / row[3]))
                if signal.ndim != 2 or signal.shape[0] != CHANNELS:
                    raise DataError(f"row {row_no}: signal has shape {signal.shape}, expected ({CHANNELS}, L)")
            length = signal.shape[1]
            if length not in layout.allowed_lengths:
                log.warning("row %d: length %d not in %s", row_no, length, layout.allowed_lengths)
                if layout.strict:
                    raise DataError(f"row {row_no}: length {length} not in {layout.allowed_lengths} (strict mode)")
            records.append(EegRecord(signal.astype(np.float32), label, subject, session))
    return Dataset(records)


def load_dataset(path) -> Dataset:
    """Read an EEGB file, or a wide-layout CSV when the suffix is ``.csv``."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return read_csv(path)
    return read_eegb(path)

