"""Synthetic corpus, EEGB files, CSV ingestion and batching."""

import hashlib
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maeeg.core import Rng
from maeeg.data import (
    CHANNELS,
    CsvLayout,
    Dataset,
    EegRecord,
    SynthSpec,
    batch_iter,
    load_dataset,
    read_csv,
    read_eegb,
    select_label_budget,
    split_dataset,
    synth_dataset,
    synth_record,
    write_eegb,
)
from maeeg.errors import BadMagicError, ConfigError, DataError, ParseError, TruncatedFileError, VersionMismatchError


def peak_frequency(signal, rate=100):
    spec = np.abs(np.fft.rfft(signal.astype(np.float64), axis=-1)) ** 2
    freqs = np.fft.rfftfreq(signal.shape[-1], 1 / rate)
    power = spec.mean(axis=0)
    power[0] = 0.0
    return freqs[np.argmax(power)]


@pytest.mark.parametrize("seed", range(5))
def test_delta_class_peaks_below_4hz(seed):
    rec = synth_record(3, 3000, Rng(seed))
    assert peak_frequency(rec.signal) < 4.0


@pytest.mark.parametrize("seed", range(5))
def test_alpha_class_peaks_in_8_to_12hz(seed):
    rec = synth_record(0, 3000, Rng(seed))
    assert 8.0 <= peak_frequency(rec.signal) <= 12.0


def test_spindle_class_peaks_near_13hz_and_is_bursty():
    rec = synth_record(2, 3000, Rng(0), noise=0.0)
    assert 12.0 <= peak_frequency(rec.signal) <= 14.0
    envelope = np.abs(rec.signal).max(axis=0).reshape(30, 100).max(axis=1)
    assert envelope.min() < 0.2 * envelope.max()


def test_synth_record_is_deterministic():
    a = synth_record(1, 3000, Rng(3, ("r",)))
    b = synth_record(1, 3000, Rng(3, ("r",)))
    assert a.signal.tobytes() == b.signal.tobytes()
    assert a.signal.shape == (CHANNELS, 3000) and a.signal.dtype == np.float32


def test_synth_record_rejects_bad_label():
    with pytest.raises(DataError):
        synth_record(5, 3000, Rng(0))


def test_synth_dataset_counts_and_ids():
    ds = synth_dataset(SynthSpec(records_per_class=40))
    assert len(ds) == 200
    assert np.bincount(ds.labels).tolist() == [40] * 5
    subjects = {r.subject_id for r in ds}
    assert subjects == set(range(5))
    for s in subjects:
        assert sorted({r.label for r in ds if r.subject_id == s}) == list(range(5))


def test_synth_seeds_do_not_share_signals():
    a = synth_dataset(SynthSpec(records_per_class=4, seed=1))
    b = synth_dataset(SynthSpec(records_per_class=4, seed=2))
    ha = {hashlib.sha256(r.signal.tobytes()).hexdigest() for r in a}
    hb = {hashlib.sha256(r.signal.tobytes()).hexdigest() for r in b}
    assert len(ha) == len(a) and not ha & hb


def test_synth_spec_validation():
    with pytest.raises(ConfigError):
        SynthSpec(records_per_class=0)
    with pytest.raises(ConfigError):
        SynthSpec(length=50)


def test_split_is_disjoint_stratified_partition():
    ds = synth_dataset(SynthSpec(records_per_class=10))
    train, val, test = split_dataset(ds, Rng(0))
    ids = [set(map(id, part.records)) for part in (train, val, test)]
    assert not ids[0] & ids[1] and not ids[0] & ids[2] and not ids[1] & ids[2]
    assert sum(len(i) for i in ids) == len(ds)
    assert (len(train), len(val), len(test)) == (30, 10, 10)
    assert np.bincount(test.labels).tolist() == [2] * 5


def band_features(ds, bands=((0.5, 2), (4, 6), (6, 8), (8, 12), (12, 14))):
    feats = []
    for rec in ds:
        spec = np.abs(np.fft.rfft(rec.signal.astype(np.float64), axis=-1)) ** 2
        freqs = np.fft.rfftfreq(rec.length, 1 / rec.sample_rate)
        power = spec.mean(axis=0)
        feats.append([np.log(power[(freqs >= lo) & (freqs < hi)].sum() + 1e-12) for lo, hi in bands])
    return np.array(feats)


def test_band_power_oracle_separates_classes():
    """The corpus is learnable: a least-squares linear readout of log band powers."""
    ds = synth_dataset(SynthSpec(records_per_class=40))
    train, _, test = split_dataset(ds, Rng(0))
    xtr, xte = band_features(train), band_features(test)
    mu, sd = xtr.mean(0), xtr.std(0)
    xtr, xte = (xtr - mu) / sd, (xte - mu) / sd
    design = np.hstack([xtr, np.ones((len(xtr), 1))])
    weights, *_ = np.linalg.lstsq(design, np.eye(5)[train.labels], rcond=None)
    pred = np.argmax(np.hstack([xte, np.ones((len(xte), 1))]) @ weights, axis=1)
    assert np.mean(pred == test.labels) > 0.95


def test_eegb_round_trip_is_bit_exact(tmp_path):
    ds = synth_dataset(SynthSpec(records_per_class=2, length=3000))
    path = tmp_path / "c.eegb"
    write_eegb(ds, path)
    back = read_eegb(path)
    assert len(back) == len(ds)
    for a, b in zip(ds, back):
        assert a.signal.tobytes() == b.signal.tobytes()
        assert (a.label, a.subject_id, a.session_id) == (b.label, b.subject_id, b.session_id)
    assert load_dataset(path).labels.tolist() == ds.labels.tolist()


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1),
                          st.integers(1, 40), st.integers(0, 2**31)), max_size=5))
def test_eegb_round_trip_property(tmp_path_factory, specs):
    records = [EegRecord(np.random.default_rng(seed).normal(size=(CHANNELS, length)).astype(np.float32),
                         label, subject, session)
               for label, subject, session, length, seed in specs]
    path = tmp_path_factory.mktemp("eegb") / "r.eegb"
    write_eegb(Dataset(records), path)
    back = read_eegb(path)
    assert [r.signal.tobytes() for r in back] == [r.signal.tobytes() for r in records]
    assert [(r.label, r.subject_id, r.session_id) for r in back] == \
           [(r.label, r.subject_id, r.session_id) for r in records]


def _written(tmp_path):
    ds = synth_dataset(SynthSpec(records_per_class=1, length=200))
    path = tmp_path / "c.eegb"
    write_eegb(ds, path)
    return path, path.read_bytes()


def test_eegb_truncation_is_reported(tmp_path):
    path, blob = _written(tmp_path)
    for cut in (3, 10, 20, len(blob) - 1):
        path.write_bytes(blob[:cut])
        with pytest.raises(TruncatedFileError if cut >= 4 else (TruncatedFileError, BadMagicError)):
            read_eegb(path)


def test_eegb_bad_magic_names_offset(tmp_path):
    path, blob = _written(tmp_path)
    path.write_bytes(b"XEGB" + blob[4:])
    with pytest.raises(BadMagicError, match="offset 0"):
        read_eegb(path)


def test_eegb_version_mismatch(tmp_path):
    path, blob = _written(tmp_path)
    path.write_bytes(blob[:4] + struct.pack("<H", 2) + blob[6:])
    with pytest.raises(VersionMismatchError):
        read_eegb(path)


def test_eegb_trailing_bytes(tmp_path):
    path, blob = _written(tmp_path)
    path.write_bytes(blob + b"\0")
    with pytest.raises(ParseError):
        read_eegb(path)


def _wide_csv(path, rows, length=3000):
    header = ["subject", "session", "label"] + [f"s{i}" for i in range(CHANNELS * length)]
    lines = [",".join(header)]
    for subject, session, label, values in rows:
        lines.append(",".join([str(subject), str(session), str(label)] + [str(v) for v in values]))
    path.write_text("\n".join(lines) + "\n")
    return path


def test_read_csv_minimal_record(tmp_path):
    values = np.arange(CHANNELS * 3000) % 7 * 0.5
    ds = read_csv(_wide_csv(tmp_path / "a.csv", [(2, 1, 4, values)]))
    assert len(ds) == 1
    rec = ds[0]
    assert (rec.subject_id, rec.session_id, rec.label) == (2, 1, 4)
    np.testing.assert_array_equal(rec.signal, values.reshape(CHANNELS, 3000).astype(np.float32))


def test_read_csv_bad_label(tmp_path):
    with pytest.raises(DataError, match="label 7"):
        read_csv(_wide_csv(tmp_path / "a.csv", [(0, 0, 7, np.zeros(CHANNELS * 3000))]))


def test_read_csv_non_numeric_cell_names_row_and_column(tmp_path):
    values = ["0.0"] * (CHANNELS * 3000)
    values[5] = "abc"
    with pytest.raises(ParseError, match="row 2, column 9"):
        read_csv(_wide_csv(tmp_path / "a.csv", [(0, 0, 1, values)]))


def test_read_csv_length_policy(tmp_path, caplog):
    path = _wide_csv(tmp_path / "a.csv", [(0, 0, 1, np.zeros(CHANNELS * 50))], length=50)
    with pytest.raises(DataError, match="strict"):
        read_csv(path)
    ds = read_csv(path, CsvLayout(strict=False))
    assert len(ds) == 1 and ds[0].length == 50
    assert "length 50" in caplog.text


def test_read_csv_wrong_channel_count(tmp_path):
    path = tmp_path / "a.csv"
    path.write_text("subject,session,label,s0,s1,s2,s3,s4\n0,0,1,1,2,3,4,5\n")
    with pytest.raises(DataError, match="channels"):
        read_csv(path, CsvLayout(strict=False))


def test_read_csv_file_layout(tmp_path):
    signal = np.random.default_rng(0).normal(size=(CHANNELS, 3000)).astype(np.float32)
    np.save(tmp_path / "r0.npy", signal)
    (tmp_path / "index.csv").write_text("subject,session,label,file\n3,0,2,r0.npy\n")
    ds = read_csv(tmp_path / "index.csv", CsvLayout(mode="file"))
    assert ds[0].signal.tobytes() == signal.tobytes() and ds[0].label == 2


def test_record_validation():
    with pytest.raises(DataError):
        EegRecord(np.zeros((5, 3000)), 0)
    with pytest.raises(DataError):
        EegRecord(np.zeros((6, 3000)), -1)


def test_batch_iter_sizes_order_and_coverage():
    ds = synth_dataset(SynthSpec(records_per_class=2, length=200))
    batches = list(batch_iter(ds, 4, Rng(0)))
    assert [len(b) for b in batches] == [4, 4, 2]
    ids = [id(r) for b in batches for r in b]
    assert sorted(ids) == sorted(id(r) for r in ds)
    again = [id(r) for b in batch_iter(ds, 4, Rng(0)) for r in b]
    other_epoch = [id(r) for b in batch_iter(ds, 4, Rng(0), epoch=1) for r in b]
    assert ids == again
    assert ids != other_epoch
    with pytest.raises(ConfigError):
        list(batch_iter(ds, 0, Rng(0)))


def test_label_budget_fraction_and_subjects():
    ds = synth_dataset(SynthSpec(records_per_class=40, subjects=5, sessions_per_subject=4))
    half = select_label_budget(ds, Rng(0), fraction=0.5)
    for s in range(5):
        assert len({r.session_id for r in half if r.subject_id == s}) == 2
    tiny = select_label_budget(ds, Rng(0), fraction=0.001)
    for s in range(5):
        assert len({r.session_id for r in tiny if r.subject_id == s}) == 1
    one = select_label_budget(ds, Rng(1), n_subjects=1)
    assert len({r.subject_id for r in one}) == 1
    assert len(one) == 40
    with pytest.raises(ConfigError):
        select_label_budget(ds, Rng(0), fraction=0.0)
    with pytest.raises(ConfigError):
        select_label_budget(ds, Rng(0), n_subjects=9)
