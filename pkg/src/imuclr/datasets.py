"""Disk-backed dataset assembly for the command-line pipeline.

Pre-training data comes either from a directory of skeleton motion files
(simulated on first use, cached under .simcache keyed by content hash,
rate, noise levels and seed) or from a directory of already simulated
time-series files. Evaluation data is described by a manifest referencing
per-device recordings, which are unit-scaled, resampled to the model rate,
assigned to skeleton joints and cut into windows.
"""

from __future__ import annotations

import hashlib
import os

import numpy as np

from . import formats
from .contrastive import PretrainSample
from .errors import ParseError, ShapeMismatch
from .inference import assign_to_joints, windows
from .simulate import ACCEL, GYRO, MotionTimeSeries, NoiseParams, resample, simulate_sequence

SKELETON_EXT = ".skel"
TIMESERIES_EXTS = (".ts", ".tsb")


def _file_hash(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()[:16]


def load_pretrain_samples(data_dir, fs=20.0, noise=None, seed=0, gravity=False, cache=True):
    """PretrainSamples from a directory, simulating skeleton files as needed.

    Files are taken in sorted name order; the noise stream of sequence i is
    seeded with seed xor i, so results do not depend on how work would be
    scheduled. Cached simulations are reused only when skeleton content,
    rate, noise levels and seed all match.
    """
    if noise is None:
        noise = NoiseParams()
    names = sorted(os.listdir(data_dir))
    skel_files = [n for n in names if n.endswith(SKELETON_EXT)]
    ts_files = [n for n in names if n.endswith(TIMESERIES_EXTS)]
    samples = []
    if ts_files and not skel_files:
        for name in ts_files:
            series = formats.read_timeseries_file(os.path.join(data_dir, name))
            samples.append(PretrainSample(seq_id=name.rsplit(".", 1)[0], series=series))
        return samples
    if not skel_files:
        raise ParseError(f"no {SKELETON_EXT} or time-series files in {data_dir}", path=data_dir)
    cache_dir = os.path.join(data_dir, ".simcache")
    if cache:
        os.makedirs(cache_dir, exist_ok=True)
    for index, name in enumerate(skel_files):
        path = os.path.join(data_dir, name)
        seq_id = name[: -len(SKELETON_EXT)]
        key = (
            f"{_file_hash(path)}_fs{fs!r}_sa{noise.sigma_accel!r}_sg{noise.sigma_gyro!r}"
            f"_seed{seed}_g{int(gravity)}"
        )
        cache_path = os.path.join(cache_dir, key + ".tsb")
        if cache and os.path.exists(cache_path):
            series = formats.read_timeseries_file(cache_path)
        else:
            seq = formats.read_skeleton_file(path)
            series = simulate_sequence(
                seq,
                noise=noise,
                target_fs=fs,
                rng=np.random.default_rng(seed ^ index),
                gravity=gravity,
            )
            if cache:
                formats.write_timeseries_file(cache_path, series, binary=True)
        samples.append(PretrainSample(seq_id=seq_id, series=series))
    return samples


def _device_series_to_mapping_input(series, locations):
    """Split a V=#devices recording into per-location (accel, gyro) pairs."""
    if series.num_joints != len(locations):
        raise ShapeMismatch(
            f"recording has {series.num_joints} device slots but manifest lists {len(locations)}"
        )
    out = {}
    for i, loc in enumerate(locations):
        accel = series.data[ACCEL, :, i].T
        gyro = series.data[GYRO, :, i].T
        out[loc] = (accel, gyro)
    return out


def load_eval_dataset(manifest_path, structure, model_fs, window=None):
    """(MotionTimeSeries, label_name) pairs from a manifest.

    Accelerometer channels are multiplied by the per-sample unit scale,
    everything is resampled to the model rate, devices are assigned to their
    mapped joints and long recordings are cut into non-overlapping windows.
    """
    manifest = formats.read_manifest_file(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))
    mapping = formats.read_mapping_file(os.path.join(base, manifest.mapping_path), structure)
    dataset = []
    for item in manifest.samples:
        path = os.path.join(base, item.data_path)
        series = formats.read_timeseries_file(path)
        if abs(series.sample_rate - item.native_fs) > 1e-9:
            raise ParseError(
                f"file says {series.sample_rate} Hz but manifest says {item.native_fs} Hz",
                path=path,
            )
        data = series.data.copy()
        data[ACCEL] *= item.unit_scale
        series = MotionTimeSeries(data, series.mask, series.sample_rate)
        if series.sample_rate != model_fs:
            c, t, v = series.data.shape
            flat = series.data.transpose(1, 0, 2).reshape(t, c * v)
            flat = resample(flat, series.sample_rate, model_fs)
            data = flat.reshape(-1, c, v).transpose(1, 0, 2)
            series = MotionTimeSeries(data, series.mask, model_fs)
        device_data = _device_series_to_mapping_input(series, item.locations)
        assigned = assign_to_joints(device_data, mapping, structure.num_joints, model_fs)
        for piece in windows(assigned, window):
            dataset.append((piece, item.label))
    return dataset
