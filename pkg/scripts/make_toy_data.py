#!/usr/bin/env python3
"""Write the three-activity toy dataset to disk for CLI experiments.

Creates under the output directory:
    skel/                 skeleton motion files (train split)
    descriptions.tsv      sequence -> description assignments
    embeddings.txt        description embeddings (orthonormal, dim 64)
    labels.txt            label candidate embeddings (one per class)
    real/                 held-out rotated recordings as 3-device samples
                          (left_wrist, right_wrist, head) + manifest

Usage: python scripts/make_toy_data.py --out toy_data [--train 20 --test 6]
"""

import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from imuclr import formats, toy
from imuclr.simulate import MotionTimeSeries
from imuclr.text_embeddings import DescriptionSet, TextEmbeddingTable

DEVICE_JOINTS = {"left_wrist": 20, "right_wrist": 21, "head": 15}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True)
    parser.add_argument("--train", type=int, default=20, help="sequences per class")
    parser.add_argument("--test", type=int, default=6, help="held-out sequences per class")
    parser.add_argument("--seed", type=int, default=100)
    args = parser.parse_args()

    skel_dir = os.path.join(args.out, "skel")
    real_dir = os.path.join(args.out, "real")
    os.makedirs(skel_dir, exist_ok=True)
    os.makedirs(real_dir, exist_ok=True)

    rng = np.random.default_rng(args.seed)
    descriptions = DescriptionSet()
    for c, name in enumerate(toy.CLASS_NAMES):
        for i in range(args.train):
            seq = toy.make_toy_sequence(c, rng)
            seq_id = f"{name}_{i:03d}"
            formats.write_skeleton_file(os.path.join(skel_dir, seq_id + ".skel"), seq)
            ids = toy.class_description_ids(c)
            descriptions.add(seq_id, ids[0])
            for extra in ids[1:]:
                descriptions.add(seq_id, extra, paraphrase=True)
    formats.write_description_file(os.path.join(args.out, "descriptions.tsv"), descriptions)

    table, labels = toy.toy_text_assets()
    formats.write_embedding_file(os.path.join(args.out, "embeddings.txt"), table)
    label_table = TextEmbeddingTable(
        dim=table.dim,
        entries={
            f"label{c}": (name, labels.embeddings[c]) for c, name in enumerate(labels.names)
        },
    )
    formats.write_embedding_file(os.path.join(args.out, "labels.txt"), label_table)

    # held-out recordings, rotated, reduced to three on-body devices
    test = toy.make_toy_test_data(args.test, seed=args.seed + 899)
    lines = ["mapping mapping.txt"]
    joints = list(DEVICE_JOINTS.values())
    for i, (series, label) in enumerate(test):
        device = MotionTimeSeries(
            series.data[:, :, joints], np.ones(len(joints), dtype=bool), series.sample_rate
        )
        rec = f"rec{i:03d}.ts"
        formats.write_timeseries_file(os.path.join(real_dir, rec), device)
        locs = ",".join(DEVICE_JOINTS)
        lines.append(f"sample\t{rec}\t{label}\t{locs}\t{series.sample_rate:g}\t1.0")
    with open(os.path.join(real_dir, "mapping.txt"), "w", encoding="utf-8") as fh:
        for loc in DEVICE_JOINTS:
            fh.write(f"{loc} {loc}\n")
    with open(os.path.join(real_dir, "manifest.tsv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {3 * args.train} training skeletons and {len(test)} held-out recordings to {args.out}")


if __name__ == "__main__":
    main()
