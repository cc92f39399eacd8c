#!/usr/bin/env python3
"""Fetch the benchmark datasets and convert them to the headered CSVs the
shipped manifests in configs/ expect.

Usage:
    python3 scripts/fetch_data.py [dataset ...]

With no arguments, fetches the three evaluation-gated datasets
(human_activity, pendigits, satimage). Pass dataset names or "all" for the
rest (letter, forest, census, mnist). Files land under data/<name>/.

Needs outbound network access (UCI ML repository and a MNIST mirror).
Only the standard library is used.
"""

import csv
import gzip
import io
import os
import random
import struct
import sys
import urllib.request
import zipfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA = os.path.join(ROOT, "data")

UCI = "https://archive.ics.uci.edu/ml/machine-learning-databases"
UCI_STATIC = "https://archive.ics.uci.edu/static/public"
MNIST_MIRROR = "https://ossci-datasets.s3.amazonaws.com/mnist"


def fetch(url, binary=True):
    print(f"  GET {url}")
    with urllib.request.urlopen(url, timeout=120) as resp:
        data = resp.read()
    return data if binary else data.decode("utf-8")


def outdir(name):
    d = os.path.join(DATA, name)
    os.makedirs(d, exist_ok=True)
    return d


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)
    print(f"  wrote {path} ({len(rows)} rows)")


def human_activity():
    """UCI Human Activity Recognition Using Smartphones (561 features,
    canonical train/test split, activity names as labels)."""
    d = outdir("human_activity")
    blob = fetch(f"{UCI_STATIC}/240/human+activity+recognition+using+smartphones.zip")
    outer = zipfile.ZipFile(io.BytesIO(blob))
    inner = zipfile.ZipFile(io.BytesIO(outer.read("UCI HAR Dataset.zip")))

    def read_txt(name):
        return inner.read(f"UCI HAR Dataset/{name}").decode("utf-8").strip().splitlines()

    labels = dict(line.split() for line in read_txt("activity_labels.txt"))
    header = [f"f{i}" for i in range(1, 562)] + ["label"]
    for split, out in (("train", "train.csv"), ("test", "test.csv")):
        x_lines = read_txt(f"{split}/X_{split}.txt")
        y_lines = read_txt(f"{split}/y_{split}.txt")
        rows = []
        for x_line, y in zip(x_lines, y_lines):
            rows.append(x_line.split() + [labels[y.strip()]])
        write_csv(os.path.join(d, out), header, rows)


def pendigits():
    """UCI Pen-Based Recognition of Handwritten Digits (16 attributes,
    canonical .tra/.tes split)."""
    d = outdir("pendigits")
    header = [f"a{i}" for i in range(16)] + ["label"]
    for src, out in (("pendigits.tra", "train.csv"), ("pendigits.tes", "test.csv")):
        text = fetch(f"{UCI}/pendigits/{src}", binary=False)
        rows = [line.strip().split(",") for line in text.strip().splitlines()]
        write_csv(os.path.join(d, out), header, rows)


def satimage():
    """UCI Statlog Landsat Satellite (36 attributes). The two canonical
    files are concatenated; the manifest re-splits 70/30 stratified, which
    is how the experiment protocol treats this dataset."""
    d = outdir("satimage")
    rows = []
    for src in ("sat.trn", "sat.tst"):
        text = fetch(f"{UCI}/statlog/satimage/{src}", binary=False)
        rows.extend(line.strip().split() for line in text.strip().splitlines())
    header = [f"a{i}" for i in range(36)] + ["label"]
    write_csv(os.path.join(d, "all.csv"), header, rows)


def letter():
    """UCI Letter Recognition (16 attributes, 26 classes, single file)."""
    d = outdir("letter")
    text = fetch(f"{UCI}/letter-recognition/letter-recognition.data", binary=False)
    header = [f"a{i}" for i in range(16)] + ["label"]
    rows = []
    for line in text.strip().splitlines():
        parts = line.strip().split(",")
        rows.append(parts[1:] + [parts[0]])  # class letter comes first
    write_csv(os.path.join(d, "all.csv"), header, rows)


def forest():
    """UCI Covertype. Train = the canonical first 11,340 rows; test = a
    seeded 50,000-row sample of the remainder. The two pre-expanded one-hot
    groups are collapsed back into categorical columns so the manifest can
    declare them."""
    d = outdir("forest")
    blob = fetch(f"{UCI}/covtype/covtype.data.gz")
    text = gzip.decompress(blob).decode("utf-8")
    cont = [
        "elevation", "aspect", "slope", "horiz_hydro", "vert_hydro",
        "horiz_road", "hillshade_9am", "hillshade_noon", "hillshade_3pm",
        "horiz_fire",
    ]
    header = cont + ["wilderness", "soil", "label"]

    def convert(line):
        v = line.strip().split(",")
        wilderness = str(v[10:14].index("1"))
        soil = str(v[14:54].index("1"))
        return v[:10] + [wilderness, soil, v[54]]

    lines = text.strip().splitlines()
    train_rows = [convert(l) for l in lines[:11340]]
    rest = lines[11340:]
    rng = random.Random(0)
    test_rows = [convert(l) for l in rng.sample(rest, 50000)]
    write_csv(os.path.join(d, "train.csv"), header, train_rows)
    write_csv(os.path.join(d, "test.csv"), header, test_rows)


def census():
    """UCI US Census 1990 (fully discretized attributes). The protocol here
    is an approximation: the paper's exact label column and subsample are
    unpublished. We use iYearsch (18 categories) as the label, drop caseid,
    and take seeded samples of 100,000 train / 50,000 test rows."""
    d = outdir("census")
    blob = fetch(f"{UCI}/census1990-mld/USCensus1990.data.txt")
    text = blob.decode("utf-8")
    lines = text.strip().splitlines()
    header_in = lines[0].strip().split(",")
    caseid = header_in.index("caseid")
    label = header_in.index("iYearsch")
    feature_idx = [i for i in range(len(header_in)) if i not in (caseid, label)]
    header = [header_in[i] for i in feature_idx] + ["iYearsch"]

    rng = random.Random(0)
    sample = rng.sample(lines[1:], 150000)
    rows = []
    for line in sample:
        v = line.strip().split(",")
        rows.append([v[i] for i in feature_idx] + [v[label]])
    write_csv(os.path.join(d, "train.csv"), header, rows[:100000])
    write_csv(os.path.join(d, "test.csv"), header, rows[100000:])


def mnist():
    """MNIST flattened to 784 attributes, canonical splits."""
    d = outdir("mnist")

    def read_idx_images(name):
        raw = gzip.decompress(fetch(f"{MNIST_MIRROR}/{name}"))
        _, n, h, w = struct.unpack(">IIII", raw[:16])
        return [raw[16 + i * h * w : 16 + (i + 1) * h * w] for i in range(n)]

    def read_idx_labels(name):
        raw = gzip.decompress(fetch(f"{MNIST_MIRROR}/{name}"))
        (_, n) = struct.unpack(">II", raw[:8])
        return list(raw[8 : 8 + n])

    header = [f"p{i}" for i in range(784)] + ["label"]
    for images, labels, out in (
        ("train-images-idx3-ubyte.gz", "train-labels-idx1-ubyte.gz", "train.csv"),
        ("t10k-images-idx3-ubyte.gz", "t10k-labels-idx1-ubyte.gz", "test.csv"),
    ):
        xs = read_idx_images(images)
        ys = read_idx_labels(labels)
        rows = [[str(b) for b in x] + [str(y)] for x, y in zip(xs, ys)]
        write_csv(os.path.join(d, out), header, rows)


FETCHERS = {
    "human_activity": human_activity,
    "pendigits": pendigits,
    "satimage": satimage,
    "letter": letter,
    "forest": forest,
    "census": census,
    "mnist": mnist,
}

DEFAULT = ["human_activity", "pendigits", "satimage"]


def main():
    args = sys.argv[1:]
    if not args:
        targets = DEFAULT
    elif args == ["all"]:
        targets = list(FETCHERS)
    else:
        unknown = [a for a in args if a not in FETCHERS]
        if unknown:
            sys.exit(f"unknown dataset(s): {unknown}; choose from {sorted(FETCHERS)}")
        targets = args
    for name in targets:
        print(f"fetching {name} ...")
        FETCHERS[name]()
    print("done.")


if __name__ == "__main__":
    main()
