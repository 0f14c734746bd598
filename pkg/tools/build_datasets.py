"""Rebuild the bundled UCI CSV files from the KEEL / common_datasets wheels.

    pip download keel-ds==0.2.5 common-datasets==0.3.10 --no-deps -d wheels/
    python tools/build_datasets.py wheels/ data/

The LIBSVM-only sets (fourclass, ILPD, planning) are not redistributed by any
PyPI package; drop them into data/ by hand under the manifest's file names.
"""
import csv
import glob
import os
import sys
import zipfile

KEEL = {
    "austra": "keel_ds/data/balanced/raw/australian.dat",
    "breast": "keel_ds/data/balanced/raw/wisconsin.dat",
    "diabetes": "keel_ds/data/balanced/raw/pima.dat",
    "pima": "keel_ds/data/balanced/raw/pima.dat",
    "heart": "keel_ds/data/balanced/raw/heart.dat",
    "ionospheres": "keel_ds/data/balanced/raw/ionosphere.dat",
    "liver": "keel_ds/data/balanced/raw/bupa.dat",
    "wdbc": "keel_ds/data/balanced/raw/wdbc.dat",
}
COMMON = {
    "fertility": "common_datasets/data/classification/fertility/fertility_Diagnosis.txt",
    "german": "common_datasets/data/classification/german/german.data-numeric.txt",
    "haberman": "common_datasets/data/classification/haberman/haberman.dat",
}


def _rows(text):
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("@") or line.startswith("%"):
            continue
        if "," in line:
            yield [tok.strip() for tok in line.split(",")]
        else:
            yield line.split()


def main(wheel_dir, out_dir):
    keel = zipfile.ZipFile(glob.glob(os.path.join(wheel_dir, "keel_ds-*.whl"))[0])
    common = zipfile.ZipFile(glob.glob(os.path.join(wheel_dir, "common_datasets-*.whl"))[0])
    os.makedirs(out_dir, exist_ok=True)
    sources = [(name, keel, member) for name, member in KEEL.items()]
    sources += [(name, common, member) for name, member in COMMON.items()]
    for name, archive, member in sorted(sources):
        rows = list(_rows(archive.read(member).decode("utf-8")))
        width = {len(r) for r in rows}
        if len(width) != 1:
            raise SystemExit(f"{name}: ragged rows {sorted(width)}")
        path = os.path.join(out_dir, f"{name}.csv")
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
        labels = sorted({r[-1] for r in rows})
        print(f"{name:12s} n={len(rows):5d} d={len(rows[0]) - 1:3d} labels={labels}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
