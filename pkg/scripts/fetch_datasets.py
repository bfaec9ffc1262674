#!/usr/bin/env python3
"""Download helper for the benchmark graph-classification datasets.

The test suite never needs the network: dataset-dependent checks skip when
the files are absent.  This script documents the canonical sources and
unpacks them into the layout load_tudataset expects:

    <root>/<NAME>/<NAME>_A.txt
    <root>/<NAME>/<NAME>_graph_indicator.txt
    <root>/<NAME>/<NAME>_graph_labels.txt
    <root>/<NAME>/<NAME>_node_labels.txt        (when published)

Usage: fetch_datasets.py [--root DIR] [NAME ...]
Default root: $PATTERNLAB_DATA_DIR or ./data.
"""
from __future__ import annotations

import argparse
import io
import os
import sys
import urllib.request
import zipfile
from pathlib import Path

BASE = "https://www.chrsmrrs.com/graphkerneldatasets"

DATASETS = {
    "NCI1": f"{BASE}/NCI1.zip",
    "NCI109": f"{BASE}/NCI109.zip",
    "DD": f"{BASE}/DD.zip",
    "PROTEINS": f"{BASE}/PROTEINS.zip",
    "IMDB-BINARY": f"{BASE}/IMDB-BINARY.zip",
    "deezer_ego_nets": f"{BASE}/deezer_ego_nets.zip",
    "twitch_egos": f"{BASE}/twitch_egos.zip",
}


def fetch(name: str, root: Path) -> None:
    url = DATASETS[name]
    print(f"fetching {name} from {url}")
    with urllib.request.urlopen(url) as resp:
        payload = resp.read()
    with zipfile.ZipFile(io.BytesIO(payload)) as zf:
        zf.extractall(root)
    print(f"  -> {root / name}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("names", nargs="*", default=[], help="dataset names (default: all)")
    parser.add_argument("--root", default=os.environ.get("PATTERNLAB_DATA_DIR", "data"))
    args = parser.parse_args()
    names = args.names or sorted(DATASETS)
    unknown = [n for n in names if n not in DATASETS]
    if unknown:
        print(f"unknown datasets: {unknown}; known: {sorted(DATASETS)}", file=sys.stderr)
        return 2
    root = Path(args.root)
    root.mkdir(parents=True, exist_ok=True)
    for name in names:
        fetch(name, root)
    return 0


if __name__ == "__main__":
    sys.exit(main())
