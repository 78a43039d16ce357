#!/usr/bin/env python3
"""Smoke test for the schemalink_py extension module.

Build the extension first:

    cargo build -p schemalink-py

The script copies the built cdylib into a temp directory under the import
name Python expects, imports it, and exercises every binding.
"""

import json
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def find_cdylib():
    names = ["libschemalink_py.so", "libschemalink_py.dylib", "schemalink_py.dll"]
    for profile in ("debug", "release"):
        for name in names:
            path = ROOT / "target" / profile / name
            if path.exists():
                return path
    sys.exit("extension not found; run: cargo build -p schemalink-py")


work = Path(tempfile.mkdtemp(prefix="schemalink-py-"))
suffix = ".pyd" if sys.platform == "win32" else ".so"
shutil.copyfile(find_cdylib(), work / f"schemalink_py{suffix}")
sys.path.insert(0, str(work))

import schemalink_py as sl  # noqa: E402

TABLES = [
    {
        "db_id": "concert_singer",
        "table_names_original": ["singer", "concert"],
        "table_names": ["singer", "concert"],
        "column_names_original": [
            [-1, "*"],
            [0, "Singer_ID"],
            [0, "Name"],
            [0, "Citizenship"],
            [1, "concert_Name"],
            [1, "Year"],
        ],
        "column_names": [
            [-1, "*"],
            [0, "singer id"],
            [0, "name"],
            [0, "citizenship"],
            [1, "concert name"],
            [1, "year"],
        ],
        "column_types": ["text", "number", "text", "text", "text", "number"],
    }
]

GOLD = [
    {
        "question": "How many singers do we have ?",
        "labels": [[9, 16, "singer"]],
        "db_id": "concert_singer",
    },
    {
        "question": "Show name and citizenship of each singer .",
        "labels": [
            [5, 9, "singer.Name"],
            [14, 25, "singer.Citizenship"],
            [34, 40, "singer"],
        ],
        "db_id": "concert_singer",
    },
]

tables_path = work / "tables.json"
tables_path.write_text(json.dumps(TABLES))
gold_path = work / "gold.jsonl"
gold_path.write_text("".join(json.dumps(r) + "\n" for r in GOLD))
empty_path = work / "empty.jsonl"
empty_path.write_text(
    "".join(json.dumps({"question": r["question"], "labels": []}) + "\n" for r in GOLD)
)

# tokenizer: word runs plus single punctuation marks, offsets in characters
assert sl.tokenize("How many singers do we have?") == [
    ("How", 0, 3),
    ("many", 4, 8),
    ("singers", 9, 16),
    ("do", 17, 19),
    ("we", 20, 22),
    ("have", 23, 27),
    ("?", 27, 28),
]

assert sl.normalize_name("Singer_ID") == ["singer", "id"]
assert sl.normalize_name("highSchooler") == ["high", "schooler"]

assert sl.parse_target("singer.Name") == ("singer", "Name")
assert sl.parse_target("singer") == ("singer", None)

assert sl.round_half_up(0.25, 1) == 0.3

precision, recall, f1 = sl.metrics(967, 243, 487)
assert sl.round_half_up(precision, 1) == 79.9
assert sl.round_half_up(recall, 1) == 66.5
assert sl.round_half_up(f1, 1) == 72.6

catalog = sl.SchemaCatalog(str(tables_path))
assert catalog.db_ids() == ["concert_singer"]
assert catalog.link("How many singers do we have ?", "concert_singer") == [
    (9, 16, "singer")
]
assert catalog.link("How many singers do we have ?", "concert_singer", config="h") == []
one = catalog.link("Show name and citizenship of each singer .", "concert_singer",
                   strategy="single")
assert (5, 9, "singer.Name") in one
try:
    catalog.link("anything", "concert_singer", config="zz")
except ValueError as e:
    assert "zz" in str(e)
else:
    raise AssertionError("unknown config alias should raise")

scores = sl.evaluate_files(str(gold_path), str(gold_path))
assert scores["tp"] == 4 and scores["fp"] == 0 and scores["fn"] == 0
assert scores["f1"] == 100.0

agreement = sl.cohen_kappa_files(str(gold_path), str(gold_path))
assert agreement["kappa"] == 1.0
assert agreement["granularity"] == "target"

assert sl.pairwise_f1_files(str(gold_path), str(gold_path)) == 100.0
assert sl.pairwise_f1_files(str(gold_path), str(empty_path)) == 0.0

stats = sl.dataset_stats_file(str(gold_path))
assert stats["sentences"] == 2
assert stats["Total"]["labels"] == 4
assert stats["Table"]["labels"] == 2
assert stats["Column"]["labels"] == 2

r, p, n = sl.pearson_r([1.0, 2.0, 3.0, 4.0], [2.0, 4.0, 6.0, 8.0])
assert abs(r - 1.0) < 1e-12 and p < 1e-10 and n == 4
r, _, _ = sl.pearson_r([1.0, 2.0, 3.0, 4.0], [8.0, 6.0, 4.0, 2.0])
assert abs(r + 1.0) < 1e-12

print("smoke test passed")
