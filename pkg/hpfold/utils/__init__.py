"""Utility modules for hpfold."""

from hpfold.utils.drawing import draw_conformation, render_ascii
from hpfold.utils.io import (
    append_jsonl,
    read_csv,
    read_json,
    read_jsonl,
    write_csv,
    write_json,
    write_jsonl,
)
from hpfold.utils.seeding import STREAMS, RngStreams

__all__ = [
    "RngStreams",
    "STREAMS",
    "append_jsonl",
    "draw_conformation",
    "read_csv",
    "read_json",
    "read_jsonl",
    "render_ascii",
    "write_csv",
    "write_json",
    "write_jsonl",
]
