"""Bundled claim-count triangles, pinned by checksum of their canonical CSV form."""
from importlib import resources

from .triangle import Triangle, parse_triangle

DATASETS = {
    # general insurance portfolio, n = 10
    "general_insurance": "d09333f599a905d8b31e7d2a4a046b6770c713bf207f7b51bfe71ad03a01772b",
    # automobile bodily injury liability 1969-1976, n = 8
    "automobile": "eb9d6127ff9c62351ca435614f2cdc5d06829fc8801cc53133c40094c2949d20",
}


def load_dataset(name: str) -> Triangle:
    if name not in DATASETS:
        raise KeyError(f"unknown dataset {name!r}; choose from {sorted(DATASETS)}")
    text = resources.files("nbtri").joinpath("data", f"{name}.csv").read_text()
    t = parse_triangle(text)
    if t.checksum() != DATASETS[name]:
        raise ValueError(f"bundled dataset {name!r} failed its checksum")
    return t
