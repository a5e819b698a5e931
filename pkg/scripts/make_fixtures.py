#!/usr/bin/env python3
"""Write the bundled synthetic datasets into data/ as GeoJSON + CSV."""

import sys
from pathlib import Path

import numpy as np

from cartomorph import fixtures
from cartomorph.geomodel import to_geojson

OUT = Path(__file__).resolve().parent.parent / "data"


def write_static(name: str, mapmodel) -> None:
    (OUT / f"{name}.geojson").write_bytes(to_geojson(mapmodel))
    rows = ["id,value"]
    for reg in mapmodel.regions:
        rows.append(f"{reg.region_id},{reg.statistic!r}")
    (OUT / f"{name}.csv").write_text("\n".join(rows) + "\n")
    print(f"wrote {name}: {len(mapmodel.regions)} regions")


def write_series(name: str, dataset) -> None:
    (OUT / f"{name}.geojson").write_bytes(to_geojson(dataset.mapmodel))
    header = "id," + ",".join(dataset.times)
    rows = [header]
    for i, rid in enumerate(dataset.mapmodel.region_ids()):
        rows.append(rid + "," + ",".join(repr(float(v)) for v in dataset.statistics[:, i]))
    (OUT / f"{name}.csv").write_text("\n".join(rows) + "\n")
    print(f"wrote {name}: {dataset.step_count} steps x {len(dataset.mapmodel.regions)} regions")


def main() -> int:
    OUT.mkdir(exist_ok=True)
    write_static("france_style", fixtures.france_style())
    write_static("germany_style", fixtures.germany_style())
    write_static("netherlands_style", fixtures.netherlands_style())
    write_static("usa_style", fixtures.usa_style())
    write_static("europe_style", fixtures.europe_style())
    write_static("eight_region", fixtures.eight_region_map())
    write_static("two_region", fixtures.two_region_map())
    write_series("eight_region_weekly", fixtures.smooth_series(fixtures.eight_region_map(), steps=20))
    write_series("eight_region_volatile", fixtures.volatile_series(fixtures.eight_region_map(), steps=12))
    return 0


if __name__ == "__main__":
    sys.exit(main())
