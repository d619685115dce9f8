#!/usr/bin/env python3
"""Regenerate the bundled demo replays under demos/data/.

Two fixtures, each 31 days of synthetic hourly weather for a single
grid point (four variables with diurnal cycles plus AR(1) noise, and a
reference forecast column for the temperature target):

* ``aurora.csv`` — stationary throughout; the standard demo replay.
* ``aurora_shift.csv`` — identical generator, but a +3-sigma mean shift
  hits every variable at hour 696 (two thirds through the demo's tick
  range) so drift-triggered policies have something to react to.

Fully deterministic: rerunning this script reproduces both files byte
for byte.
"""

from dataclasses import replace
from pathlib import Path

from driftcast.ingest import save_replay
from driftcast.synthetic import SyntheticSpec, generate

HERE = Path(__file__).resolve().parent

DEMO_SPEC = SyntheticSpec(
    variables=(
        "temperature_2m",
        "relative_humidity_2m",
        "wind_speed_10m",
        "surface_pressure",
    ),
    points_per_side=1,
    n_hours=744,
    start="2024-03-01T00:00:00",
    seed=20240301,
    reference_targets=("temperature_2m",),
    reference_noise_sigma=0.4,
)

SHIFT_SPEC = replace(DEMO_SPEC, shift_at_hour=696, shift_sigma=3.0)


def main():
    data_dir = HERE / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    for name, spec in (("aurora.csv", DEMO_SPEC), ("aurora_shift.csv", SHIFT_SPEC)):
        out = data_dir / name
        save_replay(generate(spec), out)
        print(f"wrote {out}")


if __name__ == "__main__":
    main()
