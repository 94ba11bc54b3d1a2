"""Three-dimensional imaging of a small point-like scatterer.

A Born dipole sits off-centre below the horizontal plane. The 81 emitters on
the sphere illuminate it with parallel-polarized plane waves and 27 receivers
per emitter record the vertical field. The TD minimum lands on the
scatterer. Plain TE is symmetric in z because every receiver lies in the
z = 0 plane; after the reciprocity swap the TE maximum recovers the depth.

A 21^3 grid keeps the run under a minute on one core.

Run:  python3 demos/02_point_3d.py
"""

import time

import numpy as np

from topoimg.geometry import FrequencySweep, Layout3D
from topoimg.oracle import BornPointScatterer3D, synth_dataset_3d
from topoimg.topofield import InspectionGrid, MaterialSpec, evaluate_grid


def main():
    loc = np.array([0.02, 0.01, -0.015])
    sweep = FrequencySweep.from_ghz([3, 4.25, 5.5])
    data = synth_dataset_3d([BornPointScatterer3D(tuple(loc), 0.05)], Layout3D(), sweep)
    grid = InspectionGrid([(-0.1, 0.1)] * 3, 21)
    material = MaterialSpec.dielectric(2.0)
    print(f"scatterer at {np.round(loc * 1e3, 1).tolist()} mm, grid spacing {grid.spacing[0] * 1e3:.1f} mm")

    t0 = time.perf_counter()
    td = evaluate_grid(data, material, grid)
    print(f"TD argmin          {np.round(td.extremum_point() * 1e3, 1).tolist()} mm  ({time.perf_counter() - t0:.1f}s)")

    te = evaluate_grid(data, material, grid, kind="TE").values
    asym = np.max(np.abs(te - te[:, :, ::-1])) / te.max()
    zvar = np.max(te.max(axis=2) - te.min(axis=2)) / te.max()
    print(f"TE z-asymmetry     {asym:.1e}   (variation along z: {zvar:.1%} of the peak)")

    sw = evaluate_grid(data, material, grid, kind="TE", reciprocity=True)
    print(f"swapped TE argmax  {np.round(sw.extremum_point() * 1e3, 1).tolist()} mm")


if __name__ == "__main__":
    main()
