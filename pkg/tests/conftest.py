import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from topoimg.geometry import FrequencySweep, Layout2D, Layout3D  # noqa: E402
from topoimg.oracle import BornPointScatterer3D, DiskScatterer, synth_dataset_2d, synth_dataset_3d  # noqa: E402
from topoimg.topofield import MaterialSpec  # noqa: E402

DISK_CENTER = (0.03, -0.02)
DISK_RADIUS = 0.015


@pytest.fixture(scope="session")
def small_2d():
    """Two emitters, two frequencies; quick to evaluate anywhere."""
    lay = Layout2D(emitter_azimuths=(0.0, 90.0))
    sweep = FrequencySweep.from_ghz([2, 4])
    disk = DiskScatterer((0.01, 0.0), 0.01, MaterialSpec.dielectric(3.0))
    return synth_dataset_2d([disk], lay, sweep)


@pytest.fixture(scope="session")
def diel_disk_2d():
    disk = DiskScatterer(DISK_CENTER, DISK_RADIUS, MaterialSpec.dielectric(3.0))
    return synth_dataset_2d([disk], Layout2D(), FrequencySweep.from_ghz([2, 4, 6, 8]))


@pytest.fixture(scope="session")
def cond_disk_2d():
    disk = DiskScatterer(DISK_CENTER, DISK_RADIUS, MaterialSpec.conducting())
    return synth_dataset_2d([disk], Layout2D(), FrequencySweep.from_ghz([2, 4, 6, 8]))


@pytest.fixture(scope="session")
def small_3d():
    lay = Layout3D(emitter_azimuths=(40.0, 160.0, 280.0), emitter_altitudes=(54.0, 90.0, 126.0))
    sweep = FrequencySweep.from_ghz([3, 4.25])
    return synth_dataset_3d([BornPointScatterer3D((0.02, 0.01, -0.015), 0.05)], lay, sweep)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(results):
        ok, detail = results[cid]
        terminalreporter.write_line(f"{cid} {'PASS' if ok else 'FAIL'} | {detail}")
