import numpy as np
import pytest

from leafgrasp.stereo import DepthImage, StereoRig

ACCEPTANCE = []


def pytest_addoption(parser):
    parser.addoption("--regen-golden", action="store_true", default=False,
                     help="rewrite tests/golden from the current implementation")


@pytest.fixture
def regen_golden(request):
    return request.config.getoption("--regen-golden")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


def down_rig(width=128, height=128, f=200.0, position=(1.5, 0.75, 0.9), baseline=0.06):
    """Camera looking straight down from ``position``."""
    pose = np.diag([1.0, -1.0, -1.0, 1.0])
    pose[:3, 3] = position
    return StereoRig(fx=f, fy=f, cx=(width - 1) / 2, cy=(height - 1) / 2, baseline=baseline,
                     width=width, height=height, cam_pose=pose)


def ellipse_mask(shape, center, axes, angle=0.0):
    v, u = np.mgrid[0:shape[0], 0:shape[1]].astype(float)
    c, s = np.cos(angle), np.sin(angle)
    x = (u - center[0]) * c + (v - center[1]) * s
    y = -(u - center[0]) * s + (v - center[1]) * c
    return (x / axes[0]) ** 2 + (y / axes[1]) ** 2 <= 1.0


def flat_depth(rig, z, mask=None):
    vals = np.full(rig.shape, float(z))
    if mask is not None:
        vals = np.where(mask, vals, 0.0)
    return DepthImage(vals, rig)


@pytest.fixture
def rig():
    return down_rig()
