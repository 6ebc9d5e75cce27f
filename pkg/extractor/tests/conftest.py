import pytest

from _imagehelpers import CRITERION_LINES, make_image, write_manifest


@pytest.hookimpl(trylast=True)
def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the extraction-tool verdict line after the test summary."""
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria (extractor)")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def image_dir(tmp_path):
    d = tmp_path / "images"
    d.mkdir()
    make_image(d / "red.png", color=(200, 40, 40))
    make_image(d / "blue.png", color=(30, 60, 220))
    make_image(d / "grad.png", gradient=True)
    make_image(d / "grad.jpg", gradient=True)
    return d


@pytest.fixture
def simple_manifest(tmp_path, image_dir):
    return write_manifest(
        tmp_path / "m.tsv",
        [
            (image_dir / "red.png", "img_red", ["a red frame", "solid red"]),
            (image_dir / "blue.png", "img_blue", ["a blue frame"]),
            (image_dir / "grad.png", "img_grad", ["a gradient"]),
        ],
    )
