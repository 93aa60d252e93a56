import gzip
import os
from pathlib import Path

import numpy as np
import pytest

from qms.dataio import LabeledDataset
from qms.model import QmsModel

ROOT = Path(__file__).resolve().parents[1]
DATA_DIR = Path(os.environ.get("QMS_DATA_DIR", ROOT / "data"))


def blob_dataset(n=200, sep=10.0, seed=0):
    """Two isotropic 2-D Gaussian blobs whose centres are ``sep`` sigma apart."""
    rng = np.random.default_rng(seed)
    y = np.repeat([0, 1], n // 2)
    centres = np.array([[-sep / 2, 0.0], [sep / 2, 0.0]])
    X = (centres[y] + rng.standard_normal((n, 2))).T
    return LabeledDataset(X, y, ("left", "right"), ("x0", "x1"))


def write_csv(path, header, rows):
    lines = [",".join(header)] + [",".join(str(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def dataset_to_csv(ds: LabeledDataset, path, label_col="label"):
    header = list(ds.feature_names) + [label_col]
    rows = [[repr(float(v)) for v in ds.X[:, i]] + [ds.class_names[ds.y[i]]]
            for i in range(ds.n)]
    return write_csv(path, header, rows)


def random_model(rng, q, p, m, alpha=0.3):
    return QmsModel(rng.standard_normal((m, q, p)), rng.standard_normal((m, q)), alpha,
                    tuple(f"c{i}" for i in range(m)))


@pytest.fixture
def blobs():
    return blob_dataset()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- real datasets --------------------------------------------------------

def dry_bean_csv() -> Path:
    """Location of the UCI Dry Bean CSV (env QMS_DRY_BEAN_CSV overrides)."""
    return Path(os.environ.get("QMS_DRY_BEAN_CSV", DATA_DIR / "Dry_Bean_Dataset.csv"))


def _idx(path):
    raw = gzip.open(path).read() if str(path).endswith(".gz") else Path(path).read_bytes()
    ndim = raw[3]
    dims = [int.from_bytes(raw[4 + 4 * i: 8 + 4 * i], "big") for i in range(ndim)]
    return np.frombuffer(raw[4 + 4 * ndim:], dtype=np.uint8).reshape(dims)


def mnist_dir() -> Path:
    return Path(os.environ.get("QMS_MNIST_DIR", DATA_DIR / "mnist"))


def mnist_arrays(split):
    """(images flattened to 784 columns, labels) for ``train`` or ``t10k``."""
    d = mnist_dir()
    imgs = _idx(d / f"{split}-images-idx3-ubyte.gz")
    labels = _idx(d / f"{split}-labels-idx1-ubyte.gz")
    return imgs.reshape(imgs.shape[0], -1), labels


def mnist_csv(path, images, labels):
    """Write the flattened-pixel CSV layout the loader consumes."""
    header = ",".join([f"px{i}" for i in range(images.shape[1])] + ["label"])
    body = np.column_stack([images, labels]).astype(np.int64)
    np.savetxt(path, body, fmt="%d", delimiter=",", header=header, comments="")
    return path


# --- acceptance summary ---------------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not rep.failed:
        return
    number, title = mark.args
    prev = _CRITERIA.get(number, (title, True))
    _CRITERIA[number] = (title, prev[1] and not rep.failed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")
