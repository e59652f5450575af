import os

import numpy as np
import pytest

from gencomp import models
from gencomp.data_io import gen_shapes, to_network

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def toy_bundle():
    """A quickly trained 16x16 bundle with M=6; quality is irrelevant, contracts are not."""
    cfg = models.GanConfig(latent_dim=6, height=16, width=16, base_width=4, batch_size=8, iterations=30, seed=3)
    data = to_network(np.stack([s.image for s in gen_shapes(40, 16, 0)]))
    gen, disc, _ = models.train_gan(cfg, data)
    enc, _ = models.train_encoder(gen, cfg, models.LossConfig(), data, models.EncoderConfig(iterations=20, batch_size=8))
    return models.build_bundle(cfg, models.LossConfig(), enc, gen, disc, note="toy")


@pytest.fixture(scope="session")
def reference_run():
    """The reference run, trained here unless GENCOMP_REFERENCE_DIR points at a saved one.

    A loaded run carries the timings recorded when it was trained.
    """
    from gencomp.training import load_reference, train_reference

    directory = os.environ.get("GENCOMP_REFERENCE_DIR")
    if directory:
        return load_reference(directory)
    return train_reference()


@pytest.fixture
def criterion():
    """``criterion(n, ok, detail)`` records one acceptance line and returns ``ok``."""

    def record(n: int, ok: bool, detail: str) -> bool:
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
