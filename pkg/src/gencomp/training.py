"""Model training from uint8 image stacks, and the committed reference run.

The reference run is the desk-scale configuration used by the acceptance
suite and ``scripts/train_reference.py``: 32x32 synthetic shapes, a 90/10
seeded split, and two bundles (M=100 and M=25) so that every (M, b) pair
in the evaluation table has a model.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import models
from .data_io import VideoSequence, gen_motion_video, gen_shapes, split_images, to_network

log = logging.getLogger(__name__)


def train_bundle(
    images,
    gan_cfg: models.GanConfig,
    loss_cfg: models.LossConfig | None = None,
    enc_cfg: models.EncoderConfig | None = None,
    log_every: int = 0,
) -> tuple[models.ModelBundle, models.GanHistory]:
    """Adversarial pre-training, then encoder training against the frozen decoder."""
    loss_cfg = loss_cfg or models.LossConfig()
    enc_cfg = enc_cfg or models.EncoderConfig(seed=gan_cfg.seed + 1)
    data = to_network(images)

    def gan_progress(it, hist):
        if log_every and (it + 1) % log_every == 0:
            log.info("gan %d %s", it + 1, hist.tail_means(log_every))

    def enc_progress(it, losses):
        if log_every and (it + 1) % log_every == 0:
            log.info("encoder %d loss %.4f", it + 1, float(np.mean(losses[-log_every:])))

    t0 = time.perf_counter()
    gen, disc, hist = models.train_gan(gan_cfg, data, gan_progress)
    t1 = time.perf_counter()
    enc, _ = models.train_encoder(gen, gan_cfg, loss_cfg, data, enc_cfg, enc_progress)
    t2 = time.perf_counter()
    scores = hist.tail_means()
    bundle = models.build_bundle(
        gan_cfg,
        loss_cfg,
        enc,
        gen,
        disc,
        encoder_iterations=enc_cfg.iterations,
        encoder_seed=enc_cfg.seed,
        train_images=len(data),
        real_score=round(scores["real_score"], 4),
        fake_score=round(scores["fake_score"], 4),
        gan_seconds=round(t1 - t0, 1),
        encoder_seconds=round(t2 - t1, 1),
    )
    return bundle, hist


# --------------------------------------------------------------------------
# reference run

REFERENCE_IMAGES = 3000
REFERENCE_SIZE = 32
REFERENCE_DATA_SEED = 0
REFERENCE_SPLIT_SEED = 0
REFERENCE_GAN = models.GanConfig(
    latent_dim=100,
    base_width=16,
    batch_size=32,
    g_steps=2,
    iterations=2000,
    seed=0,
)
REFERENCE_ENCODER = models.EncoderConfig(iterations=1500, batch_size=32, seed=1)
REFERENCE_LOSS = models.LossConfig()
REFERENCE_CLASSIFIER = models.ClassifierConfig(iterations=400, batch_size=32, beta1=0.9, seed=7)
REFERENCE_LATENT_DIMS = (100, 25)
REFERENCE_VIDEO_FRAMES = 257
REFERENCE_VIDEO_SEED = 0


@dataclass
class ReferenceData:
    train_images: np.ndarray
    train_labels: np.ndarray
    eval_images: np.ndarray
    eval_labels: np.ndarray


def reference_data(count: int = REFERENCE_IMAGES) -> ReferenceData:
    samples = gen_shapes(count, REFERENCE_SIZE, REFERENCE_DATA_SEED)
    images = np.stack([s.image for s in samples])
    labels = np.array([s.label for s in samples], dtype=np.int64)
    tr, ev = split_images(len(images), REFERENCE_SPLIT_SEED)
    return ReferenceData(images[tr], labels[tr], images[ev], labels[ev])


def reference_video(frames: int = REFERENCE_VIDEO_FRAMES) -> VideoSequence:
    return gen_motion_video(frames, REFERENCE_SIZE, REFERENCE_VIDEO_SEED)


@dataclass
class ReferenceRun:
    data: ReferenceData
    bundles: dict
    histories: dict
    classifier: models.Network
    seconds: dict = field(default_factory=dict)

    @property
    def total_seconds(self) -> float:
        return float(sum(self.seconds.values()))


def train_reference(latent_dims=REFERENCE_LATENT_DIMS, log_every: int = 0) -> ReferenceRun:
    data = reference_data()
    bundles, histories, seconds = {}, {}, {}
    for m in latent_dims:
        t0 = time.perf_counter()
        cfg = replace(REFERENCE_GAN, latent_dim=m)
        bundles[m], histories[m] = train_bundle(data.train_images, cfg, REFERENCE_LOSS, REFERENCE_ENCODER, log_every)
        seconds[f"bundle_{m}"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    clf = models.train_classifier(REFERENCE_GAN, to_network(data.train_images), data.train_labels, REFERENCE_CLASSIFIER)
    seconds["classifier"] = time.perf_counter() - t0
    return ReferenceRun(data, bundles, histories, clf, seconds)


def save_reference(run: ReferenceRun, directory) -> None:
    """Write ``m{M}.nb`` per bundle, ``classifier.nb`` and ``timings.json``."""
    import json
    from pathlib import Path

    from .container import write_bundle

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for m, bundle in run.bundles.items():
        write_bundle(d / f"m{m}.nb", bundle)
    (d / "classifier.nb").write_bytes(models.classifier_to_bytes(run.classifier, 3))
    (d / "timings.json").write_text(json.dumps({k: round(v, 1) for k, v in run.seconds.items()}, indent=2) + "\n")


def load_reference(directory, latent_dims=REFERENCE_LATENT_DIMS) -> ReferenceRun:
    """Reload a saved reference run; timings are the ones recorded at training time."""
    import json
    from pathlib import Path

    from .container import read_bundle

    d = Path(directory)
    bundles = {m: read_bundle(d / f"m{m}.nb") for m in latent_dims}
    clf = models.classifier_from_bytes((d / "classifier.nb").read_bytes())
    seconds = json.loads((d / "timings.json").read_text())
    return ReferenceRun(reference_data(), bundles, {}, clf, seconds)
