"""Generator, discriminator, encoder and classifier networks and their training.

Images enter the networks as float64 (N, C, H, W) arrays in [-1, 1]. The
decoder is pre-trained adversarially, then frozen while the encoder learns
to invert it under the hybrid pixel/perceptual distortion.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from . import container
from .nn import (
    AdamState,
    DivergenceError,
    LayerSpec,
    Network,
    ShapeError,
    adam_step,
    batch_norm,
    conv2d,
    deconv2d,
    dense,
    init_network,
    leaky_relu,
    relu,
    reshape,
    sigmoid,
    tanh,
)

log = logging.getLogger(__name__)

_PROB_FLOOR = 1e-300


@dataclass
class GanConfig:
    latent_dim: int = 100
    height: int = 32
    width: int = 32
    channels: int = 1
    base_width: int = 16
    batch_size: int = 64
    d_steps: int = 1
    g_steps: int = 1
    iterations: int = 2000
    lr: float = 2e-4
    beta1: float = 0.5
    seed: int = 0
    generator_loss: str = "non_saturating"

    def __post_init__(self):
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")
        for d in (self.height, self.width):
            if d < 16 or d & (d - 1):
                raise ValueError(f"image side {d} must be a power of two >= 16")
        if self.generator_loss not in ("non_saturating", "minimax"):
            raise ValueError(f"unknown generator loss {self.generator_loss!r}")

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return (self.channels, self.height, self.width)


@dataclass
class LossConfig:
    lambda1: float = 1.0
    lambda2: float = 0.002
    feature_seed: int = 1234

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("loss weights must be non-negative")
        if self.lambda1 == 0 and self.lambda2 == 0:
            raise ValueError("at least one loss weight must be positive")


@dataclass
class EncoderConfig:
    iterations: int = 1500
    batch_size: int = 64
    lr: float = 2e-4
    beta1: float = 0.5
    seed: int = 1


# --------------------------------------------------------------------------
# architectures


def _levels(cfg: GanConfig) -> int:
    # number of stride-2 stages between a 4-pixel minimum side and the image
    return int(math.log2(min(cfg.height, cfg.width))) - 2


def generator_specs(cfg: GanConfig) -> list[LayerSpec]:
    n = _levels(cfg)
    ch = cfg.base_width * 2 ** (n - 1)
    h0, w0 = cfg.height >> n, cfg.width >> n
    specs = [dense(cfg.latent_dim, ch * h0 * w0), reshape((ch, h0, w0)), batch_norm(ch), relu()]
    for _ in range(n - 1):
        specs += [deconv2d(ch, ch // 2), batch_norm(ch // 2), relu()]
        ch //= 2
    specs += [deconv2d(ch, cfg.channels), tanh()]
    return specs


def _conv_trunk(cfg: GanConfig) -> tuple[list[LayerSpec], int]:
    n = _levels(cfg)
    ch = cfg.base_width
    specs = [conv2d(cfg.channels, ch), leaky_relu(0.2)]
    for _ in range(n - 1):
        specs += [conv2d(ch, ch * 2), batch_norm(ch * 2), leaky_relu(0.2)]
        ch *= 2
    flat = ch * (cfg.height >> n) * (cfg.width >> n)
    return specs + [reshape((flat,))], flat


def discriminator_specs(cfg: GanConfig) -> list[LayerSpec]:
    specs, flat = _conv_trunk(cfg)
    return specs + [dense(flat, 1), sigmoid()]


def encoder_specs(cfg: GanConfig) -> list[LayerSpec]:
    specs, flat = _conv_trunk(cfg)
    return specs + [dense(flat, cfg.latent_dim), tanh()]


def classifier_specs(cfg: GanConfig, num_classes: int) -> list[LayerSpec]:
    specs, flat = _conv_trunk(cfg)
    return specs + [dense(flat, num_classes)]


# --------------------------------------------------------------------------
# perceptual features


class FeatureExtractor:
    """Fixed random conv net: four stride-2 conv + leaky-ReLU stages.

    Weights use He-normal scaling so activations keep unit-order magnitude
    through the four stages. Parameters never change after construction.
    """

    CHANNELS = (8, 16, 32, 64)

    def __init__(self, image_shape, seed: int):
        c = image_shape[0]
        specs = []
        for out in self.CHANNELS:
            specs += [conv2d(c, out), leaky_relu(0.2)]
            c = out
        self.net = Network(specs, image_shape, seed)
        rng = np.random.default_rng(seed)
        c = image_shape[0]
        for layer in self.net.layers:
            if layer.spec.kind == "conv2d":
                fan_in = layer.spec.in_size * layer.spec.kernel**2
                layer.init(rng, math.sqrt(2.0 / fan_in))
        self.seed = seed

    def __call__(self, x: np.ndarray, record: bool = False) -> np.ndarray:
        f = self.net.forward(x, train=False, record=record)
        return f.reshape(len(f), -1)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        grad = grad.reshape((len(grad),) + self.net.output_shape)
        return self.net.backward(grad)[1]


def _norm_and_grad(diff: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample Euclidean norm of ``diff`` and its gradient (0 where the norm is 0)."""
    flat = diff.reshape(len(diff), -1)
    norm = np.sqrt(np.sum(flat * flat, axis=1))
    safe = np.where(norm > 0, norm, 1.0)
    grad = flat / safe[:, None]
    return norm, grad.reshape(diff.shape)


def distortion_loss(x, x_hat, cfg: LossConfig, features: FeatureExtractor | None = None):
    """Mean over the batch of lambda1*||x - x_hat|| + lambda2*||F(x) - F(x_hat)||.

    Returns ``(loss, d loss / d x_hat)``. Norms are Euclidean, not squared.
    """
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ShapeError(f"shape mismatch {x.shape} vs {x_hat.shape}")
    n = len(x)
    pix, g = _norm_and_grad(x_hat - x)
    loss = cfg.lambda1 * pix
    grad = cfg.lambda1 * g
    if cfg.lambda2 > 0:
        if features is None:
            raise ValueError("lambda2 > 0 needs a feature extractor")
        fx = features(x)
        fxh = features(x_hat, record=True)
        perc, gf = _norm_and_grad(fxh - fx)
        loss = loss + cfg.lambda2 * perc
        grad = grad + cfg.lambda2 * features.backward(gf)
    return float(loss.mean()), grad / n


# --------------------------------------------------------------------------
# adversarial pre-training


def gan_losses(d_real: np.ndarray, d_fake: np.ndarray) -> float:
    """Discriminator loss -[log d(x) + log(1 - d(g(z)))], batch-averaged."""
    return float(-np.mean(np.log(np.maximum(d_real, _PROB_FLOOR))) - np.mean(np.log(np.maximum(1 - d_fake, _PROB_FLOOR))))


def sample_prior(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, size=(n, m))


@dataclass
class GanHistory:
    d_loss: list = field(default_factory=list)
    real_score: list = field(default_factory=list)
    fake_score: list = field(default_factory=list)

    def tail_means(self, k: int = 100) -> dict:
        return {
            "d_loss": float(np.mean(self.d_loss[-k:])),
            "real_score": float(np.mean(self.real_score[-k:])),
            "fake_score": float(np.mean(self.fake_score[-k:])),
        }


def _batches(rng: np.random.Generator, n: int, batch: int):
    """Endless stream of index batches, reshuffled every epoch."""
    while True:
        order = rng.permutation(n)
        for i in range(0, n - batch + 1 if n >= batch else 1, batch):
            yield order[i : i + batch]


def train_gan(cfg: GanConfig, data: np.ndarray, progress: Callable | None = None):
    """Adversarially train a generator and discriminator.

    ``data`` is (N, C, H, W) in [-1, 1]. Returns ``(generator,
    discriminator, history)``.
    """
    data = np.asarray(data, dtype=np.float64)
    if len(data) == 0:
        raise ValueError("empty dataset")
    if data.shape[1:] != cfg.image_shape:
        raise ShapeError(f"data shape {data.shape[1:]} != {cfg.image_shape}")
    rng = np.random.default_rng(cfg.seed)
    g_seed, d_seed = (int(s) for s in rng.integers(0, 2**31, size=2))
    gen = init_network(generator_specs(cfg), (cfg.latent_dim,), g_seed)
    disc = init_network(discriminator_specs(cfg), cfg.image_shape, d_seed)
    g_opt = AdamState(lr=cfg.lr, beta1=cfg.beta1)
    d_opt = AdamState(lr=cfg.lr, beta1=cfg.beta1)
    hist = GanHistory()
    batches = _batches(rng, len(data), cfg.batch_size)
    for it in range(cfg.iterations):
        for _ in range(cfg.d_steps):
            real = data[next(batches)]
            b = len(real)
            fake = gen.forward(sample_prior(rng, b, cfg.latent_dim), train=True, record=False)
            p_real = disc.forward(real, train=True)
            grads_r, _ = disc.backward(-1.0 / (np.maximum(p_real, _PROB_FLOOR) * b))
            p_fake = disc.forward(fake, train=True)
            grads_f, _ = disc.backward(1.0 / (np.maximum(1.0 - p_fake, _PROB_FLOOR) * b))
            adam_step(d_opt, disc.parameters(), [a + c for a, c in zip(grads_r, grads_f)])
            d_loss = gan_losses(p_real, p_fake)
        for _ in range(cfg.g_steps):
            b = cfg.batch_size
            fake = gen.forward(sample_prior(rng, b, cfg.latent_dim), train=True)
            p = disc.forward(fake, train=True)
            if cfg.generator_loss == "non_saturating":
                g_out = -1.0 / (np.maximum(p, _PROB_FLOOR) * b)
            else:
                g_out = -1.0 / (np.maximum(1.0 - p, _PROB_FLOOR) * b)
            _, g_in = disc.backward(g_out)
            grads, _ = gen.backward(g_in)
            adam_step(g_opt, gen.parameters(), grads)
        if not math.isfinite(d_loss):
            raise DivergenceError(f"non-finite discriminator loss at iteration {it}")
        hist.d_loss.append(d_loss)
        hist.real_score.append(float(p_real.mean()))
        hist.fake_score.append(float(p_fake.mean()))
        if progress is not None:
            progress(it, hist)
    return gen, disc, hist


# --------------------------------------------------------------------------
# encoder training


def network_digest(net: Network) -> int:
    """FNV-1a 64 over the float64 bytes of every tensor, in declaration order."""
    return container.fnv1a64(b"".join(np.ascontiguousarray(t).tobytes() for _, t in net.named_tensors()))


def train_encoder(
    decoder: Network,
    gan_cfg: GanConfig,
    loss_cfg: LossConfig,
    data: np.ndarray,
    enc_cfg: EncoderConfig | None = None,
    progress: Callable | None = None,
) -> tuple[Network, list]:
    """Train an encoder against a frozen decoder; returns ``(encoder, losses)``."""
    if decoder is None:
        raise ValueError("a trained decoder is required")
    enc_cfg = enc_cfg or EncoderConfig()
    data = np.asarray(data, dtype=np.float64)
    if len(data) == 0:
        raise ValueError("empty dataset")
    if data.shape[1:] != gan_cfg.image_shape:
        raise ShapeError(f"data shape {data.shape[1:]} != {gan_cfg.image_shape}")
    rng = np.random.default_rng(enc_cfg.seed)
    encoder = init_network(encoder_specs(gan_cfg), gan_cfg.image_shape, int(rng.integers(0, 2**31)))
    features = FeatureExtractor(gan_cfg.image_shape, loss_cfg.feature_seed) if loss_cfg.lambda2 > 0 else None
    opt = AdamState(lr=enc_cfg.lr, beta1=enc_cfg.beta1)
    losses = []
    batches = _batches(rng, len(data), enc_cfg.batch_size)
    for it in range(enc_cfg.iterations):
        x = data[next(batches)]
        z = encoder.forward(x, train=True)
        x_hat = decoder.forward(z, train=False)
        loss, g = distortion_loss(x, x_hat, loss_cfg, features)
        if not math.isfinite(loss):
            raise DivergenceError(f"non-finite encoder loss at iteration {it}")
        _, g_z = decoder.backward(g)
        grads, _ = encoder.backward(g_z)
        adam_step(opt, encoder.parameters(), grads)
        losses.append(loss)
        if progress is not None:
            progress(it, losses)
    return encoder, losses


# --------------------------------------------------------------------------
# classifier


@dataclass
class ClassifierConfig:
    iterations: int = 400
    batch_size: int = 64
    lr: float = 1e-3
    beta1: float = 0.9
    seed: int = 7


def softmax(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def train_classifier(gan_cfg: GanConfig, images: np.ndarray, labels, cfg: ClassifierConfig | None = None) -> Network:
    """Softmax classifier trained with cross-entropy on (N, C, H, W) images."""
    cfg = cfg or ClassifierConfig()
    labels = np.asarray(labels, dtype=np.int64)
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ValueError("classifier needs at least two classes")
    k = int(labels.max()) + 1
    rng = np.random.default_rng(cfg.seed)
    net = init_network(classifier_specs(gan_cfg, k), gan_cfg.image_shape, int(rng.integers(0, 2**31)))
    opt = AdamState(lr=cfg.lr, beta1=cfg.beta1)
    batches = _batches(rng, len(images), cfg.batch_size)
    for _ in range(cfg.iterations):
        idx = next(batches)
        logits = net.forward(images[idx], train=True)
        p = softmax(logits)
        p[np.arange(len(idx)), labels[idx]] -= 1.0
        grads, _ = net.backward(p / len(idx))
        adam_step(opt, net.parameters(), grads)
    return net


def predict(classifier: Network, images: np.ndarray, batch: int = 256) -> np.ndarray:
    out = [classifier.forward(images[i : i + batch], train=False, record=False) for i in range(0, len(images), batch)]
    return np.concatenate(out).argmax(axis=1)


# --------------------------------------------------------------------------
# bundle


def _specs_text(specs) -> str:
    return ";".join(s.to_text() for s in specs)


def _specs_from_text(text: str) -> list[LayerSpec]:
    return [LayerSpec.from_text(t) for t in text.split(";") if t]


@dataclass(eq=False)
class ModelBundle:
    encoder: Network
    decoder: Network
    discriminator: Network
    gan: GanConfig
    loss: LossConfig
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        m = self.gan.latent_dim
        if self.encoder.output_shape != (m,) or self.decoder.input_shape != (m,):
            raise ShapeError("encoder output and decoder input must both have length M")
        if self.decoder.output_shape != self.encoder.input_shape:
            raise ShapeError("decoder output shape must equal encoder input shape")

    @property
    def latent_dim(self) -> int:
        return self.gan.latent_dim

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return self.gan.image_shape

    def metadata(self) -> dict:
        meta = {"kind": "bundle"}
        meta.update({f"gan.{k}": v for k, v in asdict(self.gan).items()})
        meta.update({f"loss.{k}": v for k, v in asdict(self.loss).items()})
        meta.update({f"provenance.{k}": v for k, v in self.provenance.items()})
        for name in ("encoder", "decoder", "discriminator"):
            net = getattr(self, name)
            meta[f"{name}.seed"] = net.seed
            meta[f"{name}.input_shape"] = ",".join(str(d) for d in net.input_shape)
            meta[f"{name}.specs"] = _specs_text(net.specs)
        return meta

    def to_bytes(self) -> bytes:
        tensors = []
        for name in ("encoder", "decoder", "discriminator"):
            tensors += [(f"{name}.{key}", t) for key, t in getattr(self, name).named_tensors()]
        return container.encode_nb(self.metadata(), tensors)

    @cached_property
    def content_hash(self) -> int:
        """FNV-1a 64 of the serialized bundle; fixed once the bundle is built."""
        return container.decode_nb(self.to_bytes()).hash

    @property
    def hash_bytes(self) -> bytes:
        return self.content_hash.to_bytes(8, "little")

    @classmethod
    def from_bytes(cls, data: bytes) -> "ModelBundle":
        doc = container.decode_nb(data)
        meta = doc.metadata
        if meta.get("kind", "bundle") != "bundle":
            raise container.ContainerError("NB01 file does not hold a model bundle")
        try:
            gan = GanConfig(**{f.name: _coerce(f.type, meta[f"gan.{f.name}"]) for f in _fields(GanConfig)})
            loss = LossConfig(**{f.name: _coerce(f.type, meta[f"loss.{f.name}"]) for f in _fields(LossConfig)})
        except KeyError as exc:
            raise container.ContainerError(f"bundle metadata missing {exc}") from None
        tensors = dict(doc.tensors)
        nets = {}
        for name in ("encoder", "decoder", "discriminator"):
            specs = _specs_from_text(meta[f"{name}.specs"])
            shape = tuple(int(d) for d in meta[f"{name}.input_shape"].split(","))
            net = Network(specs, shape, int(meta[f"{name}.seed"]))
            prefix = f"{name}."
            net.load_tensors({k[len(prefix):]: v for k, v in tensors.items() if k.startswith(prefix)})
            nets[name] = net
        prov = {k[len("provenance."):]: v for k, v in meta.items() if k.startswith("provenance.")}
        bundle = cls(nets["encoder"], nets["decoder"], nets["discriminator"], gan, loss, prov)
        bundle.__dict__["content_hash"] = doc.hash
        return bundle

    def rounded(self) -> "ModelBundle":
        """The bundle as it will be after a float32 save/load round trip."""
        return ModelBundle.from_bytes(self.to_bytes())


def _fields(cls):
    import dataclasses

    return dataclasses.fields(cls)


def _coerce(typ, value: str):
    if typ in (int, "int"):
        return int(value)
    if typ in (float, "float"):
        return float(value)
    return value


def build_bundle(gan_cfg: GanConfig, loss_cfg: LossConfig, encoder, decoder, discriminator, **provenance) -> ModelBundle:
    """Assemble a bundle and round its parameters to float32 storage precision."""
    return ModelBundle(encoder, decoder, discriminator, gan_cfg, loss_cfg, dict(provenance)).rounded()


# --------------------------------------------------------------------------
# inference


def _per_sample(net: Network, x: np.ndarray) -> np.ndarray:
    # one sample at a time: BLAS rounding depends on batch size, and the
    # codec needs a sample's latent to be independent of its batch mates
    if len(x) == 0:
        return np.zeros((0,) + net.output_shape)
    return np.concatenate([net.forward(x[i : i + 1], train=False, record=False) for i in range(len(x))])


def encode(bundle: ModelBundle, x) -> np.ndarray:
    """Latent codes for (N, C, H, W) or (C, H, W) images in [-1, 1]."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 3
    if single:
        x = x[None]
    if x.shape[1:] != bundle.image_shape:
        raise ShapeError(f"image shape {x.shape[1:]} != bundle {bundle.image_shape}")
    z = _per_sample(bundle.encoder, x)
    return z[0] if single else z


def decode(bundle: ModelBundle, z) -> np.ndarray:
    """Images in [-1, 1] for latents of shape (N, M) or (M,)."""
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    if single:
        z = z[None]
    if z.shape[1:] != (bundle.latent_dim,):
        raise ShapeError(f"latent length {z.shape[1:]} != M = {bundle.latent_dim}")
    if np.any(np.abs(z) > 1 + 1e-6):
        raise ValueError("latent entries must lie in [-1, 1]")
    x = _per_sample(bundle.decoder, z)
    return x[0] if single else x


def classifier_to_bytes(net: Network, num_classes: int) -> bytes:
    meta = {
        "kind": "classifier",
        "num_classes": num_classes,
        "seed": net.seed,
        "input_shape": ",".join(str(d) for d in net.input_shape),
        "specs": _specs_text(net.specs),
    }
    return container.encode_nb(meta, net.named_tensors())


def classifier_from_bytes(data: bytes) -> Network:
    doc = container.decode_nb(data)
    if doc.metadata.get("kind") != "classifier":
        raise container.ContainerError("NB01 file does not hold a classifier")
    shape = tuple(int(d) for d in doc.metadata["input_shape"].split(","))
    net = Network(_specs_from_text(doc.metadata["specs"]), shape, int(doc.metadata["seed"]))
    net.load_tensors(dict(doc.tensors))
    return net
