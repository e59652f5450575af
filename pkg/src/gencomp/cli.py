"""Command-line interface.

Every subcommand exits 0 on success. Failures print one line to stderr,
``error: <ExceptionType>: <message>``, and exit 1 (argparse usage errors exit 2).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import channel, container, data_io, metrics, models, pipeline
from .training import train_bundle


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _load_images(directory, split: str, seed: int):
    images, labels = data_io.read_labeled_dir(directory)
    if split == "all":
        return images, labels
    tr, ev = data_io.split_images(len(images), seed)
    idx = tr if split == "train" else ev
    return images[idx], None if labels is None else labels[idx]


def _gray_or_color(images: np.ndarray) -> int:
    return 1 if images.ndim == 3 else images.shape[3]


# --------------------------------------------------------------------------
# subcommands


def cmd_gen_data(args):
    out = Path(args.out)
    if args.kind == "shapes":
        samples = data_io.gen_shapes(args.count, args.size, args.seed)
        data_io.write_labeled_dir(out, [s.image for s in samples], [s.label for s in samples])
        print(f"wrote {len(samples)} images to {out}")
    else:
        video = data_io.gen_motion_video(args.count, args.size, args.seed)
        data_io.write_video_dir(out, video)
        print(f"wrote {len(video)} frames to {out}")


def cmd_train(args):
    images, _ = _load_images(args.data, "train", args.split_seed)
    h, w = images.shape[1:3]
    gan = models.GanConfig(
        latent_dim=args.latent_dim,
        height=h,
        width=w,
        channels=_gray_or_color(images),
        base_width=args.width,
        batch_size=args.batch,
        g_steps=args.g_steps,
        iterations=args.iters,
        seed=args.seed,
    )
    loss = models.LossConfig(lambda1=args.lambda1, lambda2=args.lambda2)
    enc = models.EncoderConfig(
        iterations=args.encoder_iters if args.encoder_iters is not None else args.iters,
        batch_size=args.batch,
        seed=args.seed + 1,
    )
    bundle, hist = train_bundle(images, gan, loss, enc, log_every=args.log_every)
    container.write_bundle(args.out, bundle)
    scores = hist.tail_means()
    print(
        f"model {bundle.hash_bytes.hex()} M={bundle.latent_dim} "
        f"D(real)={scores['real_score']:.3f} D(fake)={scores['fake_score']:.3f} -> {args.out}"
    )


def cmd_train_classifier(args):
    images, labels = _load_images(args.data, "train", args.split_seed)
    if labels is None:
        raise data_io.FormatError(f"{args.data}: labels.txt is required")
    h, w = images.shape[1:3]
    gan = models.GanConfig(height=h, width=w, channels=_gray_or_color(images), base_width=args.width)
    cfg = models.ClassifierConfig(iterations=args.iters, batch_size=args.batch, seed=args.seed)
    net = models.train_classifier(gan, data_io.to_network(images), labels, cfg)
    Path(args.out).write_bytes(models.classifier_to_bytes(net, int(labels.max()) + 1))
    print(f"classifier -> {args.out}")


def cmd_encode(args):
    bundle = container.read_bundle(args.model)
    image = data_io.read_image(args.input)
    stream = pipeline.ncode_encode(bundle, image, args.bits)
    container.write_nc(args.out, stream)
    bpp, eta = metrics.stream_rate(stream)
    print(f"{args.out}: {container.compressed_size_bits(stream)} payload bits, {bpp:.4f} bpp, eta {eta:.1f}")


def cmd_decode(args):
    bundle = container.read_bundle(args.model)
    stream = container.read_nc(args.input)
    image = pipeline.ncode_decode(bundle, stream, force=args.force)
    data_io.write_image(args.out, image)
    print(f"decoded -> {args.out}")


def cmd_encode_video(args):
    bundle = container.read_bundle(args.model)
    video = data_io.read_video_dir(args.input)
    if args.pad:
        video = pipeline.pad_video(video, args.stride)
    cfg = pipeline.McodeConfig(stride=args.stride, huffman=args.huffman, bits=args.bits)
    stream = pipeline.mcode_encode(bundle, video, cfg)
    container.write_mc(args.out, stream)
    bits = container.compressed_size_bits(stream)
    print(f"{args.out}: {len(video)} frames, {len(stream.keyframes)} keyframes, {bits} body bits")


def cmd_decode_video(args):
    bundle = container.read_bundle(args.model)
    stream = container.read_mc(args.input)
    video = pipeline.mcode_decode(bundle, stream, force=args.force)
    data_io.write_video_dir(args.out, video)
    print(f"decoded {len(video)} frames -> {args.out}")


def cmd_eval(args):
    bundles = {}
    for path in args.model:
        b = container.read_bundle(path)
        bundles[b.latent_dim] = b
    images, _ = _load_images(args.data, args.split, args.split_seed)
    reports = pipeline.eval_run(bundles, images, pipeline.parse_specs(args.specs), args.original_bpp)
    pipeline.write_reports(args.out, reports)
    for r in reports:
        print(f"M={r.latent_dim} b={r.bits} psnr={r.psnr_db:.3f} ssim={r.ssim:.4f} bpp={r.bpp:.4f} eta={r.eta:.1f}")


def cmd_channel(args):
    data = Path(args.input).read_bytes()
    container.read_any(data)
    out = channel.corrupt(data, channel.ChannelModel(args.ber, args.seed, args.scope))
    Path(args.out).write_bytes(out)
    flipped = int(np.unpackbits(np.frombuffer(data, np.uint8) ^ np.frombuffer(out, np.uint8)).sum())
    print(f"{flipped} bits flipped -> {args.out}")


def cmd_robustness(args):
    bundle = container.read_bundle(args.model)
    images, _ = _load_images(args.data, args.split, args.split_seed)
    if args.limit:
        images = images[: args.limit]
    bers = _floats(args.bers)
    if 0.0 not in bers:
        bers = [0.0] + bers
    rows = channel.robustness_sweep(bundle, images, bers, args.trials, args.seed, args.bits)
    with open(args.out, "w") as fh:
        fh.write("ber,psnr_db,ssim,samples\n")
        for r in rows:
            fh.write(f"{r.ber:g},{r.psnr_db:.6f},{r.ssim:.6f},{r.samples}\n")
    for r in rows:
        print(f"ber={r.ber:g} psnr={r.psnr_db:.3f} ssim={r.ssim:.4f} n={r.samples}")


def cmd_probe(args):
    clf = models.classifier_from_bytes(Path(args.classifier).read_bytes())
    bundle = container.read_bundle(args.model)
    images, labels = _load_images(args.data, args.split, args.split_seed)
    if labels is None:
        raise data_io.FormatError(f"{args.data}: labels.txt is required")
    base = metrics.classifier_probe(clf, bundle, None, images, labels)
    acc = metrics.classifier_probe(clf, bundle, args.bits, images, labels)
    print(json.dumps({"uncompressed": base, f"M={bundle.latent_dim},b={args.bits}": acc}))


def cmd_info(args):
    data = Path(args.input).read_bytes()
    obj = container.read_any(data)
    if isinstance(obj, container.NcBitstream):
        info = {
            "format": "NC01",
            "latent_dim": obj.spec.latent_dim,
            "bits": obj.spec.bits,
            "height": obj.height,
            "width": obj.width,
            "channels": obj.channels,
            "model_hash": obj.model_hash.hex(),
            "payload_bits": container.compressed_size_bits(obj),
        }
    elif isinstance(obj, container.McBitstream):
        info = {
            "format": "MC01",
            "latent_dim": obj.spec.latent_dim,
            "bits": obj.spec.bits,
            "stride": obj.stride,
            "keyframes": len(obj.keyframes),
            "frames": obj.frame_count,
            "huffman": obj.huffman,
            "height": obj.height,
            "width": obj.width,
            "channels": obj.channels,
            "model_hash": obj.model_hash.hex(),
            "body_bits": container.compressed_size_bits(obj),
        }
    else:
        info = {
            "format": "NB01",
            "hash": obj.hash.to_bytes(8, "little").hex(),
            "tensors": len(obj.tensors),
            "metadata": obj.metadata,
        }
    print(json.dumps(info, indent=2))


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gencomp", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-data", help="write synthetic shapes or a motion video")
    s.add_argument("--kind", choices=("shapes", "motion"), required=True)
    s.add_argument("--count", type=int, required=True, help="images, or frames for --kind motion")
    s.add_argument("--size", type=int, default=32)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_data)

    def split_args(s, default):
        s.add_argument("--split", choices=("all", "train", "eval"), default=default)
        s.add_argument("--split-seed", type=int, default=0)

    s = sub.add_parser("train", help="train a model bundle on the train split of DIR")
    s.add_argument("--data", required=True)
    s.add_argument("--latent-dim", type=int, default=100)
    s.add_argument("--iters", type=int, default=2000, help="adversarial iterations")
    s.add_argument("--encoder-iters", type=int, default=None, help="defaults to --iters")
    s.add_argument("--batch", type=int, default=32)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--lambda1", type=float, default=1.0)
    s.add_argument("--lambda2", type=float, default=0.002)
    s.add_argument("--width", type=int, default=16, help="base channel width")
    s.add_argument("--g-steps", type=int, default=2)
    s.add_argument("--split-seed", type=int, default=0)
    s.add_argument("--log-every", type=int, default=100)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("train-classifier", help="train the probe classifier on the train split of DIR")
    s.add_argument("--data", required=True)
    s.add_argument("--iters", type=int, default=400)
    s.add_argument("--batch", type=int, default=32)
    s.add_argument("--seed", type=int, default=7)
    s.add_argument("--width", type=int, default=16)
    s.add_argument("--split-seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train_classifier)

    s = sub.add_parser("encode", help="image -> NC01")
    s.add_argument("--model", required=True)
    s.add_argument("--bits", type=int, required=True)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_encode)

    s = sub.add_parser("decode", help="NC01 -> image")
    s.add_argument("--model", required=True)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--force", action="store_true", help="decode despite a model hash mismatch")
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("encode-video", help="frame directory -> MC01")
    s.add_argument("--model", required=True)
    s.add_argument("--bits", type=int, required=True)
    s.add_argument("--stride", type=int, required=True)
    s.add_argument("--huffman", action="store_true")
    s.add_argument("--pad", action="store_true", help="repeat the last frame to fit the keyframe law")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_encode_video)

    s = sub.add_parser("decode-video", help="MC01 -> frame directory")
    s.add_argument("--model", required=True)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--force", action="store_true")
    s.set_defaults(func=cmd_decode_video)

    s = sub.add_parser("eval", help="PSNR/SSIM/bpp table over (M, b) specs")
    s.add_argument("--model", action="append", required=True, help="repeat for several latent lengths")
    s.add_argument("--data", required=True)
    s.add_argument("--specs", default="100:5,25:4,25:2")
    s.add_argument("--original-bpp", type=float, default=metrics.CIFAR_ORIGINAL_BPP)
    split_args(s, "all")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("channel", help="pass a file through a binary symmetric channel")
    s.add_argument("--ber", type=float, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--scope", choices=channel.SCOPES, default="payload")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_channel)

    s = sub.add_parser("robustness", help="PSNR/SSIM versus bit error rate")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--bits", type=int, default=5)
    s.add_argument("--bers", default="1e-4,1e-3,1e-2")
    s.add_argument("--trials", type=int, default=2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--limit", type=int, default=0, help="use at most this many images")
    split_args(s, "all")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_robustness)

    s = sub.add_parser("probe", help="classifier accuracy on decoded images")
    s.add_argument("--classifier", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--bits", type=int, required=True)
    s.add_argument("--data", required=True)
    split_args(s, "all")
    s.set_defaults(func=cmd_probe)

    s = sub.add_parser("info", help="print the parsed header of an NC01/MC01/NB01 file")
    s.add_argument("--in", dest="input", required=True)
    s.set_defaults(func=cmd_info)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except (ValueError, OSError, KeyError, FloatingPointError) as exc:
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
