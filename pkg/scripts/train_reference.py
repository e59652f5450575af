"""Train the reference bundles and classifier, then record golden measurements.

    python3 scripts/train_reference.py --out reference

Writes m100.nb, m25.nb, classifier.nb, timings.json and golden.json. The
golden values are regression anchors for tests/test_reference.py; they are
exact only on the BLAS build that produced them.
"""

import argparse
import json
import logging
import time
from pathlib import Path

import numpy as np

from gencomp import experiments as ex
from gencomp.channel import robustness_sweep
from gencomp.latent_codec import QuantSpec, dequantize, quantize
from gencomp.metrics import psnr
from gencomp.models import decode, encode
from gencomp.pipeline import eval_run, ncode_decode, ncode_encode
from gencomp.training import load_reference, reference_video, save_reference, train_reference

SPECS = [(100, 5), (25, 4), (25, 2)]
BERS = [0.0, 1e-4, 1e-3, 1e-2]
GOLDEN_IMAGES = 8
Z0_SEED = 1234


def golden_measurements(run) -> dict:
    data, b100 = run.data, run.bundles[100]
    out = {"timings": {k: round(v, 1) for k, v in run.seconds.items()}}
    out["baseline_psnr"] = ex.mean_image_baseline(data.train_images, data.eval_images)
    out["reconstruction_psnr"] = ex.reconstruction_psnr(b100, data.eval_images)
    out["table"] = [r.as_dict() for r in eval_run(run.bundles, data.eval_images, SPECS)]

    roundtrip = []
    for img in data.eval_images[:GOLDEN_IMAGES]:
        roundtrip.append(psnr(img, ncode_decode(b100, ncode_encode(b100, img, 5))))
    out["roundtrip_psnr"] = roundtrip

    z0 = np.random.default_rng(Z0_SEED).uniform(-1, 1, (1, 100))
    out["z0_cycle_distance"] = float(np.linalg.norm(encode(b100, decode(b100, z0)) - z0))
    out["d_scores"] = {m: {k: b.provenance[k] for k in ("real_score", "fake_score")} for m, b in run.bundles.items()}

    spec = QuantSpec(5, 100)
    z = encode(b100, decode(b100, z0))[0]
    out["z0_symbols"] = [int(s) for s in quantize(z, spec).symbols]
    out["z0_dequantized_error"] = float(np.max(np.abs(dequantize(quantize(z, spec)) - z)))

    video = reference_video()
    out["video"] = ex.video_report(b100, video).as_dict()
    out["huffman_failure_rate"] = ex.huffman_fragility(b100, video, 1e-2, 200)
    rows = robustness_sweep(b100, data.eval_images, BERS, trials=1, seed=0)
    out["robustness"] = [vars(r) for r in rows]
    out["probe"] = ex.probe_table(run.classifier, run.bundles, data.eval_images, data.eval_labels, [(100, 5), (100, 2), (25, 4), (25, 2)])
    out["classifier_train_accuracy"] = ex.probe_table(run.classifier, run.bundles, data.train_images, data.train_labels, [])["uncompressed"]
    return out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--out", default="reference")
    p.add_argument("--reuse", action="store_true", help="measure an existing run instead of training")
    p.add_argument("--log-every", type=int, default=100)
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    if args.reuse:
        run = load_reference(args.out)
    else:
        run = train_reference(log_every=args.log_every)
        save_reference(run, args.out)
    logging.info("timings %s (total %.1f s)", {k: round(v, 1) for k, v in run.seconds.items()}, run.total_seconds)
    t0 = time.perf_counter()
    golden = golden_measurements(run)
    logging.info("measurements took %.1f s", time.perf_counter() - t0)
    Path(args.out, "golden.json").write_text(json.dumps(golden, indent=2) + "\n")
    print(json.dumps({k: golden[k] for k in ("baseline_psnr", "reconstruction_psnr", "d_scores", "probe")}, indent=2))


if __name__ == "__main__":
    main()
