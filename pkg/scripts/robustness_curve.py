"""Reconstruction quality versus channel bit error rate.

Compares NCode files (fixed-length payload, errors stay local) with
Huffman-coded MC01 video files (a single flip can derail the decoder).

    python3 scripts/robustness_curve.py --reference reference --trials 2
"""

import argparse
import csv
import sys

from gencomp import experiments as ex
from gencomp.channel import robustness_sweep
from gencomp.training import load_reference, reference_video

BERS = [0.0, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--reference", default="reference")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--video-trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    run = load_reference(args.reference)
    bundle = run.bundles[100]
    rows = robustness_sweep(bundle, run.data.eval_images, BERS, args.trials, args.seed)
    video = reference_video()
    out = csv.writer(sys.stdout)
    out.writerow(["ber", "psnr_db", "ssim", "samples", "mc01_huffman_failure"])
    for r in rows:
        fail = ex.huffman_fragility(bundle, video, r.ber, args.video_trials, seed=args.seed)
        out.writerow([r.ber, f"{r.psnr_db:.3f}", f"{r.ssim:.4f}", r.samples, f"{fail:.3f}"])


if __name__ == "__main__":
    main()
