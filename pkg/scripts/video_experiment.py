"""MCode on the reference motion video across keyframe strides.

    python3 scripts/video_experiment.py --reference reference --strides 1,2,4,8
"""

import argparse

from gencomp import experiments as ex
from gencomp.pipeline import pad_video
from gencomp.training import load_reference, reference_video


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--reference", default="reference")
    p.add_argument("--strides", default="1,2,4,8")
    p.add_argument("--bits", type=int, default=5)
    args = p.parse_args(argv)

    bundle = load_reference(args.reference).bundles[100]
    video = reference_video()
    print(f"{'N':>3} {'bpp':>7} {'saving':>7} {'SSIM key':>8} {'SSIM int':>8} {'PSNR key':>8} {'PSNR int':>8}")
    for n in (int(s) for s in args.strides.split(",")):
        r = ex.video_report(bundle, pad_video(video, n), n, args.bits)
        bpp = r.huffman_bits / (r.frames * 32 * 32)
        print(
            f"{n:>3} {bpp:>7.4f} {r.saving:>7.1%} {r.keyframe_ssim:>8.3f} {r.interpolated_ssim:>8.3f} "
            f"{r.keyframe_psnr:>8.2f} {r.interpolated_psnr:>8.2f}"
        )


if __name__ == "__main__":
    main()
