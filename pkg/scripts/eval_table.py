"""Rate/quality table and classifier probe for the reference bundles.

    python3 scripts/eval_table.py --reference reference --out results/table.csv
"""

import argparse
import json
from pathlib import Path

from gencomp import experiments as ex
from gencomp.metrics import tabulated_rate
from gencomp.pipeline import eval_run, parse_specs, write_reports
from gencomp.training import load_reference


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--reference", default="reference")
    p.add_argument("--specs", default="100:8,100:5,100:3,25:4,25:2")
    p.add_argument("--out", default="results/table.csv")
    args = p.parse_args(argv)

    run = load_reference(args.reference)
    data = run.data
    specs = parse_specs(args.specs)
    reports = eval_run(run.bundles, data.eval_images, specs)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_reports(args.out, reports)
    acc = ex.probe_table(run.classifier, run.bundles, data.eval_images, data.eval_labels, specs)

    baseline = ex.mean_image_baseline(data.train_images, data.eval_images)
    print(f"mean-image baseline {baseline:.2f} dB, classifier on originals {acc['uncompressed']:.3f}")
    print(f"{'M':>4} {'b':>2} {'bpp':>7} {'eta':>4} {'PSNR':>6} {'SSIM':>6} {'acc':>6}")
    for r in reports:
        bpp, eta = tabulated_rate(r.latent_dim * r.bits, 32, 32)
        print(f"{r.latent_dim:>4} {r.bits:>2} {bpp:>7.4f} {eta:>4} {r.psnr_db:>6.2f} {r.ssim:>6.3f} {acc[f'{r.latent_dim}:{r.bits}']:>6.3f}")
    Path(args.out).with_name("probe.json").write_text(json.dumps(acc, indent=2) + "\n")


if __name__ == "__main__":
    main()
