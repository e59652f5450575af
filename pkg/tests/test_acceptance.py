"""Acceptance criteria, one test per criterion.

Each test records a ``criterion N: PASS/FAIL - detail`` line (collected in
the terminal summary) and then asserts. Criteria 5 to 8 share the session
``reference_run`` fixture, which trains the reference bundles unless
GENCOMP_REFERENCE_DIR names a saved run.

    python3 tests/test_acceptance.py          # just this module
"""

import time

import numpy as np
import pytest

from gencomp import container as ct
from gencomp import experiments as ex
from gencomp.channel import robustness_sweep
from gencomp.entropy import delta_decode, delta_encode, huffman_build, huffman_decode, huffman_encode
from gencomp.latent_codec import QuantizedLatent, QuantSpec, dequantize, pack, quantize, unpack
from gencomp.metrics import rate, tabulated_rate
from gencomp.pipeline import McodeConfig, mcode_encode, ncode_encode_batch
from gencomp.training import reference_video

import gradcheck
from oracles import lsb_first_pack, optimal_prefix_cost

CASES = 10_000


def _latent(rng, m=None, b=None):
    m = m or int(rng.integers(1, 40))
    b = b or int(rng.integers(1, 9))
    return QuantizedLatent(QuantSpec(b, m), rng.integers(0, 1 << b, m))


# --------------------------------------------------------------------------
# 1. rate arithmetic


def test_criterion_1_rate_arithmetic(criterion):
    t0 = time.perf_counter()
    table = {(100, 5): (0.4883, 39), (25, 4): (0.0977, 194), (25, 2): (0.0488, 389)}
    got = {k: tabulated_rate(k[0] * k[1], 32, 32, 19.0) for k in table}
    exact = {k: rate(k[0] * k[1], 32, 32, 19.0) for k in table}
    # exact values, derived by hand: M*b/1024 and 19*1024/(M*b)
    exact_ok = all(
        exact[(m, b)][0] == m * b / 1024 and abs(exact[(m, b)][1] - 19 * 1024 / (m * b)) < 1e-12 for m, b in table
    )
    ok = got == table and exact_ok
    elapsed = time.perf_counter() - t0
    ok = criterion(1, ok and elapsed < 1, f"bpp/eta {got} in {elapsed * 1000:.1f} ms") and ok
    assert ok


# --------------------------------------------------------------------------
# 2. gradients


def test_criterion_2_gradients(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = {}
    for kind in gradcheck.LAYER_CASES:
        worst[kind] = max(gradcheck.network_error(*gradcheck.random_layer_case(kind, rng), rng) for _ in range(20))
    worst["distortion_loss"] = max(gradcheck.loss_error(rng) for _ in range(20))
    elapsed = time.perf_counter() - t0
    top = max(worst.values())
    ok = top <= 1e-4 and elapsed < 30
    criterion(2, ok, f"{len(worst)} cases x 20 instances, worst rel. error {top:.2e} ({max(worst, key=worst.get)}), {elapsed:.1f} s")
    assert top <= 1e-4, worst
    assert elapsed < 30


# --------------------------------------------------------------------------
# 3. codec inverse laws


def _quantize_law(rng):
    q = _latent(rng)
    return quantize(dequantize(q), q.spec) == q


def _pack_law(rng):
    q = _latent(rng)
    data = pack(q)
    return data == lsb_first_pack(q.symbols, q.spec.bits) and unpack(data, q.spec) == q


def _delta_law(rng):
    spec = QuantSpec(int(rng.integers(1, 9)), int(rng.integers(1, 20)))
    frames = [_latent(rng, spec.latent_dim, spec.bits) for _ in range(int(rng.integers(1, 6)))]
    return delta_decode(delta_encode(frames)) == frames


def _huffman_law(rng):
    alphabet = int(rng.integers(1, 30))
    symbols = rng.integers(0, alphabet, int(rng.integers(1, 60))).tolist()
    table = huffman_build({s: symbols.count(s) for s in set(symbols)})
    payload, nbits = huffman_encode(symbols, table)
    return huffman_decode(payload, table, len(symbols), nbits) == symbols


def _nc_law(rng):
    s = ct.NcBitstream(_latent(rng), int(rng.integers(1, 999)), int(rng.integers(1, 999)), int(rng.integers(1, 4)), rng.bytes(8))
    return ct.decode_nc(ct.encode_nc(s)) == s


def _mc_law(rng):
    spec = QuantSpec(int(rng.integers(1, 9)), int(rng.integers(1, 16)))
    k, stride = int(rng.integers(1, 6)), int(rng.integers(1, 9))
    top = spec.levels - 1
    walk = np.clip(rng.integers(0, top + 1) + np.cumsum(rng.integers(-2, 3, (k, spec.latent_dim)), axis=0), 0, top)
    keys = [QuantizedLatent(spec, row) for row in walk]
    s = ct.McBitstream(keys, stride, (k - 1) * stride + 1, bool(rng.integers(0, 2)), 32, 32, 1, rng.bytes(8))
    return ct.decode_mc(ct.encode_mc(s)) == s


def _nb_law(rng):
    meta = {f"k{i}": str(rng.integers(0, 10**6)) for i in range(int(rng.integers(0, 4)))}
    tensors = [
        (f"t{i}", rng.standard_normal(tuple(rng.integers(1, 4, int(rng.integers(0, 3))))).astype(np.float32))
        for i in range(int(rng.integers(0, 4)))
    ]
    doc = ct.decode_nb(ct.encode_nb(meta, tensors))
    return doc.metadata == meta and all(
        a == c and b.shape == d.shape and np.array_equal(b, d) for (a, b), (c, d) in zip(tensors, doc.tensors)
    ) and len(doc.tensors) == len(tensors)


def _huffman_optimal(rng):
    counts = rng.integers(1, 50, int(rng.integers(1, 7)))
    freqs = dict(enumerate(counts.tolist()))
    return huffman_build(freqs).coded_bits(freqs) == optimal_prefix_cost(counts)


LAWS = {
    "quantize/dequantize": _quantize_law,
    "pack/unpack": _pack_law,
    "delta": _delta_law,
    "huffman": _huffman_law,
    "NC01": _nc_law,
    "MC01": _mc_law,
    "NB01": _nb_law,
    "huffman optimality (<=6 symbols)": _huffman_optimal,
}


def test_criterion_3_codec_laws(criterion):
    t0 = time.perf_counter()
    failures = {}
    for i, (name, law) in enumerate(LAWS.items()):
        rng = np.random.default_rng(300 + i)
        failures[name] = sum(not law(rng) for _ in range(CASES))
    elapsed = time.perf_counter() - t0
    ok = not any(failures.values()) and elapsed < 60
    criterion(3, ok, f"{len(LAWS)} laws x {CASES} cases, failures {sum(failures.values())}, {elapsed:.1f} s")
    assert not any(failures.values()), failures
    assert elapsed < 60


# --------------------------------------------------------------------------
# 4. quantizer error bound


def test_criterion_4_quantizer_bound(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    excess, midpoint_excess = {}, {}
    for b in range(1, 9):
        top = (1 << b) - 1
        z = rng.uniform(-1, 1, 10**5)
        excess[b] = float(np.max(np.abs(z - dequantize(quantize(z, QuantSpec(b, z.size))))) - 1 / top)
        # grid midpoints meet the bound with equality, up to rounding in z and z - z_hat
        mid = -1 + (2 * np.arange(top) + 1) / top
        midpoint_excess[b] = float(np.max(np.abs(mid - dequantize(quantize(mid, QuantSpec(b, top))))) - 1 / top)
    elapsed = time.perf_counter() - t0
    worst, worst_mid = max(excess.values()), max(midpoint_excess.values())
    ok = worst <= 0 and worst_mid <= 4 * np.finfo(float).eps and elapsed < 5
    criterion(4, ok, f"max(|z - z_hat|) - 1/(2^b - 1) = {worst:.1e} over 10^5 z per b = 1..8 (midpoints {worst_mid:.1e}), {elapsed:.1f} s")
    assert ok, (excess, midpoint_excess)


# --------------------------------------------------------------------------
# 5 to 8: reference run


@pytest.mark.slow
def test_criterion_5_reference_training(criterion, reference_run):
    data, bundles = reference_run.data, reference_run.bundles
    train_s = reference_run.seconds["bundle_100"]
    baseline = ex.mean_image_baseline(data.train_images, data.eval_images)
    recon = ex.reconstruction_psnr(bundles[100], data.eval_images)
    p = {(m, b): ex.reconstruction_psnr(bundles[m], data.eval_images, b) for m, b in [(100, 5), (25, 4), (25, 2)]}
    checks = {
        "time": train_s <= 15 * 60,
        "baseline": recon >= baseline + 3,
        "monotone": p[(100, 5)] >= p[(25, 4)] >= p[(25, 2)],
    }
    detail = (
        f"M=100 trained in {train_s:.0f} s (whole run {reference_run.total_seconds:.0f} s); "
        f"PSNR {recon:.2f} dB vs mean image {baseline:.2f} dB; "
        f"(100,5) {p[(100, 5)]:.2f} >= (25,4) {p[(25, 4)]:.2f} >= (25,2) {p[(25, 2)]:.2f}"
    )
    criterion(5, all(checks.values()), detail)
    assert all(checks.values()), checks


@pytest.mark.slow
def test_criterion_6_robustness(criterion, reference_run):
    t0 = time.perf_counter()
    bundle = reference_run.bundles[100]
    images = reference_run.data.eval_images
    rows = robustness_sweep(bundle, images, [0.0, 1e-4, 1e-3, 1e-2], trials=1, seed=0)
    curve = [r.psnr_db for r in rows]
    drop = curve[0] - curve[-1]
    monotone = all(b <= a + 0.3 for a, b in zip(curve, curve[1:]))
    fail_rate = ex.huffman_fragility(bundle, reference_video(), 1e-2, 200)
    elapsed = time.perf_counter() - t0
    ok = rows[0].samples >= 200 and drop <= 3 and monotone and fail_rate > 0.5 and elapsed < 600
    detail = (
        f"{rows[0].samples} image-trials, PSNR {' > '.join(f'{c:.2f}' for c in curve)} dB, drop {drop:.2f} dB; "
        f"Huffman MC01 failure rate {fail_rate:.0%} at 1e-2; {elapsed:.0f} s"
    )
    criterion(6, ok, detail)
    assert ok


@pytest.mark.slow
def test_criterion_7_video(criterion, reference_run):
    t0 = time.perf_counter()
    bundle = reference_run.bundles[100]
    video = reference_video()
    report = ex.video_report(bundle, video, stride=4, bits=5)
    frames = video.frames[:24]
    from gencomp.data_io import VideoSequence

    per_frame = [s.latent for s in ncode_encode_batch(bundle, np.stack(frames), 5)]
    n1 = mcode_encode(bundle, VideoSequence(frames), McodeConfig(1, True, 5)).keyframes
    equal = per_frame == n1
    elapsed = time.perf_counter() - t0
    ok = report.saving >= 0.2 and equal and abs(report.ssim_gap) <= 0.1 and elapsed < 300
    detail = (
        f"{report.frames} frames, Huffman saves {report.saving:.1%} ({report.huffman_bits} vs {report.raw_bits} bits); "
        f"N=1 equals NCode: {equal}; SSIM key {report.keyframe_ssim:.3f} / interp {report.interpolated_ssim:.3f}; {elapsed:.0f} s"
    )
    criterion(7, ok, detail)
    assert ok


@pytest.mark.slow
def test_criterion_8_probe(criterion, reference_run):
    t0 = time.perf_counter()
    data = reference_run.data
    acc = ex.probe_table(reference_run.classifier, reference_run.bundles, data.eval_images, data.eval_labels, [(100, 5), (100, 2), (25, 2)])
    elapsed = time.perf_counter() - t0 + reference_run.seconds["classifier"]
    ok = acc["uncompressed"] > acc["100:5"] > acc["100:2"] and elapsed < 600
    detail = (
        f"accuracy uncompressed {acc['uncompressed']:.3f} > b=5 {acc['100:5']:.3f} > b=2 {acc['100:2']:.3f} "
        f"(M=25, b=2: {acc['25:2']:.3f}); {elapsed:.0f} s with classifier training"
    )
    criterion(8, ok, detail)
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-rN"]))
