import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from gencomp import data_io as dio
from gencomp.container import fnv1a64

# FNV-1a 64 of the concatenated uint8 pixels, recorded when the generators were frozen
SHAPES_30_SEED0 = 0xE3E192A4190B3F44
MOTION_20_SEED0 = 0xB1B8C4B703D5DD7C


def test_generators_reproduce_golden_checksums():
    shapes = np.stack([s.image for s in dio.gen_shapes(30, 32, 0)])
    assert fnv1a64(shapes.tobytes()) == SHAPES_30_SEED0
    video = np.stack(dio.gen_motion_video(20, 32, 0).frames)
    assert fnv1a64(video.tobytes()) == MOTION_20_SEED0


def test_shapes_deterministic_and_balanced():
    a = dio.gen_shapes(300, 32, 4)
    b = dio.gen_shapes(300, 32, 4)
    assert all(np.array_equal(x.image, y.image) for x, y in zip(a, b))
    assert np.bincount([s.label for s in a]).tolist() == [100, 100, 100]
    c = dio.gen_shapes(3, 32, 5)
    assert not np.array_equal(a[0].image, c[0].image)


def test_shapes_inside_frame():
    # 10^4 samples: the one-pixel border carries only background
    for s in dio.gen_shapes(10_000, 32, 123):
        img, p = s.image, s.params
        assert img.dtype == np.uint8 and img.shape == (32, 32)
        bg = np.clip(np.round(p["background"]), 0, 255)
        border = np.concatenate([img[0], img[-1], img[:, 0], img[:, -1]])
        assert np.all(border == bg)
        assert img.max() > bg + 40  # shape is visible


def test_motion_video_is_slow():
    video = dio.gen_motion_video(60, 32, 1)
    frames = np.stack(video.frames).astype(float)
    consecutive = np.mean(np.abs(np.diff(frames, axis=0)))
    shapes = np.stack([s.image for s in dio.gen_shapes(60, 32, 1)]).astype(float)
    between = np.mean(np.abs(shapes[1:] - shapes[:-1]))
    assert consecutive < between
    assert len({f.shape for f in video.frames}) == 1
    assert np.array_equal(np.stack(dio.gen_motion_video(60, 32, 1).frames), frames)


def test_network_conversion_round_trip():
    rng = np.random.default_rng(0)
    gray = rng.integers(0, 256, (3, 8, 8), dtype=np.uint8)
    color = rng.integers(0, 256, (3, 8, 8, 3), dtype=np.uint8)
    for imgs in (gray, color):
        x = dio.to_network(imgs)
        assert x.min() >= -1 and x.max() <= 1
        assert np.array_equal(dio.from_network(x), imgs)
    assert dio.to_network(color).shape == (3, 3, 8, 8)


def _cifar_fixture(tmp_path):
    rec = []
    for label in (3, 7):
        planes = np.zeros((3, 32, 32), np.uint8)
        planes[0] = label * 10  # R
        planes[1] = 200  # G
        planes[2, 0, 1] = 99  # B at row 0, column 1
        rec.append(bytes([label]) + planes.tobytes())
    path = tmp_path / "data_batch_1.bin"
    path.write_bytes(b"".join(rec))
    return path


def test_cifar10_fixture(tmp_path):
    images, labels = dio.read_cifar10(_cifar_fixture(tmp_path))
    assert labels.tolist() == [3, 7]
    assert images.shape == (2, 32, 32, 3)
    raw = (tmp_path / "data_batch_1.bin").read_bytes()
    assert images[0, 0, 0, 0] == raw[1] == 30
    assert images[1, 5, 5, 1] == 200
    assert images[0, 0, 1, 2] == 99


def test_cifar10_truncated(tmp_path):
    path = _cifar_fixture(tmp_path)
    path.write_bytes(path.read_bytes()[:-1])
    with pytest.raises(dio.FormatError):
        dio.read_cifar10(path)


def test_pgm_fixture(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 64, 128, 255]))
    np.testing.assert_array_equal(dio.read_pgm(p), [[0, 64], [128, 255]])
    p.write_bytes(b"P5 # comment\n2 # w\n1\n255\n" + bytes([1, 2]))
    np.testing.assert_array_equal(dio.read_image(p), [[1, 2]])


@pytest.mark.parametrize(
    "data",
    [b"P2\n2 2\n255\n0 0 0 0", b"P5\n2 2\n255\n\x00", b"P5\n2 2\n65535\n" + bytes(8), b"P5\nx 2\n255\n" + bytes(4), b"P5\n2"],
)
def test_pgm_rejects(tmp_path, data):
    p = tmp_path / "bad.pgm"
    p.write_bytes(data)
    with pytest.raises(dio.FormatError):
        dio.read_image(p)


@given(arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12))), st.booleans())
@settings(max_examples=50)
def test_netpbm_round_trip(tmp_path_factory, img, color):
    if color:
        img = np.stack([img, img[::-1], 255 - img], axis=-1)
    p = tmp_path_factory.mktemp("pnm") / ("x.ppm" if color else "x.pgm")
    dio.write_image(p, img)
    assert np.array_equal(dio.read_image(p), img)


def test_video_and_labeled_dirs(tmp_path):
    video = dio.gen_motion_video(5, 16, 0)
    dio.write_video_dir(tmp_path / "v", video)
    back = dio.read_video_dir(tmp_path / "v")
    assert all(np.array_equal(a, b) for a, b in zip(video.frames, back.frames))
    samples = dio.gen_shapes(6, 16, 0)
    dio.write_labeled_dir(tmp_path / "s", [s.image for s in samples], [s.label for s in samples])
    images, labels = dio.read_labeled_dir(tmp_path / "s")
    assert labels.tolist() == [0, 1, 2, 0, 1, 2] and images.shape == (6, 16, 16)
    (tmp_path / "s" / "labels.txt").write_text("0\n1\n")
    with pytest.raises(dio.FormatError):
        dio.read_labeled_dir(tmp_path / "s")
    with pytest.raises(dio.FormatError):
        dio.read_video_dir(tmp_path)


def test_video_split_example():
    videos = [dio.VideoSequence([np.array([[v, t]], np.uint8) for t in range(5 + v)]) for v in range(8)]
    train, evaluation = dio.split_videos(videos)
    assert len(train) == 8 and len(evaluation) == 2
    assert [len(v) for v in train[:6]] == [5, 6, 7, 8, 9, 10]
    # video 6 has 11 = 2*5 + 1 frames: 6 train, 5 eval
    assert (len(train[6]), len(evaluation[0])) == (6, 5)
    assert (len(train[7]), len(evaluation[1])) == (6, 6)
    seen_train = [tuple(f[0]) for v in train for f in v.frames]
    seen_eval = [tuple(f[0]) for v in evaluation for f in v.frames]
    assert not set(seen_train) & set(seen_eval)
    assert sorted(seen_train + seen_eval) == [(v, t) for v in range(8) for t in range(5 + v)]


@given(st.integers(4, 5000), st.integers(0, 2**32 - 1))
def test_image_split_disjoint_exhaustive(n, seed):
    tr, ev = dio.split_images(n, seed)
    assert len(np.intersect1d(tr, ev)) == 0
    assert np.array_equal(np.union1d(tr, ev), np.arange(n))
    assert abs(len(tr) - 0.9 * n) <= 1


def test_video_sequence_validation():
    with pytest.raises(ValueError):
        dio.VideoSequence([])
    with pytest.raises(ValueError):
        dio.VideoSequence([np.zeros((2, 2)), np.zeros((3, 3))])


@given(st.integers(16, 48), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_shapes_fit_any_canvas(size, seed):
    for s in dio.gen_shapes(9, size, seed):
        bg = np.clip(np.round(s.params["background"]), 0, 255)
        border = np.concatenate([s.image[0], s.image[-1], s.image[:, 0], s.image[:, -1]])
        assert np.all(border == bg)
    assert len(dio.gen_motion_video(3, size, seed)) == 3
