import pickle

import numpy as np
import pytest

from pyhwnas.core.streamer import (
    HEADER_BYTES,
    Dataset,
    iter_batches,
    load_binary_dataset,
    load_cifar10,
    make_synthetic,
    save_binary_dataset,
)
from pyhwnas.utils.exceptions import HwnasIOError, ShapeError, TableFormatError, ValidationError


def indexed(n=10, classes=2) -> Dataset:
    """Image i is filled with the value i, so batches can be traced back to indices."""
    images = np.broadcast_to(np.arange(n, dtype=np.float64)[:, None, None, None], (n, 1, 2, 2)).copy()
    return Dataset(images, np.arange(n) % classes, classes)



class TestDataset:
    def test_label_count_mismatch(self):
        with pytest.raises(ShapeError, match="3 labels for 4 images"):
            Dataset(np.zeros((4, 1, 2, 2)), np.zeros(3, dtype=int), 2)

    def test_images_must_be_4d(self):
        with pytest.raises(ShapeError):
            Dataset(np.zeros((4, 2, 2)), np.zeros(4, dtype=int), 2)

    def test_label_range(self):
        with pytest.raises(ValidationError, match=r"\[0, 2\)"):
            Dataset(np.zeros((2, 1, 2, 2)), np.array([0, 2]), 2)

    def test_standardized(self):
        data = make_synthetic(samples=200, classes=4, channels=3, image_size=4, seed=2).standardized()
        np.testing.assert_allclose(data.images.mean(axis=(0, 2, 3)), 0.0, atol=1e-12)
        np.testing.assert_allclose(data.images.std(axis=(0, 2, 3)), 1.0, atol=1e-12)

    def test_constant_channel_keeps_unit_scale(self):
        _, std = Dataset(np.full((3, 1, 2, 2), 4.0), np.array([0, 1, 0]), 2).channel_stats()
        assert std.tolist() == [1.0]

    def test_shuffled_labels_keep_class_counts(self):
        data = make_synthetic(samples=90, classes=3, channels=1, image_size=2)
        shuffled = data.with_shuffled_labels(seed=4)
        np.testing.assert_array_equal(shuffled.class_counts(), data.class_counts())
        assert not np.array_equal(shuffled.labels, data.labels)
        np.testing.assert_array_equal(shuffled.labels, data.with_shuffled_labels(seed=4).labels)



class TestSynthetic:
    def test_balanced_and_shaped(self):
        data = make_synthetic(samples=100, classes=10, channels=3, image_size=8)
        assert data.images.shape == (100, 3, 8, 8)
        assert data.class_counts().tolist() == [10] * 10

    def test_same_seed_same_data(self):
        a, b = make_synthetic(samples=20, classes=2, seed=6), make_synthetic(samples=20, classes=2, seed=6)
        np.testing.assert_array_equal(a.images, b.images)
        assert not np.array_equal(a.images, make_synthetic(samples=20, classes=2, seed=7).images)

    def test_noiseless_samples_match_their_prototype(self):
        data = make_synthetic(samples=40, classes=4, channels=1, image_size=3, noise=0.0)
        for label in range(4):
            members = data.images[data.labels == label]
            np.testing.assert_array_equal(members, np.broadcast_to(members[0], members.shape))

    def test_rejected_arguments(self):
        with pytest.raises(ValidationError, match="cannot cover"):
            make_synthetic(samples=5, classes=10)
        with pytest.raises(ValidationError, match="noise"):
            make_synthetic(noise=-0.1)



class TestBinaryFormat:
    def test_round_trip(self, tmp_path):
        data = indexed(n=12, classes=3)
        path = save_binary_dataset(data, tmp_path / "data" / "train.bin")
        assert path.stat().st_size == HEADER_BYTES + 12 + 12 * 4
        loaded = load_binary_dataset(path)
        np.testing.assert_array_equal(loaded.images, data.images)
        np.testing.assert_array_equal(loaded.labels, data.labels)
        assert loaded.num_classes == 3

    def test_pixels_are_clipped(self, tmp_path):
        data = Dataset(np.array([-3.0, 12.4, 300.0, 99.6]).reshape(1, 1, 2, 2), np.array([1]), 2)
        loaded = load_binary_dataset(save_binary_dataset(data, tmp_path / "clip.bin"))
        assert loaded.images.reshape(-1).tolist() == [0.0, 12.0, 255.0, 100.0]

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOPE" + bytes(40))
        with pytest.raises(TableFormatError, match="bad magic"):
            load_binary_dataset(path)

    def test_truncated(self, tmp_path):
        path = save_binary_dataset(indexed(), tmp_path / "t.bin")
        path.write_bytes(path.read_bytes()[:-1])
        with pytest.raises(TableFormatError, match="expected"):
            load_binary_dataset(path)

    def test_missing(self, tmp_path):
        with pytest.raises(HwnasIOError):
            load_binary_dataset(tmp_path / "absent.bin")



class TestCifar:
    @staticmethod
    def write_batches(root, names, per_batch=2):
        root.mkdir(parents=True, exist_ok=True)
        for i, name in enumerate(names):
            entry = {
                b"data": np.full((per_batch, 3 * 32 * 32), i, dtype=np.uint8),
                b"labels": [i % 10] * per_batch,
            }
            with (root / name).open("wb") as fh:
                pickle.dump(entry, fh)

    def test_train_batches(self, tmp_path):
        self.write_batches(tmp_path, [f"data_batch_{i}" for i in range(1, 6)])
        data = load_cifar10(tmp_path)
        assert data.images.shape == (10, 3, 32, 32)
        assert data.labels.tolist() == [0, 0, 1, 1, 2, 2, 3, 3, 4, 4]
        assert data.num_classes == 10

    def test_limit_and_test_split(self, tmp_path):
        self.write_batches(tmp_path, ["test_batch"], per_batch=5)
        assert len(load_cifar10(tmp_path, train=False, limit=3)) == 3

    def test_missing_batch(self, tmp_path):
        self.write_batches(tmp_path, ["data_batch_1"])
        with pytest.raises(HwnasIOError, match="data_batch_2"):
            load_cifar10(tmp_path)



class TestBatches:
    def test_sequential_without_rng(self):
        batches = list(iter_batches(indexed(n=7), 3))
        assert [len(labels) for _, labels in batches] == [3, 3, 1]
        assert batches[0][0].data[:, 0, 0, 0].tolist() == [0.0, 1.0, 2.0]

    def test_shuffled_batches_cover_every_sample_once(self):
        seen = np.concatenate([x.data[:, 0, 0, 0] for x, _ in iter_batches(indexed(n=70), 32, np.random.default_rng(0))])
        assert sorted(seen.tolist()) == list(range(70))

    def test_batch_size(self):
        with pytest.raises(ValidationError):
            next(iter_batches(indexed(), 0))
