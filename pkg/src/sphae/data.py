"""Datasets: spherical projections of digit images and synthetic fixtures.

Pipeline: square grayscale images are lifted to the northern hemisphere by
stereographic projection from the south pole (image square spans the cap
beta <= pi/3), band-limited at the grid bandwidth, and affinely rescaled
into [0.01, 0.99] using a 2x-dense synthesis to bound the continuum range.
The R variant applies an independent Haar-uniform rotation to each stored
sample, spectrally, so NR/R pairs have identical quadrature norms.

On-disk formats:

* MNIST IDX (read/write): big-endian magic 0x0000,<dtype>,<rank>, then rank
  uint32 dims, then the raw payload (dtype 0x08 = unsigned byte for MNIST).
* Dataset file: magic ``SPHDS001``; little-endian uint32 count, uint32 b,
  uint8 variant (0=NR, 1=R), int64 seed; count uint8 labels; count * (2b)^2
  float64 samples; count * 3 float64 applied ZYZ rotations (zero for NR).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .exceptions import DataFormatError, DimensionMismatchError
from .rotations import EulerZYZ, random_rotation
from .spectral import (
    pad_spectrum_arr,
    rotate_s2_spectrum_arr,
    s2_analyze_arr,
    s2_synthesize_arr,
    symmetrize_spectrum,
)

_IDX_DTYPES = {
    0x08: np.dtype(">u1"),
    0x09: np.dtype(">i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}

MNIST_IMAGE_MAGIC = 0x00000803
MNIST_LABEL_MAGIC = 0x00000801


@dataclass(frozen=True)
class IdxFile:
    dtype_code: int
    dims: tuple
    data: np.ndarray

    @property
    def magic(self) -> int:
        return (self.dtype_code << 8) | len(self.dims)


def parse_idx(path) -> IdxFile:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise DataFormatError(f"{path}: too short for an IDX header")
    z0, z1, code, rank = raw[0], raw[1], raw[2], raw[3]
    if z0 != 0 or z1 != 0 or code not in _IDX_DTYPES or rank == 0:
        raise DataFormatError(f"{path}: bad IDX magic {raw[:4].hex()}")
    if len(raw) < 4 + 4 * rank:
        raise DataFormatError(f"{path}: truncated IDX dimension block")
    dims = struct.unpack(f">{rank}I", raw[4 : 4 + 4 * rank])
    dtype = _IDX_DTYPES[code]
    count = int(np.prod(dims, dtype=np.int64))
    expect = 4 + 4 * rank + count * dtype.itemsize
    if len(raw) != expect:
        raise DataFormatError(f"{path}: payload holds {len(raw) - 4 - 4*rank} bytes, header declares {count * dtype.itemsize}")
    data = np.frombuffer(raw, dtype=dtype, offset=4 + 4 * rank).reshape(dims)
    return IdxFile(dtype_code=code, dims=dims, data=data)


def write_idx(path, array: np.ndarray) -> None:
    codes = {v.newbyteorder("="): k for k, v in _IDX_DTYPES.items()}
    dtype = np.dtype(array.dtype).newbyteorder("=")
    if dtype not in codes:
        raise DataFormatError(f"dtype {array.dtype} not representable in IDX")
    code = codes[dtype]
    with open(path, "wb") as fh:
        fh.write(bytes([0, 0, code, array.ndim]))
        fh.write(struct.pack(f">{array.ndim}I", *array.shape))
        fh.write(np.ascontiguousarray(array).astype(_IDX_DTYPES[code]).tobytes())


def load_mnist_images(path) -> np.ndarray:
    f = parse_idx(path)
    if f.magic != MNIST_IMAGE_MAGIC:
        raise DataFormatError(f"{path}: magic {f.magic:#010x} is not an MNIST image file")
    return np.asarray(f.data)


def load_mnist_labels(path) -> np.ndarray:
    f = parse_idx(path)
    if f.magic != MNIST_LABEL_MAGIC:
        raise DataFormatError(f"{path}: magic {f.magic:#010x} is not an MNIST label file")
    return np.asarray(f.data).astype(np.int64)


def load_mnist_dir(mnist_dir):
    """Standard four IDX files -> (train_imgs, train_labels, test_imgs, test_labels)."""
    import os

    names = {
        "train_images": ("train-images-idx3-ubyte", "train-images.idx3-ubyte"),
        "train_labels": ("train-labels-idx1-ubyte", "train-labels.idx1-ubyte"),
        "test_images": ("t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"),
        "test_labels": ("t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"),
    }
    found = {}
    for key, candidates in names.items():
        for cand in candidates:
            p = os.path.join(mnist_dir, cand)
            if os.path.exists(p):
                found[key] = p
                break
        else:
            raise FileNotFoundError(f"missing {candidates[0]} under {mnist_dir}")
    return (
        load_mnist_images(found["train_images"]),
        load_mnist_labels(found["train_labels"]),
        load_mnist_images(found["test_images"]),
        load_mnist_labels(found["test_labels"]),
    )


def load_digits_data():
    """Bundled scikit-learn handwritten digits as uint8 images + labels.

    Offline stand-in for MNIST at desk scale: 1797 8x8 grayscale digits.
    """
    from sklearn.datasets import load_digits

    d = load_digits()
    imgs = np.clip(d.images * (255.0 / 16.0), 0, 255).astype(np.uint8)
    return imgs, d.target.astype(np.int64)


# ---------------------------------------------------------------------------
# stereographic projection
# ---------------------------------------------------------------------------


def project_to_sphere(img: np.ndarray, b: int = 30, cap_beta: float = np.pi / 3) -> np.ndarray:
    """Lift a square grayscale image onto the northern hemisphere.

    A grid point at (alpha, beta < pi/2) maps through the south-pole
    stereographic projection to the tangent plane at the north pole; the
    image square spans [-r, r]^2 with r = 2 tan(cap_beta / 2).  Values are
    bilinearly sampled, scaled to [0, 1]; the southern hemisphere is 0.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise DimensionMismatchError(f"expected a square grayscale image, got {img.shape}")
    if img.max() > 1.0:
        img = img / 255.0
    H = img.shape[0]
    from . import sgrid

    alpha = sgrid.alpha_nodes(b)
    beta = sgrid.beta_nodes(b)
    A, B = np.meshgrid(alpha, beta, indexing="ij")
    r_cap = 2.0 * np.tan(cap_beta / 2.0)
    with np.errstate(over="ignore"):
        rho = 2.0 * np.tan(B / 2.0)
    u = rho * np.cos(A) / r_cap  # in [-1, 1] inside the cap
    v = rho * np.sin(A) / r_cap
    col = (u + 1.0) / 2.0 * (H - 1)
    row = (1.0 - v) / 2.0 * (H - 1)
    out = np.zeros((2 * b, 2 * b))
    ok = (B < np.pi / 2) & (col >= 0) & (col <= H - 1) & (row >= 0) & (row <= H - 1)
    r0 = np.clip(np.floor(row), 0, H - 2).astype(int)
    c0 = np.clip(np.floor(col), 0, H - 2).astype(int)
    fr = np.clip(row - r0, 0.0, 1.0)
    fc = np.clip(col - c0, 0.0, 1.0)
    vals = (
        img[r0, c0] * (1 - fr) * (1 - fc)
        + img[r0 + 1, c0] * fr * (1 - fc)
        + img[r0, c0 + 1] * (1 - fr) * fc
        + img[r0 + 1, c0 + 1] * fr * fc
    )
    out[ok] = vals[ok]
    return out


# ---------------------------------------------------------------------------
# spherical datasets
# ---------------------------------------------------------------------------


@dataclass
class SphericalDataset:
    images: np.ndarray  # (N, 1, 2b, 2b) float64 in [0, 1]
    labels: np.ndarray  # (N,) int64
    b: int
    variant: str  # "nr" | "r"
    seed: int
    rotations: np.ndarray  # (N, 3) applied ZYZ angles; zeros for NR

    def __len__(self) -> int:
        return int(self.images.shape[0])


_RANGE_MARGIN = 0.01


def _normalize_band_limited(sig: np.ndarray, b: int) -> np.ndarray:
    """Band-limit (N, 2b, 2b) samples and rescale into [margin, 1-margin].

    The continuum min/max of a band-limited sample exceeds its grid min/max,
    so the range is bounded on a 2x-dense synthesis; rotated resamplings then
    stay inside [0, 1].
    """
    S = s2_analyze_arr(sig)
    out = s2_synthesize_arr(S)
    dense = s2_synthesize_arr(pad_spectrum_arr(S, 2 * b, mats=1))
    lo = dense.min(axis=(-2, -1))
    hi = dense.max(axis=(-2, -1))
    span = hi - lo
    lo_b = lo[:, None, None]
    scale = np.where(span > 1e-12, (1.0 - 2 * _RANGE_MARGIN) / np.maximum(span, 1e-12), 0.0)[:, None, None]
    return (out - lo_b) * scale + _RANGE_MARGIN


def build_dataset(images: np.ndarray, labels: np.ndarray, b: int = 30, seed: int = 0) -> SphericalDataset:
    """Project raw square images to the sphere (NR variant)."""
    n = images.shape[0]
    sig = np.stack([project_to_sphere(images[i], b) for i in range(n)])
    sig = _normalize_band_limited(sig, b)
    return SphericalDataset(
        images=sig[:, None],
        labels=np.asarray(labels, dtype=np.int64).copy(),
        b=b,
        variant="nr",
        seed=seed,
        rotations=np.zeros((n, 3)),
    )


def randomly_rotate(ds: SphericalDataset, seed: int) -> SphericalDataset:
    """R variant: an independent uniform rotation per sample, applied spectrally."""
    rng = np.random.default_rng(seed)
    S = s2_analyze_arr(ds.images[:, 0])
    out = np.empty_like(ds.images)
    rots = np.empty((len(ds), 3))
    for i in range(len(ds)):
        rot = random_rotation(rng)
        rots[i] = (rot.alpha, rot.beta, rot.gamma)
        out[i, 0] = s2_synthesize_arr(rotate_s2_spectrum_arr(S[i], rot))
    return SphericalDataset(
        images=out, labels=ds.labels.copy(), b=ds.b, variant="r", seed=seed, rotations=rots
    )


def synth_dataset(n: int, b: int, classes: int = 10, seed: int = 0, noise: float = 0.15) -> SphericalDataset:
    """Labeled band-limited bump mixtures: one spectral template per class."""
    rng = np.random.default_rng(seed)
    M = 2 * b - 1
    from .spectral import order_mask_s2

    mask = order_mask_s2(b)
    decay = 1.0 / (1.0 + np.arange(b))[:, None]

    def rand_spec(gen):
        S = (gen.standard_normal((b, M)) + 1j * gen.standard_normal((b, M))) * decay * mask
        S = symmetrize_spectrum(S, mats=1)
        nrm = np.sqrt(np.sum(np.abs(S) ** 2))
        return S / max(nrm, 1e-12)

    templates = [rand_spec(rng) for _ in range(classes)]
    labels = np.arange(n, dtype=np.int64) % classes if n else np.zeros(0, dtype=np.int64)
    sigs = np.empty((n, 2 * b, 2 * b))
    for i in range(n):
        S = templates[labels[i]] + noise * rand_spec(rng)
        sigs[i] = s2_synthesize_arr(S)
    sigs = _normalize_band_limited(sigs, b) if n else sigs
    return SphericalDataset(
        images=sigs[:, None],
        labels=labels,
        b=b,
        variant="nr",
        seed=seed,
        rotations=np.zeros((n, 3)),
    )


# ---------------------------------------------------------------------------
# dataset file format
# ---------------------------------------------------------------------------

_DS_MAGIC = b"SPHDS001"
_VARIANTS = {"nr": 0, "r": 1}
_VARIANTS_INV = {v: k for k, v in _VARIANTS.items()}


def save_dataset(path, ds: SphericalDataset) -> None:
    with open(path, "wb") as fh:
        fh.write(_DS_MAGIC)
        fh.write(struct.pack("<IIBq", len(ds), ds.b, _VARIANTS[ds.variant], ds.seed))
        fh.write(ds.labels.astype(np.uint8).tobytes())
        fh.write(ds.images.astype("<f8").tobytes())
        fh.write(ds.rotations.astype("<f8").tobytes())


def load_dataset(path) -> SphericalDataset:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8 + 17 or raw[:8] != _DS_MAGIC:
        raise DataFormatError(f"{path}: not a dataset file")
    count, b, variant_code, seed = struct.unpack_from("<IIBq", raw, 8)
    if variant_code not in _VARIANTS_INV:
        raise DataFormatError(f"{path}: unknown variant code {variant_code}")
    off = 8 + 17
    need = count + count * (2 * b) ** 2 * 8 + count * 3 * 8
    if len(raw) != off + need:
        raise DataFormatError(f"{path}: size {len(raw)} does not match header (want {off + need})")
    labels = np.frombuffer(raw, dtype=np.uint8, count=count, offset=off).astype(np.int64)
    off += count
    images = np.frombuffer(raw, dtype="<f8", count=count * (2 * b) ** 2, offset=off).reshape(
        count, 1, 2 * b, 2 * b
    ).copy()
    off += count * (2 * b) ** 2 * 8
    rotations = np.frombuffer(raw, dtype="<f8", count=count * 3, offset=off).reshape(count, 3).copy()
    return SphericalDataset(
        images=images, labels=labels, b=int(b), variant=_VARIANTS_INV[variant_code],
        seed=int(seed), rotations=rotations,
    )
