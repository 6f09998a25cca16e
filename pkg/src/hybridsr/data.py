"""Image I/O, low-resolution degradation, aligned patch-pair extraction,
and on-disk dataset assembly.

Datasets are a human-readable manifest (key: value lines) next to a raw
`.hsrp` blob of little-endian float32 patch records, each record holding
one LR patch followed by its HR ground truth, row-major.
"""

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import interp
from .interp import InterpKind
from .tensor import as_tensor

LR_PATCH_SIZE = 16

DEGRADATION_KINDS = ("bicubic", "bilinear", "nearest", "pyramid")

_RESAMPLE_KINDS = {
    "bicubic": InterpKind.BICUBIC,
    "bilinear": InterpKind.BILINEAR,
    "nearest": InterpKind.NEAREST,
}


class ImageReadError(ValueError):
    """A file could not be read as an 8-bit RGB PNG/BMP image."""


@dataclass(frozen=True)
class Degradation:
    """How to synthesize an LR image from HR ground truth: one of the four
    downsampling methods, optionally preceded by a 5x5 Gaussian blur."""

    kind: str
    blur: bool = False

    def __post_init__(self):
        if self.kind not in DEGRADATION_KINDS:
            raise ValueError(
                f"unknown degradation {self.kind!r}; expected one of {DEGRADATION_KINDS}"
            )

    @property
    def label(self) -> str:
        return f"{self.kind}+blur" if self.blur else self.kind

    @classmethod
    def parse(cls, text: str) -> "Degradation":
        name = text.strip().lower()
        blur = False
        if name.endswith("+blur"):
            blur = True
            name = name[: -len("+blur")]
        return cls(kind=name, blur=blur)


@dataclass(frozen=True)
class PatchPair:
    """An LR patch with its aligned HR ground truth crop."""

    lr: np.ndarray  # (16, 16, 3)
    hr: np.ndarray  # (16*scale, 16*scale, 3)
    image_id: str
    offset: tuple  # (y, x) in LR pixel coordinates


def load_image(path) -> np.ndarray:
    """Read an 8-bit RGB PNG or BMP into a float64 tensor in [0, 255]."""
    path = os.fspath(path)
    try:
        with Image.open(path) as img:
            if img.format not in ("PNG", "BMP"):
                raise ImageReadError(f"{path}: unsupported format {img.format!r} (need PNG or BMP)")
            if img.mode != "RGB":
                raise ImageReadError(f"{path}: unsupported mode {img.mode!r} (need 8-bit RGB)")
            arr = np.asarray(img, dtype=np.float64)
    except FileNotFoundError as exc:
        raise ImageReadError(f"{path}: {exc.strerror}") from exc
    except UnidentifiedImageError as exc:
        raise ImageReadError(f"{path}: not a recognized image file") from exc
    return as_tensor(arr)


def save_image(tensor, path) -> None:
    """Quantize to 8-bit (round half away from zero, clamp to [0, 255]) and write."""
    tensor = as_tensor(tensor)
    if tensor.shape[2] != 3:
        raise ValueError(f"save_image needs 3 channels, got {tensor.shape[2]}")
    rounded = np.copysign(np.floor(np.abs(tensor) + 0.5), tensor)
    quantized = np.clip(rounded, 0.0, 255.0).astype(np.uint8)
    Image.fromarray(quantized, mode="RGB").save(os.fspath(path))


def crop_to_multiple(image, factor: int) -> np.ndarray:
    """Crop bottom/right to the largest size divisible by `factor`."""
    image = as_tensor(image)
    h, w, _ = image.shape
    h2, w2 = (h // factor) * factor, (w // factor) * factor
    if h2 < factor or w2 < factor:
        raise ValueError(f"image {(h, w)} smaller than one {factor}x{factor} block")
    return image[:h2, :w2, :]


def degrade(image, degradation: Degradation, factor: int) -> np.ndarray:
    """Produce the LR image at 1/factor size by the named method.

    The image is first cropped to dims divisible by `factor`; the blur flag
    applies a 5x5 Gaussian before downsampling. The result is clamped to
    [0, 255] (an LR image is an image, and bicubic decimation can overshoot),
    so stored patches stay in the 8-bit value range.
    """
    image = crop_to_multiple(image, factor)
    if degradation.blur:
        image = interp.gaussian_blur(image, 5, 1.0)
    if degradation.kind == "pyramid":
        lr = interp.pyramid_downsample(image, factor)
    else:
        lr = interp.resample(image, _RESAMPLE_KINDS[degradation.kind], 1.0 / factor)
    return np.clip(lr, 0.0, 255.0)


def extract_patch_pairs(hr_image, degradation: Degradation, scale: int, stride: int,
                        limit=None, seed=0, image_id: str = "") -> list:
    """Degrade once, then emit aligned (LR, HR) patch pairs on the stride grid.

    Grid positions are shuffled deterministically by `seed` before the
    optional `limit` is applied, so a limit takes a uniform sample.
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    hr = crop_to_multiple(hr_image, scale)
    lr = degrade(hr, degradation, scale)
    lr_h, lr_w, _ = lr.shape
    p = LR_PATCH_SIZE
    if lr_h < p or lr_w < p:
        return []
    positions = [(y, x) for y in range(0, lr_h - p + 1, stride)
                 for x in range(0, lr_w - p + 1, stride)]
    rng = np.random.default_rng(seed)
    rng.shuffle(positions)
    if limit is not None:
        positions = positions[:limit]
    pairs = []
    for y, x in positions:
        lr_patch = lr[y : y + p, x : x + p, :].copy()
        hy, hx = y * scale, x * scale
        hr_patch = hr[hy : hy + p * scale, hx : hx + p * scale, :].copy()
        pairs.append(PatchPair(lr=lr_patch, hr=hr_patch, image_id=image_id, offset=(y, x)))
    return pairs


def _store_paths(base):
    base = Path(base)
    return base.with_suffix(".manifest"), base.with_suffix(".hsrp")


def build_dataset(image_dir, degradations, scale: int, stride: int, seed: int,
                  out_path, limit_per_image=None) -> dict:
    """Extract patch pairs from every PNG/BMP under `image_dir` and write the
    manifest + `.hsrp` patch store. Returns the manifest as a dict.

    Images are processed in lexicographic path order; per-image extraction
    seeds derive from the dataset seed, so identical inputs give a
    byte-identical store.
    """
    image_dir = Path(image_dir)
    paths = sorted(
        p for p in image_dir.iterdir()
        if p.is_file() and p.suffix.lower() in (".png", ".bmp")
    )
    if not paths:
        raise ValueError(f"no PNG/BMP images found in {image_dir}")
    degradations = list(degradations)
    if not degradations:
        raise ValueError("at least one degradation is required")

    manifest_path, store_path = _store_paths(out_path)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    root = np.random.SeedSequence(seed)
    children = iter(root.spawn(len(paths) * len(degradations)))

    image_lines = []
    total = 0
    with open(store_path, "wb") as store:
        for path in paths:
            hr = load_image(path)
            count = 0
            for deg in degradations:
                pairs = extract_patch_pairs(
                    hr, deg, scale, stride,
                    limit=limit_per_image, seed=next(children), image_id=path.name,
                )
                for pair in pairs:
                    store.write(pair.lr.astype("<f4").tobytes())
                    store.write(pair.hr.astype("<f4").tobytes())
                count += len(pairs)
            image_lines.append(f"image: {path.name} {count}")
            total += count

    manifest = {
        "format": "hsrp-manifest",
        "version": "1",
        "scale": str(scale),
        "lr_patch_size": str(LR_PATCH_SIZE),
        "hr_patch_size": str(LR_PATCH_SIZE * scale),
        "stride": str(stride),
        "seed": str(seed),
        "degradations": ",".join(d.label for d in degradations),
        "pair_count": str(total),
        "store": store_path.name,
    }
    lines = [f"{k}: {v}" for k, v in manifest.items()] + image_lines
    manifest_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


def load_dataset(base_path):
    """Read a dataset written by `build_dataset`.

    Returns (manifest dict, lr array (N, 16, 16, 3), hr array (N, s, s, 3)),
    both float64.
    """
    manifest_path, store_path = _store_paths(base_path)
    if not manifest_path.exists():
        raise FileNotFoundError(f"missing dataset manifest {manifest_path}")
    manifest = {}
    images = []
    for line in manifest_path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        key, value = line.split(": ", 1)
        if key == "image":
            images.append(value)
        else:
            manifest[key] = value
    manifest["images"] = images
    if manifest.get("format") != "hsrp-manifest":
        raise ValueError(f"{manifest_path}: not a dataset manifest")
    scale = int(manifest["scale"])
    n = int(manifest["pair_count"])
    p = int(manifest["lr_patch_size"])
    hp = int(manifest["hr_patch_size"])
    blob = np.fromfile(store_path, dtype="<f4")
    record = p * p * 3 + hp * hp * 3
    if blob.size != n * record:
        raise ValueError(
            f"{store_path}: expected {n * record} floats for {n} records, found {blob.size}"
        )
    blob = blob.reshape(n, record)
    lr = blob[:, : p * p * 3].reshape(n, p, p, 3).astype(np.float64)
    hr = blob[:, p * p * 3 :].reshape(n, hp, hp, 3).astype(np.float64)
    if hp != p * scale:
        raise ValueError(f"{manifest_path}: HR patch size {hp} inconsistent with scale {scale}")
    return manifest, lr, hr
