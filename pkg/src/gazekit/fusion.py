"""Toy-scale multi-modal fusion dataflow.

The learned backbones are replaced by pluggable seeded-random linear maps so
the shapes, softmax normalization, and modulation semantics of the fusion
path can be exercised without training.  The dataflow itself mirrors the
full pipeline: pooled mask embeddings feed two attention layers, attention
modulates the scene and depth feature maps, each modulated map concatenates
the face embedding per spatial cell, two encoders are summed and decoded to
a heatmap.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .binning import GazeAnnotation
from .dism import DismParams, DismResult, generate_dism
from .errors import DimensionError, WeightFormatError
from .geometry import DepthMap, Intrinsics, _clip_box
from .metrics import gaussian_heatmap, heatmap_argmax

MAGIC = b"MMFW"
BUNDLE_VERSION = 1

# Toy-scale defaults: feature maps are C x h x w, heatmaps H x W.
TOY_CHANNELS = 8
TOY_GRID = (4, 4)
HEATMAP_SIZE = (64, 64)
LATENT_DIM = 32


@dataclass(frozen=True)
class LinearProjection:
    """Affine map y = W x + b with W of shape (out, in)."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
            raise DimensionError(f"inconsistent projection shapes {w.shape}, {b.shape}")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).ravel()
        if x.shape[0] != self.in_dim:
            raise DimensionError(f"expected input of length {self.in_dim}, got {x.shape[0]}")
        return self.weight @ x + self.bias


def pool_flatten(m: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Adaptive max-pool a 2-D map to a target grid, flattened row-major.

    Window i spans rows [floor(i*H/h), ceil((i+1)*H/h)), so windows tile the
    map even when dimensions do not divide evenly.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"expected 2-D map, got shape {m.shape}")
    big_h, big_w = m.shape
    th, tw = target
    out = np.empty((th, tw), dtype=np.float64)
    for i in range(th):
        r0 = (i * big_h) // th
        r1 = -((-(i + 1) * big_h) // th)  # ceil
        for j in range(tw):
            c0 = (j * big_w) // tw
            c1 = -((-(j + 1) * big_w) // tw)
            out[i, j] = m[r0:r1, c0:c1].max()
    return out.ravel()


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def attention_weights(face: np.ndarray, aux: np.ndarray, proj: LinearProjection,
                      grid: tuple[int, int]) -> np.ndarray:
    """Softmax attention over a spatial grid from concatenated embeddings.

    Returns a (1, h, w) map that is strictly positive and sums to 1.
    """
    face = np.asarray(face, dtype=np.float64).ravel()
    aux = np.asarray(aux, dtype=np.float64).ravel()
    h, w = grid
    if proj.out_dim != h * w:
        raise DimensionError(f"projection emits {proj.out_dim} logits, grid wants {h * w}")
    logits = proj(np.concatenate([face, aux]))
    return softmax(logits).reshape(1, h, w)


def modulate(features: np.ndarray, attn: np.ndarray) -> np.ndarray:
    """Elementwise-multiply a C x h x w feature map by a 1 x h x w attention map."""
    features = np.asarray(features, dtype=np.float64)
    attn = np.asarray(attn, dtype=np.float64)
    if features.ndim != 3 or attn.shape != (1,) + features.shape[1:]:
        raise DimensionError(
            f"spatial dims mismatch: features {features.shape}, attn {attn.shape}")
    return features * attn


def _concat_face(features: np.ndarray, face: np.ndarray) -> np.ndarray:
    """Broadcast the face embedding to every spatial cell and stack on channels."""
    c, h, w = features.shape
    face_map = np.broadcast_to(np.asarray(face, dtype=np.float64).reshape(-1, 1, 1),
                               (len(face), h, w))
    return np.concatenate([features, face_map], axis=0)


def fuse(scene_mod: np.ndarray, depth_mod: np.ndarray, face: np.ndarray,
         enc_scene: LinearProjection, enc_depth: LinearProjection,
         dec: LinearProjection, out_size: tuple[int, int] = HEATMAP_SIZE) -> np.ndarray:
    """Encode the two modulated maps (face concatenated per cell), sum, decode."""
    h, w = out_size
    if dec.out_dim != h * w:
        raise DimensionError(f"decoder emits {dec.out_dim}, heatmap wants {h * w}")
    enc_i = enc_scene(_concat_face(scene_mod, face).ravel())
    enc_d = enc_depth(_concat_face(depth_mod, face).ravel())
    if enc_i.shape != enc_d.shape:
        raise DimensionError("encoder output dims differ; cannot sum")
    return dec(enc_i + enc_d).reshape(h, w)


# --- weight bundles ----------------------------------------------------------

def save_bundle(tensors: dict[str, np.ndarray], file) -> None:
    """Write named float32 tensors in the flat MMFW binary format."""
    with open(file, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", BUNDLE_VERSION, len(tensors)))
        for name, arr in tensors.items():
            arr = np.asarray(arr, dtype="<f4")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes(order="C"))


def load_bundle(file) -> dict[str, np.ndarray]:
    """Read an MMFW weight bundle back into named float64 tensors."""
    with open(file, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise WeightFormatError("bad weight bundle: wrong magic")
    version, count = struct.unpack_from("<II", data, 4)
    if version != BUNDLE_VERSION:
        raise WeightFormatError(f"unsupported bundle version {version}")
    pos = 12
    tensors: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", data, pos)
            pos += 2
            name = data[pos:pos + name_len].decode("utf-8")
            pos += name_len
            (rank,) = struct.unpack_from("<B", data, pos)
            pos += 1
            dims = struct.unpack_from(f"<{rank}I", data, pos)
            pos += 4 * rank
            n = int(np.prod(dims)) if rank else 1
            arr = np.frombuffer(data, dtype="<f4", count=n, offset=pos)
            pos += 4 * n
            tensors[name] = arr.reshape(dims).astype(np.float64)
    except (struct.error, ValueError) as exc:
        raise WeightFormatError(f"truncated or corrupt bundle: {exc}") from exc
    if pos != len(data):
        raise WeightFormatError("trailing bytes after last tensor")
    return tensors


@dataclass(frozen=True)
class WeightBundle:
    """The eight projections of the toy fusion dataflow."""

    scene_extractor: LinearProjection
    depth_extractor: LinearProjection
    face_extractor: LinearProjection
    attn_s: LinearProjection
    attn_m: LinearProjection
    enc_scene: LinearProjection
    enc_depth: LinearProjection
    dec: LinearProjection
    channels: int = TOY_CHANNELS
    grid: tuple[int, int] = TOY_GRID
    heatmap_size: tuple[int, int] = HEATMAP_SIZE

    _NAMES = ("scene_extractor", "depth_extractor", "face_extractor",
              "attn_s", "attn_m", "enc_scene", "enc_depth", "dec")

    @classmethod
    def random(cls, seed: int, channels: int = TOY_CHANNELS,
               grid: tuple[int, int] = TOY_GRID,
               heatmap_size: tuple[int, int] = HEATMAP_SIZE,
               latent: int = LATENT_DIM) -> "WeightBundle":
        rng = np.random.default_rng(seed)
        h, w = grid
        cells = h * w

        def proj(out_dim, in_dim):
            scale = 1.0 / np.sqrt(in_dim)
            return LinearProjection(rng.normal(0, scale, (out_dim, in_dim)),
                                    rng.normal(0, scale, out_dim))

        return cls(
            scene_extractor=proj(channels * cells, 2 * cells),
            depth_extractor=proj(channels * cells, 2 * cells),
            face_extractor=proj(channels, cells),
            attn_s=proj(cells, channels + cells),
            attn_m=proj(cells, channels + cells),
            enc_scene=proj(latent, 2 * channels * cells),
            enc_depth=proj(latent, 2 * channels * cells),
            dec=proj(heatmap_size[0] * heatmap_size[1], latent),
            channels=channels, grid=grid, heatmap_size=heatmap_size,
        )

    def to_tensors(self) -> dict[str, np.ndarray]:
        tensors: dict[str, np.ndarray] = {
            "meta.dims": np.array([self.channels, *self.grid, *self.heatmap_size],
                                  dtype=np.float32),
        }
        for name in self._NAMES:
            p: LinearProjection = getattr(self, name)
            tensors[f"{name}.weight"] = p.weight
            tensors[f"{name}.bias"] = p.bias
        return tensors

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray]) -> "WeightBundle":
        try:
            dims = tensors["meta.dims"].astype(int)
            projections = {
                name: LinearProjection(tensors[f"{name}.weight"], tensors[f"{name}.bias"])
                for name in cls._NAMES
            }
        except KeyError as exc:
            raise WeightFormatError(f"bundle missing tensor {exc}") from exc
        return cls(**projections, channels=int(dims[0]),
                   grid=(int(dims[1]), int(dims[2])),
                   heatmap_size=(int(dims[3]), int(dims[4])))

    def save(self, file) -> None:
        save_bundle(self.to_tensors(), file)

    @classmethod
    def load(cls, file) -> "WeightBundle":
        return cls.from_tensors(load_bundle(file))


# --- end-to-end prediction ---------------------------------------------------

@dataclass(frozen=True)
class Prediction:
    """One pipeline output: a heatmap, its argmax point, and warning flags."""

    heatmap: np.ndarray
    point: tuple[float, float]
    empty_dism: bool
    fallback_center: bool = False


def _head_mask(head_box, size: tuple[int, int]) -> np.ndarray:
    h, w = size
    mask = np.zeros((h, w), dtype=np.float64)
    x0, y0, x1, y1 = _clip_box(head_box, w, h)
    mask[y0:y1, x0:x1] = 1.0
    return mask


def mask_centroid(mask: np.ndarray) -> tuple[float, float]:
    """Normalized (x, y) centroid of the true bits of a mask."""
    rows, cols = np.nonzero(mask)
    h, w = mask.shape
    return (float(cols.mean()) / (w - 1) if w > 1 else 0.0,
            float(rows.mean()) / (h - 1) if h > 1 else 0.0)


def pipeline_predict(image: np.ndarray | None, depth: DepthMap,
                     head_box: tuple[int, int, int, int],
                     annotation: GazeAnnotation, bundle: WeightBundle | None,
                     k: Intrinsics | None = None,
                     params: DismParams = DismParams(),
                     sigma: float = 3.0,
                     heatmap_size: tuple[int, int] = HEATMAP_SIZE,
                     dism: DismResult | None = None) -> Prediction:
    """Run the gaze-target pipeline for one subject.

    With ``bundle=None`` the non-learned baseline is used: the predicted
    point is the DISM mask centroid and the heatmap is a Gaussian there.
    An all-false DISM mask falls back to the image center with a warning.
    ``image`` is an optional grayscale scene in [0, 1]; zeros when absent.
    """
    if k is None:
        k = Intrinsics.default_for(depth.width, depth.height)
    if dism is None:
        dism = generate_dism(depth, head_box, annotation, k, params)

    if bundle is None:
        if dism.empty:
            point = (0.5, 0.5)
            return Prediction(heatmap=gaussian_heatmap(point, heatmap_size, sigma),
                              point=point, empty_dism=True, fallback_center=True)
        point = mask_centroid(dism.mask)
        return Prediction(heatmap=gaussian_heatmap(point, heatmap_size, sigma),
                          point=point, empty_dism=False)

    size = (depth.height, depth.width)
    if image is None:
        image = np.zeros(size)
    image = np.asarray(image, dtype=np.float64)
    if image.shape != size:
        raise DimensionError(f"image shape {image.shape} != depth shape {size}")

    grid = bundle.grid
    c = bundle.channels
    head = _head_mask(head_box, size)
    e_s = pool_flatten(dism.mask.astype(np.float64), grid)
    e_m = pool_flatten(head, grid)

    scene_in = np.concatenate([pool_flatten(image, grid), e_m])
    depth_in = np.concatenate([pool_flatten(depth.values, grid), e_s])
    x0, y0, x1, y1 = _clip_box(head_box, depth.width, depth.height)
    face_crop = image[y0:y1, x0:x1] if (y1 > y0 and x1 > x0) else np.zeros((1, 1))

    scene_feat = bundle.scene_extractor(scene_in).reshape(c, *grid)
    depth_feat = bundle.depth_extractor(depth_in).reshape(c, *grid)
    e_f = bundle.face_extractor(pool_flatten(face_crop, grid))

    attn_s = attention_weights(e_f, e_s, bundle.attn_s, grid)
    attn_m = attention_weights(e_f, e_m, bundle.attn_m, grid)
    heatmap = fuse(modulate(scene_feat, attn_s), modulate(depth_feat, attn_m),
                   e_f, bundle.enc_scene, bundle.enc_depth, bundle.dec,
                   bundle.heatmap_size)
    return Prediction(heatmap=heatmap, point=heatmap_argmax(heatmap),
                      empty_dism=dism.empty)
