"""Image encoders.

"pixel" is a deterministic, fully offline projection meant for tests and smoke
runs. "clip" wraps a pretrained vision-language model; it is the default for
real use but needs the sentence-transformers package and downloaded weights,
so nothing in this repository's test suite touches it.
"""
from __future__ import annotations

import math

import numpy as np
from PIL import Image

from .errors import EncoderUnavailable

DEFAULT_ENCODER = "clip"


class PixelEncoder:
    """Resize to 32x32 RGB, flatten, push through a frozen Gaussian projection.

    The projection matrix comes from a fixed seed, so identical image bytes map
    to identical vectors on every run and machine. A constant bias row keeps an
    all-black image away from the zero vector.
    """

    name = "pixel"
    dim = 256
    _side = 32
    _seed = 20240613

    def __init__(self):
        rows = 3 * self._side * self._side + 1
        rng = np.random.default_rng(self._seed)
        self._proj = (rng.standard_normal((rows, self.dim)) / math.sqrt(rows)).astype(np.float32)

    def encode(self, image: Image.Image) -> np.ndarray:
        small = image.convert("RGB").resize((self._side, self._side), Image.BILINEAR)
        flat = np.asarray(small, dtype=np.float32).ravel() / 255.0
        return np.concatenate([flat, np.ones(1, dtype=np.float32)]) @ self._proj


class ClipEncoder:
    """Pretrained vision-language image encoder (ViT-B/32, 512 wide)."""

    name = "clip"

    def __init__(self, model_name: str = "clip-ViT-B-32"):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise EncoderUnavailable(
                "the clip encoder needs the sentence-transformers package "
                "(pip install 'pfx-extract[clip]')"
            ) from exc
        try:
            self._model = SentenceTransformer(model_name)
        except Exception as exc:
            raise EncoderUnavailable(f"could not load encoder {model_name!r}: {exc}") from exc
        self.dim = int(self._model.get_sentence_embedding_dimension() or 512)

    def encode(self, image: Image.Image) -> np.ndarray:
        vec = self._model.encode(
            [image.convert("RGB")], convert_to_numpy=True, show_progress_bar=False
        )[0]
        return np.asarray(vec, dtype=np.float32)


_REGISTRY = {
    PixelEncoder.name: PixelEncoder,
    ClipEncoder.name: ClipEncoder,
}


def make_encoder(name: str):
    try:
        factory = _REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY))
        raise EncoderUnavailable(f"unknown encoder {name!r}, available: {known}") from None
    return factory()
