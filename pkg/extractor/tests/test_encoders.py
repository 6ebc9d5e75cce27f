import numpy as np
import pytest
from PIL import Image

from pfx_extract import DEFAULT_ENCODER, EncoderUnavailable, PixelEncoder, make_encoder

from _imagehelpers import make_image


class TestRegistry:
    def test_default_is_the_pretrained_encoder(self):
        assert DEFAULT_ENCODER == "clip"

    def test_pixel_lookup(self):
        assert isinstance(make_encoder("pixel"), PixelEncoder)

    def test_unknown_name(self):
        with pytest.raises(EncoderUnavailable, match="unknown encoder"):
            make_encoder("resnet-9000")


class TestPixelEncoder:
    def test_width(self):
        enc = PixelEncoder()
        assert enc.dim == 256
        img = Image.new("RGB", (20, 20), (10, 200, 10))
        assert enc.encode(img).shape == (256,)

    def test_deterministic_across_instances(self, tmp_path):
        path = make_image(tmp_path / "a.png", gradient=True)
        with Image.open(path) as img:
            first = PixelEncoder().encode(img.convert("RGB"))
            second = PixelEncoder().encode(img.convert("RGB"))
        np.testing.assert_array_equal(first, second)

    def test_different_images_differ(self):
        enc = PixelEncoder()
        red = enc.encode(Image.new("RGB", (16, 16), (255, 0, 0)))
        blue = enc.encode(Image.new("RGB", (16, 16), (0, 0, 255)))
        assert not np.allclose(red, blue)

    def test_black_image_not_zero(self):
        # The bias row keeps an all-zero frame representable.
        enc = PixelEncoder()
        black = enc.encode(Image.new("RGB", (16, 16), (0, 0, 0)))
        assert float(np.linalg.norm(black)) > 0.0

    def test_grayscale_input_accepted(self):
        enc = PixelEncoder()
        gray = Image.new("L", (16, 16), 128)
        assert enc.encode(gray).shape == (256,)
