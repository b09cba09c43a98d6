from __future__ import annotations

import io

import numpy as np
import pytest
from PIL import Image

from weightscape import forward
from weightscape.errors import ShapeError
from weightscape.perturb import perturb_multiplicative
from weightscape.render import (
    ImageGrid,
    RenderRequest,
    VariantSpec,
    from_pixels,
    render_grid,
    sample_latents,
    to_pixels,
    write_grid,
)


class TestSampleLatents:
    def test_deterministic(self):
        a = sample_latents(4, 3, 16)
        b = sample_latents(4, 3, 16)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_prefix_stability(self):
        one = sample_latents(9, 1, 16)
        two = sample_latents(9, 2, 16)
        np.testing.assert_array_equal(one[0], two[0])

    def test_pooled_statistics(self):
        pooled = np.concatenate(sample_latents(0, 10_000, 10))
        n = pooled.size
        assert abs(pooled.mean()) < 4 / np.sqrt(n)
        assert abs(pooled.std() - 1.0) < 0.02

    def test_count_validation(self):
        with pytest.raises(ShapeError):
            sample_latents(0, 0, 8)


class TestToPixels:
    def test_endpoints(self):
        img = np.zeros((3, 1, 1), dtype=np.float32)
        img[0], img[1], img[2] = -1.0, 0.0, 1.0
        px = to_pixels(img)
        assert px[0, 0, 0] == 0
        assert px[0, 0, 1] == 128  # 127.5 rounds half away from zero
        assert px[0, 0, 2] == 255

    def test_out_of_range_clamped(self):
        img = np.full((3, 2, 2), 1.7, dtype=np.float32)
        img[1] = -3.0
        px = to_pixels(img)
        assert (px[:, :, 0] == 255).all() and (px[:, :, 1] == 0).all()

    def test_roundtrip_within_one_step(self):
        rng = np.random.default_rng(0)
        img = (rng.random((3, 8, 8)) * 2 - 1).astype(np.float32)
        back = from_pixels(to_pixels(img))
        assert np.abs(back - img).max() <= 1.0 / 255.0 + 1e-7


class TestRenderGrid:
    def _grid(self, tiny_graph, base_scaled, variants=None, count=2, classes=(0,),
              latent_seed=0, latent_index=None):
        variants = variants or [VariantSpec("base", base_scaled)]
        request = RenderRequest(
            latent_seed=latent_seed, latent_count=count, classes=tuple(classes),
            variants=tuple(variants), latent_index=latent_index,
        )
        return render_grid(request, tiny_graph)

    def test_dimensions(self, tiny_graph, base_scaled):
        variants = [VariantSpec(f"v{i}", base_scaled) for i in range(7)]
        grid = self._grid(tiny_graph, base_scaled, variants=variants, count=4)
        assert (grid.rows, grid.cols) == (4, 7)
        assert grid.pixels.shape == (4 * 64, 7 * 64, 3)

    def test_base_only_tiles_equal_direct_forward(self, tiny_graph, base_scaled):
        grid = self._grid(tiny_graph, base_scaled, count=2, classes=(1,))
        for row, (z, c) in enumerate(grid.row_inputs):
            expected = to_pixels(forward(tiny_graph, base_scaled, z, c))
            np.testing.assert_array_equal(grid.tile(row, 0), expected)

    def test_rows_grouped_by_class(self, tiny_graph, base_scaled):
        grid = self._grid(tiny_graph, base_scaled, count=2, classes=(3, 5))
        classes = [c for _, c in grid.row_inputs]
        assert classes == [3, 3, 5, 5]
        z0 = grid.row_inputs[0][0]
        np.testing.assert_array_equal(z0, grid.row_inputs[2][0])

    def test_identical_row_inputs_across_variants(self, tiny_graph, base_scaled):
        derived = perturb_multiplicative(base_scaled, 0.35, seed=0)
        variants = [VariantSpec("derived", derived), VariantSpec("base", base_scaled)]
        grid = self._grid(tiny_graph, base_scaled, variants=variants, count=2)
        for row, (z, c) in enumerate(grid.row_inputs):
            for col, variant in enumerate(variants):
                expected = to_pixels(forward(tiny_graph, variant.checkpoint, z, c))
                np.testing.assert_array_equal(grid.tile(row, col), expected)

    def test_png_bytes_deterministic(self, tiny_graph, base_scaled):
        a = self._grid(tiny_graph, base_scaled).to_png_bytes()
        b = self._grid(tiny_graph, base_scaled).to_png_bytes()
        assert a == b

    def test_thread_count_does_not_change_bytes(self, tiny_graph, base_scaled, monkeypatch):
        monkeypatch.setenv("WEIGHTSCAPE_THREADS", "1")
        a = self._grid(tiny_graph, base_scaled).to_png_bytes()
        monkeypatch.setenv("WEIGHTSCAPE_THREADS", "4")
        b = self._grid(tiny_graph, base_scaled).to_png_bytes()
        assert a == b

    def test_latent_index_selects_stream_element(self, tiny_graph, base_scaled):
        grid = self._grid(tiny_graph, base_scaled, latent_index=2, classes=(0, 1))
        assert grid.rows == 2  # one row per class
        z2 = sample_latents(0, 3, 16)[2]
        np.testing.assert_array_equal(grid.row_inputs[0][0], z2)

    def test_alpha_zero_variant_equals_base_column(self, tiny_graph, base_scaled):
        derived = perturb_multiplicative(base_scaled, 0.0, seed=5)
        variants = [VariantSpec("derived", derived), VariantSpec("base", base_scaled)]
        grid = self._grid(tiny_graph, base_scaled, variants=variants)
        for row in range(grid.rows):
            np.testing.assert_array_equal(grid.tile(row, 0), grid.tile(row, 1))

    def test_write_grid_and_sidecar(self, tiny_graph, base_scaled, tmp_path):
        grid = self._grid(tiny_graph, base_scaled)
        out = tmp_path / "grid.png"
        sidecar = write_grid(grid, out)
        assert out.is_file() and sidecar.name == "grid.png.provenance.json"
        decoded = np.asarray(Image.open(io.BytesIO(out.read_bytes())).convert("RGB"))
        np.testing.assert_array_equal(decoded, grid.pixels)
        text = sidecar.read_text()
        for key in ("latent_seed", "classes", "variants", "graph"):
            assert key in text

    def test_empty_request_rejected(self, tiny_graph, base_scaled):
        with pytest.raises(ShapeError):
            request = RenderRequest(latent_seed=0, latent_count=1, classes=(),
                                    variants=(VariantSpec("b", base_scaled),))
            render_grid(request, tiny_graph)
