import numpy as np
import pytest

from faver import schema
from faver.errors import EmptyPlanError
from faver.nss import NSS34_NAMES
from faver.pipeline import ExtractConfig, extract_video
from faver.synthetic import drop_frames, translating_noise
from faver.video_io import open_video, write_raw_yuv, write_y4m

SIGMA = NSS34_NAMES.index("mscn_ggd_sigma")


@pytest.fixture(scope="module")
def small_clip(tmp_path_factory):
    path = tmp_path_factory.mktemp("clip") / "pan.y4m"
    write_y4m(path, translating_noise(48, 64, 40, speed=1.5, seed=3), 20)
    return path


def subband_sigmas(temporal: np.ndarray) -> np.ndarray:
    """Fitted MSCN GGD spread of each temporal block (7 subbands x 2 scales)."""
    return temporal.reshape(14, 34)[:, SIGMA]


class TestExtractVideo:
    @pytest.mark.parametrize("wavelet", ["haar", "db2", "bior22"])
    def test_feature_counts(self, small_clip, wavelet):
        s, t = extract_video(open_video(small_clip), ExtractConfig(wavelet=wavelet))
        assert s.shape == (272,) and t.shape == (476,)
        assert s.size + t.size == schema.N_TOTAL
        assert np.all(np.isfinite(s)) and np.all(np.isfinite(t))

    def test_deterministic(self, small_clip):
        a = extract_video(open_video(small_clip))
        b = extract_video(open_video(small_clip))
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_raw_matches_y4m(self, small_clip, tmp_path):
        frames = translating_noise(48, 64, 40, speed=1.5, seed=3)
        write_raw_yuv(tmp_path / "pan.yuv", frames)
        raw = open_video(tmp_path / "pan.yuv", width=64, height=48, framerate=20, pixel_format="420")
        a = extract_video(raw, ExtractConfig(wavelet="haar"))
        b = extract_video(open_video(small_clip), ExtractConfig(wavelet="haar"))
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_stride_changes_only_temporal(self, small_clip):
        per_second = extract_video(open_video(small_clip), ExtractConfig(wavelet="haar"))
        strided = extract_video(open_video(small_clip), ExtractConfig(wavelet="haar", stride="4"))
        assert np.array_equal(per_second[0], strided[0])
        assert not np.array_equal(per_second[1], strided[1])

    def test_too_short(self, tmp_path):
        write_y4m(tmp_path / "short.y4m", translating_noise(32, 32, 20), 30)
        with pytest.raises(EmptyPlanError):
            extract_video(open_video(tmp_path / "short.y4m"), ExtractConfig(wavelet="bior22"))

    def test_static_video_temporal_fallback(self, tmp_path):
        frames = translating_noise(32, 48, 30, speed=0.0, seed=1)
        write_y4m(tmp_path / "still.y4m", frames, 30)
        _, t = extract_video(open_video(tmp_path / "still.y4m"), ExtractConfig(wavelet="haar"))
        from faver.nss import fallback_nss34

        assert np.array_equal(t, np.tile(fallback_nss34(), 14))


class TestFramerateSensitivity:
    @pytest.mark.parametrize("wavelet", ["haar", "db2", "bior22"])
    def test_frame_dropping_moves_subband_spread(self, tmp_path, wavelet):
        # the same pan at 120 fps and with only every fifth frame kept (24 fps content)
        frames = translating_noise(96, 128, 150, speed=2.0, seed=1)
        write_y4m(tmp_path / "hfr.y4m", frames, 120)
        write_y4m(tmp_path / "lfr.y4m", drop_frames(frames, 5), 120)
        cfg = ExtractConfig(wavelet=wavelet)
        _, hi = extract_video(open_video(tmp_path / "hfr.y4m"), cfg)
        _, lo = extract_video(open_video(tmp_path / "lfr.y4m"), cfg)
        a, b = subband_sigmas(hi), subband_sigmas(lo)
        rel = np.abs(a - b) / np.maximum(np.abs(a), 1e-12)
        assert rel.max() > 0.10

