"""Shared test helpers."""

import binascii

import numpy as np

from threecpt.frames import ColorImage, DepthMap, RgbzFrame


def make_frame(width, height, seed=0, timestamp_us=0, seq=0):
    """Random valid RgbzFrame."""
    rng = np.random.default_rng(seed)
    color = np.zeros((height, width, 4), dtype=np.uint8)
    color[:, :, :3] = rng.integers(0, 256, size=(height, width, 3))
    codes = rng.integers(0, 256, size=(height, width)).astype(np.uint8)
    return RgbzFrame(
        color=ColorImage(color),
        depth=DepthMap.all_valid(codes),
        timestamp_us=timestamp_us,
        seq=seq,
    )


def frame_checksum(frame):
    """Content checksum over color bytes and depth codes."""
    return binascii.crc32(
        frame.color.tobytes() + np.ascontiguousarray(frame.depth.codes).tobytes()
    )
