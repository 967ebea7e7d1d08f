"""Binary PGM (P5) and PPM (P6) reading and writing.

Images are numpy arrays of shape (height, width, channels), dtype uint8,
with channels 1 (grayscale) or 3 (RGB). Only maxval 255 is supported, and
emission is canonical: identical tensors always produce identical bytes.
"""

import numpy as np

_WHITESPACE = b" \t\n\r\x0b\x0c"


class PnmError(ValueError):
    """Base class for PGM/PPM parse failures."""


class PnmHeaderError(PnmError):
    """Missing or malformed magic, dimensions, or maxval token."""


class PnmMaxvalError(PnmError):
    """Well-formed header but maxval is not 255."""


class PnmTruncatedError(PnmError):
    """Payload shorter than width * height * channels."""


def validate_image(img: np.ndarray) -> np.ndarray:
    """Check that `img` is a valid (H, W, C) uint8 tensor and return it."""
    img = np.asarray(img)
    if img.ndim != 3:
        raise ValueError(f"image must have shape (H, W, C), got {img.shape}")
    if img.shape[2] not in (1, 3):
        raise ValueError(f"channels must be 1 or 3, got {img.shape[2]}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"image dimensions must be positive, got {img.shape}")
    if img.dtype != np.uint8:
        raise ValueError(f"image dtype must be uint8, got {img.dtype}")
    return img


class _Tokenizer:
    """Pull whitespace-separated header tokens, honoring '#' comments."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def _skip_separators(self) -> None:
        while self.pos < len(self.data):
            byte = self.data[self.pos : self.pos + 1]
            if byte in _WHITESPACE:
                self.pos += 1
            elif byte == b"#":
                end = self.data.find(b"\n", self.pos)
                self.pos = len(self.data) if end < 0 else end + 1
            else:
                return

    def next_token(self) -> bytes:
        self._skip_separators()
        start = self.pos
        while self.pos < len(self.data):
            byte = self.data[self.pos : self.pos + 1]
            if byte in _WHITESPACE or byte == b"#":
                break
            self.pos += 1
        if self.pos == start:
            raise PnmHeaderError("unexpected end of header")
        return self.data[start : self.pos]

    def consume_single_separator(self) -> None:
        # Exactly one whitespace byte separates maxval from the payload;
        # anything else (including a comment) is malformed here.
        if self.pos >= len(self.data):
            raise PnmTruncatedError("missing payload")
        if self.data[self.pos : self.pos + 1] not in _WHITESPACE:
            raise PnmHeaderError("maxval not followed by single whitespace byte")
        self.pos += 1


def _int_token(tok: bytes, what: str) -> int:
    if not tok.isdigit():
        raise PnmHeaderError(f"bad {what} token {tok!r}")
    return int(tok)


def load_image(data: bytes) -> np.ndarray:
    """Parse binary PGM/PPM bytes into an (H, W, C) uint8 array.

    Header comments are accepted; trailing bytes after the declared payload
    are ignored (we never read past it).
    """
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise TypeError("load_image expects bytes")
    data = bytes(data)
    tok = _Tokenizer(data)
    magic = tok.next_token()
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise PnmHeaderError(f"bad magic {magic!r}")
    width = _int_token(tok.next_token(), "width")
    height = _int_token(tok.next_token(), "height")
    if width < 1 or height < 1:
        raise PnmHeaderError(f"non-positive dimensions {width}x{height}")
    maxval = _int_token(tok.next_token(), "maxval")
    if maxval != 255:
        raise PnmMaxvalError(f"unsupported maxval {maxval}")
    tok.consume_single_separator()
    n = width * height * channels
    payload = data[tok.pos : tok.pos + n]
    if len(payload) < n:
        raise PnmTruncatedError(f"payload has {len(payload)} of {n} bytes")
    img = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    return img.copy()


def save_image(img: np.ndarray) -> bytes:
    """Emit canonical binary PGM/PPM bytes for an (H, W, C) uint8 array."""
    img = validate_image(img)
    height, width, channels = img.shape
    magic = b"P5" if channels == 1 else b"P6"
    header = magic + b"\n" + f"{width} {height}".encode() + b"\n255\n"
    return header + np.ascontiguousarray(img).tobytes()
