"""Probability oracles: the only view the attack ever gets of a classifier.

An oracle maps an image to a probability vector over K classes and counts
its queries. Two kinds exist: a builtin linear-softmax fixture (hermetic,
deterministic, perfect for tests) and a remote HTTP service speaking the
wire protocol below.

Wire protocol:
    POST /classify   body = canonical PGM/PPM bytes -> {"probs": [f64 x K]}
    GET  /meta       -> {"classes": K, "height": H, "width": W, "channels": C}
"""

import json
import struct
import threading

import numpy as np
import requests

from .image_io import save_image, validate_image

WEIGHTS_MAGIC = b"LSMW"
WEIGHTS_VERSION = 1

PROB_SUM_TOL = 1e-6


class OracleError(Exception):
    """Base class for oracle failures."""


class ShapeMismatchError(OracleError):
    """Image shape does not match what the oracle expects."""


class OracleProtocolError(OracleError):
    """Malformed response, bad status, or invariant-violating probabilities."""


class OracleTimeoutError(OracleError):
    """Remote oracle did not answer within the timeout."""


class OracleConnectionError(OracleError):
    """Remote oracle not reachable."""


def validate_probability_vector(probs, num_classes: int | None = None) -> np.ndarray:
    """Check probability-vector invariants and return a float64 copy."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or len(p) < 2:
        raise OracleProtocolError(f"probability vector must be 1-D with K >= 2, got shape {p.shape}")
    if num_classes is not None and len(p) != num_classes:
        raise OracleProtocolError(f"expected {num_classes} classes, got {len(p)}")
    if not np.all(np.isfinite(p)) or p.min() < 0.0 or p.max() > 1.0:
        raise OracleProtocolError("probabilities must be finite and in [0, 1]")
    total = float(p.sum())
    if abs(total - 1.0) > PROB_SUM_TOL:
        raise OracleProtocolError(f"probabilities sum to {total}, not 1")
    return p.copy()


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


class Oracle:
    """Common query counting and shape checking for all oracle kinds."""

    kind = "abstract"

    def __init__(self, num_classes: int, expected_shape: tuple[int, int, int] | None):
        self.num_classes = num_classes
        self.expected_shape = expected_shape
        self._queries = 0
        self._lock = threading.Lock()

    @property
    def query_count(self) -> int:
        with self._lock:
            return self._queries

    def _check_shape(self, img: np.ndarray) -> None:
        if self.expected_shape is not None and img.shape != self.expected_shape:
            raise ShapeMismatchError(
                f"oracle expects {self.expected_shape}, got {img.shape}"
            )

    def classify(self, img: np.ndarray) -> np.ndarray:
        """Probability vector for `img`; increments the query count."""
        img = validate_image(img)
        self._check_shape(img)
        probs = validate_probability_vector(self._classify(img), self.num_classes)
        with self._lock:
            self._queries += 1
        return probs

    def _classify(self, img: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class FixtureOracle(Oracle):
    """Linear-softmax classifier: probs = softmax(W @ (flatten(img)/255) + b)."""

    kind = "fixture"

    def __init__(self, weights: np.ndarray, bias: np.ndarray,
                 expected_shape: tuple[int, int, int] | None = None):
        weights = np.asarray(weights, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if weights.ndim != 2 or bias.shape != (weights.shape[0],):
            raise ValueError("weights must be (K, D) with bias (K,)")
        if weights.shape[0] < 2:
            raise ValueError("need at least 2 classes")
        if expected_shape is not None:
            h, w, c = expected_shape
            if h * w * c != weights.shape[1]:
                raise ValueError("expected_shape inconsistent with weight columns")
        super().__init__(weights.shape[0], expected_shape)
        self.weights = weights
        self.bias = bias

    @property
    def input_dim(self) -> int:
        return self.weights.shape[1]

    def _check_shape(self, img: np.ndarray) -> None:
        super()._check_shape(img)
        if img.size != self.input_dim:
            raise ShapeMismatchError(
                f"oracle expects {self.input_dim} pixels, got {img.size}"
            )

    def _classify(self, img: np.ndarray) -> np.ndarray:
        x = img.astype(np.float64).reshape(-1) / 255.0
        return softmax(self.weights @ x + self.bias)


def write_fixture_weights(weights: np.ndarray, bias: np.ndarray) -> bytes:
    """Serialize linear-softmax weights to the LSMW format."""
    weights = np.asarray(weights, dtype=np.float32)
    bias = np.asarray(bias, dtype=np.float32)
    k, d = weights.shape
    out = bytearray()
    out += WEIGHTS_MAGIC
    out += struct.pack("<BII", WEIGHTS_VERSION, k, d)
    out += weights.astype("<f4").tobytes()
    out += bias.astype("<f4").tobytes()
    return bytes(out)


def load_fixture(weights_bytes: bytes,
                 expected_shape: tuple[int, int, int] | None = None) -> FixtureOracle:
    """Build a FixtureOracle from LSMW weight bytes."""
    if weights_bytes[:4] != WEIGHTS_MAGIC:
        raise OracleProtocolError(f"bad weights magic {weights_bytes[:4]!r}")
    header = struct.Struct("<BII")
    if len(weights_bytes) < 4 + header.size:
        raise OracleProtocolError("weights header truncated")
    version, k, d = header.unpack_from(weights_bytes, 4)
    if version != WEIGHTS_VERSION:
        raise OracleProtocolError(f"unsupported weights version {version}")
    pos = 4 + header.size
    expect = (k * d + k) * 4
    if len(weights_bytes) != pos + expect:
        raise OracleProtocolError(
            f"weights payload length {len(weights_bytes) - pos}, expected {expect}"
        )
    weights = np.frombuffer(weights_bytes, dtype="<f4", count=k * d, offset=pos)
    bias = np.frombuffer(weights_bytes, dtype="<f4", count=k, offset=pos + k * d * 4)
    return FixtureOracle(weights.reshape(k, d).copy(), bias.copy(), expected_shape)


class RemoteOracle(Oracle):
    """HTTP client for a served classifier speaking the wire protocol."""

    kind = "remote"

    def __init__(self, endpoint: str, num_classes: int,
                 expected_shape: tuple[int, int, int], timeout: float):
        super().__init__(num_classes, expected_shape)
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout

    def _classify(self, img: np.ndarray) -> np.ndarray:
        body = save_image(img)
        try:
            resp = requests.post(
                self.endpoint + "/classify",
                data=body,
                headers={"Content-Type": "application/octet-stream"},
                timeout=self.timeout,
            )
        except requests.Timeout as exc:
            raise OracleTimeoutError(f"classify timed out after {self.timeout}s") from exc
        except requests.ConnectionError as exc:
            raise OracleConnectionError(f"cannot reach {self.endpoint}") from exc
        if resp.status_code != 200:
            raise OracleProtocolError(f"classify returned HTTP {resp.status_code}")
        try:
            payload = resp.json()
            probs = payload["probs"]
        except (json.JSONDecodeError, requests.JSONDecodeError, KeyError, TypeError) as exc:
            raise OracleProtocolError("classify response is not {'probs': [...]}") from exc
        return np.asarray(probs, dtype=np.float64)


def connect_remote(endpoint: str, timeout: float = 10.0) -> RemoteOracle:
    """Fetch /meta from a served classifier and wrap it as an oracle."""
    endpoint = endpoint.rstrip("/")
    try:
        resp = requests.get(endpoint + "/meta", timeout=timeout)
    except requests.Timeout as exc:
        raise OracleTimeoutError(f"/meta timed out after {timeout}s") from exc
    except requests.ConnectionError as exc:
        raise OracleConnectionError(f"cannot reach {endpoint}") from exc
    if resp.status_code != 200:
        raise OracleProtocolError(f"/meta returned HTTP {resp.status_code}")
    try:
        meta = resp.json()
        classes = int(meta["classes"])
        shape = (int(meta["height"]), int(meta["width"]), int(meta["channels"]))
    except (json.JSONDecodeError, requests.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise OracleProtocolError("malformed /meta response") from exc
    if classes < 2 or min(shape) < 1 or shape[2] not in (1, 3):
        raise OracleProtocolError(f"implausible /meta values {meta}")
    return RemoteOracle(endpoint, classes, shape, timeout)
