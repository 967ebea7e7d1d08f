"""End-to-end tests for the command line front end.

Each test drives `vqattack.cli.main` in process and checks exit codes:
0 success, 1 validation/usage, 2 oracle transport failures.
"""

import json
import socket
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from vqattack.cli import ORACLE_URL_ENV, main
from vqattack.codec import Codebook, IndexTensor, decode, encode, read_codebook, read_indices, write_codebook
from vqattack.experiment import save_dataset
from vqattack.image_io import load_image, save_image
from vqattack.oracle import FixtureOracle, write_fixture_weights

LENGTH = 8
SHADES = np.linspace(0.0, 255.0, LENGTH)


def shade_codebook():
    codewords = np.repeat(SHADES.astype(np.float32)[:, None], 16, axis=1)
    return Codebook(codewords=codewords, block_w=4, block_h=4)


def brightness_oracle():
    scale = 40.0
    w0 = np.full(64, scale / 64.0)
    weights = np.stack([w0, -w0])
    bias = np.array([-0.3 * scale, 0.3 * scale])
    return FixtureOracle(weights, bias, expected_shape=(8, 8, 1))


def image_from_grid(codebook, grid):
    idx = np.asarray(grid, dtype=np.uint16).reshape(2, 2, 1)
    tensor = IndexTensor(
        indices=idx, codebook_length=codebook.length, codebook_id=codebook.content_id
    )
    return decode(tensor, codebook)


@pytest.fixture(autouse=True)
def clean_oracle_env(monkeypatch):
    monkeypatch.delenv(ORACLE_URL_ENV, raising=False)


@pytest.fixture
def world(tmp_path):
    """Codebook, weights, images, and a dataset laid out on disk."""
    codebook = shade_codebook()
    paths = {
        "codebook": tmp_path / "cb.vqcb",
        "weights": tmp_path / "oracle.lsmw",
        "image": tmp_path / "dark.pgm",
        "images_dir": tmp_path / "train",
        "dataset": tmp_path / "dataset",
        "tmp": tmp_path,
    }
    paths["codebook"].write_bytes(write_codebook(codebook))
    oracle = brightness_oracle()
    paths["weights"].write_bytes(write_fixture_weights(oracle.weights, oracle.bias))

    dark = image_from_grid(codebook, [[5, 0], [0, 0]])  # class 1, attackable
    paths["image"].write_bytes(save_image(dark))

    paths["images_dir"].mkdir()
    rng = np.random.default_rng(7)
    for i in range(6):
        img = rng.integers(0, 256, size=(8, 8, 1), dtype=np.uint8)
        (paths["images_dir"] / f"t{i}.pgm").write_bytes(save_image(img))

    images = [
        image_from_grid(codebook, [[5, 0], [0, 0]]),
        image_from_grid(codebook, [[0, 5], [0, 0]]),
        image_from_grid(codebook, [[7, 7], [7, 7]]),
        image_from_grid(codebook, [[0, 0], [5, 0]]),
    ]
    save_dataset(paths["dataset"], images, [1, 1, 0, 1])
    return paths


class _StubHandler(BaseHTTPRequestHandler):
    """Serves the brightness classifier over the oracle wire protocol."""

    oracle = None
    poison_value = None

    def log_message(self, *args):
        pass

    def _send_json(self, payload, status=200):
        body = json.dumps(payload).encode("ascii")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path == "/meta":
            self._send_json({"classes": 2, "height": 8, "width": 8, "channels": 1})
        else:
            self._send_json({"error": "not found"}, status=404)

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        img = load_image(self.rfile.read(length))
        if self.poison_value is not None and np.all(img == self.poison_value):
            self._send_json({"error": "refused"}, status=500)
            return
        probs = type(self).oracle.classify(img)
        self._send_json({"probs": [float(p) for p in probs]})


@pytest.fixture
def stub_oracle_url():
    _StubHandler.oracle = brightness_oracle()
    _StubHandler.poison_value = None
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()
    thread.join()


@pytest.fixture
def dead_oracle_url():
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()
    return f"http://127.0.0.1:{port}"


FAST_DE = ["--population", "8", "--generations", "5"]


# ---------------------------------------------------------------------------
# codec commands
# ---------------------------------------------------------------------------


class TestCodecCommands:
    def test_train_codebook_writes_parseable_file(self, world):
        out = world["tmp"] / "trained.vqcb"
        code = main([
            "train-codebook", "--images", str(world["images_dir"]),
            "--length", "4", "--output", str(out),
        ])
        assert code == 0
        cb = read_codebook(out.read_bytes())
        assert cb.length == 4
        assert (cb.block_w, cb.block_h) == (4, 4)
        assert not cb.sorted

    def test_train_codebook_missing_directory(self, world):
        code = main([
            "train-codebook", "--images", str(world["tmp"] / "nope"),
            "--length", "4", "--output", str(world["tmp"] / "x.vqcb"),
        ])
        assert code == 1

    def test_train_codebook_empty_directory(self, world):
        empty = world["tmp"] / "empty"
        empty.mkdir()
        code = main([
            "train-codebook", "--images", str(empty),
            "--length", "4", "--output", str(world["tmp"] / "x.vqcb"),
        ])
        assert code == 1

    def test_sort_codebook_round_trip(self, world):
        out = world["tmp"] / "sorted.vqcb"
        assert main(["sort-codebook", "--input", str(world["codebook"]),
                     "--output", str(out)]) == 0
        sorted_cb = read_codebook(out.read_bytes())
        assert sorted_cb.sorted
        assert sorted_cb.permutation is not None
        original = read_codebook(world["codebook"].read_bytes())
        assert np.array_equal(
            np.sort(sorted_cb.codewords, axis=0), np.sort(original.codewords, axis=0)
        )

    def test_sort_codebook_rejects_already_sorted(self, world):
        once = world["tmp"] / "sorted.vqcb"
        twice = world["tmp"] / "sorted2.vqcb"
        assert main(["sort-codebook", "--input", str(world["codebook"]),
                     "--output", str(once)]) == 0
        assert main(["sort-codebook", "--input", str(once),
                     "--output", str(twice)]) == 1
        assert not twice.exists()

    def test_encode_then_decode_round_trip(self, world):
        idx_path = world["tmp"] / "dark.vqix"
        out_path = world["tmp"] / "decoded.pgm"
        assert main(["encode", "--codebook", str(world["codebook"]),
                     "--image", str(world["image"]),
                     "--output", str(idx_path)]) == 0
        assert main(["decode", "--codebook", str(world["codebook"]),
                     "--indices", str(idx_path),
                     "--output", str(out_path)]) == 0
        codebook = read_codebook(world["codebook"].read_bytes())
        img = load_image(world["image"].read_bytes())
        expected = decode(encode(img, codebook), codebook)
        assert np.array_equal(load_image(out_path.read_bytes()), expected)
        tensor = read_indices(idx_path.read_bytes())
        assert tensor.codebook_id == codebook.content_id

    def test_decode_rejects_foreign_codebook(self, world):
        other = Codebook(
            codewords=np.linspace(10, 240, LENGTH, dtype=np.float32).repeat(16).reshape(LENGTH, 16),
            block_w=4, block_h=4,
        )
        other_path = world["tmp"] / "other.vqcb"
        other_path.write_bytes(write_codebook(other))
        idx_path = world["tmp"] / "dark.vqix"
        assert main(["encode", "--codebook", str(world["codebook"]),
                     "--image", str(world["image"]),
                     "--output", str(idx_path)]) == 0
        assert main(["decode", "--codebook", str(other_path),
                     "--indices", str(idx_path),
                     "--output", str(world["tmp"] / "out.pgm")]) == 1

    def test_corrupt_codebook_file_exits_1(self, world):
        bad = world["tmp"] / "bad.vqcb"
        bad.write_bytes(b"not a codebook at all")
        assert main(["encode", "--codebook", str(bad),
                     "--image", str(world["image"]),
                     "--output", str(world["tmp"] / "x.vqix")]) == 1

    def test_missing_input_file_exits_1(self, world):
        assert main(["encode", "--codebook", str(world["codebook"]),
                     "--image", str(world["tmp"] / "ghost.pgm"),
                     "--output", str(world["tmp"] / "x.vqix")]) == 1


# ---------------------------------------------------------------------------
# attack command
# ---------------------------------------------------------------------------


class TestAttackCommand:
    def test_attack_reports_success_on_stdout(self, world, capsys):
        code = main([
            "attack", "--codebook", str(world["codebook"]),
            "--image", str(world["image"]), "--true-label", "1",
            "--weights", str(world["weights"]), *FAST_DE,
        ])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["success"] is True
        assert payload["method"] == "de"
        assert payload["true_label"] == 1
        assert payload["predicted_label"] == 0
        assert payload["evaluations"] == 8 * (5 + 1)
        assert 0 <= payload["x"] < 2 and 0 <= payload["y"] < 2
        assert len(payload["values"]) == 1

    def test_attack_writes_requested_files(self, world, capsys):
        out = world["tmp"] / "result.json"
        adv = world["tmp"] / "adv.pgm"
        traj = world["tmp"] / "traj.csv"
        code = main([
            "attack", "--codebook", str(world["codebook"]),
            "--image", str(world["image"]), "--true-label", "1",
            "--weights", str(world["weights"]), *FAST_DE,
            "--output", str(out), "--adversarial", str(adv),
            "--trajectory", str(traj),
        ])
        assert code == 0
        assert capsys.readouterr().out == ""
        payload = json.loads(out.read_text())
        assert payload["success"] is True
        image = load_image(adv.read_bytes())
        assert image.shape == (8, 8, 1)
        lines = traj.read_text().splitlines()
        assert lines[0] == "generation,best_fitness"
        assert len(lines) == 1 + payload["generations_completed"] + 1

    def test_attack_random_method(self, world, capsys):
        code = main([
            "attack", "--codebook", str(world["codebook"]),
            "--image", str(world["image"]), "--true-label", "1",
            "--weights", str(world["weights"]), "--method", "random",
            "--budget", "200",
        ])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["method"] == "random"
        assert payload["evaluations"] == 200
        assert payload["success"] is True

    def test_attack_early_stop(self, world, capsys):
        code = main([
            "attack", "--codebook", str(world["codebook"]),
            "--image", str(world["image"]), "--true-label", "1",
            "--weights", str(world["weights"]), *FAST_DE, "--early-stop",
        ])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["success"] is True
        assert payload["early_stopped"] is True
        assert payload["evaluations"] < 8 * (5 + 1)

    def test_attack_conflicting_oracle_args(self, world):
        assert main([
            "attack", "--codebook", str(world["codebook"]),
            "--image", str(world["image"]), "--true-label", "1",
            "--weights", str(world["weights"]), "--oracle-url", "http://x",
        ]) == 1

    def test_attack_without_any_oracle(self, world):
        assert main([
            "attack", "--codebook", str(world["codebook"]),
            "--image", str(world["image"]), "--true-label", "1",
        ]) == 1

    def test_attack_env_url_fallback(self, world, stub_oracle_url, monkeypatch, capsys):
        monkeypatch.setenv(ORACLE_URL_ENV, stub_oracle_url)
        code = main([
            "attack", "--codebook", str(world["codebook"]),
            "--image", str(world["image"]), "--true-label", "1", *FAST_DE,
        ])
        assert code == 0
        assert json.loads(capsys.readouterr().out)["success"] is True

    def test_attack_bad_true_label(self, world):
        assert main([
            "attack", "--codebook", str(world["codebook"]),
            "--image", str(world["image"]), "--true-label", "9",
            "--weights", str(world["weights"]), *FAST_DE,
        ]) == 1

    def test_attack_unreachable_oracle_exits_2(self, world, dead_oracle_url):
        assert main([
            "attack", "--codebook", str(world["codebook"]),
            "--image", str(world["image"]), "--true-label", "1",
            "--oracle-url", dead_oracle_url, "--timeout", "0.5", *FAST_DE,
        ]) == 2


# ---------------------------------------------------------------------------
# batch command
# ---------------------------------------------------------------------------


class TestBatchCommand:
    def batch_args(self, world, out_dir, extra=()):
        return [
            "batch", "--dataset", str(world["dataset"]),
            "--codebook", str(world["codebook"]),
            "--weights", str(world["weights"]),
            "--methods", "de,random", "--workers", "2",
            "--population", "6", "--generations", "3",
            "--output-dir", str(out_dir), *extra,
        ]

    def test_batch_writes_reports_and_summary(self, world, capsys):
        out_dir = world["tmp"] / "report"
        assert main(self.batch_args(world, out_dir)) == 0
        report = json.loads((out_dir / "report.json").read_text())
        assert report["num_images"] == 4
        assert report["methods"] == ["de", "random"]
        assert not report["aborted"]
        assert (out_dir / "records.csv").is_file()
        assert (out_dir / "heatmap-de.csv").is_file()
        assert (out_dir / "heatmap-random.csv").is_file()
        stdout = capsys.readouterr().out
        assert "method" in stdout and "success" in stdout
        assert "de" in stdout and "random" in stdout

    def test_batch_runs_are_deterministic(self, world, capsys):
        first = world["tmp"] / "r1"
        second = world["tmp"] / "r2"
        assert main(self.batch_args(world, first, ["--seed", "9"])) == 0
        assert main(self.batch_args(world, second, ["--seed", "9"])) == 0
        capsys.readouterr()
        assert (first / "report.json").read_bytes() == (second / "report.json").read_bytes()
        assert (first / "records.csv").read_bytes() == (second / "records.csv").read_bytes()

    def test_batch_rejects_unknown_method(self, world):
        out_dir = world["tmp"] / "r"
        args = self.batch_args(world, out_dir)
        args[args.index("de,random")] = "de,hillclimb"
        assert main(args) == 1

    def test_batch_unreachable_oracle_exits_2(self, world, dead_oracle_url):
        code = main([
            "batch", "--dataset", str(world["dataset"]),
            "--codebook", str(world["codebook"]),
            "--oracle-url", dead_oracle_url, "--timeout", "0.5",
            "--output-dir", str(world["tmp"] / "r"),
        ])
        assert code == 2

    def test_batch_abort_keeps_partial_report(self, world, stub_oracle_url, capsys):
        # the stub refuses the flat decode of shade-3 blocks, so the batch
        # aborts mid-run on a protocol error and still writes what finished
        codebook = shade_codebook()
        images = [
            image_from_grid(codebook, [[5, 0], [0, 0]]),
            image_from_grid(codebook, [[0, 5], [0, 0]]),
            image_from_grid(codebook, [[3, 3], [3, 3]]),
        ]
        poisoned = world["tmp"] / "poisoned"
        save_dataset(poisoned, images, [1, 1, 1])
        _StubHandler.poison_value = int(np.floor(SHADES[3] + 0.5))
        out_dir = world["tmp"] / "partial"
        code = main([
            "batch", "--dataset", str(poisoned),
            "--codebook", str(world["codebook"]),
            "--oracle-url", stub_oracle_url,
            "--methods", "random", "--workers", "1",
            "--population", "6", "--generations", "3",
            "--output-dir", str(out_dir),
        ])
        assert code == 2
        report = json.loads((out_dir / "report.json").read_text())
        assert report["aborted"] is True
        assert {r["image"] for r in report["records"]} == {0, 1}


# ---------------------------------------------------------------------------
# distance profile and usage errors
# ---------------------------------------------------------------------------


class TestDistanceProfile:
    def test_profile_on_stdout(self, world, capsys):
        assert main(["distance-profile", "--codebook", str(world["codebook"])]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "index,distance"
        assert len(lines) == 1 + LENGTH
        assert lines[1] == "0,0.0"
        distances = [float(line.split(",")[1]) for line in lines[1:]]
        assert distances == sorted(distances)  # shades are already ordered

    def test_profile_to_file_with_reference(self, world):
        out = world["tmp"] / "profile.csv"
        assert main(["distance-profile", "--codebook", str(world["codebook"]),
                     "--reference", "3", "--output", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert float(lines[1 + 3].split(",")[1]) == 0.0

    def test_out_of_range_reference_exits_1(self, world):
        assert main(["distance-profile", "--codebook", str(world["codebook"]),
                     "--reference", "99"]) == 1


class TestUsage:
    def test_unknown_command_exits_1(self, capsys):
        assert main(["no-such-command"]) == 1
        capsys.readouterr()

    def test_missing_required_argument_exits_1(self, capsys):
        assert main(["encode", "--codebook", "x"]) == 1
        capsys.readouterr()

    def test_help_exits_0(self, capsys):
        assert main(["--help"]) == 0
        assert "train-codebook" in capsys.readouterr().out
