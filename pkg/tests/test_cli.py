"""CLI surface: commands, exit codes, manifests, CSV report shape."""

import json
from pathlib import Path

import numpy as np
import pytest

from vqcodebook.cli import main
from vqcodebook.imageio import (
    Image,
    assemble_blocks,
    BlockGeometry,
    read_codebook_file,
    read_pgm,
    write_pgm,
)
from vqcodebook.synthetic import piecewise_smooth_image


def write_image(path: Path, seed=0, size=64) -> Path:
    path.write_bytes(write_pgm(piecewise_smooth_image(size, size, seed=seed)))
    return path


def four_tile_image(path: Path) -> Path:
    """Image built by tiling 4 distinct 4x4 blocks: a size-4 codebook is perfect."""
    rng = np.random.default_rng(99)
    tiles = rng.integers(0, 256, size=(4, 16), dtype=np.uint8)
    grid = np.tile(np.array([[0, 1], [2, 3]]), (4, 4)).ravel()
    pixels = assemble_blocks(tiles[grid], BlockGeometry(), 8, 8)
    path.write_bytes(write_pgm(Image(pixels=pixels)))
    return path


FAST = [
    "--ap-max-iterations", "300", "--stable-window", "20",
    "--rs-search-max-steps", "12", "--runs", "3",
]


class TestTrain:
    def test_lbg_perfect_codebook_on_four_tile_image(self, tmp_path, capsys):
        img = four_tile_image(tmp_path / "tiles.pgm")
        out = tmp_path / "cb.vqcb"
        code = main(["train", str(img), "-o", str(out), "--algo", "lbg", "--size", "4",
                     "--runs", "5"])
        assert code == 0
        assert "best PSNR dB inf" in capsys.readouterr().out
        cb = read_codebook_file(out.read_bytes())
        assert cb.m == 4

    def test_identical_commands_byte_identical(self, tmp_path):
        img = write_image(tmp_path / "a.pgm", seed=1)
        args = ["train", str(img), "--algo", "iap-lbg", "--size", "8", *FAST]
        assert main([*args, "-o", str(tmp_path / "one.vqcb")]) == 0
        assert main([*args, "-o", str(tmp_path / "two.vqcb")]) == 0
        assert (tmp_path / "one.vqcb").read_bytes() == (tmp_path / "two.vqcb").read_bytes()

    def test_vector_file_input(self, tmp_path):
        vectors = tmp_path / "data.txt"
        rng = np.random.default_rng(2)
        lines = [" ".join(f"{v:.6f}" for v in row) for row in rng.uniform(0, 9, size=(30, 3))]
        vectors.write_text("\n".join(lines) + "\n")
        out = tmp_path / "cb.vqcb"
        assert main(["train", str(vectors), "-o", str(out), "--algo", "iap", "--size", "4",
                     *FAST]) == 0
        assert read_codebook_file(out.read_bytes()).dim == 3

    def test_ap_with_explicit_preference(self, tmp_path):
        img = write_image(tmp_path / "a.pgm", seed=3)
        out = tmp_path / "cb.vqcb"
        assert main(["train", str(img), "-o", str(out), "--algo", "ap",
                     "--preference", "-50000", *FAST]) == 0
        assert read_codebook_file(out.read_bytes()).m >= 1

    def test_manifest_written(self, tmp_path):
        img = write_image(tmp_path / "a.pgm", seed=4)
        out = tmp_path / "cb.vqcb"
        main(["train", str(img), "-o", str(out), "--algo", "lbg", "--size", "4", "--runs", "2"])
        manifest = json.loads((tmp_path / "cb.vqcb.manifest.json").read_text())
        assert manifest["command"] == "train"
        assert str(img) in manifest["inputs"]
        assert str(out) in manifest["outputs"]

    def test_missing_size_is_usage_error(self, tmp_path):
        img = write_image(tmp_path / "a.pgm", seed=5)
        assert main(["train", str(img), "-o", str(tmp_path / "x.vqcb"), "--algo", "lbg"]) == 2

    def test_unreachable_size_is_algorithm_failure(self, tmp_path):
        img = write_image(tmp_path / "a.pgm", seed=6)  # 64x64 -> 256 blocks
        assert main(["train", str(img), "-o", str(tmp_path / "x.vqcb"), "--algo", "iap-lbg",
                     "--size", "999", *FAST]) == 4

    def test_missing_input_is_io_error(self, tmp_path):
        assert main(["train", str(tmp_path / "no.pgm"), "-o", str(tmp_path / "x.vqcb"),
                     "--algo", "lbg", "--size", "2"]) == 3


class TestCodecCommands:
    @pytest.fixture()
    def trained(self, tmp_path):
        img = four_tile_image(tmp_path / "tiles.pgm")
        cb = tmp_path / "cb.vqcb"
        main(["train", str(img), "-o", str(cb), "--algo", "lbg", "--size", "4", "--runs", "5"])
        return img, cb

    def test_lossless_roundtrip_with_perfect_codebook(self, tmp_path, trained):
        img, cb = trained
        vqix = tmp_path / "img.vqix"
        recon = tmp_path / "recon.pgm"
        assert main(["encode", str(img), "--codebook", str(cb), "-o", str(vqix)]) == 0
        assert main(["decode", str(vqix), "--codebook", str(cb), "-o", str(recon)]) == 0
        assert recon.read_bytes() == img.read_bytes()

    def test_index_payload_size(self, tmp_path, trained):
        img, cb = trained
        vqix = tmp_path / "img.vqix"
        main(["encode", str(img), "--codebook", str(cb), "-o", str(vqix)])
        data = vqix.read_bytes()
        parsed = read_pgm(img.read_bytes())
        blocks = (parsed.width // 4) * (parsed.height // 4)
        assert len(data) == 4 + 20 + 32 + 2 * blocks

    def test_decode_with_wrong_codebook_exits_5(self, tmp_path, trained):
        img, cb = trained
        other = tmp_path / "other.vqcb"
        main(["train", str(write_image(tmp_path / "b.pgm", seed=7)), "-o", str(other),
              "--algo", "lbg", "--size", "4", "--runs", "2"])
        vqix = tmp_path / "img.vqix"
        main(["encode", str(img), "--codebook", str(cb), "-o", str(vqix)])
        assert main(["decode", str(vqix), "--codebook", str(other),
                     "-o", str(tmp_path / "r.pgm")]) == 5

    def test_eval(self, tmp_path, trained, capsys):
        img, _ = trained
        assert main(["eval", str(img), str(img)]) == 0
        assert "inf" in capsys.readouterr().out


class TestCompare:
    def test_report_shape_and_average(self, tmp_path):
        imgs = [str(write_image(tmp_path / f"i{k}.pgm", seed=k)) for k in range(2)]
        report = tmp_path / "report.csv"
        code = main(["compare", *imgs, "--algos", "lbg,iap", "--size", "8", *FAST,
                     "-o", str(report)])
        assert code == 0
        lines = report.read_text().strip().splitlines()
        header = lines[0].split(",")
        assert header[:6] == ["mode", "image", "algorithm", "codebook_size",
                              "psnr_db", "psnr_db_full"]
        rows = [line.split(",") for line in lines[1:]]
        assert len(rows) == 2 * (2 + 1)  # 2 algos x (2 images + average)
        for algo in ("lbg", "iap"):
            per_image = [float(r[5]) for r in rows if r[2] == algo and r[1] != "average"]
            avg = [float(r[4]) for r in rows if r[2] == algo and r[1] == "average"][0]
            assert abs(avg - sum(per_image) / len(per_image)) < 0.005

    def test_constant_image_psnr_inf(self, tmp_path):
        img = tmp_path / "flat.pgm"
        img.write_bytes(write_pgm(Image(pixels=np.full((16, 16), 55, dtype=np.uint8))))
        report = tmp_path / "report.csv"
        assert main(["compare", str(img), "--algos", "lbg", "--size", "1", "--runs", "2",
                     "-o", str(report)]) == 0
        row = report.read_text().strip().splitlines()[1].split(",")
        assert row[4] == "inf"

    def test_universal_rows(self, tmp_path):
        imgs = [str(write_image(tmp_path / f"u{k}.pgm", seed=10 + k)) for k in range(2)]
        report = tmp_path / "report.csv"
        assert main(["compare", *imgs, "--algos", "lbg", "--size", "6", *FAST,
                     "--universal", imgs[0], "-o", str(report)]) == 0
        lines = report.read_text().strip().splitlines()[1:]
        modes = {line.split(",")[0] for line in lines}
        assert modes == {"within", "universal"}
        universal_rows = [l for l in lines if l.startswith("universal") and "average" not in l]
        assert len(universal_rows) == 2

    def test_trace_files(self, tmp_path):
        img = str(write_image(tmp_path / "t.pgm", seed=12))
        traces = tmp_path / "traces"
        report = tmp_path / "report.csv"
        assert main(["compare", img, "--algos", "ap,iap", "--size", "6", *FAST,
                     "--trace", str(traces), "-o", str(report)]) == 0
        names = sorted(p.name for p in traces.iterdir())
        assert names == ["t__ap__energy.csv", "t__iap__energy.csv"]
        for p in traces.iterdir():
            lines = p.read_text().strip().splitlines()
            assert lines[0] == "iteration,net_similarity"
            assert len(lines) > 1

    def test_rerun_byte_identical(self, tmp_path):
        img = str(write_image(tmp_path / "d.pgm", seed=13))
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["compare", img, "--algos", "lbg,ap,iap,iap-lbg", "--size", "6", *FAST]
        assert main([*args, "-o", str(a)]) == 0
        assert main([*args, "-o", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestReplay:
    def test_replay_reproduces_and_verifies(self, tmp_path):
        img = write_image(tmp_path / "a.pgm", seed=20)
        out = tmp_path / "cb.vqcb"
        main(["train", str(img), "-o", str(out), "--algo", "iap-lbg", "--size", "6", *FAST])
        replay_dir = tmp_path / "replayed"
        assert main(["replay", str(out) + ".manifest.json", "--out-dir", str(replay_dir)]) == 0
        assert (replay_dir / "cb.vqcb").read_bytes() == out.read_bytes()

    def test_replay_detects_tampered_input(self, tmp_path):
        img = write_image(tmp_path / "a.pgm", seed=21)
        out = tmp_path / "cb.vqcb"
        main(["train", str(img), "-o", str(out), "--algo", "lbg", "--size", "4", "--runs", "2"])
        write_image(img, seed=22)  # overwrite input after the fact
        assert main(["replay", str(out) + ".manifest.json",
                     "--out-dir", str(tmp_path / "r")]) == 5

    def test_replay_missing_manifest(self, tmp_path):
        assert main(["replay", str(tmp_path / "none.json")]) == 3


class TestArgumentErrors:
    def test_unknown_algo_rejected_by_argparse(self, tmp_path):
        with pytest.raises(SystemExit) as excinfo:
            main(["train", "x.pgm", "-o", "y.vqcb", "--algo", "magic"])
        assert excinfo.value.code == 2

    def test_bad_block_spec(self, tmp_path):
        img = write_image(tmp_path / "a.pgm", seed=23)
        assert main(["train", str(img), "-o", str(tmp_path / "x.vqcb"), "--algo", "lbg",
                     "--size", "4", "--block", "4by4"]) == 2
