"""Command line behavior: flows, reports, and exit codes."""

import subprocess
import sys

import numpy as np
import pytest

from conftest import GOLDEN
from hpquant import tensorio
from hpquant.cli import main
from hpquant.descriptor import parse_network

TWO_LAYER_MISMATCH = """\
layer {
  name: "a"
  number of input channels: 1
  number of output channels: 1
  kernel size: 1x1
  quantization structure: 4D
  coeff_precision: 8b
  coeff_format[1:1, 1:1, 0:0, 0:0]: <1:-5>
  input_data_precision: 8b
  input_data_format[0]: <3:-3>
  accumulator_precision: 16b
  accumulator_format: <11:-3>
  output_data_precision: 8b
  output_data_format[0]: <3:-3>
}
layer {
  name: "b"
  number of input channels: 2
  number of output channels: 1
  kernel size: 1x1
  quantization structure: 4D
  coeff_precision: 8b
  coeff_format[1:1, 1:1, 0:1, 0:0]: <1:-5>
  input_data_precision: 8b
  input_data_format[0]: <3:-3>
  input_data_format[1]: <3:-3>
  accumulator_precision: 16b
  accumulator_format: <11:-3>
  output_data_precision: 8b
  output_data_format[0]: <3:-3>
}
"""


@pytest.fixture()
def fixture_dir(tmp_path):
    d = tmp_path / "fx"
    assert main(["gen-fixture", "--kind", "spread", "--out-dir", str(d)]) == 0
    return d


def _calibrated(tmp_path, fixture_dir, *extra) -> str:
    desc = tmp_path / "net.hpq"
    rc = main(["calibrate", "--weights", str(fixture_dir / "weights.hpft"),
               "--samples", str(fixture_dir / "samples.hpft"),
               "--scheme", "2d", "-o", str(desc), *extra])
    assert rc == 0
    return str(desc)


class TestValidate:
    def test_golden_ok(self, capsys):
        assert main(["validate", str(GOLDEN)]) == 0
        out = capsys.readouterr()
        assert out.out.strip() == f"{GOLDEN}: ok (1 layer)"
        assert out.err == ""

    def test_corrupted_reports_location(self, tmp_path, capsys):
        bad = tmp_path / "bad.hpq"
        bad.write_text(GOLDEN.read_text().replace("8b", "9b", 1))
        assert main(["validate", str(bad)]) == 1
        err = capsys.readouterr().err
        assert err.startswith(f"{bad}:")
        assert ": precision mismatch:" in err

    def test_empty_file(self, tmp_path, capsys):
        empty = tmp_path / "empty.hpq"
        empty.write_text("")
        assert main(["validate", str(empty)]) == 1
        assert "no layers" in capsys.readouterr().err

    def test_missing_file(self, capsys):
        assert main(["validate", "/nonexistent/net.hpq"]) == 1
        assert capsys.readouterr().err.startswith("error:")

    def test_semantic_violation_after_parse(self, tmp_path, capsys):
        bad = tmp_path / "chain.hpq"
        bad.write_text(TWO_LAYER_MISMATCH)
        assert main(["validate", str(bad)]) == 1
        assert "input channels" in capsys.readouterr().err


class TestCalibrate:
    def test_stdout_descriptor(self, fixture_dir, capsys):
        rc = main(["calibrate", "--weights", str(fixture_dir / "weights.hpft"),
                   "--samples", str(fixture_dir / "samples.hpft"),
                   "--scheme", "2d"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "accumulator_precision: 16b" in out
        assert "quantization structure: 2D" in out
        net = parse_network(out)
        assert net.layers[0].name == "conv1"
        assert len(net.layers[0].coeff_formats.entries) == 16

    def test_four_d_single_coeff_line(self, fixture_dir, capsys):
        rc = main(["calibrate", "--weights", str(fixture_dir / "weights.hpft"),
                   "--samples", str(fixture_dir / "samples.hpft"),
                   "--scheme", "4d"])
        assert rc == 0
        out = capsys.readouterr().out
        assert out.count("coeff_format[") == 1

    def test_output_file_validates(self, tmp_path, fixture_dir, capsys):
        desc = _calibrated(tmp_path, fixture_dir)
        assert main(["validate", desc]) == 0

    def test_zero_weights_canonical(self, tmp_path, capsys):
        d = tmp_path / "z"
        assert main(["gen-fixture", "--kind", "zero", "--out-dir", str(d)]) == 0
        capsys.readouterr()
        rc = main(["calibrate", "--weights", str(d / "weights.hpft"),
                   "--samples", str(d / "samples.hpft"), "--scheme", "4d"])
        assert rc == 0
        assert "coeff_format[1:5, 1:5, 0:3, 0:3]: <0:-6>" in capsys.readouterr().out

    def test_name_count_mismatch(self, fixture_dir, capsys):
        rc = main(["calibrate", "--weights", str(fixture_dir / "weights.hpft"),
                   "--samples", str(fixture_dir / "samples.hpft"),
                   "--scheme", "2d", "--names", "a,b"])
        assert rc == 1
        assert "names" in capsys.readouterr().err


class TestQuantize:
    def test_writes_code_files(self, tmp_path, fixture_dir, capsys):
        desc = _calibrated(tmp_path, fixture_dir)
        capsys.readouterr()
        qdir = tmp_path / "q"
        rc = main(["quantize", desc, "--weights", str(fixture_dir / "weights.hpft"),
                   "--out-dir", str(qdir)])
        assert rc == 0
        assert capsys.readouterr().out == f"wrote {qdir / 'conv1.hpqt'}\n"
        codes = tensorio.read_codes(qdir / "conv1.hpqt")
        assert codes.shape == (4, 4, 5, 5)
        assert codes.min() >= -128 and codes.max() <= 127

    def test_weight_count_mismatch(self, tmp_path, fixture_dir, capsys):
        desc = _calibrated(tmp_path, fixture_dir)
        rc = main(["quantize", desc,
                   "--weights", str(fixture_dir / "weights.hpft"),
                   str(fixture_dir / "weights.hpft")])
        assert rc == 1
        assert "weight files for" in capsys.readouterr().err


class TestRun:
    def _pipeline(self, tmp_path, fixture_dir, threads="1"):
        desc = _calibrated(tmp_path, fixture_dir)
        qdir = tmp_path / "q"
        assert main(["quantize", desc, "--weights",
                     str(fixture_dir / "weights.hpft"), "--out-dir", str(qdir)]) == 0
        x = tensorio.read_floats(fixture_dir / "samples.hpft")[0]
        inp = tmp_path / "x.hpft"
        tensorio.write_tensor(inp, x)
        out = tmp_path / f"out{threads}.hpqt"
        rc = main(["run", desc, "--weights", str(qdir / "conv1.hpqt"),
                   "--input", str(inp), "--output", str(out),
                   "--threads", threads])
        assert rc == 0
        return out

    def test_end_to_end(self, tmp_path, fixture_dir, capsys):
        out = self._pipeline(tmp_path, fixture_dir)
        err = capsys.readouterr().err
        assert "conv1: sqnr " in err and " dB" in err
        codes = tensorio.read_codes(out)
        assert codes.shape == (4, 4, 4)  # 8x8 input, 5x5 valid kernel

    def test_thread_counts_byte_identical(self, tmp_path, fixture_dir):
        a = self._pipeline(tmp_path, fixture_dir, threads="1")
        b = self._pipeline(tmp_path, fixture_dir, threads="8")
        assert a.read_bytes() == b.read_bytes()

    def test_out_of_range_codes_rejected(self, tmp_path, fixture_dir, capsys):
        desc = _calibrated(tmp_path, fixture_dir)
        bad = tmp_path / "bad.hpqt"
        tensorio.write_tensor(bad, np.full((4, 4, 5, 5), 1000, dtype=np.int64))
        x = tmp_path / "x.hpft"
        tensorio.write_tensor(x, np.zeros((4, 8, 8)))
        rc = main(["run", desc, "--weights", str(bad), "--input", str(x),
                   "--output", str(tmp_path / "o.hpqt")])
        assert rc == 1
        assert "exceed" in capsys.readouterr().err

    def test_input_rank_rejected(self, tmp_path, fixture_dir, capsys):
        desc = _calibrated(tmp_path, fixture_dir)
        qdir = tmp_path / "q"
        assert main(["quantize", desc, "--weights",
                     str(fixture_dir / "weights.hpft"), "--out-dir", str(qdir)]) == 0
        bad = tmp_path / "x.hpft"
        tensorio.write_tensor(bad, np.zeros((2, 4, 8, 8)))
        rc = main(["run", desc, "--weights", str(qdir / "conv1.hpqt"),
                   "--input", str(bad), "--output", str(tmp_path / "o.hpqt")])
        assert rc == 1
        assert "rank 3" in capsys.readouterr().err


class TestCompare:
    def test_table(self, fixture_dir, capsys):
        rc = main(["compare", "--weights", str(fixture_dir / "weights.hpft"),
                   "--samples", str(fixture_dir / "samples.hpft")])
        assert rc == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 4
        assert lines[0].startswith("Scheme")
        assert [l.split()[0] for l in lines[1:]] == ["2D", "3D", "4D"]
        assert "Class error" not in lines[0]

    def test_labels_column(self, tmp_path, capsys):
        d = tmp_path / "lab"
        assert main(["gen-fixture", "--kind", "labeled", "--in-channels", "3",
                     "--out-channels", "3", "--kernel", "1",
                     "--num-samples", "4", "--out-dir", str(d)]) == 0
        capsys.readouterr()
        rc = main(["compare", "--weights", str(d / "weights.hpft"),
                   "--samples", str(d / "samples.hpft"),
                   "--labels", str(d / "labels.txt")])
        assert rc == 0
        out = capsys.readouterr().out
        assert "Class error (%)" in out

    def test_label_count_mismatch(self, tmp_path, fixture_dir, capsys):
        labels = tmp_path / "labels.txt"
        labels.write_text("0\n")
        rc = main(["compare", "--weights", str(fixture_dir / "weights.hpft"),
                   "--samples", str(fixture_dir / "samples.hpft"),
                   "--labels", str(labels)])
        assert rc == 1
        assert "labels for" in capsys.readouterr().err


class TestGenFixture:
    @pytest.mark.parametrize("kind", ["spread", "uniform", "zero"])
    def test_kinds(self, tmp_path, kind, capsys):
        d = tmp_path / kind
        assert main(["gen-fixture", "--kind", kind, "--out-dir", str(d)]) == 0
        assert (d / "weights.hpft").exists() and (d / "samples.hpft").exists()
        w = tensorio.read_floats(d / "weights.hpft")
        assert w.shape == (4, 4, 5, 5)
        assert tensorio.read_floats(d / "samples.hpft").shape == (2, 4, 8, 8)

    def test_labeled_writes_labels(self, tmp_path, capsys):
        d = tmp_path / "lab"
        assert main(["gen-fixture", "--kind", "labeled", "--in-channels", "3",
                     "--out-channels", "3", "--num-samples", "5",
                     "--out-dir", str(d)]) == 0
        labels = (d / "labels.txt").read_text().split()
        assert len(labels) == 5
        assert all(0 <= int(v) < 3 for v in labels)

    def test_spread_weights_span_kernel_magnitudes(self, fixture_dir):
        w = tensorio.read_floats(fixture_dir / "weights.hpft")
        maxes = np.abs(w).max(axis=(2, 3))
        assert maxes.max() / maxes.min() >= 2 ** 6


class TestExitCodes:
    def test_help_is_success(self, capsys):
        assert main(["--help"]) == 0
        assert "usage:" in capsys.readouterr().out

    def test_unknown_subcommand(self, capsys):
        assert main(["frobnicate"]) == 1

    def test_missing_required_flag(self, capsys):
        assert main(["calibrate", "--scheme", "2d"]) == 1

    def test_internal_error_is_two(self, monkeypatch, fixture_dir, capsys):
        import hpquant.cli as cli_mod

        def boom(*a, **k):
            raise RuntimeError("wedged")

        monkeypatch.setattr(cli_mod, "calibrate_network", boom)
        rc = main(["calibrate", "--weights", str(fixture_dir / "weights.hpft"),
                   "--samples", str(fixture_dir / "samples.hpft"),
                   "--scheme", "2d"])
        assert rc == 2
        assert "internal error: RuntimeError: wedged" in capsys.readouterr().err

    def test_installed_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "hpquant", "validate",
                               str(GOLDEN)], capture_output=True, text=True)
        assert proc.returncode == 0
        assert "ok (1 layer)" in proc.stdout
