"""End-to-end CLI behavior: exit codes, determinism, manifests, resume."""
import json
import os

import pytest

from conftest import make_generator_config
from spdtsim.cli import (EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_VALIDATION, main)
from spdtsim.config import generator_config_to_dict


def write_kv(path, kv):
    path.write_text("".join(f"{k} = {v}\n" for k, v in kv.items()))
    return str(path)


@pytest.fixture(scope="module")
def gen_config_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "generator.cfg"
    return write_kv(path, generator_config_to_dict(make_generator_config()))


@pytest.fixture(scope="module")
def trace_file(tmp_path_factory, gen_config_file):
    out = tmp_path_factory.mktemp("trace") / "trace.txt"
    assert main(["generate", "--config", gen_config_file,
                 "--out", str(out)]) == EXIT_OK
    return str(out)


class TestGenerate:
    def test_deterministic_reruns(self, gen_config_file, tmp_path):
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        assert main(["generate", "--config", gen_config_file,
                     "--out", str(a)]) == EXIT_OK
        assert main(["generate", "--config", gen_config_file,
                     "--out", str(b)]) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()

    def test_seed_override_changes_output(self, gen_config_file, tmp_path):
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        main(["generate", "--config", gen_config_file, "--out", str(a)])
        main(["generate", "--config", gen_config_file, "--seed", "31",
              "--out", str(b)])
        assert a.read_bytes() != b.read_bytes()

    def test_manifest(self, gen_config_file, tmp_path):
        out = tmp_path / "t.txt"
        main(["generate", "--config", gen_config_file, "--out", str(out)])
        manifest = json.loads((tmp_path / "t.txt.manifest.json").read_text())
        assert manifest["command"] == "generate"
        assert manifest["outputs"] == [str(out)]
        assert manifest["master_seed"] == 7

    def test_missing_key_is_config_error(self, gen_config_file, tmp_path,
                                         capsys):
        kv = generator_config_to_dict(make_generator_config())
        del kv["lambda"]
        bad = write_kv(tmp_path / "bad.cfg", kv)
        assert main(["generate", "--config", bad,
                     "--out", str(tmp_path / "x.txt")]) == EXIT_CONFIG
        assert "lambda" in capsys.readouterr().err

    def test_unwritable_destination_is_io_error(self, gen_config_file):
        assert main(["generate", "--config", gen_config_file,
                     "--out", "/no/such/dir/t.txt"]) == EXIT_IO


class TestProjectAndValidate:
    def test_project_idempotent(self, trace_file, tmp_path):
        once = tmp_path / "spst1.txt"
        twice = tmp_path / "spst2.txt"
        assert main(["project", trace_file, "--out", str(once)]) == EXIT_OK
        assert main(["project", str(once), "--out", str(twice)]) == EXIT_OK
        strip = lambda p: [l for l in p.read_text().splitlines()
                           if not l.startswith("#")]
        assert strip(once) == strip(twice)

    def test_validate_generated_trace(self, trace_file, capsys):
        assert main(["validate", trace_file]) == EXIT_OK
        assert "trace valid" in capsys.readouterr().out

    def test_validate_flags_corruption(self, trace_file, tmp_path, capsys):
        lines = open(trace_file).read().splitlines(keepends=True)
        h, nb, start, t_a, t_c, t_d, delta = lines[5].split()
        lines[5] = f"{h} {nb} {start} {t_a} {int(t_a) + int(delta) + 99} {t_d} {delta}\n"
        bad = tmp_path / "bad.txt"
        bad.write_text("".join(lines))
        assert main(["validate", str(bad)]) == EXIT_VALIDATION
        assert "t_c <= t_a + delta" in capsys.readouterr().out

    def test_validate_rejects_junk_file(self, tmp_path, capsys):
        junk = tmp_path / "junk.txt"
        junk.write_text("not a trace\n")
        assert main(["validate", str(junk)]) == EXIT_VALIDATION
        assert "header" in capsys.readouterr().err


class TestSimulate:
    def epidemic_cfg(self, tmp_path, **over):
        kv = dict(seeds="0:5,1:4,2:3", seed=17, horizon_days=32)
        kv.update(over)
        return write_kv(tmp_path / "epidemic.cfg", kv)

    def test_run_and_row_count(self, trace_file, tmp_path):
        cfg = self.epidemic_cfg(tmp_path)
        out = tmp_path / "run"
        assert main(["simulate", trace_file, "--config", cfg,
                     "--out", str(out)]) == EXIT_OK
        rows = [l for l in (out / "metrics.csv").read_text().splitlines()
                if l and not l.startswith("#")]
        assert len(rows) == 33  # column header + 32 days
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "simulate"

    def test_deterministic(self, trace_file, tmp_path):
        cfg = self.epidemic_cfg(tmp_path)
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            assert main(["simulate", trace_file, "--config", cfg,
                         "--out", str(out)]) == EXIT_OK
            outs.append((out / "metrics.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_unknown_seed_node(self, trace_file, tmp_path, capsys):
        cfg = self.epidemic_cfg(tmp_path, seeds="90000:5")
        assert main(["simulate", trace_file, "--config", cfg,
                     "--out", str(tmp_path / "x")]) == EXIT_CONFIG
        assert "90000" in capsys.readouterr().err

    def test_unknown_config_key(self, trace_file, tmp_path):
        cfg = self.epidemic_cfg(tmp_path, typo="1")
        assert main(["simulate", trace_file, "--config", cfg,
                     "--out", str(tmp_path / "x")]) == EXIT_CONFIG


class TestExperiment:
    def sweep_cfg(self, tmp_path, trace_file, **over):
        kv = dict(kind="p_sweep", trace=trace_file, seed=5, p_values="0,1",
                  n_seeds=4, reps=2, horizon_days=6)
        kv.update(over)
        return write_kv(tmp_path / "exp.cfg", kv)

    def summaries(self, out):
        sdir = out / "summary"
        return {name: (sdir / name).read_bytes()
                for name in sorted(os.listdir(sdir))}

    def test_sweep_grid_and_resume(self, trace_file, tmp_path):
        cfg = self.sweep_cfg(tmp_path, trace_file)
        out = tmp_path / "exp"
        assert main(["experiment", "--config", cfg,
                     "--out", str(out)]) == EXIT_OK
        raw = sorted(os.listdir(out / "raw"))
        assert len(raw) == 2 * 2 * 2   # P values x reps x variants
        first = self.summaries(out)

        # deleting one raw cell and rerunning recomputes only that cell and
        # reproduces identical summaries
        (out / "raw" / raw[3]).unlink()
        kept = out / "raw" / raw[0]
        stamp = kept.stat().st_mtime_ns
        assert main(["experiment", "--config", cfg,
                     "--out", str(out)]) == EXIT_OK
        assert sorted(os.listdir(out / "raw")) == raw
        assert kept.stat().st_mtime_ns == stamp
        assert self.summaries(out) == first

    def test_workers_byte_identical(self, trace_file, tmp_path):
        cfg = self.sweep_cfg(tmp_path, trace_file)
        outs = []
        for name, workers in (("w1", "1"), ("w2", "3")):
            out = tmp_path / name
            assert main(["experiment", "--config", cfg, "--out", str(out),
                         "--workers", workers]) == EXIT_OK
            outs.append((self.summaries(out),
                         {f: (out / "raw" / f).read_bytes()
                          for f in os.listdir(out / "raw")}))
        assert outs[0] == outs[1]

    def test_low_connectivity_kind(self, trace_file, tmp_path):
        cfg = self.sweep_cfg(tmp_path, trace_file, kind="low_connectivity",
                             max_seed_nodes=3, scenarios="S-1,S-2")
        out = tmp_path / "low"
        assert main(["experiment", "--config", cfg,
                     "--out", str(out)]) == EXIT_OK
        text = (out / "summary" / "triggering_summary.csv").read_text()
        assert text.count("S-1") == 2 and text.count("S-2") == 2

    def test_hidden_single_kind_spst_nullity(self, trace_file, tmp_path):
        cfg = self.sweep_cfg(tmp_path, trace_file, kind="hidden_single",
                             max_seed_nodes=2, reps_per_node=2)
        out = tmp_path / "hidden"
        assert main(["experiment", "--config", cfg,
                     "--out", str(out)]) == EXIT_OK
        rows = (out / "summary" / "per_node_outbreaks.csv").read_text()
        for row in rows.splitlines()[1:]:
            _, variant, _, _, outbreak, _ = row.split(",")
            if variant == "spst":
                assert outbreak == "1"

    def test_unknown_kind(self, trace_file, tmp_path):
        cfg = self.sweep_cfg(tmp_path, trace_file, kind="bogus")
        assert main(["experiment", "--config", cfg,
                     "--out", str(tmp_path / "x")]) == EXIT_CONFIG

    def test_unknown_scenario(self, trace_file, tmp_path, capsys):
        cfg = self.sweep_cfg(tmp_path, trace_file, kind="low_connectivity",
                             scenarios="S-9")
        assert main(["experiment", "--config", cfg,
                     "--out", str(tmp_path / "x")]) == EXIT_CONFIG
        assert "S-9" in capsys.readouterr().err

    def test_pool_error_names_pool(self, trace_file, tmp_path, capsys):
        cfg = self.sweep_cfg(tmp_path, trace_file, n_seeds=150)
        assert main(["experiment", "--config", cfg,
                     "--out", str(tmp_path / "x")]) == EXIT_CONFIG
        assert "pool" in capsys.readouterr().err
