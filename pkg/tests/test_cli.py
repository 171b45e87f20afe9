import logging
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from medzim.cli.io import IngestError, format_cell, ingest, write_taxa_table, write_tsv
from medzim.cli.logging_implementation import verbosity_level
from medzim.cli.main import main
from medzim.cli.omegaconfig import ConfigError, RunConfig, load
from medzim.simulate import Setting2Spec, gen_setting2
from medzim.utils.config import MANIFEST_NAME, save_manifest
from medzim.utils.enums import Mechanism, QuadratureMethod, Scenario

log = logging.getLogger("medzim")


TESTS_DIR = Path(__file__).parent


@pytest.fixture(scope="module")
def exported_inputs(tmp_path_factory) -> tuple[Path, Path]:
    table = gen_setting2(Setting2Spec(n=80, k_plus_1=3), np.random.default_rng(5)).table
    return write_taxa_table(table, tmp_path_factory.mktemp("inputs"))


def test_api_consistency():
    runner = CliRunner()

    res = runner.invoke(main, ["--help"])
    assert res.exit_code == 0
    assert res.output == (TESTS_DIR / "data" / "cli_help.txt").read_text()

    for command in ["analyze", "simulate1", "simulate2"]:
        res = runner.invoke(main, [command, "--help"])
        assert res.exit_code == 0
        assert "--config" in res.output
        assert "--mechanism [lod|exp]" in res.output


def test_fail_on_missing_config():
    runner = CliRunner()
    results = [
        runner.invoke(main, [command, "--config", "fakeconfig.yaml"])
        for command in ["analyze", "simulate1", "simulate2"]
    ]
    for res in results:
        assert res.exit_code == 2
        assert "Path 'fakeconfig.yaml' does not exist." in res.output


@pytest.mark.parametrize(
    ("flags", "message"),
    [
        (["--mechanism", "exp"], "The exponential mechanism needs model.eta (--eta)."),
        (["--mechanism", "exp", "--eta", "-1"], "model.eta must be positive, got -1.0."),
        (["--eta", "0.5"], "model.eta is only used by the exponential mechanism."),
        (["--x1", "1", "--x2", "1"], "contrast.x1 and contrast.x2 must differ."),
    ],
)
def test_invalid_configuration_writes_nothing(tmp_path, flags, message):
    out = tmp_path / "out"
    res = CliRunner().invoke(main, ["simulate1", "--out", str(out), "--reps", "1", *flags])
    assert res.exit_code == 1
    assert message in res.output
    assert not out.exists()


def test_unknown_yaml_key(tmp_path):
    config = tmp_path / "config.yaml"
    config.write_text("modle:\n  eta: 0.5\n")
    res = CliRunner().invoke(main, ["simulate1", "--config", str(config)])
    assert res.exit_code == 1
    assert "Unknown configuration key modle" in res.output
    assert "Did you mean" in res.output


def test_analyze_requires_inputs(tmp_path):
    res = CliRunner().invoke(main, ["analyze", "--out", str(tmp_path / "out")])
    assert res.exit_code == 1
    assert "analyze needs both --ra and --meta" in res.output


def test_analyze(tmp_path, exported_inputs):
    ra, meta = exported_inputs
    runner = CliRunner()

    def analyze(out, *flags):
        args = ["--quiet", "analyze", "--ra", str(ra), "--meta", str(meta), "--out", str(out)]
        return runner.invoke(main, [*args, *flags])

    single, pooled = tmp_path / "single", tmp_path / "pooled"
    res = analyze(single, "--threads", "1")
    assert res.exit_code == 0, res.output
    res = analyze(pooled, "--threads", "3")
    assert res.exit_code == 0, res.output

    for name in ("results.tsv", "heatmap.tsv", MANIFEST_NAME):
        assert (single / name).read_bytes() == (pooled / name).read_bytes()

    results = pd.read_csv(single / "results.tsv", sep="\t", keep_default_na=False)
    assert results["taxon"].tolist() == ["taxon1", "taxon2", "taxon3"]
    assert list(results.columns[:3]) == ["taxon", "status", "n_zero"]
    assert results.loc[1, "NIE2"] == "NA"
    heatmap = pd.read_csv(single / "heatmap.tsv", sep="\t")
    assert heatmap.columns[0] == "taxon"
    assert heatmap.shape == (3, 81)

    assert analyze(single, "--threads", "2").exit_code == 0
    res = analyze(single, "--fdr", "0.1")
    assert res.exit_code == 1
    assert "describes a different run" in res.output


def test_simulate1(tmp_path):
    out = tmp_path / "sim1"
    res = CliRunner().invoke(
        main, ["--quiet", "simulate1", "--reps", "2", "--n", "100", "--out", str(out)]
    )
    assert res.exit_code == 0, res.output
    summary = pd.read_csv(out / "summary.tsv", sep="\t", keep_default_na=False)
    assert len(summary) == 14
    assert "beta5" not in summary["name"].tolist()
    assert summary["name"].tolist()[-3:] == ["NIE1", "NIE2", "NIE"]
    assert (out / MANIFEST_NAME).exists()


def test_simulate2_export(tmp_path):
    out, export = tmp_path / "sim2", tmp_path / "export"
    res = CliRunner().invoke(
        main,
        [
            "--quiet",
            "simulate2",
            "--n", "60",
            "--k-plus-1", "2",
            "--reps", "1",
            "--export", str(export),
            "--out", str(out),
        ],
    )  # fmt: skip
    assert res.exit_code == 0, res.output
    metrics = pd.read_csv(out / "metrics.tsv", sep="\t", keep_default_na=False)
    assert metrics["effect"].tolist() == ["NIE1", "NIE2"]
    assert metrics.loc[1, "precision"] == "NA"
    table = ingest(export / "ra.tsv", export / "meta.tsv")
    assert (table.n_samples, table.n_taxa) == (60, 2)


# ---
# Input and output files


def test_ingest_toy(toy_ra_path, toy_meta_path, caplog):
    with caplog.at_level(logging.WARNING, logger="medzim"):
        table = ingest(toy_ra_path, toy_meta_path)
    assert table.sample_ids == ("S1", "S2")
    assert table.taxa_names == ("taxonA", "taxonB")
    np.testing.assert_array_equal(table.ra, [[0.25, 0.5], [0.0, 0.125]])
    np.testing.assert_array_equal(table.library_size, [1000, 2500])
    np.testing.assert_array_equal(table.x, [0, 1])
    np.testing.assert_array_equal(table.y, [1.5, -0.25])
    assert "Dropped 1 samples" in caplog.text
    assert "without metadata" in caplog.text
    assert "without abundances" in caplog.text


@pytest.mark.parametrize(
    ("ra", "meta", "message"),
    [
        ("sample_id\ttaxonA\nS1\tabc\n", None, ":2:2: malformed numeric cell 'abc'"),
        ("sample_id\ttaxonA\nS1\t0.5\nS2\t1.5\n", None, ":3:2: relative abundance 1.5"),
        ("sample_id\ttaxonA\nS1\t0.5\nS1\t0.1\n", None, ":3:1: duplicate sample id 'S1'"),
        ("sample_id\ta\tb\nS1\t0.7\t0.7\n", None, ":2: relative abundances of the sample"),
        ("sample_id\nS1\n", None, "expected a header row"),
        ("sample_id\ta\tb\ta\nS1\t0.1\t0.2\t0.3\n", None, ":1:4: duplicate column 'a'"),
        (None, "sample_id\tlibrary_size\tx\ty\tx\nS1\t100\t0\t1\t1\n", ":1:5: duplicate column"),
        (None, "sample_id\tlibrary\tx\ty\nS1\t100\t0\t1\n", "Did you mean 'library'"),
        (None, "sample_id\tlibrary_size\tx\ty\nS1\t0.5\t0\t1\n", "library size must be at"),
        (None, "sample_id\tlibrary_size\tx\ty\nS2\t100\t0\t1\n", "no sample in common"),
    ],
)
def test_ingest_errors(tmp_path, ra, meta, message):
    ra_path, meta_path = tmp_path / "ra.tsv", tmp_path / "meta.tsv"
    ra_path.write_text(ra or "sample_id\ttaxonA\nS1\t0.5\n")
    meta_path.write_text(meta or "sample_id\tlibrary_size\tx\ty\nS1\t100\t0\t1\n")
    with pytest.raises(IngestError) as e:
        ingest(ra_path, meta_path)
    assert message in str(e.value)


def test_ingest_csv(tmp_path):
    ra_path, meta_path = tmp_path / "ra.csv", tmp_path / "meta.tsv"
    ra_path.write_text("sample_id,taxonA,taxonB\nS1,0.5,0.25\nS2,0,1\n")
    meta_path.write_text("sample_id\tlibrary_size\tx\ty\nS1\t100\t0\t1\nS2\t200\t1\t2\n")
    table = ingest(ra_path, meta_path)
    np.testing.assert_array_equal(table.ra, [[0.5, 0.25], [0.0, 1.0]])


def test_taxa_table_round_trip(tmp_path, small_screen_table):
    ra_path, meta_path = write_taxa_table(small_screen_table, tmp_path)
    table = ingest(ra_path, meta_path)
    np.testing.assert_array_equal(table.ra, small_screen_table.ra)
    np.testing.assert_array_equal(table.y, small_screen_table.y)
    np.testing.assert_array_equal(table.library_size, small_screen_table.library_size)
    assert table.sample_ids == small_screen_table.sample_ids
    assert table.taxa_names == small_screen_table.taxa_names


@pytest.mark.parametrize(
    ("value", "expected"),
    [
        (None, "NA"),
        (float("nan"), "NA"),
        (True, "true"),
        (np.bool_(False), "false"),
        (3, "3"),
        (np.int64(4), "4"),
        (0.1234567, "0.123457"),
        (1e-7, "1e-07"),
        (np.float64(2.5), "2.5"),
        ("taxon1", "taxon1"),
    ],
)
def test_format_cell(value, expected):
    assert format_cell(value) == expected


def test_write_tsv(tmp_path):
    frame = pd.DataFrame({"name": ["a", "b"], "value": [1 / 3, None], "flag": [True, None]})
    path = tmp_path / "nested" / "out.tsv"
    write_tsv(frame, path)
    assert path.read_text() == "name\tvalue\tflag\na\t0.333333\ttrue\nb\tNA\tNA\n"


# ---
# Configuration


def test_load_defaults():
    config = load()
    assert isinstance(config, RunConfig)
    assert config.model.mechanism is Mechanism.LOD
    assert config.model.quadrature is QuadratureMethod.GAUSS
    assert config.simulate1.scenario is Scenario.LOW_RA
    assert config.fdr == 0.2
    assert config.model.build().dim == 12


def test_load_layers(tmp_path):
    directory = tmp_path / "configs"
    directory.mkdir()
    (directory / "a.yaml").write_text("seed: 1\nmodel:\n  mechanism: EXPONENTIAL\n  eta: 2.0\n")
    (directory / "b.yaml").write_text("seed: 2\n")
    (directory / "ignored.txt").write_text("seed: 3\n")
    config = load(directory, ["model.eta=0.5", "simulate1.scenario=HIGH_RA"])
    assert config.seed == 2
    assert config.model.mechanism is Mechanism.EXPONENTIAL
    assert config.model.eta == 0.5
    assert config.simulate1.scenario is Scenario.HIGH_RA
    assert config.model.build().mechanism.describe() == {"mechanism": "exp", "eta": 0.5}


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError, match="Invalid value"):
        load(overrides=["seed=abc"])
    with pytest.raises(ConfigError, match="Unknown configuration key"):
        load(overrides=["optimiser.method=BFGS"])
    with pytest.raises(ConfigError, match="fdr must lie"):
        load(overrides=["fdr=1.5"])


def test_manifest(tmp_path):
    config = load(overrides=["out=somewhere", "threads=4", "analyze.ra=table.tsv"])
    manifest = config.manifest()
    assert "out" not in manifest
    assert "threads" not in manifest
    assert manifest["model"]["mechanism"] == "LOD"
    assert manifest["analyze"]["ra"] == "table.tsv"

    path = save_manifest("analyze", manifest, tmp_path)
    assert save_manifest("analyze", manifest, tmp_path) == path
    with pytest.raises(ValueError, match="describes a different run"):
        save_manifest("simulate1", manifest, tmp_path)


def test_verbosity_level():
    assert verbosity_level(verbose=False, quiet=False, debug=False) == logging.INFO
    assert verbosity_level(verbose=True, quiet=False, debug=False) == logging.DEBUG
    assert verbosity_level(verbose=False, quiet=True, debug=False) == logging.ERROR
    assert verbosity_level(verbose=False, quiet=True, debug=True) == logging.DEBUG
