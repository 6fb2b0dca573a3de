"""
Tests du chargement de configuration, des instances de marché et de l'écriture CSV
"""

import json

import pandas as pd
import pytest

from lab.errors import ConfigError
from loaders.config_loader import (
    VALID_EXPERIMENTS,
    StaticsConfig,
    config_digest,
    load_config,
    parse_config,
)
from loaders.csv_writer import CsvArtifactWriter
from loaders.market_loader import load_market_instance, parse_market_instance


def _write(path, document) -> str:
    path.write_text(json.dumps(document), encoding="utf-8")
    return str(path)


class TestConfigLoader:
    """Validation pydantic et diagnostics"""

    @pytest.mark.parametrize("name", VALID_EXPERIMENTS)
    def test_sample_configs_parse(self, config_dir, name):
        config = load_config(str(config_dir / f"{name}.json"))
        assert config.experiment == name

    def test_minimal_config(self):
        config = parse_config({"experiment": "step_first_best"})
        assert config.seed == 0
        assert config.output_path == "results"
        assert config.parameters.game.build().p_min == pytest.approx(0.5)

    def test_negative_gamma_names_field(self):
        document = {"experiment": "statics", "parameters": {"game": {"agent": {"gamma": -0.1}}}}
        with pytest.raises(ConfigError, match=r"parameters\.game\.agent\.gamma"):
            parse_config(document)

    def test_unknown_experiment_lists_valid_names(self):
        with pytest.raises(ConfigError) as exc_info:
            parse_config({"experiment": "nope"})
        for name in VALID_EXPERIMENTS:
            assert name in str(exc_info.value)

    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigError, match="bogus"):
            parse_config({"experiment": "statics", "parameters": {"bogus": 1}})

    def test_utility_ordering_rejected(self):
        document = {"experiment": "statics", "parameters": {"game": {"principal": {"u_s": 0.0, "u_d": 0.5}}}}
        with pytest.raises(ConfigError, match="principal"):
            parse_config(document)

    def test_domain_invariant_reported(self):
        document = {
            "experiment": "statics",
            "parameters": {"game": {"generator": {"kind": "power", "alpha": 1.5}}},
        }
        with pytest.raises(ConfigError, match=r"parameters\.game"):
            parse_config(document)

    def test_step_approval_rejected_for_perturbation(self):
        document = {"experiment": "perturbation_check", "parameters": {"approval": {"kind": "step", "r0": 0.7}}}
        with pytest.raises(ConfigError, match="approval"):
            parse_config(document)

    def test_seed_range(self):
        with pytest.raises(ConfigError, match="seed"):
            parse_config({"experiment": "statics", "seed": -1})
        assert parse_config({"experiment": "statics", "seed": 2**64 - 1}).seed == 2**64 - 1

    def test_detection_reachability(self):
        with pytest.raises(ConfigError):
            parse_config({"experiment": "detection_curves", "parameters": {"p_true": 0.95, "delta": 0.1}})

    def test_market_sources_exclusive(self, tmp_path):
        document = {
            "experiment": "market_inflation",
            "parameters": {"instance": {"n": 2}, "instance_path": str(tmp_path / "m.json")},
        }
        with pytest.raises(ConfigError):
            parse_config(document)

    def test_json_error_position(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"experiment": "statics",\n  "seed": }', encoding="utf-8")
        with pytest.raises(ConfigError, match="ligne 2"):
            load_config(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="introuvable"):
            load_config(str(tmp_path / "absent.json"))

    def test_digest_is_stable(self):
        first = parse_config({"experiment": "statics", "seed": 3})
        second = parse_config({"seed": 3, "experiment": "statics"})
        assert config_digest(first) == config_digest(second)
        assert config_digest(first) != config_digest(first.model_copy(update={"seed": 4}))
        assert isinstance(first, StaticsConfig)


class TestMarketLoader:
    """Schéma JSON et conversion des instances de marché"""

    @pytest.fixture
    def document(self):
        return {
            "n": 2,
            "nu": {"": 0.0, "1": 1.0, "2": 1.0, "1,2": 1.5},
            "bids": [0.9, 0.4],
            "delta_rep": 1.0,
            "gamma": 0.1,
        }

    def test_canonical_instance(self, document):
        instance = parse_market_instance(document)
        assert instance.n == 2
        assert instance.capacity.value([0, 1]) == pytest.approx(1.5)
        assert instance.bid_cap == 1.0

    def test_schema_violation(self, document):
        document["gamma"] = -1.0
        with pytest.raises(ConfigError, match="gamma"):
            parse_market_instance(document)

    def test_missing_subset(self, document):
        del document["nu"]["1,2"]
        with pytest.raises(ConfigError):
            parse_market_instance(document)

    def test_agent_out_of_range(self, document):
        document["nu"]["3"] = 0.5
        with pytest.raises(ConfigError, match="entre 1 et 2"):
            parse_market_instance(document)

    def test_bid_count(self, document):
        document["bids"] = [0.9, 0.4, 0.2]
        with pytest.raises(ConfigError, match="bids"):
            parse_market_instance(document)

    def test_supermodular_table(self, document):
        document["nu"]["1,2"] = 2.5
        with pytest.raises(ConfigError):
            parse_market_instance(document)

    def test_load_from_file(self, tmp_path, document):
        instance = load_market_instance(_write(tmp_path / "market.json", document))
        assert instance.bids == (0.9, 0.4)


class TestCsvArtifactWriter:
    """Écriture des artefacts"""

    def test_provenance_and_content(self, tmp_path):
        writer = CsvArtifactWriter(str(tmp_path / "out"), {"experiment": "statics", "config_sha256": "abc", "seed": 0})
        frame = pd.DataFrame({"quantity": ["p_min"], "value": [0.5]})
        path = writer.write(frame, "statics")

        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[:3] == ["# experiment: statics", "# config_sha256: abc", "# seed: 0"]
        assert lines[3].startswith("# version: ")
        assert lines[4:] == ["quantity,value", "p_min,0.5"]

    def test_float_format(self, tmp_path):
        writer = CsvArtifactWriter(str(tmp_path))
        path = writer.write(pd.DataFrame({"x": [1.0 / 3.0]}), "fmt")
        assert path.read_text(encoding="utf-8").splitlines()[-1] == "0.333333333333"

    def test_refuses_escape(self, tmp_path):
        writer = CsvArtifactWriter(str(tmp_path / "out"))
        with pytest.raises(ConfigError):
            writer.write(pd.DataFrame({"x": [1]}), "../evil")
