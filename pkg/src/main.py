"""Point d'entrée CLI du laboratoire credlab.

Ce module orchestre une expérience complète:
1. chargement et validation de la configuration JSON
2. calcul de l'expérience (tables et contrôles d'acceptation)
3. écriture du CSV de résultats sous `output_path`
4. résumé PASS/FAIL par contrôle et ligne de métriques JSON

Usage: `credlab <experiment> --config <path> [--out DIR] [--seed N]`.

Codes de sortie: 0 tout passe, 1 au moins un contrôle échoue,
2 configuration invalide, 3 échec numérique ou de précondition.
"""

import argparse
import os
import sys
import time
import uuid
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv
from loguru import logger

from experiments.registry import run_experiment
from lab.errors import ConfigError, LabError
from loaders.config_loader import (
    SEED_MAX,
    VALID_EXPERIMENTS,
    ExperimentConfigBase,
    config_digest,
    load_config,
)
from loaders.csv_writer import CsvArtifactWriter
from utils.logger import setup_logger
from utils.monitoring import emit_run_metrics, set_run_context

# ---------------------------------------------------------------------------
# CHEMINS ET CODES DE SORTIE
# ---------------------------------------------------------------------------

BASE_DIR = Path(__file__).resolve().parent
DEFAULT_CONFIG_DIR = BASE_DIR / "config" / "experiments"

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_CONFIG = 2
EXIT_FAILURE = 3


class CredlabRunner:
    """Orchestrateur d'une expérience credlab.

    Attributes:
        config: Configuration validée (surcharges CLI appliquées).
        config_hash: sha256 de la configuration validée.
        stats: Compteurs et statut du run, repris par la ligne de métriques.
    """

    def __init__(self, config: ExperimentConfigBase):
        self.config = config
        self.config_hash = config_digest(config)
        self.writer = CsvArtifactWriter(
            config.output_path,
            provenance={
                "experiment": config.experiment,
                "config_sha256": self.config_hash,
                "seed": config.seed,
            },
        )

        self.stats: Dict[str, Any] = {
            "status": "RUNNING",
            "exit_code": None,
            "duration_seconds": 0.0,
            "rows_written": 0,
            "checks_passed": 0,
            "checks_failed": 0,
            "output_file": None,
        }

        logger.info(f"Expérience {config.experiment} initialisée (seed={config.seed}, sortie={config.output_path})")

    # -----------------------------------------------------------------------

    def run(self) -> Dict[str, Any]:
        """Calcule l'expérience, écrit le CSV et affiche les résumés PASS/FAIL.

        Returns:
            Dictionnaire `stats` (statut, code de sortie, lignes, contrôles).

        Raises:
            LabError: échec numérique, de précondition ou d'écriture.
        """
        start_time = time.time()
        status = "FAILED"
        try:
            logger.info("=" * 70)
            logger.info(f"DÉMARRAGE EXPÉRIENCE {self.config.experiment.upper()}")
            logger.info("=" * 70)

            set_run_context(stage="compute")
            result = run_experiment(self.config)

            set_run_context(stage="write")
            path = self.writer.write(result.frame, self.config.experiment)
            self.stats["rows_written"] = len(result.frame)
            self.stats["output_file"] = str(path)

            set_run_context(stage="report")
            for item in result.checks:
                print(item.summary, file=sys.stdout, flush=True)
            self.stats["checks_passed"] = result.checks_passed
            self.stats["checks_failed"] = result.checks_failed

            if result.success:
                status = "SUCCESS"
                self.stats["exit_code"] = EXIT_OK
                logger.success(f"✓ {result.checks_passed} contrôle(s) validé(s)")
            else:
                status = "CHECKS_FAILED"
                self.stats["exit_code"] = EXIT_CHECKS_FAILED
                logger.warning(f"{result.checks_failed} contrôle(s) en échec sur {len(result.gating)}")

        except LabError as e:
            logger.error(f"Erreur expérience: {e}")
            raise

        finally:
            self.stats["status"] = status
            self.stats["duration_seconds"] = time.time() - start_time
            logger.info(f"Durée totale: {self.stats['duration_seconds']:.2f}s")

        return self.stats


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def _seed(value: str) -> int:
    try:
        seed = int(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"graine non entière: {value!r}") from exc
    if not 0 <= seed <= SEED_MAX:
        raise argparse.ArgumentTypeError(f"graine hors de [0, 2^64 − 1]: {seed}")
    return seed


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Construit et parse les arguments CLI."""
    parser = argparse.ArgumentParser("credlab", description="Expériences de rapport crédible et de supervision.")
    parser.add_argument("experiment", choices=VALID_EXPERIMENTS, help="Expérience à exécuter.")
    parser.add_argument(
        "--config",
        type=str,
        default=None,
        help="Chemin de la configuration JSON (défaut: config/experiments/<experiment>.json).",
    )
    parser.add_argument("--out", type=str, default=None, help="Répertoire de sortie (remplace output_path).")
    parser.add_argument("--seed", type=_seed, default=None, help="Graine (remplace seed).")
    parser.add_argument("--log-level", default="INFO", help="Niveau de log (DEBUG, INFO, WARNING, ERROR).")
    parser.add_argument("--log-format", choices=["plain", "json"], default=None, help="Format des logs.")
    parser.add_argument("--log-file", type=str, default=None, help="Fichier de log optionnel.")
    return parser.parse_args(argv)


def resolve_config(args: argparse.Namespace) -> ExperimentConfigBase:
    """Charge la configuration et applique les surcharges `--out` / `--seed`.

    Raises:
        ConfigError: fichier invalide ou expérience différente de celle demandée.
    """
    path = args.config or str(DEFAULT_CONFIG_DIR / f"{args.experiment}.json")
    config = load_config(path)
    if config.experiment != args.experiment:
        raise ConfigError(
            f"experiment: la configuration décrit « {config.experiment} », la CLI demande « {args.experiment} »"
        )

    overrides: Dict[str, Any] = {}
    if args.out is not None:
        overrides["output_path"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    return config.model_copy(update=overrides) if overrides else config


def main(argv: Optional[List[str]] = None) -> int:
    """Point d'entrée CLI: charge la config, lance l'expérience, renvoie le code de sortie."""
    load_dotenv()

    args = parse_arguments(argv)
    setup_logger(level=args.log_level, log_file=args.log_file, log_format=args.log_format)

    run_id = os.getenv("RUN_ID") or str(uuid.uuid4())
    set_run_context(run_id=run_id, experiment=args.experiment, seed=args.seed, stage="load_config")

    start_time = time.time()
    stats: Dict[str, Any] = {"status": "FAILED", "exit_code": EXIT_FAILURE}
    try:
        config = resolve_config(args)
        runner = CredlabRunner(config)
        set_run_context(seed=config.seed, config_hash=runner.config_hash)
        stats = runner.run()
    except ConfigError as e:
        logger.error(f"Configuration invalide: {e}")
        stats = {"status": "CONFIG_ERROR", "exit_code": EXIT_CONFIG}
    except LabError as e:
        stats = {"status": "FAILED", "exit_code": EXIT_FAILURE, "error": str(e)}
    except Exception as e:
        logger.exception(f"Erreur inattendue: {e}")
        stats = {"status": "FAILED", "exit_code": EXIT_FAILURE}
    finally:
        stats.setdefault("duration_seconds", time.time() - start_time)
        emit_run_metrics(stats)

    return int(stats["exit_code"])


if __name__ == "__main__":
    sys.exit(main())
