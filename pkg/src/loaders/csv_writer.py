"""
Écriture des artefacts CSV
Un fichier par expérience sous `output_path`, précédé de lignes de provenance `#`.
Aucune date n'est écrite : même configuration et même graine donnent le même fichier
octet pour octet.
"""

from pathlib import Path
from typing import Dict, Optional

import pandas as pd
from loguru import logger

from lab import __version__
from lab.errors import ConfigError

FLOAT_FORMAT = "%.12g"


class CsvArtifactWriter:
    """Écrit les tables de résultats d'une expérience dans un répertoire de sortie."""

    def __init__(self, output_path: str, provenance: Optional[Dict[str, object]] = None):
        """
        Args:
            output_path: Répertoire de sortie (créé au besoin)
            provenance: Paires clé/valeur écrites en tête (expérience, config_sha256, seed)
        """
        self.output_dir = Path(output_path).resolve()
        self.provenance = dict(provenance or {})
        self.provenance.setdefault("version", __version__)

    def _target(self, name: str) -> Path:
        target = (self.output_dir / f"{name}.csv").resolve()
        if self.output_dir not in target.parents:
            raise ConfigError(f"Artefact « {name} » hors du répertoire de sortie {self.output_dir}")
        return target

    def write(self, frame: pd.DataFrame, name: str) -> Path:
        """Écrit `frame` dans `<output_path>/<name>.csv`.

        Returns:
            Chemin du fichier écrit.
        """
        target = self._target(name)
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            with open(target, "w", encoding="utf-8", newline="") as f:
                for key, value in self.provenance.items():
                    f.write(f"# {key}: {value}\n")
                frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        except OSError as exc:
            raise ConfigError(f"Écriture impossible dans {target}: {exc}") from exc

        logger.success(f"✓ {len(frame)} lignes écrites dans {target}")
        return target
