"""Hiérarchie d'exceptions du laboratoire.

Toutes les erreurs métier dérivent de `LabError` : la CLI traduit `ConfigError`
en code de sortie 2 et toute autre `LabError` en code 3.
"""

from typing import Any, Optional


class LabError(Exception):
    """Erreur de base du laboratoire."""


class DomainError(LabError):
    """Probabilité hors du domaine du générateur (ou singularité de courbure)."""


class NotDifferentiableError(LabError):
    """Dérivée demandée pour une fonction d'approbation non dérivable (Step)."""


class PreconditionError(LabError):
    """Précondition d'une opération non satisfaite."""


class NoConflictError(LabError):
    """Perturbation constante : aucun conflit entre score et approbation."""


class ParameterError(LabError):
    """Paramètre hors plage (ordre des utilités, grille vide, support...)."""


class NumericsError(LabError):
    """Quadrature ou résolution numérique non convergée."""


class DegenerateRegimeError(LabError):
    """Régime dégénéré : le seuil optimal sort de l'espace des rapports."""


class OrderingChangedError(LabError):
    """Le pas de différence finie change l'ordre glouton des enchères."""


class ConvergenceError(LabError):
    """Montée par coordonnées non convergée dans la limite de balayages."""


class ConfigError(LabError):
    """Configuration d'expérience illisible ou invalide."""


class CapacityError(LabError):
    """Table de capacité non monotone, non sous-modulaire ou à marges > 1."""

    def __init__(self, message: str, witness: Optional[dict[str, Any]] = None):
        super().__init__(message)
        self.witness = witness or {}
