"""
Package utils - Utilitaires transverses du laboratoire
"""

from .logger import setup_logger
from .monitoring import emit_run_metrics, set_run_context
from .parallel import get_runtime_settings, ordered_map

__all__ = ['setup_logger', 'emit_run_metrics', 'set_run_context', 'get_runtime_settings', 'ordered_map']
