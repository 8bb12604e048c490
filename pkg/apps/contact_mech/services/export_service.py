"""
Servicio de Exportación de Resultados
=====================================

Escribe trayectorias (CSV) e informes (JSON) con controles básicos:

- Límite de filas por trayectoria
- Precisión de 17 dígitos significativos (ida y vuelta exacta a double)
- Auditoría de cada archivo escrito
"""

import json
import logging
import os
from pathlib import Path
from typing import Union

import pandas as pd
from django.conf import settings

from .exceptions import ContactMechError
from .nh_dynamics import Trajectory

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'


class ExportLimitExceeded(ContactMechError):
    """Excepción cuando una exportación supera los límites configurados."""
    pass


class ExportService:
    """
    Servicio centralizado de escritura de resultados.

    Límites configurables:
    - EDENMECH_MAX_TRAJECTORY_ROWS: filas máximas por CSV de trayectoria
    """

    MAX_TRAJECTORY_ROWS = getattr(settings, 'EDENMECH_MAX_TRAJECTORY_ROWS', 5_000_000)

    def validate_export_size(self, rows: int) -> None:
        """
        Raises:
            ExportLimitExceeded: si la trayectoria supera el límite de filas.
        """
        if rows > self.MAX_TRAJECTORY_ROWS:
            raise ExportLimitExceeded(
                f"La trayectoria tiene {rows} filas. El límite es {self.MAX_TRAJECTORY_ROWS}."
            )

    def _prepare_path(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        if path.parent and not path.parent.exists():
            os.makedirs(path.parent, exist_ok=True)
        return path

    def write_trajectory(self, trajectory: Trajectory, path: Union[str, Path]) -> Path:
        """Escribe ``t,q1..qn,p1..pn,z,H,phi1..phik`` con 17 dígitos significativos."""
        self.validate_export_size(len(trajectory))
        path = self._prepare_path(path)
        trajectory.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT)
        self._log_export_audit(path, 'trajectory', len(trajectory))
        return path

    def read_trajectory(self, path: Union[str, Path]) -> pd.DataFrame:
        """Lee un CSV de trayectoria con el parser exacto de pandas."""
        return pd.read_csv(path, float_precision='round_trip')

    def write_json(self, payload: dict, path: Union[str, Path], kind: str = 'json') -> Path:
        path = self._prepare_path(path)
        with open(path, 'w', encoding='utf-8') as handle:
            handle.write(json.dumps(payload, indent=2, ensure_ascii=False))
            handle.write('\n')
        self._log_export_audit(path, kind, len(payload))
        return path

    def write_report(self, report, path: Union[str, Path]) -> Path:
        """Escribe un VerifyReport; el JSON es idéntico byte a byte para la misma semilla."""
        path = self._prepare_path(path)
        with open(path, 'w', encoding='utf-8') as handle:
            handle.write(report.to_json())
            handle.write('\n')
        self._log_export_audit(path, 'report', len(report.rows))
        return path

    def _log_export_audit(self, path: Path, kind: str, size: int) -> None:
        logger.info(f"[AUDIT] Export {kind}: {path} ({size} registros)")
