"""
Jerarquía de errores del paquete.

Los errores de entrada heredan también de `ValueError` para que el código que
ya captura `ValueError` siga funcionando.
"""
from __future__ import annotations

from pathlib import Path


class IHGNNError(Exception):
    """Raíz de todos los errores del paquete."""


class InputError(IHGNNError, ValueError):
    """Argumento inválido: índice fuera de rango, forma incorrecta, etc."""


class ConfigurationError(IHGNNError, ValueError):
    """Configuración del modelo o del experimento incoherente."""


class NumericError(IHGNNError, ArithmeticError):
    """Valores no finitos durante el entrenamiento o gradiente incorrecto."""


class DatasetError(IHGNNError):
    """
    Error asociado a un fichero de un dataset.

    Args:
        message: descripción del problema.
        path: fichero en el que se ha producido.
        line: número de línea (empezando en 1), si se conoce.
    """

    def __init__(
        self, message: str, path: Path | str | None = None, line: int | None = None
    ) -> None:
        self.message = message
        self.path = Path(path) if path is not None else None
        self.line = line
        super().__init__(str(self))

    def __str__(self) -> str:
        if self.path is None:
            return self.message
        where = self.path.name if self.line is None else f"{self.path.name}:{self.line}"
        return f"{where}: {self.message}"


class DatasetLoadError(DatasetError):
    """No se ha podido leer un fichero del dataset."""


class DatasetFormatError(DatasetError):
    """El contenido de un fichero del dataset no respeta el formato."""
