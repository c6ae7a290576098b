"""
Error Types Module untuk SCALE-I
================================
Modul ini berisi hierarki exception yang dipakai semua package. Caller yang
hanya peduli pada kegagalan library cukup menangkap ``ScaleIError``; error
yang berasal dari argumen juga turunan dari ``ValueError``.
"""

from typing import Iterable, List, Sequence, Tuple


class ScaleIError(Exception):
    """Base class untuk semua error library."""


class StructuralError(ScaleIError, ValueError):
    """Struktur graph tidak valid (cycle, parent set salah, ukuran tidak cocok)."""


class DomainError(ScaleIError, ValueError):
    """Input di luar domain operasi."""


class ConfigError(ScaleIError, ValueError):
    """Konfigurasi eksperimen tidak bisa dibaca atau tidak valid."""


class ContractViolation(ScaleIError):
    """Properti yang dijamin pada hasil antara ternyata tidak terpenuhi."""


class IdentifiabilityError(ScaleIError):
    """
    Recovery tidak bisa memilih satu decoder dari environment yang tersedia.

    Attributes:
        environments: indeks environment (mulai dari 1) yang terlibat
    """

    def __init__(self, message: str, environments: Iterable[int] = ()):
        self.environments: List[int] = sorted(int(m) for m in environments)
        if self.environments:
            message = f"{message} (environments: {', '.join(map(str, self.environments))})"
        super().__init__(message)


class RefinementError(ScaleIError):
    """
    Refinement hard-intervention masih menyisakan pasangan surrounded yang dependen.

    Attributes:
        pairs: triple (i, j, dependence), label node mulai dari 1
    """

    def __init__(self, message: str, pairs: Sequence[Tuple[int, int, float]] = ()):
        self.pairs = [(int(i), int(j), float(v)) for i, j, v in pairs]
        if self.pairs:
            detail = ", ".join(f"({i},{j}): {v:.3f}" for i, j, v in self.pairs)
            message = f"{message} [{detail}]"
        super().__init__(message)
