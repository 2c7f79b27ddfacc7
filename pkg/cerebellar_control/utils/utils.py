from typing import Optional, Sequence, Tuple

import numpy as np


def unit_vector(v: Sequence[float]) -> Optional[np.ndarray]:
    """
    Нормированный вектор.

    Returns:
        np.ndarray или None для нулевого вектора
    """
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0 or not np.isfinite(norm):
        return None
    return v / norm


def angular_error(v_pred: Sequence[float], v: Sequence[float]) -> Tuple[float, bool]:
    """
    Угол между предсказанной и измеренной скоростью, рад.

    Returns:
        Tuple: угол и признак вырожденности (нулевой вектор даёт 0)
    """
    a, b = unit_vector(v_pred), unit_vector(v)
    if a is None or b is None:
        return 0.0, True
    return float(abs(np.arccos(np.clip(np.dot(a, b), -1.0, 1.0)))), False


def point_segment_distance(p: Sequence[float], a: Sequence[float], b: Sequence[float]) -> float:
    """Расстояние от точки p до отрезка ab."""
    p, a, b = (np.asarray(x, dtype=float) for x in (p, a, b))
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0:
        return float(np.linalg.norm(p - a))
    s = np.clip(float((p - a) @ ab) / denom, 0.0, 1.0)
    return float(np.linalg.norm(p - (a + s * ab)))


def xnor(a: bool, b: bool) -> float:
    """Логическое XNOR в виде 0/1."""
    return 1.0 if bool(a) == bool(b) else 0.0
