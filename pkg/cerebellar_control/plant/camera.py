"""Синтетическая камера сверху: растеризация силуэта и центроид по моментам изображения."""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from PIL import Image, ImageDraw

from cerebellar_control.utils.exceptions import ConfigurationError, PlantFault

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VirtualCamera:
    """
    Камера с фиксированной глубиной.

    origin: мировая точка на оптической оси; пиксель = P + (x - origin)·F/depth.
    """

    focal_px: float = 600.0
    width: int = 640
    height: int = 480
    depth: float = 1.2
    principal: Optional[Tuple[float, float]] = None
    origin: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.focal_px > 0:
            raise ConfigurationError(f"Фокусное расстояние должно быть положительным: {self.focal_px}")
        if not self.depth > 0:
            raise ConfigurationError(f"Глубина сцены должна быть положительной: {self.depth}")
        if self.width < 1 or self.height < 1:
            raise ConfigurationError(f"Некорректный размер изображения: {self.width}×{self.height}")

    @classmethod
    def from_config(cls, block, origin: Sequence[float]) -> 'VirtualCamera':
        """Создание из блока CameraModel; origin из блока имеет приоритет."""
        return cls(focal_px=block.focal_px, width=block.width, height=block.height, depth=block.depth,
                   principal=tuple(block.principal) if block.principal else None,
                   origin=tuple(block.origin) if block.origin else tuple(float(v) for v in origin))

    @property
    def principal_point(self) -> np.ndarray:
        """Главная точка, по умолчанию центр изображения."""
        if self.principal is not None:
            return np.asarray(self.principal, dtype=float)
        return np.array([(self.width - 1) / 2.0, (self.height - 1) / 2.0])

    def world_to_pixel(self, x: np.ndarray) -> np.ndarray:
        """Проекция мировых координат (м) в пиксели."""
        offset = np.asarray(x, dtype=float) - np.asarray(self.origin)
        return self.principal_point + offset * self.focal_px / self.depth

    def pixel_to_world(self, c: np.ndarray) -> np.ndarray:
        """Обратная проекция пикселя на плоскость стола."""
        offset = np.asarray(c, dtype=float) - self.principal_point
        return np.asarray(self.origin) + offset * self.depth / self.focal_px


def render_silhouette(polygons: np.ndarray, camera: VirtualCamera) -> np.ndarray:
    """
    Бинарный силуэт объекта.

    Args:
        polygons: многоугольники в мировых координатах, массив (n, k, 2)

    Returns:
        np.ndarray: маска (height, width); строка соответствует x2, столбец x1
    """
    pixels = camera.world_to_pixel(np.asarray(polygons, dtype=float))
    if (pixels[..., 0].min() < 0 or pixels[..., 1].min() < 0
            or pixels[..., 0].max() > camera.width - 1 or pixels[..., 1].max() > camera.height - 1):
        raise PlantFault("Объект выходит за границы изображения камеры")
    image = Image.new('L', (camera.width, camera.height), 0)
    draw = ImageDraw.Draw(image)
    for polygon in pixels:
        draw.polygon([tuple(p) for p in polygon], fill=255)
    return np.asarray(image) > 0


def image_moment(mask: np.ndarray, i: int, j: int) -> float:
    """Момент изображения M_ij = ΣΣ x1^i x2^j φ(x1, x2)."""
    rows, cols = np.nonzero(mask)
    return float(np.sum(cols.astype(float) ** i * rows.astype(float) ** j))


def centroid_pixels(mask: np.ndarray) -> np.ndarray:
    """Центроид силуэта в пикселях (столбец, строка)."""
    m00 = image_moment(mask, 0, 0)
    if m00 == 0:
        raise PlantFault("Пустой силуэт: центроид не определён")
    return np.array([image_moment(mask, 1, 0) / m00, image_moment(mask, 0, 1) / m00])


def render_and_centroid(obj, camera: VirtualCamera) -> np.ndarray:
    """Центроид деформируемого объекта в мировых координатах по изображению."""
    mask = render_silhouette(obj.quads(), camera)
    return camera.pixel_to_world(centroid_pixels(mask))
