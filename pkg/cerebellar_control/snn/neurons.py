"""Нейрон Ижикевича: скалярный шаг и векторизованная популяция."""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from cerebellar_control.utils.exceptions import ConfigurationError, NumericalInstabilityError

logger = logging.getLogger(__name__)

SPIKE_PEAK = 30.0
REST_POTENTIAL = -65.0


@dataclass(frozen=True)
class NeuronParams:
    """Параметры нейрона Ижикевича."""

    a: float
    b: float
    c: float
    d: float
    peak: float = SPIKE_PEAK

    def __post_init__(self):
        if not self.a > 0:
            raise ConfigurationError(f"Параметр a должен быть положительным, получено: {self.a}")
        if self.peak != SPIKE_PEAK:
            raise ConfigurationError(f"Порог спайка фиксирован на {SPIKE_PEAK} мВ")
        if not self.c < self.peak:
            raise ConfigurationError(f"Потенциал сброса c={self.c} должен быть ниже порога")


@dataclass
class NeuronState:
    """Состояние одного нейрона."""

    V: float
    U: float

    @classmethod
    def rest(cls, params: NeuronParams) -> 'NeuronState':
        """Состояние покоя: V = -65 мВ, U = b·V."""
        return cls(V=REST_POTENTIAL, U=params.b * REST_POTENTIAL)


def membrane_derivative(V, U, I):
    """Правая часть уравнения мембранного потенциала."""
    return 0.04 * V * V + 5.0 * V + 140.0 - U + I


def izhikevich_update(
    V: np.ndarray,
    U: np.ndarray,
    I: np.ndarray,
    params: NeuronParams,
    dt: float = 1.0,
    substeps: int = 2,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Один шаг явного Эйлера для массива нейронов.

    Порог проверяется до интегрирования и после каждого полушага;
    пересёкший порог нейрон сбрасывается в том же шаге.

    Returns:
        Tuple: новые V, U и маска спайков
    """
    if dt <= 0:
        raise ConfigurationError(f"Шаг интегрирования должен быть положительным, получено: {dt}")
    V = np.asarray(V, dtype=float)
    U = np.asarray(U, dtype=float)
    I = np.broadcast_to(np.asarray(I, dtype=float), V.shape)

    entry = V >= params.peak
    crossed = np.zeros(V.shape, dtype=bool)
    V_int = V.copy()
    h = dt / substeps
    with np.errstate(over='ignore', invalid='ignore'):
        for _ in range(substeps):
            live = ~(entry | crossed)
            V_int = np.where(live, V_int + h * membrane_derivative(V_int, U, I), V_int)
            crossed |= live & (V_int >= params.peak)
        V_u = np.minimum(V_int, params.peak)
        U_new = np.where(entry, U, U + dt * params.a * (params.b * V_u - U))

    fired = entry | crossed
    V_out = np.where(fired, params.c, V_int)
    U_out = np.where(fired, U_new + params.d, U_new)
    if not (np.all(np.isfinite(V_out)) and np.all(np.isfinite(U_out))):
        raise NumericalInstabilityError(
            f"Нечисловое состояние нейрона (a={params.a}, b={params.b}, c={params.c}, d={params.d})")
    return V_out, U_out, fired


def step_neuron(
    state: NeuronState,
    params: NeuronParams,
    I: float,
    dt: float = 1.0,
) -> Tuple[NeuronState, bool]:
    """Шаг одного нейрона; возвращает новое состояние и признак спайка."""
    V, U, fired = izhikevich_update(np.array([state.V]), np.array([state.U]), np.array([I]), params, dt)
    return NeuronState(V=float(V[0]), U=float(U[0])), bool(fired[0])


class NeuronPopulation:
    """Именованная группа нейронов с общими параметрами."""

    def __init__(self, name: str, params: NeuronParams, size: int):
        if size < 1:
            raise ConfigurationError(f"Размер популяции {name} должен быть положительным")
        self.name = name
        self.params = params
        self.size = size
        self.V = np.empty(size)
        self.U = np.empty(size)
        self.reset()

    def reset(self):
        """Возврат всех нейронов в состояние покоя."""
        self.V.fill(REST_POTENTIAL)
        self.U.fill(self.params.b * REST_POTENTIAL)

    def step(self, I: np.ndarray, dt: float = 1.0) -> np.ndarray:
        """Интегрирование популяции на один шаг, возвращает маску спайков."""
        self.V, self.U, fired = izhikevich_update(self.V, self.U, I, self.params, dt)
        return fired

    def __repr__(self) -> str:
        return f"NeuronPopulation({self.name!r}, size={self.size})"
