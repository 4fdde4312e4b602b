from itertools import product
from math import prod
from typing import Iterator, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from config.settings import settings
from models.errors import CapExceededError


class HistoryMap(BaseModel):
    """
    Карта истории столкновений μ: {k+2, k+4, ..., k+2n} → {1, ...},
    значения хранятся в порядке области определения.
    """
    model_config = ConfigDict(frozen=True)

    k: int = Field(..., ge=1)
    n: int = Field(..., ge=2)
    values: tuple[int, ...]

    @model_validator(mode="after")
    def _check_values(self) -> "HistoryMap":
        if len(self.values) != self.n:
            raise ValueError(f"Ожидалось {self.n} значений μ, получено {len(self.values)}")
        for position, value in zip(self.domain, self.values):
            if not 1 <= value < position - 1:
                raise ValueError(f"Недопустимое значение μ({position}) = {value}: нужно 1 ≤ μ(j) < j − 1")
        return self

    @property
    def domain(self) -> tuple[int, ...]:
        return tuple(self.k + 2 * l for l in range(1, self.n + 1))

    def __call__(self, position: int) -> int:
        return self.values[self._index(position)]

    def _index(self, position: int) -> int:
        offset = position - self.k - 2
        if offset < 0 or offset % 2 or offset // 2 >= self.n:
            raise ValueError(f"Позиция {position} вне области определения {self.domain}")
        return offset // 2

    def is_echelon(self) -> bool:
        return all(a <= b for a, b in zip(self.values, self.values[1:]))

    def termination_key(self) -> tuple[int, ...]:
        """Кортеж значений в порядке области; каждый ход строго уменьшает его лексикографически"""
        return self.values


class BoardState(BaseModel):
    """Состояние игры (μ, σ); σ хранится как образы σ(k+2), σ(k+4), ..."""
    model_config = ConfigDict(frozen=True)

    mu: HistoryMap
    sigma: tuple[int, ...]

    @model_validator(mode="after")
    def _check_sigma(self) -> "BoardState":
        if sorted(self.sigma) != list(self.mu.domain):
            raise ValueError(f"σ = {self.sigma} не является перестановкой {self.mu.domain}")
        return self

    @classmethod
    def start(cls, mu: HistoryMap) -> "BoardState":
        return cls(mu=mu, sigma=mu.domain)


def history_count(k: int, n: int) -> int:
    """|M_{n,k}| = ∏_{ℓ=1}^{n} (k + 2ℓ − 2)"""
    return prod(k + 2 * l - 2 for l in range(1, n + 1))


def echelon_bound(k: int, n: int) -> int:
    return 2 ** (k + 3 * n - 2)


def iter_histories(k: int, n: int, cap: Optional[int] = None) -> Iterator[HistoryMap]:
    """
    Перебор M_{n,k} в лексикографическом порядке.

    Raises:
        CapExceededError: если |M_{n,k}| больше предела
    """
    cap = settings.MAX_HISTORIES if cap is None else cap
    total = history_count(k, n)
    if total > cap:
        raise CapExceededError(
            f"Перебор M_{{{n},{k}}} из {total} карт превышает предел {cap}", {"k": k, "n": n, "count": total}
        )
    ranges = [range(1, k + 2 * l - 1) for l in range(1, n + 1)]
    for values in product(*ranges):
        yield HistoryMap(k=k, n=n, values=values)


def enumerate_histories(k: int, n: int, cap: Optional[int] = None) -> list[HistoryMap]:
    return list(iter_histories(k, n, cap))


def applicable_moves(state: BoardState) -> list[int]:
    """Позиции j ∈ {k+2, ..., k+2n−2} с μ(j+2) < μ(j)"""
    mu = state.mu
    return [j for j, a, b in zip(mu.domain, mu.values, mu.values[1:]) if b < a]


def _swap_values(value: int, j: int) -> int:
    """(j−1, j+1) ∘ (j, j+2) как отображение значений"""
    return {j - 1: j + 1, j + 1: j - 1, j: j + 2, j + 2: j}.get(value, value)


def apply_move(state: BoardState, j: int) -> BoardState:
    """
    Допустимый ход в позиции j: μ′ = (j−1,j+1)∘(j,j+2)∘μ∘(j,j+2), σ′ = (j,j+2)∘σ.

    Raises:
        ValueError: если ход в позиции j недопустим
    """
    if j not in applicable_moves(state):
        raise ValueError(f"Ход в позиции {j} недопустим для μ = {state.mu.values}")
    mu = state.mu
    index = mu._index(j)
    values = [_swap_values(value, j) for value in mu.values]
    values[index], values[index + 1] = mu.values[index + 1], mu.values[index]
    sigma = tuple({j: j + 2, j + 2: j}.get(s, s) for s in state.sigma)
    return BoardState(mu=HistoryMap(k=mu.k, n=mu.n, values=tuple(values)), sigma=sigma)
