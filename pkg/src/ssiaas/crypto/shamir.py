"""Byte-wise Shamir secret sharing over GF(2^m).

Each secret byte is the constant term of its own random polynomial of degree
``t - 1``; share ``i`` holds the evaluations at ``x = i``. The field is a
parameter so small instances (GF(8), GF(16)) can be enumerated exhaustively;
production splits always use GF(256) with the AES polynomial.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from ssiaas.errors import InconsistentShares, InsufficientShares, InvalidThreshold


class BinaryField:
    """GF(2^bits) with log/antilog tables built from ``modulus``."""

    def __init__(self, bits: int, modulus: int, generator: int | None = None) -> None:
        self.bits = bits
        self.size = 1 << bits
        self.modulus = modulus
        self._exp = [0] * (2 * self.size)
        self._log = [0] * self.size
        for g in ([generator] if generator else range(2, self.size)):
            if self._build_tables(g):
                break
        else:
            raise ValueError(f"no generator found for modulus {modulus:#x}")

    def _slow_mul(self, a: int, b: int) -> int:
        result = 0
        while b:
            if b & 1:
                result ^= a
            b >>= 1
            a <<= 1
            if a & self.size:
                a ^= self.modulus
        return result

    def _build_tables(self, g: int) -> bool:
        x = 1
        seen = set()
        for i in range(self.size - 1):
            if x in seen:
                return False
            seen.add(x)
            self._exp[i] = x
            self._log[x] = i
            x = self._slow_mul(x, g)
        if x != 1:
            return False
        for i in range(self.size - 1, 2 * self.size):
            self._exp[i] = self._exp[i - (self.size - 1)]
        return True

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return self._exp[self._log[a] + self._log[b]]

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("zero has no inverse")
        return self._exp[(self.size - 1) - self._log[a]]

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def eval_poly(self, coefficients: Sequence[int], x: int) -> int:
        """Horner evaluation; ``coefficients[0]`` is the constant term."""
        acc = 0
        for c in reversed(coefficients):
            acc = self.mul(acc, x) ^ c
        return acc

    def interpolate_at(self, points: Sequence[tuple[int, int]], x: int = 0) -> int:
        """Lagrange interpolation through ``points`` evaluated at ``x``."""
        total = 0
        for j, (xj, yj) in enumerate(points):
            num, den = 1, 1
            for m, (xm, _) in enumerate(points):
                if m != j:
                    num = self.mul(num, x ^ xm)
                    den = self.mul(den, xj ^ xm)
            total ^= self.mul(yj, self.div(num, den))
        return total


GF256 = BinaryField(8, 0x11B, generator=3)


@dataclass(frozen=True)
class Share:
    index: int
    value: bytes
    threshold: int
    total: int
    split_id: str = ""

    def to_json(self) -> dict:
        return {"index": self.index, "value": self.value.hex(), "threshold": self.threshold,
                "total": self.total, "split_id": self.split_id}

    @classmethod
    def from_json(cls, obj: dict) -> "Share":
        return cls(int(obj["index"]), bytes.fromhex(obj["value"]), int(obj["threshold"]),
                   int(obj["total"]), obj.get("split_id", ""))


def split_secret(
    secret: bytes,
    t: int,
    n: int,
    *,
    field: BinaryField = GF256,
    randbelow: Callable[[int], int] = secrets.randbelow,
) -> list[Share]:
    if not secret:
        raise InvalidThreshold("secret must be non-empty")
    if not (1 <= t <= n <= field.size - 1):
        raise InvalidThreshold(f"need 1 <= t <= n <= {field.size - 1}, got t={t}, n={n}")
    if any(b >= field.size for b in secret):
        raise InvalidThreshold("secret symbol exceeds field size")
    split_id = secrets.token_hex(8)
    values = [bytearray() for _ in range(n)]
    for byte in secret:
        coefficients = [byte] + [randbelow(field.size) for _ in range(t - 1)]
        for i in range(n):
            values[i].append(field.eval_poly(coefficients, i + 1))
    return [Share(i + 1, bytes(values[i]), t, n, split_id) for i in range(n)]


def reconstruct_secret(shares: Iterable[Share], *, field: BinaryField = GF256) -> bytes:
    shares = list(shares)
    if not shares:
        raise InsufficientShares("no shares supplied")
    meta = {(s.threshold, s.total, s.split_id, len(s.value)) for s in shares}
    if len(meta) != 1:
        raise InconsistentShares("shares come from different splits")
    t, n, _, _ = meta.pop()
    by_index = {}
    for s in shares:
        if not 1 <= s.index <= n:
            raise InconsistentShares(f"share index {s.index} outside 1..{n}")
        if by_index.get(s.index, s.value) != s.value:
            raise InconsistentShares(f"conflicting values for share {s.index}")
        by_index[s.index] = s.value
    if len(by_index) < t:
        raise InsufficientShares(f"need {t} distinct shares, got {len(by_index)}")
    chosen = sorted(by_index.items())[:t]
    length = len(chosen[0][1])
    return bytes(
        field.interpolate_at([(x, value[pos]) for x, value in chosen]) for pos in range(length)
    )
