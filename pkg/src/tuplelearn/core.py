"""Core domain types: item catalogs, tuple queries, ranking responses.

All types are immutable values and safe to share between threads;
``ResponseLog`` is the one mutable container and is append-only.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Literal

ItemId = int

ResponseSource = Literal["simulated", "human"]

SOURCE_SIMULATED: ResponseSource = "simulated"
SOURCE_HUMAN: ResponseSource = "human"


@dataclass(frozen=True)
class ItemCatalog:
    """Ordered catalog of display payloads; item ids are positions 0..N-1.

    Payloads are opaque strings (text or URLs); nothing here fetches or
    stores the referenced media.
    """

    payloads: tuple[str, ...]

    @property
    def n_items(self) -> int:
        return len(self.payloads)

    def payload(self, item: ItemId) -> str:
        return self.payloads[item]

    def items(self) -> Iterator[tuple[ItemId, str]]:
        return enumerate(self.payloads)

    @staticmethod
    def synthetic(n_items: int) -> "ItemCatalog":
        """Placeholder catalog for simulated experiments."""
        return ItemCatalog(tuple(f"item-{i:04d}" for i in range(n_items)))


def load_catalog(path: str | Path) -> ItemCatalog:
    """Read a catalog from a tab-separated file with one ``id<TAB>payload`` line per item.

    Lines may appear in any order but ids must be exactly 0..N-1 with no
    duplicates.
    """
    entries: dict[int, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            item_str, _, payload = line.partition("\t")
            try:
                item = int(item_str)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer item id {item_str!r}")
            if item in entries:
                raise ValueError(f"{path}:{lineno}: duplicate item id {item}")
            entries[item] = payload
    n = len(entries)
    if set(entries) != set(range(n)):
        raise ValueError(f"{path}: item ids must be exactly 0..{n - 1}")
    return ItemCatalog(tuple(entries[i] for i in range(n)))


def save_catalog(catalog: ItemCatalog, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item, payload in catalog.items():
            fh.write(f"{item}\t{payload}\n")


@dataclass(frozen=True)
class TupleQuery:
    """A similarity query: rank the body items against the head item.

    ``body`` holds k-1 distinct items, none of them the head; tuple size k
    is the head plus the body.
    """

    head: ItemId
    body: tuple[ItemId, ...]

    def __post_init__(self):
        body = tuple(int(b) for b in self.body)
        object.__setattr__(self, "body", body)
        object.__setattr__(self, "head", int(self.head))
        if len(body) < 2:
            raise ValueError(f"body must have at least 2 items, got {len(body)}")
        if len(set(body)) != len(body):
            raise ValueError(f"body items must be distinct: {body}")
        if self.head in body:
            raise ValueError(f"head {self.head} must not appear in body {body}")

    @property
    def tuple_size(self) -> int:
        return len(self.body) + 1


@dataclass(frozen=True)
class RankingResponse:
    """A ranking of a query's body, most-similar-to-head first."""

    query: TupleQuery
    ranking: tuple[ItemId, ...]
    timestamp: float = 0.0
    source: ResponseSource = SOURCE_SIMULATED

    def __post_init__(self):
        ranking = tuple(int(r) for r in self.ranking)
        object.__setattr__(self, "ranking", ranking)
        if sorted(ranking) != sorted(self.query.body):
            raise ValueError(
                f"ranking {ranking} is not a permutation of body {self.query.body}"
            )

    @property
    def tuple_size(self) -> int:
        return self.query.tuple_size


class ResponseLog:
    """Append-only ordered history of ranking responses."""

    def __init__(self, responses: list[RankingResponse] | None = None):
        self._responses: list[RankingResponse] = list(responses or [])

    def append(self, response: RankingResponse) -> None:
        self._responses.append(response)

    def extend(self, responses) -> None:
        for r in responses:
            self.append(r)

    @property
    def responses(self) -> tuple[RankingResponse, ...]:
        return tuple(self._responses)

    def __len__(self) -> int:
        return len(self._responses)

    def __iter__(self) -> Iterator[RankingResponse]:
        return iter(self._responses)

    def __getitem__(self, idx: int) -> RankingResponse:
        return self._responses[idx]


@dataclass(frozen=True)
class Triplet:
    """One pairwise comparison: ``closer`` ranked nearer to ``head`` than ``farther``."""

    head: ItemId
    closer: ItemId
    farther: ItemId

    def __post_init__(self):
        ids = (self.head, self.closer, self.farther)
        if len(set(ids)) != 3:
            raise ValueError(f"triplet items must be distinct: {ids}")


def constituent_triplets(response: RankingResponse) -> list[Triplet]:
    """Decompose a tuple ranking into its k-2 adjacent-pair triplets.

    For ranking [r1, r2, ..., r_{k-1}] the result is
    [(head, r1, r2), (head, r2, r3), ...] in ranking order; a plain triplet
    query decomposes to itself.
    """
    head = response.query.head
    r = response.ranking
    return [Triplet(head, r[i], r[i + 1]) for i in range(len(r) - 1)]


def load_triplets(path: str | Path) -> list[Triplet]:
    """Read triplets from a file with one ``head,closer,farther`` line each."""
    out: list[Triplet] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
            try:
                head, closer, farther = (int(p) for p in parts)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer field in {line!r}")
            out.append(Triplet(head, closer, farther))
    return out


def save_triplets(triplets, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in triplets:
            fh.write(f"{t.head},{t.closer},{t.farther}\n")
