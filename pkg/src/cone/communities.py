"""Community membership sets and the one-community-per-line file format."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

SPLITS = ("train", "test", "detected", "truth", "all")


class CommunityFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Community:
    """A non-empty set of node indices with an identifier token."""

    id: str
    members: frozenset

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(int(m) for m in self.members))
        if not self.members:
            raise ValueError(f"community {self.id!r} is empty")

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(sorted(self.members))


@dataclass
class CommunitySet:
    communities: list = field(default_factory=list)
    split: str = "all"

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"unknown split tag {self.split!r}")
        self.communities = list(self.communities)

    def __len__(self):
        return len(self.communities)

    def __iter__(self) -> Iterator[Community]:
        return iter(self.communities)

    def __getitem__(self, i):
        return self.communities[i]

    def member_sets(self) -> list:
        return [c.members for c in self.communities]

    def nodes(self) -> frozenset:
        """Union of all members."""
        out = set()
        for c in self.communities:
            out |= c.members
        return frozenset(out)

    def check_nodes(self, n: int) -> None:
        for c in self.communities:
            bad = [m for m in c.members if not 0 <= m < n]
            if bad:
                raise ValueError(f"community {c.id!r} has members outside [0, {n}): {sorted(bad)[:5]}")

    @classmethod
    def from_sets(cls, sets: Iterable[Iterable[int]], split="all", prefix="c"):
        return cls([Community(f"{prefix}{i}", frozenset(s)) for i, s in enumerate(sets)], split)


def parse_community_lines(lines: Iterable[str]):
    """Yield ``(lineno, community_id, [member_id, ...])`` records."""
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        yield lineno, parts[0], parts[1:]


def read_communities(path, index: Mapping, split="all") -> CommunitySet:
    """Read a community file, mapping external node IDs through ``index``.

    Unknown node IDs raise :class:`CommunityFormatError` naming them.
    Lines with no members are skipped.
    """
    with open(path, encoding="utf-8") as fh:
        records = list(parse_community_lines(fh))
    comms, unknown = [], []
    for lineno, cid, members in records:
        missing = [m for m in members if m not in index]
        if missing:
            unknown.extend(f"{m} (line {lineno})" for m in missing)
            continue
        if members:
            comms.append(Community(cid, frozenset(index[m] for m in members)))
    if unknown:
        raise CommunityFormatError(f"{path}: unknown node IDs: {', '.join(unknown[:20])}")
    return CommunitySet(comms, split)


def write_communities(cs: CommunitySet, path, ids) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in cs:
            fh.write(" ".join([str(c.id)] + [str(ids[m]) for m in sorted(c.members)]) + "\n")
