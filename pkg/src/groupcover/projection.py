"""Social graph, uniform group assignment, and the group projection.

The projection collapses a friendship graph to a relation between groups:
an unordered group pair carries one stream per social edge spanning it,
self-pairs included.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

CSV_HEADER = ("group_i", "group_j", "multiplicity")


class SocialGraph:
    """Users 0..n-1 with an explicit multigraph edge list.

    Edges are unordered pairs; self-loops and parallel edges are allowed,
    which is what uniform stub pairing produces.
    """

    def __init__(self, n: int, edges: np.ndarray, degrees: np.ndarray | None = None):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if n < 1:
            raise ConfigurationError(f"n must be >= 1, got {n}")
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise ConfigurationError("edge endpoint outside [0, n)")
        if degrees is None:
            degrees = np.bincount(edges.ravel(), minlength=n).astype(np.int64)
        else:
            degrees = np.asarray(degrees, dtype=np.int64)
            if degrees.shape != (n,):
                raise ConfigurationError("degrees must have length n")
            if int(degrees.sum()) != 2 * len(edges):
                raise ConfigurationError("sum of degrees must equal twice the edge count")
        self.n = n
        self.edges = edges
        self.degrees = degrees

    @classmethod
    def from_edges(cls, n: int, edges) -> "SocialGraph":
        return cls(n, np.asarray(edges, dtype=np.int64))

    @classmethod
    def from_degrees(cls, degrees, seed) -> "SocialGraph":
        """Realize a multigraph by pairing degree stubs uniformly at random."""
        degrees = np.asarray(degrees, dtype=np.int64)
        if np.any(degrees < 0):
            raise ConfigurationError("degrees must be nonnegative")
        total = int(degrees.sum())
        if total % 2 == 1:
            raise ConfigurationError("degree sum must be even to pair stubs")
        rng = np.random.default_rng(seed)
        stubs = np.repeat(np.arange(degrees.size, dtype=np.int64), degrees)
        rng.shuffle(stubs)
        return cls(degrees.size, stubs.reshape(-1, 2), degrees=degrees)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def without_user_edges(self, user: int) -> np.ndarray:
        """Edge list with every edge incident to user removed."""
        keep = (self.edges[:, 0] != user) & (self.edges[:, 1] != user)
        return self.edges[keep]


@dataclass
class Message:
    sender: int
    recipient: int
    t_send: int
    size: float = 1.0
    header_ratio: float = 0.0
    t_receive: int | None = None

    def __post_init__(self):
        if self.t_send < 0:
            raise ConfigurationError("t_send must be nonnegative")
        if self.t_receive is not None and self.t_receive < self.t_send:
            raise ConfigurationError("t_receive precedes t_send")
        if self.size <= 0:
            raise ConfigurationError("size must be positive")
        if not 0 <= self.header_ratio < 1:
            raise ConfigurationError("header_ratio must lie in [0, 1)")


class GroupAssignment:
    """Map from user index to group index, all groups in [0, m)."""

    def __init__(self, m: int, group_of: np.ndarray):
        group_of = np.asarray(group_of, dtype=np.int64)
        if m < 1:
            raise ConfigurationError(f"m must be >= 1, got {m}")
        if group_of.size and (group_of.min() < 0 or group_of.max() >= m):
            raise ConfigurationError("group index outside [0, m)")
        self.m = m
        self.group_of = group_of
        self._member_index = None

    @property
    def n(self) -> int:
        return self.group_of.size

    def group_sizes(self) -> np.ndarray:
        return np.bincount(self.group_of, minlength=self.m)

    def members(self, group: int) -> np.ndarray:
        """Users in a group, ascending. Index built once, on first use."""
        if not 0 <= group < self.m:
            raise ConfigurationError(f"group {group} outside [0, {self.m})")
        if self._member_index is None:
            order = np.argsort(self.group_of, kind="stable")
            bounds = np.searchsorted(self.group_of[order], np.arange(self.m + 1))
            self._member_index = (order, bounds)
        order, bounds = self._member_index
        return order[bounds[group] : bounds[group + 1]]


def assign_groups(n: int, m: int, seed) -> GroupAssignment:
    """Place each of n users in one of m groups independently and uniformly."""
    if m < 1:
        raise ConfigurationError(f"m must be >= 1, got {m}")
    if m > n:
        # empty groups would be guaranteed, breaking the k-anonymity floor
        raise ConfigurationError(f"m={m} exceeds n={n}")
    rng = np.random.default_rng(seed)
    return GroupAssignment(m, rng.integers(0, m, size=n, dtype=np.int64))


class ProjectionNetwork:
    """Group-pair relation with stream multiplicities.

    Keys are unordered pairs (i, j) with i <= j; a pair is in the relation
    iff its multiplicity is >= 1.
    """

    def __init__(self, m: int, stream_counts: dict[tuple[int, int], int]):
        if m < 1:
            raise ConfigurationError(f"m must be >= 1, got {m}")
        for (i, j), c in stream_counts.items():
            if not (0 <= i <= j < m):
                raise ConfigurationError(f"pair {(i, j)} not canonical for m={m}")
            if c < 1:
                raise ConfigurationError(f"pair {(i, j)} has multiplicity {c}")
        self.m = m
        self.stream_counts = dict(stream_counts)

    def streams_between(self, a: int, b: int) -> int:
        if not (0 <= a < self.m and 0 <= b < self.m):
            raise ConfigurationError(f"group pair ({a}, {b}) outside [0, {self.m})")
        return self.stream_counts.get((min(a, b), max(a, b)), 0)

    def total_multiplicity(self) -> int:
        return sum(self.stream_counts.values())

    def connected_pairs(self) -> set[tuple[int, int]]:
        return set(self.stream_counts)

    def __eq__(self, other):
        return (
            isinstance(other, ProjectionNetwork)
            and self.m == other.m
            and self.stream_counts == other.stream_counts
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for (i, j), c in sorted(self.stream_counts.items()):
                writer.writerow([i, j, c])

    @classmethod
    def from_csv(cls, path, m: int) -> "ProjectionNetwork":
        counts: dict[tuple[int, int], int] = {}
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is not None and tuple(header) != CSV_HEADER:
                raise ConfigurationError(f"{path}: unexpected header {header!r}")
            for row in reader:
                i, j, c = int(row[0]), int(row[1]), int(row[2])
                counts[(i, j)] = c
        return cls(m, counts)

    def to_json(self, path) -> None:
        payload = {
            "m": self.m,
            "streams": [[i, j, c] for (i, j), c in sorted(self.stream_counts.items())],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh)

    @classmethod
    def from_json(cls, path) -> "ProjectionNetwork":
        with open(path) as fh:
            payload = json.load(fh)
        return cls(payload["m"], {(i, j): c for i, j, c in payload["streams"]})


def project_graph(
    graph: SocialGraph, assignment: GroupAssignment, shards: int = 1
) -> ProjectionNetwork:
    """Project every edge to its endpoint groups and tally stream sizes.

    shards > 1 splits the edge list into chunks tallied independently and
    merged; the result is identical for any shard count.
    """
    if assignment.n != graph.n:
        raise ConfigurationError(
            f"assignment covers {assignment.n} users, graph has {graph.n}"
        )
    m = assignment.m
    merged: dict[tuple[int, int], int] = {}
    for chunk in np.array_split(graph.edges, max(1, shards)):
        if not len(chunk):
            continue
        ends = assignment.group_of[chunk]
        lo = ends.min(axis=1)
        hi = ends.max(axis=1)
        keys, counts = np.unique(lo * m + hi, return_counts=True)
        for key, c in zip(keys.tolist(), counts.tolist()):
            pair = divmod(key, m)
            merged[pair] = merged.get(pair, 0) + c
    return ProjectionNetwork(m, merged)


@dataclass
class ProjectedMessage:
    """A message as the service (and the adversary) sees it."""

    source_group: int
    dest_group: int
    t_send: int
    size: float = 1.0
    # sparse: position of the downloading group member -> pickup tick
    pickup_times: dict[int, int] = field(default_factory=dict)


def project_message(msg: Message, assignment: GroupAssignment) -> ProjectedMessage:
    if not (0 <= msg.sender < assignment.n and 0 <= msg.recipient < assignment.n):
        raise ConfigurationError("message endpoints are not assigned users")
    return ProjectedMessage(
        source_group=int(assignment.group_of[msg.sender]),
        dest_group=int(assignment.group_of[msg.recipient]),
        t_send=msg.t_send,
        size=msg.size,
    )


def streams_between(pn: ProjectionNetwork, a: int, b: int) -> int:
    return pn.streams_between(a, b)
