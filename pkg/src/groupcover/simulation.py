"""Monte Carlo validation and message-workload simulation.

Two layers: direct estimators for the connection law (sampled group pairs
on a realized graph) and a tick-driven workload engine measuring per-user
retrieval costs under the polling and bulk-download strategies, with an
adversary-view observation log.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .degrees import DegreeDistribution, GraphProfile, fit_matched_lognormal, sample_degree_sequence
from .errors import ConfigurationError
from .projection import GroupAssignment, Message, SocialGraph, assign_groups

POLL = "poll"
BULK = "bulk_download"
STRATEGIES = (POLL, BULK)

# explicit realization budget, in degree stubs
MAX_EXPLICIT_STUBS = 50_000_000

LOG_HEADER = ("source_group", "dest_group", "t_send", "pickup_ticks", "size")


def _distribution_for(profile) -> DegreeDistribution:
    if isinstance(profile, DegreeDistribution):
        return profile
    if profile.sigma == 0.0:
        k = int(round(profile.d))
        return DegreeDistribution(
            degrees=np.array([k]), masses=np.array([1.0]), provenance="empirical-histogram"
        )
    max_degree = int(math.ceil(profile.d + 12.0 * profile.sigma)) + 1
    return fit_matched_lognormal(profile, max_degree)


def _check_budget(profile):
    stubs = profile.n * max(profile.d, 1.0)
    if stubs > MAX_EXPLICIT_STUBS:
        raise ConfigurationError(
            f"n={profile.n} with d={profile.d} needs {stubs:.2g} stubs, beyond the "
            f"explicit budget of {MAX_EXPLICIT_STUBS:.0e}; pass stub_sampled=True "
            "to sample group-pair multiplicities directly"
        )


def _sorted_lookup(keys: np.ndarray, counts: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """counts[k] for each query key, 0 where the key is absent."""
    out = np.zeros(queries.shape, dtype=np.int64)
    if len(keys):
        idx = np.minimum(np.searchsorted(keys, queries), len(keys) - 1)
        hit = keys[idx] == queries
        out[hit] = counts[idx[hit]]
    return out


def _sample_distinct_pairs(m: int, k: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """k unordered pairs of distinct groups, uniform, as (lo, hi) arrays."""
    i = rng.integers(0, m, size=k)
    j = rng.integers(0, m - 1, size=k)
    j = j + (j >= i)
    return np.minimum(i, j), np.maximum(i, j)


def _pair_keys(group_ends: np.ndarray, m: int) -> np.ndarray:
    lo = group_ends.min(axis=1)
    hi = group_ends.max(axis=1)
    return lo * m + hi


def _explicit_multiplicities(profile, m, pairs_sampled, seed):
    if not isinstance(profile, GraphProfile):
        raise ConfigurationError("explicit sampling needs a GraphProfile")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s_deg, s_graph, s_assign, s_pairs = ss.spawn(4)
    dist = _distribution_for(profile)
    n = profile.n
    degrees = sample_degree_sequence(dist, n, s_deg)
    graph = SocialGraph.from_degrees(degrees, s_graph)
    assignment = assign_groups(n, m, s_assign)
    keys = _pair_keys(assignment.group_of[graph.edges], m)
    uniq, counts = np.unique(keys, return_counts=True)
    rng = np.random.default_rng(s_pairs)
    lo, hi = _sample_distinct_pairs(m, pairs_sampled, rng)
    return _sorted_lookup(uniq, counts, lo * m + hi), graph.edge_count


def _stub_sampled_multiplicities(profile, m, pairs_sampled, seed):
    """Per-pair stream sizes without building the graph.

    Draws both groups' degree sums and thins one by the stub-collision
    probability; matches the explicit law up to without-replacement
    corrections that vanish at scale.
    """
    rng = np.random.default_rng(seed)
    n, d, sigma = profile.n, profile.d, profile.sigma
    total_stubs = n * d
    sizes_i = rng.binomial(n, 1.0 / m, size=pairs_sampled)
    sizes_j = rng.binomial(n, 1.0 / m, size=pairs_sampled)
    if sigma == 0.0:
        deg_i = sizes_i * round(d)
        deg_j = sizes_j * round(d)
    else:
        deg_i = np.maximum(0, np.rint(sizes_i * d + np.sqrt(sizes_i) * sigma * rng.standard_normal(pairs_sampled))).astype(np.int64)
        deg_j = np.maximum(0, np.rint(sizes_j * d + np.sqrt(sizes_j) * sigma * rng.standard_normal(pairs_sampled))).astype(np.int64)
    p = np.clip(deg_j / max(total_stubs, 1.0), 0.0, 1.0)
    return rng.binomial(deg_i, p)


def _multiplicity_sample(profile, m, pairs_sampled, seed, stub_sampled):
    if m == 1:
        raise ConfigurationError("no distinct group pairs exist at m=1")
    if stub_sampled:
        return _stub_sampled_multiplicities(profile, m, pairs_sampled, seed), None
    _check_budget(profile)
    return _explicit_multiplicities(profile, m, pairs_sampled, seed)


def simulate_connection_prob(
    profile: GraphProfile, m: int, pairs_sampled: int, seed, stub_sampled: bool = False
) -> tuple[float, float]:
    """Empirical P[random distinct group pair is connected], with its
    binomial standard error.

    Realizes degrees, groups, and stub pairing explicitly unless
    stub_sampled is set (required beyond the explicit budget).
    """
    if pairs_sampled < 100:
        raise ConfigurationError("pairs_sampled must be >= 100")
    if m == 1:
        # the single self-pair is connected iff any edge exists
        p = 1.0 if profile.n * profile.d > 0 else 0.0
        return p, 0.0
    mult, _ = _multiplicity_sample(profile, m, pairs_sampled, seed, stub_sampled)
    p = float((mult > 0).mean())
    stderr = math.sqrt(p * (1.0 - p) / pairs_sampled)
    return p, stderr


def simulate_stream_histogram(
    profile: GraphProfile, m: int, pairs_sampled: int, seed, stub_sampled: bool = False
) -> dict[int, float]:
    """Empirical distribution of stream sizes over sampled distinct pairs."""
    if pairs_sampled < 100:
        raise ConfigurationError("pairs_sampled must be >= 100")
    mult, _ = _multiplicity_sample(profile, m, pairs_sampled, seed, stub_sampled)
    freq = np.bincount(mult) / pairs_sampled
    return {k: float(f) for k, f in enumerate(freq)}


def strategy_random_poll(d_b: int, seed) -> tuple[list[int], int]:
    """Poll uniform random friend groups until every one has been seen.

    Returns the polled sequence and its length (the connection count).
    """
    if d_b < 1:
        raise ConfigurationError(f"d_b must be >= 1, got {d_b}")
    rng = np.random.default_rng(seed)
    seen: set[int] = set()
    polled: list[int] = []
    while len(seen) < d_b:
        g = int(rng.integers(0, d_b))
        polled.append(g)
        seen.add(g)
    return polled, len(polled)


@dataclass
class ResourceTally:
    """Raw per-user retrieval counters; ratios are derived views."""

    downloaded_units: float = 0.0
    meant_units: float = 0.0
    headers_attempted: int = 0
    bodies_decrypted: int = 0
    connections: int = 0
    phi: float = 0.0

    @property
    def bandwidth_ratio(self):
        if self.meant_units <= 0:
            return None
        return self.downloaded_units / self.meant_units

    @property
    def computation_ratio(self):
        if self.bodies_decrypted <= 0:
            return None
        return (self.phi * self.headers_attempted + self.bodies_decrypted) / self.bodies_decrypted


def strategy_bulk_download(
    group_inbox, user: int, is_mine, friend_groups=None, phi: float = 0.0
) -> ResourceTally:
    """Fetch the whole group box in one connection.

    Box labels carry cleartext source groups, so messages from non-friend
    groups are discarded without a decryption attempt when friend_groups
    is given; header decryption is attempted on the rest and bodies only
    on the user's own messages.
    """
    tally = ResourceTally(phi=phi, connections=1)
    for msg in group_inbox:
        tally.downloaded_units += msg.size * (1.0 + phi)
        if friend_groups is not None and msg.source_group not in friend_groups:
            continue
        tally.headers_attempted += 1
        if is_mine(msg):
            tally.bodies_decrypted += 1
            tally.meant_units += msg.size
    return tally


def strategy_dynamic_rendezvous(
    conversation: list[Message], assignment: GroupAssignment, seed
) -> tuple[ResourceTally, list[tuple[int, int]]]:
    """Hop mailboxes: each message announces a uniformly random next box.

    The first message uses the receiver's true group; the receiver polls
    exactly the announced mailbox, one connection per message. Returns the
    tally and the (source_group, dest_group) trace in order.
    """
    if not conversation:
        raise ConfigurationError("conversation must contain at least one message")
    rng = np.random.default_rng(seed)
    first = conversation[0]
    trace: list[tuple[int, int]] = []
    tally = ResourceTally(phi=first.header_ratio)
    for idx, msg in enumerate(conversation):
        src = int(assignment.group_of[msg.sender])
        if idx == 0:
            dest = int(assignment.group_of[msg.recipient])
        else:
            dest = int(rng.integers(0, assignment.m))
        trace.append((src, dest))
        tally.connections += 1
        tally.downloaded_units += msg.size * (1.0 + msg.header_ratio)
        tally.headers_attempted += 1
        tally.bodies_decrypted += 1
        tally.meant_units += msg.size
    return tally, trace


def estimate_edge_privacy(
    graph: SocialGraph, assignment: GroupAssignment, trials: int, seed
) -> tuple[float, float]:
    """Frequency with which deleting a sender's edges leaves the sender's
    and receiver's groups connected.

    Samples ordered friend pairs (Alice, Bob) from the edge list; when
    trials >= 2|E| the estimate switches to exact enumeration over every
    orientation of every edge.
    """
    if graph.edge_count < 1:
        raise ConfigurationError("graph has no edges")
    if trials < 100:
        raise ConfigurationError("trials must be >= 100")
    m = assignment.m
    if assignment.n != graph.n:
        raise ConfigurationError("assignment does not cover the graph")
    g = assignment.group_of
    edges = graph.edges
    ends = g[edges]
    pair_keys = _pair_keys(ends, m)
    uniq_pairs, pair_counts = np.unique(pair_keys, return_counts=True)
    # incidence counts: how many edges join user u to group h; a self-loop
    # is a single stream member, so it must enter once, not per direction
    not_loop = edges[:, 0] != edges[:, 1]
    inc_keys = np.concatenate(
        [edges[:, 0] * m + ends[:, 1], edges[not_loop, 1] * m + ends[not_loop, 0]]
    )
    uniq_inc, inc_counts = np.unique(inc_keys, return_counts=True)

    if trials >= 2 * graph.edge_count:
        alice = np.concatenate([edges[:, 0], edges[:, 1]])
        bob = np.concatenate([edges[:, 1], edges[:, 0]])
    else:
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, graph.edge_count, size=trials)
        flip = rng.integers(0, 2, size=trials).astype(bool)
        alice = np.where(flip, edges[idx, 1], edges[idx, 0])
        bob = np.where(flip, edges[idx, 0], edges[idx, 1])
    ga, gb = g[alice], g[bob]
    total = _sorted_lookup(
        uniq_pairs, pair_counts, np.minimum(ga, gb) * m + np.maximum(ga, gb)
    )
    alice_side = _sorted_lookup(uniq_inc, inc_counts, alice * m + gb)
    private = (total - alice_side) >= 1
    p = float(private.mean())
    stderr = math.sqrt(p * (1.0 - p) / private.size)
    return p, stderr


@dataclass
class AdversaryLog:
    """What a global observer sees: group endpoints, times, sizes only."""

    records: list[tuple[int, int, int, tuple[int, ...], float]] = field(default_factory=list)

    def to_csv(self, path_or_handle) -> None:
        def _write(fh):
            writer = csv.writer(fh)
            writer.writerow(LOG_HEADER)
            for src, dst, t, ticks, size in self.records:
                writer.writerow([src, dst, t, ";".join(str(x) for x in ticks), size])

        if hasattr(path_or_handle, "write"):
            _write(path_or_handle)
        else:
            with open(path_or_handle, "w", newline="") as fh:
                _write(fh)

    @classmethod
    def from_csv(cls, path) -> "AdversaryLog":
        records = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is not None and tuple(header) != LOG_HEADER:
                raise ConfigurationError(f"{path}: unexpected header {header!r}")
            for row in reader:
                ticks = tuple(int(x) for x in row[3].split(";")) if row[3] else ()
                records.append((int(row[0]), int(row[1]), int(row[2]), ticks, float(row[4])))
        return cls(records)


def export_adversary_log(log: AdversaryLog, path) -> None:
    log.to_csv(path)


@dataclass
class SimReport:
    """Aggregated Monte Carlo outputs; stderr fields come from
    replication-to-replication variance (binomial within-replication
    variance when there is a single replication)."""

    empirical_connect_prob: float
    connect_stderr: float
    stream_size_histogram: dict[int, float]
    bandwidth_ratio: float | None
    computation_ratio: float | None
    connections: float
    edge_privacy_estimate: float | None
    privacy_stderr: float | None
    replications: int

    def to_dict(self) -> dict:
        return {
            "empirical_connect_prob": {
                "mean": self.empirical_connect_prob,
                "stderr": self.connect_stderr,
            },
            "stream_size_histogram": {str(k): v for k, v in sorted(self.stream_size_histogram.items())},
            "bandwidth_ratio": self.bandwidth_ratio,
            "computation_ratio": self.computation_ratio,
            "connections": self.connections,
            "edge_privacy_estimate": None
            if self.edge_privacy_estimate is None
            else {"mean": self.edge_privacy_estimate, "stderr": self.privacy_stderr},
            "replications": self.replications,
        }

    def to_json(self, path_or_handle) -> None:
        if hasattr(path_or_handle, "write"):
            json.dump(self.to_dict(), path_or_handle, indent=2, sort_keys=True)
            path_or_handle.write("\n")
        else:
            with open(path_or_handle, "w") as fh:
                json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
                fh.write("\n")


@dataclass
class WorkloadConfig:
    profile: object  # GraphProfile or an explicit SocialGraph
    m: int
    ticks: int = 10
    send_rate: float = 0.05
    phi: float = 0.0
    strategy: str = POLL
    replications: int = 1
    seed: int = 0
    assignment: GroupAssignment | None = None
    message_size: float = 1.0
    poll_interval: int = 1
    # exploratory variant: fetch headers alone, then matching bodies
    header_only_poll: bool = False
    pairs_sampled: int = 10_000
    privacy_trials: int = 2_000

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(
                f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}"
            )
        if self.ticks < 1:
            raise ConfigurationError("ticks must be >= 1")
        if self.replications < 1:
            raise ConfigurationError("replications must be >= 1")
        if not 0.0 <= self.send_rate <= 1.0:
            raise ConfigurationError("send_rate must lie in [0, 1] (one draw per edge per tick)")
        if not 0.0 <= self.phi < 1.0:
            raise ConfigurationError("phi must lie in [0, 1)")
        if self.m < 1:
            raise ConfigurationError("m must be >= 1")
        if not 1 <= self.poll_interval <= self.ticks:
            raise ConfigurationError("poll_interval must lie in [1, ticks]")
        if self.message_size <= 0:
            raise ConfigurationError("message_size must be positive")
        if self.privacy_trials != 0 and self.privacy_trials < 100:
            raise ConfigurationError("privacy_trials must be 0 (skip) or >= 100")
        if isinstance(self.profile, SocialGraph) and self.profile.n < self.m:
            raise ConfigurationError("m exceeds the explicit graph's user count")


def _realize_graph(config: WorkloadConfig, ss) -> SocialGraph:
    if isinstance(config.profile, SocialGraph):
        return config.profile
    _check_budget(config.profile)
    s_deg, s_graph = ss.spawn(2)
    dist = _distribution_for(config.profile)
    degrees = sample_degree_sequence(dist, config.profile.n, s_deg)
    return SocialGraph.from_degrees(degrees, s_graph)


def _replicate(config: WorkloadConfig, seed_seq, want_log: bool):
    s_graph, s_assign, s_fire, s_poll, s_pairs, s_priv = seed_seq.spawn(6)
    graph = _realize_graph(config, s_graph)
    n, m = graph.n, config.m
    assignment = config.assignment or assign_groups(n, m, s_assign)
    if assignment.n != n or assignment.m != m:
        raise ConfigurationError("assignment shape does not match the workload")
    g = assignment.group_of
    edges = graph.edges
    ends = g[edges] if len(edges) else np.zeros((0, 2), dtype=np.int64)

    # stream multiplicities of the realized projection
    pair_keys = _pair_keys(ends, m) if len(edges) else np.zeros(0, dtype=np.int64)
    uniq_pairs, pair_counts = np.unique(pair_keys, return_counts=True)

    # connection probability and histogram over sampled distinct pairs
    if m >= 2:
        rng_pairs = np.random.default_rng(s_pairs)
        lo, hi = _sample_distinct_pairs(m, config.pairs_sampled, rng_pairs)
        mult = _sorted_lookup(uniq_pairs, pair_counts, lo * m + hi)
    else:
        mult = np.full(config.pairs_sampled, graph.edge_count, dtype=np.int64)
    connect_p = float((mult > 0).mean())
    hist = np.bincount(mult) / mult.size

    # who polls which box: count members of group B with a friend in group A
    if len(edges):
        inc = np.unique(
            np.concatenate([edges[:, 0] * m + ends[:, 1], edges[:, 1] * m + ends[:, 0]])
        )
        inc_user, inc_fg = inc // m, inc % m
        box_keys, box_watchers = np.unique(g[inc_user] * m + inc_fg, return_counts=True)
        friends_per_user = np.bincount(inc_user, minlength=n)
    else:
        box_keys = np.zeros(0, dtype=np.int64)
        box_watchers = np.zeros(0, dtype=np.int64)
        friends_per_user = np.zeros(n, dtype=np.int64)

    # message generation: every edge fires independently each tick
    rng_fire = np.random.default_rng(s_fire)
    src_parts, dst_parts, t_parts = [], [], []
    for t in range(config.ticks):
        if not len(edges) or config.send_rate == 0.0:
            break
        fired = np.flatnonzero(rng_fire.random(len(edges)) < config.send_rate)
        if not fired.size:
            continue
        toward_v = rng_fire.integers(0, 2, size=fired.size).astype(bool)
        src_parts.append(np.where(toward_v, edges[fired, 0], edges[fired, 1]))
        dst_parts.append(np.where(toward_v, edges[fired, 1], edges[fired, 0]))
        t_parts.append(np.full(fired.size, t, dtype=np.int64))
    if src_parts:
        src_user = np.concatenate(src_parts)
        dst_user = np.concatenate(dst_parts)
        t_send = np.concatenate(t_parts)
    else:
        src_user = dst_user = t_send = np.zeros(0, dtype=np.int64)

    size = config.message_size
    n_msgs = src_user.size
    meant_units = n_msgs * size

    src_group = g[src_user]
    dst_group = g[dst_user]
    # downloaders of message (A -> B): members of B watching box (A, B)
    watchers = _sorted_lookup(box_keys, box_watchers, dst_group * m + src_group)

    group_sizes = assignment.group_sizes()
    if config.strategy == POLL:
        if config.header_only_poll:
            downloaded = size * (config.phi * float(watchers.sum()) + n_msgs)
        else:
            downloaded = size * (1.0 + config.phi) * float(watchers.sum())
        headers = int(watchers.sum())
    else:
        downloaded = size * (1.0 + config.phi) * float(group_sizes[dst_group].sum())
        headers = int(watchers.sum())  # cleartext source labels screen the rest
    bodies = n_msgs

    bandwidth = downloaded / meant_units if meant_units > 0 else None
    computation = (config.phi * headers + bodies) / bodies if bodies > 0 else None

    # connections per full mailbox check
    rounds = config.ticks // config.poll_interval
    if n_msgs == 0:
        connections = 0.0
    elif config.strategy == BULK:
        connections = 1.0
    else:
        d_b = friends_per_user[friends_per_user > 0]
        # sum of geometrics: same law as literal polling, drawn in bulk
        counts = np.bincount(d_b)
        p_flat = np.concatenate(
            [np.tile(np.arange(k, 0, -1) / k, counts[k]) for k in np.unique(d_b)]
        )
        rng_poll = np.random.default_rng(s_poll)
        total_polls = 0
        for _ in range(rounds):
            total_polls += int(rng_poll.geometric(p_flat).sum())
        connections = total_polls / (d_b.size * rounds)

    # edge privacy on this realization
    if config.privacy_trials and graph.edge_count:
        privacy_p, privacy_se = estimate_edge_privacy(
            graph, assignment, config.privacy_trials, s_priv
        )
    else:
        privacy_p, privacy_se = None, None

    log = None
    if want_log:
        records = []
        offsets = np.arange(config.poll_interval)
        for i in range(n_msgs):
            t = int(t_send[i])
            nxt = t + ((offsets - t) % config.poll_interval)
            ticks = tuple(int(x) for x in np.unique(nxt[nxt < config.ticks]))
            records.append((int(src_group[i]), int(dst_group[i]), t, ticks, size))
        log = AdversaryLog(records)

    return {
        "connect_p": connect_p,
        "hist": hist,
        "bandwidth": bandwidth,
        "computation": computation,
        "connections": connections,
        "privacy_p": privacy_p,
        "privacy_se": privacy_se,
        "pairs": mult.size,
        "log": log,
    }


def run_workload(config: WorkloadConfig, workers: int = 1) -> tuple[SimReport, AdversaryLog]:
    """Run replications (in parallel when workers > 1) and reduce them.

    Per-replication seeds are spawned from the master seed, and results
    are reduced in replication order, so the report and log are identical
    for any worker count.
    """
    children = np.random.SeedSequence(config.seed).spawn(config.replications)
    want_log = [i == 0 for i in range(config.replications)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda args: _replicate(config, *args), zip(children, want_log)))
    else:
        results = [_replicate(config, s, w) for s, w in zip(children, want_log)]

    connect = np.array([r["connect_p"] for r in results])
    max_len = max(len(r["hist"]) for r in results)
    hist = np.zeros(max_len)
    for r in results:
        hist[: len(r["hist"])] += r["hist"]
    hist /= len(results)

    def _mean_or_none(key):
        vals = [r[key] for r in results if r[key] is not None]
        if len(vals) < len(results):
            return None
        return float(np.mean(vals))

    if config.replications > 1:
        connect_se = float(connect.std(ddof=1) / math.sqrt(connect.size))
    else:
        p = float(connect[0])
        connect_se = math.sqrt(p * (1.0 - p) / results[0]["pairs"])

    privacy_vals = [r["privacy_p"] for r in results if r["privacy_p"] is not None]
    if not privacy_vals:
        privacy_p, privacy_se = None, None
    elif len(privacy_vals) > 1:
        pv = np.array(privacy_vals)
        privacy_p = float(pv.mean())
        privacy_se = float(pv.std(ddof=1) / math.sqrt(pv.size))
    else:
        privacy_p = privacy_vals[0]
        privacy_se = results[0]["privacy_se"]

    report = SimReport(
        empirical_connect_prob=float(connect.mean()),
        connect_stderr=connect_se,
        stream_size_histogram={k: float(v) for k, v in enumerate(hist)},
        bandwidth_ratio=_mean_or_none("bandwidth"),
        computation_ratio=_mean_or_none("computation"),
        connections=float(np.mean([r["connections"] for r in results])),
        edge_privacy_estimate=privacy_p,
        privacy_stderr=privacy_se,
        replications=config.replications,
    )
    return report, results[0]["log"]
