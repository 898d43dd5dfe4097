"""Frame-structured data evolution: arrivals, capped replay, global bookkeeping.

Clients accumulate data over frames.  At a frame boundary each client merges
newly collected samples with a uniformly subsampled retention of its old
data so the total never exceeds its storage capacity.  Features are
class-conditional Gaussian clusters whose law never changes across frames,
so per-class gradient statistics stay exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .distributions import ClassDistribution
from .learning import Dataset
from .rngstreams import derive_seed, substream

__all__ = [
    "ScenarioError",
    "ArrivalEvent",
    "GaussianFeatureModel",
    "make_generator",
    "generate_samples",
    "ClientDatasetState",
    "ScenarioSpec",
    "build_initial_states",
    "advance_frame",
    "apply_frame_events",
    "global_distribution",
    "build_streaming_scenario",
    "make_eval_dataset",
    "load_samples",
    "save_samples",
]


class ScenarioError(ValueError):
    """A scenario asks for something its own constraints make impossible."""


@dataclass(frozen=True)
class ArrivalEvent:
    """A batch of newly collected samples of one class at one client."""

    frame: int
    client: int
    new_class: int
    new_sample_count: int

    def __post_init__(self):
        if self.frame < 0:
            raise ValueError("frame must be nonnegative")
        if self.new_sample_count < 1:
            raise ValueError("new_sample_count must be positive")
        if self.new_class < 0:
            raise ValueError("new_class must be a valid class index")


class GaussianFeatureModel:
    """Class-conditional Gaussian clusters in R^dim.

    Class means are either given explicitly or derived deterministically
    from ``mean_seed`` as scaled unit vectors, so the class-conditional law
    is identical for every client, frame, and run seed.
    """

    generator_id = "gaussian"

    def __init__(
        self,
        dim: int = 32,
        noise_sigma: float = 1.0,
        mean_scale: float = 3.0,
        mean_seed: int = 7,
        class_means: Mapping[int, Sequence[float]] | None = None,
    ):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        if noise_sigma <= 0:
            raise ValueError("noise_sigma must be positive")
        self.dim = dim
        self.noise_sigma = noise_sigma
        self.mean_scale = mean_scale
        self.mean_seed = mean_seed
        self._explicit: dict[int, np.ndarray] = {}
        if class_means:
            for c, m in class_means.items():
                v = np.asarray(m, dtype=float)
                if v.shape != (dim,):
                    raise ValueError(f"class {c} mean must have dimension {dim}")
                self._explicit[int(c)] = v

    def class_mean(self, class_id: int) -> np.ndarray:
        if class_id in self._explicit:
            return self._explicit[class_id]
        rng = substream(self.mean_seed, "class-mean", class_id)
        v = rng.standard_normal(self.dim)
        return self.mean_scale * v / np.linalg.norm(v)

    def sample(self, class_id: int, count: int, rng: np.random.Generator) -> Dataset:
        mean = self.class_mean(class_id)
        X = mean + self.noise_sigma * rng.standard_normal((count, self.dim))
        y = np.full(count, class_id, dtype=int)
        return Dataset(X, y)


def make_generator(params: Mapping) -> GaussianFeatureModel:
    """Build a feature generator from its config tree."""
    kind = params.get("id", "gaussian")
    if kind != "gaussian":
        raise ValueError(f"unknown generator id {kind!r}")
    return GaussianFeatureModel(
        dim=int(params.get("dim", 32)),
        noise_sigma=float(params.get("noise_sigma", 1.0)),
        mean_scale=float(params.get("mean_scale", 3.0)),
        mean_seed=int(params.get("mean_seed", 7)),
        class_means={int(c): m for c, m in params.get("class_means", {}).items()} or None,
    )


def generate_samples(
    class_id: int, count: int, generator: GaussianFeatureModel, rng_seed: int
) -> Dataset:
    """Draw ``count`` samples of one class, deterministic per seed."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    return generator.sample(class_id, count, rng)


@dataclass(frozen=True)
class ClientDatasetState:
    """One client's data at one frame, with its storage cap.

    ``num_classes`` is the cumulative class count of the frame, so the
    distribution vector is comparable across clients.
    """

    dataset: Dataset
    capacity: int
    num_classes: int

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be positive")
        if len(self.dataset) > self.capacity:
            raise ScenarioError(
                f"dataset of size {len(self.dataset)} exceeds capacity {self.capacity}"
            )

    @property
    def distribution(self) -> ClassDistribution:
        return ClassDistribution.from_counts(self.dataset.class_counts(self.num_classes))

    @property
    def sample_count(self) -> int:
        return len(self.dataset)


@dataclass(frozen=True)
class ScenarioSpec:
    """Full description of a data-evolution scenario.

    ``frames[l]`` lists the arrival events of frame l (frame 0 events are
    folded into the initial assignment instead).  ``initial_assignment``
    maps client id to a list of (class, count) pairs.
    """

    num_clients: int
    capacity: int
    frames: list[list[ArrivalEvent]]
    initial_assignment: dict[int, list[tuple[int, int]]]
    generator_params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.num_clients < 1:
            raise ValueError("num_clients must be positive")
        for cid, pairs in self.initial_assignment.items():
            if not (0 <= cid < self.num_clients):
                raise ScenarioError(f"initial assignment names unknown client {cid}")
            for cls, count in pairs:
                if count < 1:
                    raise ScenarioError(f"client {cid} class {cls} has nonpositive count")
        for events in self.frames:
            for ev in events:
                if not (0 <= ev.client < self.num_clients):
                    raise ScenarioError(f"event names unknown client {ev.client}")

    @property
    def num_frames(self) -> int:
        return len(self.frames)

    def classes_at(self, frame: int) -> int:
        """Cumulative class count C_l: non-decreasing across frames."""
        top = -1
        for pairs in self.initial_assignment.values():
            for cls, _ in pairs:
                top = max(top, cls)
        for l in range(min(frame, len(self.frames) - 1) + 1):
            for ev in self.frames[l]:
                top = max(top, ev.new_class)
        return top + 1

    def all_classes(self) -> int:
        return self.classes_at(len(self.frames) - 1) if self.frames else self.classes_at(0)


def build_initial_states(spec: ScenarioSpec) -> dict[int, ClientDatasetState]:
    """Materialize every client's frame-0 dataset from the initial assignment."""
    gen = make_generator(spec.generator_params)
    num_classes = spec.classes_at(0)
    states: dict[int, ClientDatasetState] = {}
    for cid in range(spec.num_clients):
        pairs = spec.initial_assignment.get(cid, [])
        ds = Dataset.empty(gen.dim)
        for j, (cls, count) in enumerate(pairs):
            seed = derive_seed(spec.seed, "initial", cid, j)
            ds = ds.concat(generate_samples(cls, count, gen, seed))
        if len(ds) > spec.capacity:
            raise ScenarioError(
                f"initial assignment for client {cid} ({len(ds)}) exceeds capacity {spec.capacity}"
            )
        states[cid] = ClientDatasetState(ds, spec.capacity, num_classes)
    return states


def advance_frame(
    state: ClientDatasetState,
    events: Sequence[ArrivalEvent],
    generator: GaussianFeatureModel,
    rng_seed: int,
    num_classes: int | None = None,
) -> ClientDatasetState:
    """Merge a client's new arrivals with a random retention of its old data.

    All new samples are kept.  Old samples are uniformly subsampled so the
    total fits the capacity (all kept when they fit).  With no events the
    state is returned unchanged apart from the class-universe width.
    """
    n_classes = state.num_classes if num_classes is None else num_classes
    if n_classes < state.num_classes:
        raise ValueError("class universe cannot shrink")
    if not events:
        if n_classes == state.num_classes:
            return state
        return ClientDatasetState(state.dataset, state.capacity, n_classes)

    rng = np.random.Generator(np.random.PCG64(rng_seed))
    new = Dataset.empty(generator.dim)
    for ev in events:
        new = new.concat(generator.sample(ev.new_class, ev.new_sample_count, rng))
    if len(new) > state.capacity:
        raise ScenarioError(
            f"new samples ({len(new)}) alone exceed capacity {state.capacity}"
        )

    keep_old = min(len(state.dataset), state.capacity - len(new))
    if keep_old < len(state.dataset):
        kept_idx = np.sort(rng.choice(len(state.dataset), size=keep_old, replace=False))
        old = state.dataset.subset(kept_idx)
    else:
        old = state.dataset
    return ClientDatasetState(new.concat(old), state.capacity, n_classes)


def apply_frame_events(
    spec: ScenarioSpec,
    states: Mapping[int, ClientDatasetState],
    frame: int,
) -> dict[int, ClientDatasetState]:
    """Advance all clients across one frame boundary (frame >= 1)."""
    if frame < 1 or frame >= len(spec.frames):
        raise ValueError(f"frame {frame} out of range for event application")
    gen = make_generator(spec.generator_params)
    num_classes = spec.classes_at(frame)
    by_client: dict[int, list[ArrivalEvent]] = {}
    for ev in spec.frames[frame]:
        by_client.setdefault(ev.client, []).append(ev)
    out: dict[int, ClientDatasetState] = {}
    for cid in range(spec.num_clients):
        seed = derive_seed(spec.seed, "frame", frame, cid)
        out[cid] = advance_frame(states[cid], by_client.get(cid, []), gen, seed, num_classes)
    return out


def global_distribution(states: Mapping[int, ClientDatasetState]) -> ClassDistribution:
    """Class distribution of the union of all client datasets."""
    if not states:
        raise ValueError("states map must be nonempty")
    n_classes = max(s.num_classes for s in states.values())
    counts = np.zeros(n_classes)
    for cid in sorted(states):
        counts += states[cid].dataset.class_counts(n_classes)
    return ClassDistribution.from_counts(counts)


def build_streaming_scenario(
    seed: int,
    num_clients: int = 30,
    capacity: int = 120,
    initial_classes: int = 6,
    new_classes: int = 3,
    arriving_clients: int = 12,
    one_class_clients: int = 20,
    skew: float = 3.0,
    num_streaming_frames: int = 1,
    generator_params: Mapping | None = None,
) -> ScenarioSpec:
    """Streaming benchmark scenario: skewed one/two-class clients, then
    per-frame arrivals of unseen classes at a random subset of clients.

    Of the initial classes, the first half is ``skew`` times more likely to
    be held than the second half.  Each streaming frame picks
    ``arriving_clients`` clients at random; each collects capacity//2 fresh
    samples of one new class while old data is uniformly discarded to fit.
    """
    if one_class_clients > num_clients:
        raise ScenarioError("one_class_clients exceeds num_clients")
    if arriving_clients > num_clients:
        raise ScenarioError("arriving_clients exceeds num_clients")
    rng = substream(seed, "scenario-assignment")
    half = max(1, initial_classes // 2)
    weights = np.array([skew] * half + [1.0] * (initial_classes - half))
    weights = weights / weights.sum()

    # The first one-class clients cover every initial class once so no class
    # is absent from the population; the rest draw from the skewed law.
    initial: dict[int, list[tuple[int, int]]] = {}
    for cid in range(num_clients):
        if cid < one_class_clients:
            if cid < min(initial_classes, one_class_clients):
                cls = cid
            else:
                cls = int(rng.choice(initial_classes, p=weights))
            initial[cid] = [(cls, capacity)]
        else:
            pair = rng.choice(initial_classes, size=2, replace=False, p=weights)
            initial[cid] = [(int(pair[0]), capacity // 2), (int(pair[1]), capacity - capacity // 2)]

    frames: list[list[ArrivalEvent]] = [[]]
    new_count = capacity // 2
    for l in range(1, num_streaming_frames + 1):
        chosen = sorted(int(c) for c in rng.choice(num_clients, size=arriving_clients, replace=False))
        first_new = initial_classes + (l - 1) * new_classes
        frame_events = []
        # Round-robin over the frame's new classes: each is collected by at
        # least one client whenever enough clients arrive.
        for i, cid in enumerate(chosen):
            cls = first_new + (i % new_classes)
            frame_events.append(ArrivalEvent(frame=l, client=cid, new_class=cls, new_sample_count=new_count))
        frames.append(frame_events)

    return ScenarioSpec(
        num_clients=num_clients,
        capacity=capacity,
        frames=frames,
        initial_assignment=initial,
        generator_params=dict(generator_params or {}),
        seed=seed,
    )


def make_eval_dataset(spec: ScenarioSpec, per_class: int, seed_tag: str = "eval") -> Dataset:
    """Balanced held-out dataset over every class the scenario ever introduces."""
    gen = make_generator(spec.generator_params)
    ds = Dataset.empty(gen.dim)
    for c in range(spec.all_classes()):
        ds = ds.concat(generate_samples(c, per_class, gen, derive_seed(spec.seed, seed_tag, c)))
    return ds


def save_samples(path, dataset: Dataset) -> None:
    """Write a dataset as comma-separated features plus an integer label per line."""
    with open(path, "w") as f:
        f.write(f"dim,{dataset.num_features}\n")
        for i in range(len(dataset)):
            feats = ",".join(repr(float(v)) for v in dataset.features[i])
            f.write(f"{feats},{int(dataset.labels[i])}\n")


def load_samples(path) -> Dataset:
    """Read the delimited-text sample format (header line ``dim,<d>``)."""
    with open(path) as f:
        header = f.readline().strip()
        parts = header.split(",")
        if len(parts) != 2 or parts[0] != "dim":
            raise ValueError(f"bad sample-file header {header!r}")
        dim = int(parts[1])
        rows, labels = [], []
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != dim + 1:
                raise ValueError(f"line {lineno}: expected {dim} features + label")
            rows.append([float(v) for v in cells[:dim]])
            labels.append(int(cells[dim]))
    if not rows:
        return Dataset.empty(dim)
    return Dataset(np.array(rows), np.array(labels, dtype=int))
