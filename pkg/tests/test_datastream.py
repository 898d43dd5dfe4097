"""Frame evolution: generator determinism and separability, capped replay
arithmetic, global bookkeeping, scenario materialization."""

import numpy as np
import pytest

from fedteddi.datastream import (
    ArrivalEvent,
    ClientDatasetState,
    ScenarioError,
    ScenarioSpec,
    advance_frame,
    apply_frame_events,
    build_initial_states,
    build_streaming_scenario,
    generate_samples,
    global_distribution,
    load_samples,
    make_generator,
    make_eval_dataset,
    save_samples,
)
from fedteddi.learning import (
    Dataset,
    SoftmaxRegression,
    TrainingConfig,
    local_train,
    model_accuracy,
)


GEN = make_generator({"id": "gaussian", "dim": 8, "noise_sigma": 1.0})


class TestGenerateSamples:
    def test_deterministic_per_seed(self):
        a = generate_samples(2, 5, GEN, 123)
        b = generate_samples(2, 5, GEN, 123)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)
        c = generate_samples(2, 5, GEN, 124)
        assert not np.array_equal(a.features, c.features)

    def test_single_sample(self):
        ds = generate_samples(0, 1, GEN, 7)
        assert len(ds) == 1
        assert ds.labels[0] == 0

    def test_unknown_generator_rejected(self):
        with pytest.raises(ValueError):
            make_generator({"id": "uniform_cube"})

    def test_two_well_separated_classes_are_learnable(self):
        dim = 8
        means = {0: [3.0] + [0.0] * (dim - 1), 1: [-3.0] + [0.0] * (dim - 1)}
        gen = make_generator({"id": "gaussian", "dim": dim, "class_means": means})
        train = generate_samples(0, 500, gen, 1).concat(generate_samples(1, 500, gen, 2))
        test = generate_samples(0, 200, gen, 3).concat(generate_samples(1, 200, gen, 4))
        model = SoftmaxRegression(dim, 2)
        w = np.zeros(model.dim)
        for step in range(30):
            w, _ = local_train(model, w, train, TrainingConfig(1, len(train), 0.5), step)
        assert model_accuracy(model, w, test) >= 0.95

    def test_class_conditional_law_is_frame_invariant(self):
        # Means are a pure function of the class id, never of frame or client.
        m1 = GEN.class_mean(3)
        m2 = GEN.class_mean(3)
        assert np.array_equal(m1, m2)


def state_of(class_counts: dict[int, int], capacity: int, num_classes: int) -> ClientDatasetState:
    ds = Dataset.empty(GEN.dim)
    for c, k in class_counts.items():
        ds = ds.concat(generate_samples(c, k, GEN, 1000 + c))
    return ClientDatasetState(ds, capacity, num_classes)


class TestAdvanceFrame:
    def test_no_events_returns_state_unchanged(self):
        st = state_of({0: 10}, 20, 2)
        assert advance_frame(st, [], GEN, 5) is st

    def test_replay_keeps_all_new_and_fills_with_old(self):
        st = state_of({0: 750}, 750, 2)
        ev = [ArrivalEvent(frame=1, client=0, new_class=1, new_sample_count=375)]
        out = advance_frame(st, ev, GEN, 9)
        counts = out.dataset.class_counts(2)
        assert counts.tolist() == [375, 375]
        assert len(out.dataset) == 750

    def test_replay_smaller_storage(self):
        st = state_of({0: 300}, 300, 2)
        ev = [ArrivalEvent(frame=1, client=0, new_class=1, new_sample_count=150)]
        out = advance_frame(st, ev, GEN, 9)
        assert out.dataset.class_counts(2).tolist() == [150, 150]

    def test_everything_kept_when_it_fits(self):
        st = state_of({0: 10}, 100, 2)
        ev = [ArrivalEvent(frame=1, client=0, new_class=1, new_sample_count=20)]
        out = advance_frame(st, ev, GEN, 9)
        assert out.dataset.class_counts(2).tolist() == [10, 20]

    def test_new_data_over_capacity_rejected(self):
        st = state_of({0: 10}, 50, 2)
        ev = [ArrivalEvent(frame=1, client=0, new_class=1, new_sample_count=60)]
        with pytest.raises(ScenarioError):
            advance_frame(st, ev, GEN, 9)

    def test_conservation(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            old = int(rng.integers(1, 120))
            cap = int(rng.integers(old, 150))
            new = int(rng.integers(1, cap + 1))
            st = state_of({0: old}, cap, 2)
            ev = [ArrivalEvent(frame=1, client=0, new_class=1, new_sample_count=new)]
            out = advance_frame(st, ev, GEN, int(rng.integers(1 << 30)))
            assert len(out.dataset) == min(cap, old + new)

    def test_distribution_matches_histogram(self):
        st = state_of({0: 30, 1: 10}, 80, 3)
        assert st.distribution.proportions.tolist() == [0.75, 0.25, 0.0]


class TestGlobalDistribution:
    def test_single_client(self):
        st = state_of({0: 5, 1: 15}, 40, 2)
        assert global_distribution({0: st}) == st.distribution

    def test_two_equal_clients_symmetric(self):
        a = state_of({0: 50}, 50, 2)
        b = state_of({1: 50}, 50, 2)
        assert global_distribution({0: a, 1: b}).proportions.tolist() == [0.5, 0.5]

    def test_weighted_by_sample_count(self):
        a = state_of({0: 100}, 100, 2)
        b = state_of({1: 300}, 300, 2)
        assert global_distribution({0: a, 1: b}).proportions.tolist() == [0.25, 0.75]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            global_distribution({})


class TestScenario:
    def spec(self, seed=5):
        return build_streaming_scenario(
            seed=seed, num_clients=8, capacity=40, initial_classes=4,
            new_classes=2, arriving_clients=3, one_class_clients=5,
            generator_params={"dim": 8},
        )

    def test_determinism_across_materializations(self):
        s1 = build_initial_states(self.spec())
        s2 = build_initial_states(self.spec())
        for cid in s1:
            assert np.array_equal(s1[cid].dataset.features, s2[cid].dataset.features)
        adv1 = apply_frame_events(self.spec(), s1, 1)
        adv2 = apply_frame_events(self.spec(), s2, 1)
        for cid in adv1:
            assert np.array_equal(adv1[cid].dataset.features, adv2[cid].dataset.features)

    def test_cumulative_classes_non_decreasing(self):
        spec = self.spec()
        counts = [spec.classes_at(l) for l in range(spec.num_frames)]
        assert counts == sorted(counts)
        assert counts[0] == 4
        assert counts[-1] <= 6

    def test_arriving_clients_gain_new_classes(self):
        spec = self.spec()
        states = build_initial_states(spec)
        advanced = apply_frame_events(spec, states, 1)
        arrivals = {ev.client for ev in spec.frames[1]}
        assert len(arrivals) == 3
        for cid in arrivals:
            before = states[cid].dataset.class_counts(6)
            after = advanced[cid].dataset.class_counts(6)
            assert after[4:].sum() > 0
            assert before[4:].sum() == 0

    def test_capacity_respected_everywhere(self):
        spec = self.spec()
        states = apply_frame_events(spec, build_initial_states(spec), 1)
        for st in states.values():
            assert len(st.dataset) <= spec.capacity

    def test_eval_dataset_covers_every_class(self):
        spec = self.spec()
        ev = make_eval_dataset(spec, per_class=5)
        assert ev.class_counts(spec.all_classes()).tolist() == [5] * spec.all_classes()

    def test_invalid_event_client_rejected(self):
        with pytest.raises(ScenarioError):
            ScenarioSpec(
                num_clients=2, capacity=10,
                frames=[[], [ArrivalEvent(1, 9, 0, 5)]],
                initial_assignment={0: [(0, 5)]},
            )


class TestSampleFileRoundTrip:
    def test_round_trip(self, tmp_path):
        ds = generate_samples(1, 7, GEN, 55)
        path = tmp_path / "samples.csv"
        save_samples(path, ds)
        back = load_samples(path)
        assert np.array_equal(back.labels, ds.labels)
        assert np.allclose(back.features, ds.features)
        assert path.read_text().splitlines()[0] == "dim,8"

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("width,8\n")
        with pytest.raises(ValueError):
            load_samples(path)
