import math
import random
from collections import Counter

import pytest

from eventdistill.mining import SequenceDatabase
from eventdistill.summ import (
    KIND_BINARY,
    KIND_ORDINAL,
    PlantedModelError,
    SummConfig,
    SummModel,
    fit,
    learn,
    load_model,
    log_loss,
    markov_baseline,
    planted_binary_model,
    save_model,
    score,
    simulate,
    summarize,
)

BIN1 = SummConfig(kappa=1)
ORD1 = SummConfig(kappa=1, kind=KIND_ORDINAL)


def db_of(*sequences):
    return SequenceDatabase.from_sequences([list(s) for s in sequences])


# ---------------------------------------------------------------------------
# summarize
# ---------------------------------------------------------------------------


def test_summarize_binary_window():
    cfg = SummConfig(kappa=2)
    assert summarize(["u", "v", "u"], ["u", "v"], cfg) == frozenset({"u", "v"})
    assert summarize(["u", "v"], ["u"], SummConfig(kappa=1)) == frozenset()
    assert summarize([], ["u", "v"], cfg) == frozenset()


def test_summarize_ordinal_recency_order():
    cfg = SummConfig(kappa=2, kind=KIND_ORDINAL)
    assert summarize(["u", "v", "u"], ["u", "v"], cfg) == ("u", "v")
    assert summarize(["v", "u"], ["u", "v"], cfg) == ("u", "v")
    assert summarize(["u", "v"], ["u", "v"], cfg) == ("v", "u")
    assert summarize([], ["u", "v"], cfg) == ()


def test_summarize_ordinal_lists_distinct_labels_only():
    cfg = SummConfig(kappa=4, kind=KIND_ORDINAL)
    assert summarize(["u", "u", "v", "u"], ["u", "v"], cfg) == ("u", "v")


def test_config_validation():
    with pytest.raises(ValueError):
        SummConfig(alpha=0.0)
    with pytest.raises(ValueError):
        SummConfig(gamma=-1.0)
    with pytest.raises(ValueError):
        SummConfig(kappa=0)
    with pytest.raises(ValueError):
        SummConfig(kind="fancy")


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


def test_fit_hand_counted_theta_exact():
    train = db_of(["u", "x"], ["u", "y"], ["v", "y"])
    model = fit(train, ["x"], ["u"], BIN1)
    # two u-present positions, one x occurrence: (1 + 0.1) / (2 + 0.2)
    assert abs(model.theta[("x", frozenset({"u"}))] - 0.5) < 1e-12
    # four u-absent positions, zero x occurrences
    assert abs(model.theta[("x", frozenset())] - 0.1 / 4.2) < 1e-12
    assert model.count_h[frozenset({"u"})] == 2
    assert model.count_xh[("x", frozenset({"u"}))] == 1


def test_fit_empty_influencing_set_gives_marginal():
    train = db_of(["x", "y"], ["y", "x"])
    model = fit(train, ["x"], [], BIN1)
    assert set(model.count_h) == {frozenset()}
    assert abs(model.theta[("x", frozenset())] - (2 + 0.1) / (4 + 0.2)) < 1e-12


def test_unseen_summary_predicts_half():
    train = db_of(["x", "y"])
    model = fit(train, ["x"], [], BIN1)
    assert model.prob("x", frozenset({"never-seen"})) == 0.5


def test_fit_theta_bounds_on_random_data():
    rng = random.Random(303)
    alphabet = ["a", "b", "c", "u", "x"]
    for kind in (KIND_BINARY, KIND_ORDINAL):
        cfg = SummConfig(kappa=3, kind=kind)
        db = db_of(
            *[
                [rng.choice(alphabet) for _ in range(rng.randint(1, 8))]
                for _ in range(12)
            ]
        )
        model = fit(db, ["x", "a"], ["u", "b"], cfg)
        alpha = cfg.alpha
        for (x, h), theta in model.theta.items():
            c = model.count_h[h]
            assert 0.0 < theta < 1.0
            assert alpha / (c + 2 * alpha) - 1e-12 <= theta
            assert theta <= (c + alpha) / (c + 2 * alpha) + 1e-12


def test_fit_invariant_to_sequence_order():
    sequences = [["u", "x"], ["v", "y"], ["u", "y", "x"], ["x"]]
    forward = fit(db_of(*sequences), ["x"], ["u"], BIN1)
    backward = fit(db_of(*reversed(sequences)), ["x"], ["u"], BIN1)
    assert forward.theta == backward.theta
    assert forward.count_h == backward.count_h


def test_fit_rejects_empty_training_set():
    with pytest.raises(ValueError):
        fit(db_of(), ["x"], [], BIN1)
    with pytest.raises(ValueError):
        learn(db_of(), ["x"], BIN1)


def test_fit_rejects_unknown_labels():
    with pytest.raises(ValueError):
        fit(db_of(["a", "b"]), ["x"], [], BIN1)


def test_python_fallback_summaries_match_vectorized_path():
    from eventdistill.summ import _PositionIndex, _position_summaries, _summaries_python

    rng = random.Random(99)
    alphabet = ["a", "b", "u", "v", "x"]
    for kind in (KIND_BINARY, KIND_ORDINAL):
        cfg = SummConfig(kappa=3, kind=kind)
        db = db_of(
            *[
                [rng.choice(alphabet) for _ in range(rng.randint(1, 8))]
                for _ in range(8)
            ]
        )
        index = _PositionIndex(db, cfg.kappa)
        influencing = ("u", "v", "x")
        fast_ids, fast_objects = _position_summaries(index, influencing, cfg)
        slow_ids, slow_objects = _summaries_python(index, influencing, cfg)
        fast = [fast_objects[i] for i in fast_ids]
        slow = [slow_objects[i] for i in slow_ids]
        assert fast == slow


def test_vectorized_counts_match_naive_summarize_loop():
    rng = random.Random(8181)
    alphabet = ["a", "b", "c", "u", "v", "x"]
    for kind in (KIND_BINARY, KIND_ORDINAL):
        for trial in range(8):
            cfg = SummConfig(kappa=rng.randint(1, 4), kind=kind)
            db = db_of(
                *(
                    [
                        [rng.choice(alphabet) for _ in range(rng.randint(1, 9))]
                        for _ in range(rng.randint(1, 10))
                    ]
                    + [["x"]]  # interest label must occur in the alphabet
                )
            )
            pool = sorted(db.alphabet)
            influencing = sorted(rng.sample(pool, rng.randint(0, min(3, len(pool)))))
            interest = ["x"]
            model = fit(db, interest, influencing, cfg)

            count_h = Counter()
            count_xh = Counter()
            for seq in db.sequences:
                for i, event in enumerate(seq):
                    h = summarize(seq[:i], influencing, cfg)
                    count_h[h] += 1
                    if event == "x":
                        count_xh[("x", h)] += 1
            assert model.count_h == dict(count_h)
            for key, n in count_xh.items():
                assert model.count_xh[key] == n
            for (x, h), theta in model.theta.items():
                expected = (count_xh.get((x, h), 0) + cfg.alpha) / (
                    count_h[h] + 2 * cfg.alpha
                )
                assert abs(theta - expected) < 1e-12


# ---------------------------------------------------------------------------
# log loss
# ---------------------------------------------------------------------------


def test_log_loss_hand_computed_fixture():
    train = db_of(["u", "x"], ["u", "y"], ["v", "y"])
    model = fit(train, ["x"], ["u"], BIN1)
    test = db_of(["u", "x"], ["v", "u"])
    report = log_loss(model, test)
    expected = 3 * math.log(42 / 41) + math.log(2)
    assert abs(report.per_label["x"] - expected) < 1e-9
    assert abs(report.mean - expected) < 1e-9
    assert abs(report.signed_total_loglik + expected) < 1e-9
    assert report.n_positions == 4


def test_log_loss_half_everywhere_is_n_log2():
    model = planted_binary_model("x", [], {frozenset(): 0.5}, SummConfig())
    test = db_of(["x", "a", "x"], ["a", "a"])
    report = log_loss(model, test)
    assert abs(report.per_label["x"] - 5 * math.log(2)) < 1e-12


def test_log_loss_additive_over_duplicated_data():
    train = db_of(["u", "x", "v"], ["x", "u", "x"])
    model = fit(train, ["x"], ["u"], BIN1)
    single = log_loss(model, train).per_label["x"]
    doubled = log_loss(model, db_of(*(train.sequences + train.sequences)))
    assert abs(doubled.per_label["x"] - 2 * single) < 1e-9


def test_memorization_loss_vanishes_as_alpha_shrinks():
    data = db_of(["u", "x"] * 4)
    losses = []
    for alpha in (1e-2, 1e-4, 1e-9):
        cfg = SummConfig(alpha=alpha, kappa=1)
        model = fit(data, ["x"], ["u"], cfg)
        losses.append(log_loss(model, data).per_label["x"])
    assert losses[0] > losses[1] > losses[2]
    assert losses[2] < 1e-6


def test_log_loss_rejects_unmodeled_labels():
    model = fit(db_of(["u", "x"]), ["x"], [], BIN1)
    with pytest.raises(ValueError):
        log_loss(model, db_of(["u", "x"]), interest=["zz"])


# ---------------------------------------------------------------------------
# score
# ---------------------------------------------------------------------------


def planted_example():
    cfg = SummConfig(alpha=0.1, gamma=0.5, kappa=4, kind=KIND_BINARY)
    planted = planted_binary_model(
        "x", ["u"], {frozenset(): 0.1, frozenset({"u"}): 0.8}, cfg
    )
    return planted, cfg


def test_score_penalizes_uninformative_label():
    cfg = SummConfig()
    flat = planted_binary_model("x", [], {frozenset(): 0.25}, cfg)
    data = simulate(flat, 20, 10, seed=3, background={"u": 0.5, "v": 0.5})
    assert score(data, ["x"], ["u"], cfg) < score(data, ["x"], [], cfg)


def test_score_gamma_zero_monotone_in_influencing_set():
    planted, _ = planted_example()
    data = simulate(planted, 20, 10, seed=7, background={lbl: 1 / 3 for lbl in "uvw"})
    g0 = SummConfig(alpha=0.1, gamma=0.0, kappa=4, kind=KIND_BINARY)
    chain = [[], ["u"], ["u", "v"], ["u", "v", "w"], ["u", "v", "w", "x"]]
    scores = [score(data, ["x"], stage, g0) for stage in chain]
    for smaller, larger in zip(scores, scores[1:]):
        assert larger >= smaller - 1e-9


def test_score_counts_parameters_in_penalty():
    planted, cfg = planted_example()
    data = simulate(planted, 10, 8, seed=5, background={lbl: 1 / 3 for lbl in "uvw"})
    g0 = SummConfig(alpha=0.1, gamma=0.0, kappa=4, kind=KIND_BINARY)
    n_positions = sum(len(s) for s in data.sequences)
    model = fit(data, ["x"], ["u"], cfg)
    n_summaries = len(model.count_h)
    penalty = cfg.gamma * 1 * n_summaries * math.log(n_positions)
    assert abs(score(data, ["x"], ["u"], g0) - score(data, ["x"], ["u"], cfg) - penalty) < 1e-9


# ---------------------------------------------------------------------------
# learn
# ---------------------------------------------------------------------------


def test_learn_recovers_planted_influencer():
    cfg = SummConfig(alpha=0.1, gamma=0.5, kappa=4, kind=KIND_BINARY)
    planted = planted_binary_model(
        "x", ["u"], {frozenset(): 0.05, frozenset({"u"}): 0.9}, cfg
    )
    background = {lbl: 0.25 for lbl in ("u", "a", "b", "c")}
    for seed in (1, 2, 3):
        data = simulate(planted, 600, 10, seed=seed, background=background)
        model = learn(data, ["x"], cfg)
        assert model.influencing_set == ("u",)


def test_learn_rejects_signal_free_labels():
    cfg = SummConfig()
    flat = planted_binary_model("x", [], {frozenset(): 0.2}, cfg)
    data = simulate(flat, 150, 10, seed=11, background={lbl: 0.25 for lbl in "abcd"})
    model = learn(data, ["x"], cfg)
    assert model.influencing_set == ()


def test_learn_is_deterministic():
    planted, cfg = planted_example()
    data = simulate(planted, 100, 8, seed=13, background={lbl: 1 / 3 for lbl in "uvw"})
    first = learn(data, ["x"], cfg)
    second = learn(data, ["x"], cfg)
    assert first.influencing_set == second.influencing_set
    assert first.theta == second.theta


def test_learned_model_beats_empty_model_on_training_loss():
    planted, cfg = planted_example()
    g0 = SummConfig(alpha=0.1, gamma=0.0, kappa=4, kind=KIND_BINARY)
    data = simulate(planted, 80, 10, seed=17, background={lbl: 1 / 3 for lbl in "uvw"})
    learned = learn(data, ["x"], g0)
    empty = fit(data, ["x"], [], g0)
    learned_loss = log_loss(learned, data).per_label["x"]
    empty_loss = log_loss(empty, data).per_label["x"]
    assert learned_loss <= empty_loss + 1e-9


def test_binary_and_ordinal_agree_at_kappa_one():
    rng = random.Random(77)
    db = db_of(
        *[
            [rng.choice(["u", "v", "x", "y"]) for _ in range(rng.randint(1, 7))]
            for _ in range(15)
        ]
    )
    binary = fit(db, ["x"], ["u", "v"], BIN1)
    ordinal = fit(db, ["x"], ["u", "v"], ORD1)

    def as_sets(model):
        return {
            (x, frozenset(h) if not isinstance(h, frozenset) else h): theta
            for (x, h), theta in model.theta.items()
        }

    assert as_sets(binary) == as_sets(ordinal)


# ---------------------------------------------------------------------------
# Markov baseline
# ---------------------------------------------------------------------------


def test_markov_transition_smoothing_formula():
    train = db_of(["a", "b"], ["a", "b"])
    model = markov_baseline(train, order=1, alpha=0.1)
    assert abs(model.next_prob(["a"], "b") - (2 + 0.1) / (2 + 0.1 * 2)) < 1e-12
    assert abs(model.next_prob(["b"], "a") - 0.1 / (0.1 * 2)) < 1e-12  # unseen context


def test_markov_validation():
    with pytest.raises(ValueError):
        markov_baseline(db_of(["a"]), order=0)
    with pytest.raises(ValueError):
        markov_baseline(db_of(), order=1)
    with pytest.raises(ValueError):
        markov_baseline(db_of(["a"]), order=1, alpha=0.0)


def test_markov_beats_empty_summ_model_on_chain_data():
    chain = db_of(*[["a", "b", "c"] * 3 for _ in range(10)])
    markov = markov_baseline(chain, order=1, alpha=0.1)
    markov_loss = markov.label_log_loss(chain, ["a", "b", "c"]).mean
    empty = fit(chain, ["a", "b", "c"], [], SummConfig(kappa=1))
    empty_loss = log_loss(empty, chain).mean
    assert markov_loss <= empty_loss


def test_markov_uniform_data_per_step_loss_near_log_alphabet():
    rng = random.Random(4242)
    alphabet = ["a", "b", "c", "d"]
    sequences = [[rng.choice(alphabet) for _ in range(10)] for _ in range(400)]
    train = db_of(*sequences[:200])
    test = db_of(*sequences[200:])
    for order in (1, 2):
        model = markov_baseline(train, order=order, alpha=0.1)
        n = sum(len(s) for s in test.sequences)
        per_step = model.sequence_log_loss(test) / n
        assert abs(per_step - math.log(4)) / math.log(4) < 0.05


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------


def test_simulate_is_deterministic_per_seed():
    planted, _ = planted_example()
    background = {lbl: 1 / 3 for lbl in "uvw"}
    one = simulate(planted, 10, 6, seed=21, background=background)
    two = simulate(planted, 10, 6, seed=21, background=background)
    other = simulate(planted, 10, 6, seed=22, background=background)
    assert one.sequences == two.sequences
    assert one.sequences != other.sequences


def test_simulate_empirical_frequencies_match_planted_theta():
    cfg = SummConfig(kappa=4)
    planted = planted_binary_model(
        "x", ["u"], {frozenset(): 0.1, frozenset({"u"}): 0.8}, cfg
    )
    db = simulate(planted, 1000, 10, seed=5, background={lbl: 0.25 for lbl in "uabc"})
    hits = {True: 0, False: 0}
    occurrences = {True: 0, False: 0}
    for seq in db.sequences:
        for i, event in enumerate(seq):
            present = "u" in seq[max(0, i - 4) : i]
            hits[present] += 1
            occurrences[present] += event == "x"
    for present, theta in ((True, 0.8), (False, 0.1)):
        n = hits[present]
        freq = occurrences[present] / n
        sigma = math.sqrt(theta * (1 - theta) / n)
        assert abs(freq - theta) < 3 * sigma


def test_simulate_length_one_sequences_use_empty_summary():
    planted, _ = planted_example()
    db = simulate(planted, 500, 1, seed=9, background={lbl: 1 / 3 for lbl in "uvw"})
    assert all(len(seq) == 1 for seq in db.sequences)
    freq = sum(seq[0] == "x" for seq in db.sequences) / 500
    sigma = math.sqrt(0.1 * 0.9 / 500)
    assert abs(freq - 0.1) < 3 * sigma


def test_simulate_validates_background():
    planted, _ = planted_example()
    with pytest.raises(ValueError):
        simulate(planted, 5, 5, seed=1, background={})
    with pytest.raises(ValueError):
        simulate(planted, 5, 5, seed=1, background={"x": 1.0})
    with pytest.raises(ValueError):
        simulate(planted, 5, 5, seed=1, background={"u": 0.4, "v": 0.4})


def test_simulate_rejects_incomplete_planted_tables():
    cfg = SummConfig(kappa=2)
    broken = SummModel(
        interest_labels=("x",),
        influencing_set=("u",),
        config=cfg,
        theta={("x", frozenset()): 0.2},  # missing the u-present entry
    )
    with pytest.raises(PlantedModelError):
        simulate(broken, 5, 5, seed=1, background={"u": 1.0})


def test_planted_binary_model_validates_tables():
    cfg = SummConfig()
    with pytest.raises(PlantedModelError):
        planted_binary_model("x", ["u"], {frozenset(): 0.2}, cfg)
    with pytest.raises(PlantedModelError):
        planted_binary_model("x", [], {frozenset(): 1.0}, cfg)


# ---------------------------------------------------------------------------
# model files
# ---------------------------------------------------------------------------


def test_model_round_trip_binary(tmp_path):
    train = db_of(["u", "x"], ["u", "y"], ["v", "y"])
    model = fit(train, ["x"], ["u"], BIN1)
    path = tmp_path / "model.jsonl"
    save_model(model, str(path))
    loaded = load_model(str(path))
    assert loaded.interest_labels == model.interest_labels
    assert loaded.influencing_set == model.influencing_set
    assert loaded.config == model.config
    assert loaded.theta == model.theta
    assert loaded.count_h == model.count_h
    assert loaded.count_xh == model.count_xh


def test_model_round_trip_ordinal(tmp_path):
    rng = random.Random(5)
    db = db_of(
        *[
            [rng.choice(["u", "v", "x"]) for _ in range(6)]
            for _ in range(10)
        ]
    )
    model = fit(db, ["x"], ["u", "v"], SummConfig(kappa=3, kind=KIND_ORDINAL))
    path = tmp_path / "model.jsonl"
    save_model(model, str(path))
    loaded = load_model(str(path))
    assert loaded.theta == model.theta
    assert loaded.config == model.config
