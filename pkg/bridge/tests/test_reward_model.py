import pytest

from codeloop_bridge.jobs import BridgeJob, JOB_TRAIN_REWARD_MODEL
from codeloop_bridge.reward_model import (
    TinyRewardModel,
    make_preference_pairs,
    pairwise_accuracy,
    train_reward_model,
)


def separable_toy_data(num_prompts=24, offset=0):
    """Correct solutions share a structural marker the byte pooling can see."""
    labeled = []
    for i in range(offset, offset + num_prompts):
        prompt = f"compute quantity number {i} from the given values"
        labeled.append((prompt, f"def solve(v):\n    return combine(v) + {i}\n", 1))
        labeled.append((prompt, f"def solve(v):\n    return merge(v) - {i}\n", 1))
        labeled.append((prompt, f"def solve(v):\n    raise Error({i})  # broken\n", 0))
        labeled.append((prompt, f"def solve(v):\n    assert False, {i}  # broken\n", 0))
    return labeled


def rm_job(**kw):
    defaults = dict(
        kind=JOB_TRAIN_REWARD_MODEL, learning_rate=2e-3, batch_size=32, epochs=4, seed=0
    )
    defaults.update(kw)
    return BridgeJob(**defaults)


class TestTraining:
    def test_bt_training_beats_chance_on_heldout(self):
        train = separable_toy_data(num_prompts=24)
        model, trace = train_reward_model(train, rm_job(loss_kind="BT"))
        assert trace[-1] < trace[0]
        held_out = separable_toy_data(num_prompts=8, offset=100)
        assert pairwise_accuracy(model, held_out) > 0.5

    def test_bce_training_also_works(self):
        model, trace = train_reward_model(separable_toy_data(12), rm_job(loss_kind="BCE"))
        assert trace[-1] < trace[0]

    def test_needs_both_labels(self):
        only_good = [("p", "def a():\n    return 1", 1), ("p", "def b():\n    return 2", 1)]
        with pytest.raises(ValueError, match="both correct and incorrect"):
            train_reward_model(only_good, rm_job())

    def test_defaults_documented(self):
        hp = BridgeJob(kind=JOB_TRAIN_REWARD_MODEL).hyperparameters()
        assert hp == {"learning_rate": 1e-6, "batch_size": 64, "epochs": 2}

    def test_engine_rollout_store_trains(self, engine_artifacts):
        from codeloop_bridge.dataset import load_labeled_candidates

        labeled = load_labeled_candidates(
            engine_artifacts["rollouts"], engine_artifacts["corpus"]
        )
        model, trace = train_reward_model(labeled, rm_job(epochs=2))
        assert len(trace) == 2
        prompt, code, _ = labeled[0]
        assert isinstance(model.score(prompt, code), float)


class TestScoring:
    def test_score_is_pure(self):
        model = TinyRewardModel(seed=1)
        a = model.score("a prompt", "def f():\n    return 1")
        b = model.score("a prompt", "def f():\n    return 1")
        assert a == b

    def test_save_load_identical_scores(self, tmp_path):
        model = TinyRewardModel(seed=2)
        path = tmp_path / "rm.pt"
        model.save(str(path))
        loaded = TinyRewardModel.load(str(path))
        assert loaded.score("p", "code") == model.score("p", "code")

    def test_pairs_cross_product(self):
        labeled = [("p", "g1", 1), ("p", "g2", 1), ("p", "b1", 0), ("q", "b2", 0)]
        pairs = make_preference_pairs(labeled)
        assert len(pairs) == 2  # q has no correct example, contributes nothing
