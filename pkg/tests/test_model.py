import math

import numpy as np
import pytest
import torch
from pydantic import ValidationError

from src.config import ModelConfig, TaskMode
from src.errors import ConfigurationError, InputError, SequenceTooLongError
from src.inputs import EncodedPair
from src.model import (
    TaskLogits,
    collate,
    count_parameters,
    expected_parameter_count,
    forward,
    init_model,
    load_checkpoint,
    save_checkpoint,
)
from src.training import predict, probabilities_from_logits


def pair(i, length, vocab=50, seed=0):
    rng = np.random.default_rng(seed + i)
    body = [int(x) for x in rng.integers(5, vocab, size=length - 3)]
    half = len(body) // 2
    ids = (2, *body[:half], 3, *body[half:], 4)
    return EncodedPair(id=f"p{i}", comment_ids=tuple(body[:half]), code_ids=tuple(body[half:]), input_ids=ids)


@pytest.fixture
def small_config():
    return ModelConfig(vocab_size=50, hidden=32, layers=2, heads=4, max_len=64, dropout=0.1, task_mode=TaskMode.MULTI, seed=7)


class TestInitModel:
    def test_same_seed_same_parameters(self, small_config):
        a, b = init_model(small_config), init_model(small_config)
        for (name_a, p_a), (name_b, p_b) in zip(a.state_dict().items(), b.state_dict().items()):
            assert name_a == name_b
            assert torch.equal(p_a, p_b)

    def test_different_seed(self, small_config):
        a = init_model(small_config)
        b = init_model(small_config.model_copy(update={"seed": 8}))
        assert not torch.equal(a.encoder.token_embedding.weight, b.encoder.token_embedding.weight)

    def test_multi_and_single_share_encoder_init(self, small_config):
        multi = init_model(small_config)
        single = init_model(small_config.model_copy(update={"task_mode": TaskMode.ST_SATD}))
        for (name, p), (_, q) in zip(multi.encoder.state_dict().items(), single.encoder.state_dict().items()):
            assert torch.equal(p, q), name
        assert set(multi.heads.keys()) == {"satd", "vuln"}
        assert set(single.heads.keys()) == {"satd"}

    def test_global_rng_untouched(self, small_config):
        torch.manual_seed(123)
        expected = torch.rand(3)
        torch.manual_seed(123)
        init_model(small_config)
        assert torch.equal(torch.rand(3), expected)

    def test_parameter_count_closed_form(self):
        config = ModelConfig(vocab_size=1000, hidden=64, layers=2, heads=4, max_len=512, task_mode=TaskMode.MULTI)
        # embeddings 64000 + 32768, two blocks of 49984, final norm 128, two heads of 130
        assert count_parameters(init_model(config)) == 197_124
        assert expected_parameter_count(config) == 197_124
        single = config.model_copy(update={"task_mode": TaskMode.ST_VULN})
        assert count_parameters(init_model(single)) == expected_parameter_count(single) == 196_994

    def test_heads_must_divide_hidden(self):
        with pytest.raises(ValidationError):
            ModelConfig(hidden=30, heads=4)
        with pytest.raises(ConfigurationError):
            init_model(ModelConfig.model_construct(hidden=30, heads=4))


class TestForward:
    def test_task_logits_presence(self, small_config):
        batch = [pair(0, 10)]
        (multi,) = forward(init_model(small_config), batch)
        assert multi.satd is not None and multi.vuln is not None
        (single,) = forward(init_model(small_config.model_copy(update={"task_mode": TaskMode.ST_VULN})), batch)
        assert single.satd is None and single.vuln is not None
        assert len(single.vuln) == 2

    def test_padding_invariance(self, small_config):
        model = init_model(small_config).double()
        target = pair(0, 9)
        others = [pair(i, length) for i, length in zip(range(1, 8), (30, 12, 64, 20, 9, 41, 17))]
        (alone,) = forward(model, [target])
        in_batch = forward(model, [others[0], others[1], target] + others[2:])[2]
        for task in ("satd", "vuln"):
            np.testing.assert_allclose(alone.get(task), in_batch.get(task), atol=1e-6)

    def test_attention_rows_sum_to_one(self, small_config):
        model = init_model(small_config).eval()
        batch = [pair(0, 12), pair(1, 30)]
        input_ids, mask = collate(batch, small_config.max_len)
        with torch.no_grad():
            _, attentions = model(input_ids, mask, return_attention=True)
        assert len(attentions) == small_config.layers
        for weights in attentions:
            assert weights.shape == (2, small_config.heads, 30, 30)
            torch.testing.assert_close(weights.sum(dim=-1), torch.ones(2, small_config.heads, 30), atol=1e-6, rtol=0)
            # padded keys of the short record get no attention
            assert float(weights[0, :, :, 12:].abs().max()) == 0.0

    def test_permutation(self, small_config):
        model = init_model(small_config)
        batch = [pair(i, 8 + 3 * i) for i in range(5)]
        out = forward(model, batch)
        reversed_out = forward(model, batch[::-1])
        for a, b in zip(out, reversed(reversed_out)):
            np.testing.assert_allclose(a.satd, b.satd, atol=1e-5)
            np.testing.assert_allclose(a.vuln, b.vuln, atol=1e-5)

    def test_dropout_only_when_training(self, small_config):
        model = init_model(small_config)
        model.eval()
        batch = [pair(0, 20)]
        assert forward(model, batch) == forward(model, batch)
        torch.manual_seed(0)
        trained = [forward(model, batch, training=True)[0].satd for _ in range(3)]
        assert len(set(trained)) > 1
        assert not model.training

    def test_over_length(self, small_config):
        with pytest.raises(SequenceTooLongError, match="p3"):
            forward(init_model(small_config), [pair(0, 10), pair(3, 65)])

    def test_empty_batch(self, small_config):
        with pytest.raises(InputError):
            forward(init_model(small_config), [])

    def test_zeroing_one_head_leaves_the_other(self, small_config):
        model = init_model(small_config)
        batch = [pair(0, 15), pair(1, 22)]
        before = forward(model, batch)
        with torch.no_grad():
            for p in model.heads["satd"].parameters():
                p.zero_()
        after = forward(model, batch)
        for b, a in zip(before, after):
            assert a.vuln == b.vuln
            assert a.satd == (0.0, 0.0)


class TestCollate:
    def test_right_padding(self):
        ids, mask = collate([pair(0, 5), pair(1, 8)], max_len=16)
        assert ids.shape == (2, 8)
        assert ids.dtype == torch.long
        assert mask.dtype == torch.bool
        assert mask[0].tolist() == [True] * 5 + [False] * 3
        assert ids[0, 5:].tolist() == [0, 0, 0]


class TestProbabilities:
    def test_softmax_pair(self):
        probs = probabilities_from_logits(torch.tensor([[2.0, -1.0]]))
        assert float(probs[0, 0]) == pytest.approx(1 / (1 + math.exp(-3.0)), abs=1e-6)
        assert float(probs[0, 0]) == pytest.approx(0.9526, abs=1e-4)

    def test_shift_invariance(self):
        logits = torch.tensor([[2.0, -1.0], [0.3, 0.7]], dtype=torch.float64)
        torch.testing.assert_close(probabilities_from_logits(logits), probabilities_from_logits(logits + 17.5))

    def test_predict_argmax(self, small_config):
        model = init_model(small_config)
        batch = [pair(i, 6 + i) for i in range(4)]
        logits = forward(model, batch)
        predictions = predict(model, batch, batch_size=3)
        for task in ("satd", "vuln"):
            expected = [lg.get(task)[1] > lg.get(task)[0] for lg in logits]
            assert predictions[task].labels == expected
            np.testing.assert_allclose(predictions[task].probabilities.sum(axis=1), 1.0, atol=1e-6)


class TestCheckpoint:
    def test_round_trip(self, small_config, tmp_path):
        model = init_model(small_config)
        path = save_checkpoint(model, tmp_path / "model.pt", manifest_id="sha256:abc", extra={"input_mode": "OUT"})
        loaded, meta = load_checkpoint(path)
        assert not loaded.training
        assert loaded.config == small_config
        assert meta["manifest_id"] == "sha256:abc"
        assert meta["seed"] == small_config.seed
        assert meta["extra"] == {"input_mode": "OUT"}
        for (name, p), (_, q) in zip(model.state_dict().items(), loaded.state_dict().items()):
            assert torch.equal(p, q), name

    def test_missing(self, tmp_path):
        with pytest.raises(InputError):
            load_checkpoint(tmp_path / "absent.pt")


def test_task_logits_get():
    logits = TaskLogits(satd=(1.0, 2.0))
    assert logits.get("satd") == (1.0, 2.0)
    assert logits.get("vuln") is None
