"""
Attention, context and one decoder step.
"""
import numpy as np
import pytest

from covnmt.coverage import CoverageState, init_states
from covnmt.decoder import attend, context, decode_step, initial_state, predict
from covnmt.encoder import encode, gru_cell
from covnmt.errors import ConfigError, DimensionError
from covnmt.params import CoverageMode
from covnmt.tensor import concat, constant, masked_softmax
from covnmt.vocab import BOS, PAD, embed_one


def zero_all(params):
    for _, tensor in params.items():
        tensor.data[...] = 0.0


@pytest.mark.parametrize('mode', ['base', 'gru', 'sub', 'both'])
def test_attention_is_a_distribution_with_zero_padding(mode, make_model):
    model = make_model(mode)
    ids = [4, PAD, 5, 6]
    enc = encode(model.params, ids)
    coverage = init_states(model.params, model.mode, ids)
    record = attend(model.params, initial_state(model.params, enc), enc, BOS, coverage, model.mode)
    assert record.probs.shape == (4,)
    assert record.probs.data[1] == 0.0
    assert abs(float(record.probs.data.sum()) - 1.0) < 1e-6
    assert record.pre_activation.shape == (4, model.shape.d_att)


def test_zero_parameters_give_uniform_attention_and_predictions(wide, make_model):
    model = make_model('both', tgt_vocab=10)
    zero_all(model.params)
    ids = [4, 5, 6]
    enc = encode(model.params, ids)
    state = initial_state(model.params, enc)
    coverage = init_states(model.params, model.mode, ids)
    record = attend(model.params, state, enc, BOS, coverage, model.mode)
    assert np.allclose(record.probs.data, 1.0 / 3)
    step = decode_step(model.params, state, BOS, context(record.probs, enc))
    assert np.allclose(predict(model.params, step, BOS).data, 0.1)


def test_context_is_attention_weighted_sum(wide, make_model):
    model = make_model()
    enc = encode(model.params, [4, 5, 6])
    record = attend(model.params, initial_state(model.params, enc), enc, BOS, (), CoverageMode.BASE)
    H = context(record.probs, enc)
    assert np.allclose(H.data, record.probs.data @ enc.states.data)


def test_initial_state_reads_backward_state_of_first_word(wide, make_model):
    model = make_model(width=4)
    model.params['dec_init.W'].data[...] = np.eye(4)
    enc = encode(model.params, [PAD, 5, 6])
    s0 = initial_state(model.params, enc)
    assert np.allclose(s0.s.data, np.tanh(enc.states.data[1, :4]))


def test_attend_rejects_coverage_of_another_mode(make_model):
    model = make_model('base')
    other = make_model('gru')
    enc = encode(model.params, [4, 5])
    coverage = init_states(other.params, other.mode, [4, 5])
    with pytest.raises(ConfigError):
        attend(model.params, initial_state(model.params, enc), enc, BOS, coverage, model.mode)


def test_attend_rejects_coverage_of_another_length(make_model):
    model = make_model('sub')
    enc = encode(model.params, [4, 5])
    coverage = init_states(model.params, model.mode, [4, 5, 6])
    with pytest.raises(DimensionError):
        attend(model.params, initial_state(model.params, enc), enc, BOS, coverage, model.mode)


def test_context_rejects_wrong_length(make_model):
    model = make_model()
    enc = encode(model.params, [4, 5, 6])
    record = attend(model.params, initial_state(model.params, enc), enc, BOS, (), CoverageMode.BASE)
    short = encode(model.params, [4, 5])
    with pytest.raises(DimensionError):
        context(record.probs, short)


def test_zero_coverage_attends_like_the_base_model(wide, make_model):
    model = make_model('gru')
    ids = [4, PAD, 5, 6]
    enc = encode(model.params, ids)
    state = initial_state(model.params, enc)
    empty = CoverageState(constant(np.zeros((4, model.shape.d_c))), 'gru', 0, enc.mask)
    covered = attend(model.params, state, enc, BOS, (empty,), CoverageMode.GRU)
    plain = attend(model.params, state, enc, BOS, (), CoverageMode.BASE)
    assert np.array_equal(covered.probs.data, plain.probs.data)


def test_attention_ignores_a_constant_logit_shift(wide, make_model):
    model = make_model('both')
    ids = [4, 5, PAD, 6]
    enc = encode(model.params, ids)
    record = attend(model.params, initial_state(model.params, enc), enc, BOS,
                    init_states(model.params, model.mode, ids), model.mode)
    shifted = masked_softmax(constant(record.logits.data + 7.0), enc.mask)
    assert np.allclose(shifted.data, record.probs.data, atol=1e-12)


def test_decoder_step_is_a_gru_over_word_and_context(wide, make_model):
    model = make_model('sub')
    enc = encode(model.params, [4, 5, 6])
    state = initial_state(model.params, enc)
    H = context(attend(model.params, state, enc, BOS, (), CoverageMode.BASE).probs, enc)
    y = embed_one(model.params.table('tgt_embed'), 5)
    expected = gru_cell(model.params.gru('dec'), concat([y, H]), state.s)
    assert np.array_equal(decode_step(model.params, state, 5, H).s.data, expected.data)
