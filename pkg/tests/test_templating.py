import pytest
from hypothesis import given
from hypothesis import strategies as st

from otg_forge.errors import EmptyTargetLexicon
from otg_forge.lexicon import O, OTG, TaggedSentence
from otg_forge.templating import REP, Template, build_weak_pool, extract_target_lexicon, parse_slotted, templatize


def _tagged(tokens, otg, doc_id="d"):
    return TaggedSentence(doc_id, tuple(tokens), tuple(OTG if t in otg else O for t in tokens))


def test_transcript_source_template():
    toks = ["the", "problem", "with", "honda", "crv", "'s", "is", "that", "they", "are", "boring"]
    t = templatize(_tagged(toks, {"honda", "crv", "boring"}))
    assert t.slotted_tokens == ("the", "problem", "with", REP, "'s", "is", "that", "they", "are", REP)
    assert t.slot_count == 2
    assert t.removed_otg == (("honda", "crv"), ("boring",))


def test_all_o_and_all_otg():
    toks = ["a", "b", "c"]
    assert templatize(_tagged(toks, set())).slotted_tokens == tuple(toks)
    t = templatize(_tagged(toks, set(toks)))
    assert t.slotted_tokens == (REP,) and t.slot_count == 1


def test_target_lexicon_from_transcript():
    lex = extract_target_lexicon([_tagged(["bananas", "are", "very", "yucky", "!"], {"bananas", "yucky"})])
    assert lex.unigrams == {"bananas", "yucky"} and not lex.phrases


def test_target_lexicon_dedup_and_empty():
    sents = [_tagged(["x", "y"], {"x"}, str(i)) for i in range(3)]
    assert extract_target_lexicon(sents).unigrams == {"x"}
    with pytest.raises(EmptyTargetLexicon):
        extract_target_lexicon([_tagged(["a"], set())])


def test_weak_pool_transcript_and_dedup():
    a = _tagged(["i", "hate", "sundays", "--", "they", "are", "so", "dull"], {"sundays", "dull"}, "w1")
    b = _tagged(["i", "hate", "mondays", "--", "they", "are", "so", "slow"], {"mondays", "slow"}, "w2")
    pool = build_weak_pool([a, b])
    assert len(pool) == 1
    assert pool[0].doc_id == "w1"
    assert pool[0].slotted_text == "i hate REP -- they are so REP"
    assert pool[0].removed_otg == ()
    assert build_weak_pool([]) == []


def test_record_round_trip():
    t = Template("x", ("i", "hate", REP))
    rec = t.to_record()
    assert rec == {"doc_id": "x", "slotted_text": "i hate REP", "slot_count": 1}
    assert Template.from_record(rec) == t
    assert parse_slotted("I hate REP -- REP !") == ["i", "hate", REP, "--", REP, "!"]


TOKENS = st.lists(st.sampled_from(["a", "b", "c", "d"]), min_size=0, max_size=20)


@given(TOKENS, st.data())
def test_round_trip_and_slot_count(tokens, data):
    tags = data.draw(st.lists(st.sampled_from([O, OTG]), min_size=len(tokens), max_size=len(tokens)))
    s = TaggedSentence("d", tuple(tokens), tuple(tags))
    t = templatize(s)
    assert t.fill(t.removed_otg) == list(tokens)
    runs = sum(1 for i, tag in enumerate(tags) if tag == OTG and (i == 0 or tags[i - 1] == O))
    assert t.slot_count == runs
    pooled = build_weak_pool([s])[0]
    kept = [tok for tok in pooled.slotted_tokens if tok != REP]
    assert kept == [tok for tok, tag in zip(tokens, tags) if tag == O]
