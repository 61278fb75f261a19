from __future__ import annotations

import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aaisynth.domain import AttachmentStyle, ChatMessage, InterviewTranscript, Role, ValidationError
from aaisynth.embedding import (
    NoUsableAnswers,
    clean_human_answer,
    embed_interview,
    human_transcript_record,
    ingest_human_transcripts,
    read_human_transcripts,
    split_by_domain,
)
from aaisynth.io import SchemaError
from aaisynth.mock import MOCK_HUMAN_LABELED, MockEmbedder, mock_human_transcripts
from test_retrieval import Table

LONG = "one two three four five six seven eight nine ten eleven"


def _t(answers, source="human", label=None) -> InterviewTranscript:
    turns = []
    for a in answers:
        turns.append(ChatMessage(Role.INTERVIEWER, "q?", len(turns)))
        turns.append(ChatMessage(Role.INTERVIEWEE, a, len(turns)))
    return InterviewTranscript("t", source, tuple(turns), label)


# ---------------------------------------------------------------- cleaning


def test_clean_drops_short_answer():
    assert clean_human_answer("I think... it was -- hard, yes") is None


def test_clean_keeps_ten_words():
    ten = "one two three four five six seven eight nine ten"
    assert clean_human_answer(ten) == ten
    assert clean_human_answer("one two three four five six seven eight nine") is None


def test_clean_example_eleven_words():
    assert clean_human_answer("a... b -- c d e f g h i j k") == "a b c d e f g h i j k"


def test_clean_spliced_markers():
    assert clean_human_answer("-...- " + LONG) == LONG
    assert clean_human_answer(".-.-.. " + LONG) is not None


markerish = st.text(alphabet=st.sampled_from(list("ab .-\t\n")), max_size=60)


@given(markerish | st.text(max_size=80))
def test_clean_idempotent(text):
    once = clean_human_answer(text)
    if once is not None:
        assert clean_human_answer(once) == once
        assert "..." not in once and "--" not in once
        assert len(once.split()) >= 10


# ---------------------------------------------------------------- embedding


def test_one_answer_is_its_vector():
    e = embed_interview(_t([LONG]), Table({LONG: [1.0, 2.0]}))
    assert e.vector.tolist() == [1.0, 2.0] and e.domain == "human_unlabeled"


def test_two_answers_average():
    a, b = LONG, LONG + " twelve"
    e = embed_interview(_t([a, b], "synthetic:m", AttachmentStyle.SECURE), Table({a: [1, 3], b: [3, 5]}))
    assert e.vector.tolist() == [2.0, 4.0]


def test_all_short_human_answers_error():
    with pytest.raises(NoUsableAnswers):
        embed_interview(_t(["Yes.", "No -- not really."]), MockEmbedder(8))


def test_synthetic_answers_not_cleaned():
    e = embed_interview(_t(["Yes..."], "synthetic:m", AttachmentStyle.SECURE), Table({"Yes...": [1.0]}))
    assert e.vector.tolist() == [1.0]


def test_questions_never_embedded():
    class Spy(MockEmbedder):
        seen: list[str] = []

        def embed(self, texts):
            self.seen.extend(texts)
            return super().embed(texts)

    spy = Spy(8)
    embed_interview(_t([LONG]), spy)
    assert spy.seen == [LONG]


@given(st.permutations(range(5)), st.integers(0, 1000))
def test_mean_permutation_invariant_and_bounded(perm, seed):
    rng = np.random.default_rng(seed)
    answers = [f"{LONG} {i}" for i in range(5)]
    table = {a: rng.normal(size=4) for a in answers}
    emb = Table(table)
    v1 = embed_interview(_t(answers), emb).vector
    v2 = embed_interview(_t([answers[i] for i in perm]), emb).vector
    np.testing.assert_allclose(v1, v2, rtol=0, atol=1e-15)
    M = np.vstack(list(table.values()))
    assert np.all(v1 >= M.min(axis=0) - 1e-15) and np.all(v1 <= M.max(axis=0) + 1e-15)


# ---------------------------------------------------------------- ingestion


def _write_corpus(path):
    path.mkdir()
    ts = mock_human_transcripts(0)
    for t in ts:
        rec = human_transcript_record(t)
        rec.pop("label", None)
        (path / f"{t.interview_id}.json").write_text(json.dumps(rec), encoding="utf-8")
    return ts, {t.interview_id: t.label.value for t in ts if t.label is not None}


def test_ingest_nine_plus_seventeen(tmp_path):
    ts, labels = _write_corpus(tmp_path / "human")
    ds = ingest_human_transcripts(tmp_path / "human", MockEmbedder(32), labels)
    parts = split_by_domain(ds)
    assert len(ds) == 26
    assert len(parts["human_labeled"]) == 9 and len(parts["human_unlabeled"]) == 17
    assert Counter(e.label for e in parts["human_labeled"].entries) == MOCK_HUMAN_LABELED
    assert MOCK_HUMAN_LABELED == {AttachmentStyle.AVOIDANT: 4, AttachmentStyle.PREOCCUPIED: 3, AttachmentStyle.SECURE: 2}


def test_ingest_empty_directory_warns(tmp_path, caplog):
    (tmp_path / "empty").mkdir()
    ds = ingest_human_transcripts(tmp_path / "empty", MockEmbedder(8))
    assert len(ds) == 0 and "no human transcripts" in caplog.text


def test_ingest_unknown_label_id(tmp_path):
    _write_corpus(tmp_path / "human")
    with pytest.raises(ValidationError, match="nobody"):
        read_human_transcripts(tmp_path / "human", {"nobody": "secure"})


def test_schema_error_names_file_and_line(tmp_path):
    p = tmp_path / "h.jsonl"
    good = json.dumps({"interview_id": "a", "turns": [{"role": "interviewer", "text": "q"}, {"role": "interviewee", "text": "a"}]})
    p.write_text(good + "\n" + json.dumps({"interview_id": "b"}) + "\n", encoding="utf-8")
    with pytest.raises(SchemaError) as info:
        read_human_transcripts(p)
    assert info.value.line == 2 and info.value.path == p


def test_consecutive_turns_merged_and_followups_kept(tmp_path):
    p = tmp_path / "h.jsonl"
    rec = {
        "interview_id": "a",
        "label": "Secure",
        "turns": [
            {"role": "interviewee", "text": "hello"},
            {"role": "interviewer", "text": "q1"},
            {"role": "interviewee", "text": "part one"},
            {"role": "interviewee", "text": "part two"},
            {"role": "interviewer", "text": "follow-up"},
            {"role": "interviewee", "text": "more"},
            {"role": "interviewer", "text": "dangling"},
        ],
    }
    p.write_text(json.dumps(rec) + "\n", encoding="utf-8")
    (t,) = read_human_transcripts(p)
    assert t.answers() == ["part one part two", "more"]
    assert t.questions() == ["q1", "follow-up"] and t.label is AttachmentStyle.SECURE


def test_mock_human_corpus_shape():
    ts = mock_human_transcripts(0)
    assert len({t.n_pairs for t in ts}) > 1
    assert any("..." in a or "--" in a for t in ts for a in t.answers())
    assert mock_human_transcripts(0) == ts
