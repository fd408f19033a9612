"""Candidate ranking, question templates and the clarification state machine."""
import pytest

from convoplan.annotation import fallback_annotate
from convoplan.dialogue import (
    INCAPABLE_TEXT,
    ArgTypeProfile,
    DialogueError,
    DialogueState,
    IllegalStateError,
    build_stats,
    export_transcript,
    fill_slots,
    load_question_templates,
    load_similarity_table,
    profile_arguments,
    rank_by_similarity,
    rank_candidates,
)
from convoplan.tasks import Span

from conftest import DATA


# ---------------------------------------------------------------------------
# Ranking
# ---------------------------------------------------------------------------


def test_rank_candidates_hand_example(catalog):
    stats = build_stats([
        ("Placing", frozenset({"theme", "goal"})),
        ("Placing", frozenset({"theme"})),
        ("Taking", frozenset({"theme", "source"})),
    ])
    ranked = rank_candidates(ArgTypeProfile(frozenset({"theme", "goal"})), stats, catalog)
    assert ranked.items[0] == ("Placing", 1.0)
    assert dict(ranked.items)["Taking"] == 0.0
    assert not ranked.uninformative


def test_rank_candidates_uses_nonstrict_inclusion(catalog):
    stats = build_stats([("Taking", frozenset({"theme"}))])
    ranked = rank_candidates(ArgTypeProfile(frozenset({"theme"})), stats, catalog)
    assert ranked.items[0] == ("Taking", 1.0)


def test_rank_candidates_all_zero_is_uniform_and_flagged(catalog):
    stats = build_stats([("Taking", frozenset({"theme"}))])
    ranked = rank_candidates(ArgTypeProfile(frozenset({"cotheme", "device"})), stats, catalog)
    assert ranked.uninformative
    assert len(set(score for _, score in ranked.items)) == 1
    assert ranked.names == catalog.names  # catalog-order tie-break


def test_rank_candidates_empty_stats_error(catalog):
    from convoplan.dialogue import TaskStats

    with pytest.raises(DialogueError):
        rank_candidates(ArgTypeProfile(frozenset()), TaskStats(instances={}), catalog)


def test_rank_by_similarity(catalog):
    table = load_similarity_table(DATA / "similarity.tsv")
    ranked = rank_by_similarity("grasp", table, catalog)
    assert ranked.names[0] == "Taking"
    unknown = rank_by_similarity("zorble", table, catalog)
    assert unknown.uninformative


def test_similarity_table_validation(tmp_path):
    bad = tmp_path / "sim.tsv"
    bad.write_text("grasp\tTaking\t1.5\n")
    with pytest.raises(DialogueError, match="outside"):
        load_similarity_table(bad)
    bad.write_text("grasp Taking 0.5\n")
    with pytest.raises(DialogueError, match="expected"):
        load_similarity_table(bad)


# ---------------------------------------------------------------------------
# Templates and slot filling
# ---------------------------------------------------------------------------


def test_question_templates_loaded(catalog):
    templates = load_question_templates(DATA / "questions.txt", catalog)
    assert templates["Placing"].suggest == "Is this task similar to placing ?"
    assert templates["Placing"].clarify == "Do you want me to put [theme] in [goal] ?"
    assert templates["Taking"].missing["source"] == "From where do I take it?"
    # unlisted types fall back to generated defaults
    assert "similar to" in templates["Being-located"].suggest


def test_fill_slots():
    profile = ArgTypeProfile(
        frozenset({"theme", "goal"}),
        {"theme": Span(1, 3, "some water"), "goal": Span(3, 6, "to the bowl")},
    )
    filled = fill_slots("Do you want me to put [theme] in [goal] ?", profile)
    assert filled == "Do you want me to put some water in the bowl ?"
    assert fill_slots("take [theme] from [source] ?", profile) == \
        "take some water from something ?"


# ---------------------------------------------------------------------------
# Argument profiling
# ---------------------------------------------------------------------------


def test_profile_arguments_task_free(full_models):
    profile = profile_arguments(
        fallback_annotate("add some water to the bowl"), full_models["argtype"]
    )
    assert profile.observed == {"theme", "goal"}
    assert profile.spans["theme"].text == "some water"


# ---------------------------------------------------------------------------
# State machine
# ---------------------------------------------------------------------------


def open_forced(engine, text, **kwargs):
    return engine.open_session(fallback_annotate(text), force_dialogue=True, **kwargs)


def test_high_confidence_bypasses_dialogue(engine):
    session = engine.open_session(fallback_annotate("take the book from the shelf"))
    assert session.state is DialogueState.READY
    (inst,) = session.resolved
    assert inst.task_type == "Taking"
    assert session.question_count == 0


def test_high_confidence_with_missing_argument_asks(engine):
    session = engine.open_session(fallback_annotate("put the cup"))
    assert session.state is DialogueState.ASK_MISSING_ARG
    question = engine.next_utterance(session)
    assert question == "Where do I put it ?"
    engine.handle_answer(session, "on the shelf")
    assert session.state is DialogueState.READY
    assert session.resolved[0].arguments["goal"].text == "on the shelf"
    assert session.question_count == 1


def test_novel_verb_walkthrough(engine):
    session = open_forced(engine, "add some water to the bowl")
    assert session.state is DialogueState.CONFIRM_PREDICTION
    assert engine.next_utterance(session) == "Is this task similar to placing ?"
    engine.handle_answer(session, "I didn't understand")
    assert session.state is DialogueState.CLARIFY
    assert engine.next_utterance(session) == "Do you want me to put some water in the bowl ?"
    engine.handle_answer(session, "Yes")
    assert session.state is DialogueState.READY
    assert session.accepted_type == "Placing"
    assert session.resolved[0].arguments["theme"].text == "some water"
    assert session.question_count == 2
    assert session.transcript[-1]["text"] == "Got it."


def test_rejection_walks_suggestions_in_rank_order(engine):
    session = open_forced(engine, "add some water to the bowl")
    asked = []
    for _ in range(3):
        asked.append(engine.next_utterance(session))
        engine.handle_answer(session, "no")
    assert asked[0] == "Is this task similar to placing ?"
    assert asked[1] == "Is this task similar to bringing ?"
    assert session.question_count == 3


def test_exhausting_candidates_is_incapable(engine, catalog):
    session = open_forced(engine, "add some water to the bowl")
    for _ in range(len(catalog.names)):
        engine.next_utterance(session)
        if session.state is DialogueState.INCAPABLE:
            break
        engine.handle_answer(session, "no")
    assert session.state is DialogueState.INCAPABLE
    assert session.transcript[-1]["text"] == INCAPABLE_TEXT
    with pytest.raises(IllegalStateError):
        engine.next_utterance(session)


def test_question_count_law(engine, corpus, catalog):
    """questions asked = 1 mandatory confirmation + rank among suggestions."""
    from convoplan.harness import stats_from_corpus

    stats = stats_from_corpus(corpus)
    for text, true_task in [
        ("add some water to the bowl", "Placing"),
        ("add some water to the bowl", "Bringing"),
        ("grasp the book", "Taking"),
    ]:
        session = open_forced(engine, text)
        sequence = (session.confirm_target,) + session.suggestions
        expected = 1 + sequence.index(true_task)
        while session.state not in (DialogueState.READY, DialogueState.INCAPABLE,
                                    DialogueState.ASK_MISSING_ARG):
            engine.next_utterance(session)
            if session.state is DialogueState.INCAPABLE:
                break
            asked = engine._current_candidate(session)
            engine.handle_answer(session, "yes" if asked == true_task else "no")
        assert session.question_count == expected, text
        assert session.accepted_type == true_task


def test_unparseable_answer_reasks_once_then_rejects(engine):
    session = open_forced(engine, "grasp the book")
    first = engine.next_utterance(session)
    engine.handle_answer(session, "banana")
    assert engine.next_utterance(session) == first  # re-ask
    engine.handle_answer(session, "banana")
    assert session.state is not DialogueState.CONFIRM_PREDICTION  # treated as rejection


def test_external_ranker_overrides_counts(engine, catalog):
    table = load_similarity_table(DATA / "similarity.tsv")
    ranker = rank_by_similarity("release", table, catalog)
    session = open_forced(engine, "release the bag", ranker=ranker)
    assert engine.next_utterance(session) == "Is this task similar to releasing ?"


def test_missing_argument_unanswerable_reasks_then_gives_up(engine):
    session = engine.open_session(fallback_annotate("put the cup"))
    engine.next_utterance(session)
    engine.handle_answer(session, "it")  # pronoun: no groundable head noun
    engine.next_utterance(session)
    engine.handle_answer(session, "it")
    assert session.state is DialogueState.READY
    assert "goal" not in session.resolved[0].arguments
    assert session.unfilled == ["0:goal"]


def test_transcript_export_shape(engine):
    session = engine.open_session(fallback_annotate("take the book from the shelf"))
    rows = export_transcript(session)
    assert rows[0]["speaker"] == "human"
    assert all({"speaker", "text", "state", "timestamp"} <= set(r) for r in rows)
