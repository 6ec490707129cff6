import itertools
import json

import pytest

from netedu import dissect, exercises, fixtures
from netedu.exercises import (AnswerOption, Bank, ConfigError, Feedback,
                              InputError, McqQuestion, ReorderQuestion,
                              ShortAnswerQuestion, TraceMaskQuestion, Verdict,
                              grade_mcq, grade_reorder, grade_short,
                              grade_trace_mask, instantiate_mcq,
                              instantiate_reorder, load_bank,
                              render_trace_mask)


def make_mcq(n_correct=2, n_incorrect=4, n=3):
    return McqQuestion(
        id="q1", prompt="pick one",
        correct_pool=[AnswerOption(f"right {i}", f"yes, because {i}")
                      for i in range(n_correct)],
        incorrect_pool=[AnswerOption(f"wrong {i}", f"no, because {i}")
                        for i in range(n_incorrect)],
        n=n)


@pytest.fixture(scope="module")
def handshake():
    return fixtures.make_handshake_capture()


@pytest.fixture(scope="module")
def mask_question(handshake):
    return TraceMaskQuestion(
        id="m1", prompt="predict", capture=handshake, packet_index=1,
        masked_paths=["tcp.seq", "tcp.ack"],
        comments={"tcp.ack": "the SYN+ACK acks the client ISN plus one"})


class TestMcq:
    def test_instance_shape(self):
        inst = instantiate_mcq(make_mcq(), seed=5)
        assert len(inst.displayed) == 4
        kinds = [kind for kind, _ in inst.displayed]
        assert kinds.count("correct") == 1
        assert kinds.count("incorrect") == 3

    def test_minimal_pools(self):
        inst = instantiate_mcq(make_mcq(1, 1, 1), seed=9)
        assert sorted(kind for kind, _ in inst.displayed) == [
            "correct", "incorrect"]

    def test_determinism(self):
        q = make_mcq()
        assert instantiate_mcq(q, 123).displayed == \
            instantiate_mcq(q, 123).displayed

    def test_pool_coverage_over_seeds(self):
        q = make_mcq()
        seen_correct = set()
        seen_incorrect = set()
        for seed in range(1000):
            inst = instantiate_mcq(q, seed)
            kinds = [k for k, _ in inst.displayed]
            assert kinds.count("correct") == 1
            assert kinds.count("incorrect") == q.n
            for kind, idx in inst.displayed:
                (seen_correct if kind == "correct"
                 else seen_incorrect).add(idx)
        assert seen_correct == {0, 1}
        assert seen_incorrect == {0, 1, 2, 3}

    def test_n_larger_than_pool_rejected(self):
        with pytest.raises(ConfigError):
            make_mcq(n_incorrect=2, n=3)

    def test_missing_comment_rejected(self):
        with pytest.raises(ConfigError):
            McqQuestion("q", "p", [AnswerOption("a", "")],
                        [AnswerOption("b", "c")], 1)

    def test_grade_correct_choice(self):
        inst = instantiate_mcq(make_mcq(), seed=5)
        correct_at = [i for i, (k, _) in enumerate(inst.displayed)
                      if k == "correct"][0]
        verdict = grade_mcq(inst, correct_at)
        assert verdict.correct and verdict.score == 1.0
        assert "yes" in verdict.feedback[0].comment

    def test_grade_wrong_choice_gives_its_comment(self):
        inst = instantiate_mcq(make_mcq(), seed=5)
        wrong_at = [i for i, (k, _) in enumerate(inst.displayed)
                    if k == "incorrect"][0]
        verdict = grade_mcq(inst, wrong_at)
        assert not verdict.correct and verdict.score == 0.0
        assert "no, because" in verdict.feedback[0].comment

    def test_out_of_range_choice(self):
        inst = instantiate_mcq(make_mcq(), seed=5)
        with pytest.raises(InputError):
            grade_mcq(inst, 99)


class TestShortAnswers:
    def test_stuffing_grader(self):
        q = ShortAnswerQuestion("s", "stuff it", "stuffing", "7e")
        assert grade_short(q, "7E 7D 5E 7E").correct
        assert grade_short(q, "7e7d5e7e").correct
        verdict = grade_short(q, "7e 7e 5e 7e")
        assert not verdict.correct
        assert "offset 1" in verdict.feedback[0].comment

    def test_integer_normalization(self):
        q = ShortAnswerQuestion("i", "how many", "integer", "3")
        assert grade_short(q, "0x3").correct
        assert grade_short(q, " 3 ").correct
        assert not grade_short(q, "4").correct

    def test_integer_unparseable_is_feedback_not_error(self):
        q = ShortAnswerQuestion("i", "how many", "integer", "3")
        verdict = grade_short(q, "three")
        assert not verdict.correct
        assert "parse" in verdict.feedback[0].comment

    def test_hex_bytes_first_mismatch_offset(self):
        q = ShortAnswerQuestion("h", "frame", "hex_bytes", "01 02 03")
        assert grade_short(q, "01:02:03").correct
        verdict = grade_short(q, "01 02 07")
        assert "offset 2" in verdict.feedback[0].comment

    def test_exact_text_whitespace_collapse(self):
        q = ShortAnswerQuestion("t", "word", "exact_text", "three way")
        assert grade_short(q, "  three   way ").correct
        assert not grade_short(q, "two way").correct

    def test_bad_grader_config(self):
        with pytest.raises(ConfigError):
            ShortAnswerQuestion("x", "p", "regex", "a")
        with pytest.raises(ConfigError):
            ShortAnswerQuestion("x", "p", "hex_bytes", "zz")


class TestTraceMask:
    def test_render_hides_values(self, mask_question):
        tree = render_trace_mask(mask_question)
        text = dissect.render_tree(tree)
        assert "tcp.seq = ????" in text
        assert str(fixtures.SERVER_ISN) not in text
        assert str(fixtures.CLIENT_ISN + 1) not in text
        # idempotent rendering
        assert dissect.render_tree(render_trace_mask(mask_question)) == text

    def test_empty_mask_rejected(self, handshake):
        with pytest.raises(ConfigError):
            TraceMaskQuestion("m", "p", handshake, 0, [])

    def test_unresolvable_mask_rejected(self, handshake):
        with pytest.raises(ConfigError):
            TraceMaskQuestion("m", "p", handshake, 0, ["tcp.bogus"])

    def test_all_fields_exact(self, mask_question):
        answers = {"tcp.seq": str(fixtures.SERVER_ISN),
                   "tcp.ack": str(fixtures.CLIENT_ISN + 1)}
        verdict = grade_trace_mask(mask_question, answers)
        assert verdict.correct and verdict.score == 1.0

    def test_hex_answers_accepted(self, mask_question):
        answers = {"tcp.seq": hex(fixtures.SERVER_ISN),
                   "tcp.ack": f"0x{fixtures.CLIENT_ISN + 1:08X}"}
        assert grade_trace_mask(mask_question, answers).correct

    def test_off_by_one_ack_cites_handshake_rule(self, mask_question):
        answers = {"tcp.seq": str(fixtures.SERVER_ISN),
                   "tcp.ack": str(fixtures.CLIENT_ISN)}  # forgot the +1
        verdict = grade_trace_mask(mask_question, answers)
        assert verdict.score == 0.5
        fb = {f.target: f.comment for f in verdict.feedback}
        assert "ISN plus one" in fb["tcp.ack"]

    def test_empty_answers(self, mask_question):
        verdict = grade_trace_mask(mask_question, {})
        assert verdict.score == 0.0
        assert len(verdict.feedback) == 2
        assert all("unanswered" in f.comment for f in verdict.feedback)

    def test_strict_mode_is_binary(self, mask_question):
        answers = {"tcp.seq": str(fixtures.SERVER_ISN),
                   "tcp.ack": str(fixtures.CLIENT_ISN)}  # one of two right
        assert grade_trace_mask(mask_question, answers).score == 0.5
        strict = grade_trace_mask(mask_question, answers, strict=True)
        assert strict.score == 0.0 and not strict.correct


class TestReorder:
    def _question(self, handshake):
        return ReorderQuestion("r", "reorder", handshake, [0, 1, 2])

    def test_exactly_one_permutation_correct(self, handshake):
        q = self._question(handshake)
        inst = instantiate_reorder(q, seed=3)
        winners = []
        for perm in itertools.permutations(range(3)):
            verdict = grade_reorder(inst, list(perm))
            if verdict.correct:
                winners.append(perm)
            else:
                assert verdict.feedback
        assert len(winners) == 1
        # the winning permutation inverts the display shuffle
        k_perm = winners[0]
        for k, display_pos in enumerate(k_perm):
            assert inst.display_order[display_pos] == q.true_order[k]

    def test_identity_on_shuffled_display_incorrect(self, handshake):
        q = self._question(handshake)
        seed = next(s for s in range(100)
                    if instantiate_reorder(q, s).display_order[0] != 0)
        inst = instantiate_reorder(q, seed)
        verdict = grade_reorder(inst, [0, 1, 2])
        assert not verdict.correct
        assert verdict.feedback[0].target == "position:1"

    def test_partial_credit(self, handshake):
        q = self._question(handshake)
        seed = next(s for s in range(100)
                    if instantiate_reorder(q, s).display_order == [0, 2, 1])
        inst = instantiate_reorder(q, seed)
        # correct submission would be [0, 2, 1]; [0, 1, 2] gets 1/3
        verdict = grade_reorder(inst, [0, 1, 2])
        assert verdict.score == pytest.approx(1 / 3)

    def test_strict_mode_is_binary(self, handshake):
        q = self._question(handshake)
        seed = next(s for s in range(100)
                    if instantiate_reorder(q, s).display_order == [0, 2, 1])
        inst = instantiate_reorder(q, seed)
        assert grade_reorder(inst, [0, 1, 2], strict=True).score == 0.0
        assert grade_reorder(inst, [0, 2, 1], strict=True).score == 1.0

    def test_repeated_index_rejected(self, handshake):
        inst = instantiate_reorder(self._question(handshake), 1)
        with pytest.raises(InputError):
            grade_reorder(inst, [0, 0, 1])

    def test_summaries_show_flags_not_times(self, handshake):
        inst = instantiate_reorder(self._question(handshake), 5)
        summaries = inst.summaries()
        assert len(summaries) == 3
        assert any("SYN" in s and "ACK" not in s.split("[")[1].split("]")[0]
                   or "[SYN]" in s for s in summaries)


class TestVerdictInvariants:
    def test_score_one_iff_correct(self):
        with pytest.raises(ValueError):
            Verdict(True, 0.5, [])
        with pytest.raises(ValueError):
            Verdict(False, 1.0, [Feedback("x", "y")])

    def test_imperfect_needs_feedback(self):
        with pytest.raises(ValueError):
            Verdict(False, 0.0, [])


class TestBank:
    def test_load_demo_bank(self, tmp_path):
        fixtures.write_demo_bank(tmp_path)
        bank = load_bank(tmp_path)
        assert set(bank.ids()) == {"mcq-ack-meaning", "short-stuffing",
                                   "short-window", "trace-mask-handshake",
                                   "trace-reorder-handshake"}
        assert Bank.qtype(bank["mcq-ack-meaning"]) == "mcq"
        assert Bank.qtype(bank["trace-reorder-handshake"]) == "trace_reorder"

    def test_duplicate_id_rejected(self, tmp_path):
        fixtures.write_demo_bank(tmp_path)
        dup = json.loads((tmp_path / "short-window.json").read_text())
        (tmp_path / "zz-dup.json").write_text(json.dumps(dup))
        with pytest.raises(ConfigError):
            load_bank(tmp_path)

    def test_unknown_type_rejected(self, tmp_path):
        (tmp_path / "bad.json").write_text(
            json.dumps({"id": "bad", "type": "essay", "prompt": "?"}))
        with pytest.raises(ConfigError):
            load_bank(tmp_path)

    def test_grading_is_pure(self, tmp_path):
        fixtures.write_demo_bank(tmp_path)
        bank = load_bank(tmp_path)
        q = bank["short-stuffing"]
        v1 = grade_short(q, "7e 12 7e 34 7e")
        v2 = grade_short(q, "7e 12 7e 34 7e")
        assert v1 == v2
