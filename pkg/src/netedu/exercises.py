"""Exercise engine: randomized MCQs, short answers, trace questions.

Every grading operation returns a Verdict carrying per-target feedback
comments so a student immediately sees what was wrong and why. Grading is
pure and deterministic; instance randomization (which answers an MCQ
shows, how a packet trace is shuffled) is a function of an explicit seed.

Question banks are directories of JSON files with a `type` discriminator:
mcq, short, trace_mask, trace_reorder. Captures are referenced by a pcap
path relative to the bank directory.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from . import codec, dissect
from .rng import SplitMix64


class ConfigError(ValueError):
    pass


class InputError(ValueError):
    pass


@dataclass(frozen=True)
class Feedback:
    target: str
    comment: str


@dataclass(frozen=True)
class Verdict:
    correct: bool
    score: float
    feedback: list[Feedback]

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("score must be in [0, 1]")
        if self.correct != (self.score == 1.0):
            raise ValueError("correct must hold exactly when score is 1")
        if self.score < 1.0 and not self.feedback:
            raise ValueError("imperfect verdicts must carry feedback")

    def to_dict(self) -> dict:
        return {"correct": self.correct, "score": self.score,
                "feedback": [{"target": f.target, "comment": f.comment}
                             for f in self.feedback]}


@dataclass(frozen=True)
class AnswerOption:
    text: str
    comment: str


@dataclass(frozen=True)
class McqQuestion:
    id: str
    prompt: str
    correct_pool: list[AnswerOption]
    incorrect_pool: list[AnswerOption]
    n: int  # number of invalid answers displayed

    def __post_init__(self):
        if not self.correct_pool:
            raise ConfigError(f"{self.id}: needs at least 1 correct answer")
        if self.n < 1:
            raise ConfigError(f"{self.id}: n must be >= 1")
        if len(self.incorrect_pool) < self.n:
            raise ConfigError(
                f"{self.id}: incorrect pool smaller than n={self.n}")
        for opt in self.correct_pool + self.incorrect_pool:
            if not opt.comment:
                raise ConfigError(f"{self.id}: every answer needs a comment")


@dataclass(frozen=True)
class McqInstance:
    question: McqQuestion
    seed: int
    # display order: ("correct"|"incorrect", pool index)
    displayed: list[tuple[str, int]]

    def option(self, display_index: int) -> AnswerOption:
        kind, idx = self.displayed[display_index]
        pool = (self.question.correct_pool if kind == "correct"
                else self.question.incorrect_pool)
        return pool[idx]

    @property
    def texts(self) -> list[str]:
        return [self.option(i).text for i in range(len(self.displayed))]


def instantiate_mcq(q: McqQuestion, seed: int) -> McqInstance:
    """One correct + n incorrect answers, seeded selection and order."""
    rng = SplitMix64(seed)
    refs: list[tuple[str, int]] = [
        ("correct", rng.randbelow(len(q.correct_pool)))]
    refs += [("incorrect", j)
             for j in rng.sample(list(range(len(q.incorrect_pool))), q.n)]
    rng.shuffle(refs)
    return McqInstance(q, seed, refs)


def grade_mcq(instance: McqInstance, chosen: int) -> Verdict:
    if not 0 <= chosen < len(instance.displayed):
        raise InputError(f"answer index {chosen} out of range")
    kind, _ = instance.displayed[chosen]
    option = instance.option(chosen)
    correct = kind == "correct"
    return Verdict(correct, 1.0 if correct else 0.0,
                   [Feedback(f"answer:{chosen}", option.comment)])


@dataclass(frozen=True)
class ShortAnswerQuestion:
    id: str
    prompt: str
    grader: str  # exact_text | integer | hex_bytes | stuffing
    expected: str  # canonical answer; for stuffing: the payload in hex
    feedback_wrong: str = "That is not the expected answer."

    def __post_init__(self):
        if self.grader not in ("exact_text", "integer", "hex_bytes",
                               "stuffing"):
            raise ConfigError(f"{self.id}: unknown grader {self.grader}")
        if self.grader in ("hex_bytes", "stuffing"):
            try:
                bytes.fromhex(_normalize_hex(self.expected))
            except ValueError:
                raise ConfigError(
                    f"{self.id}: expected value is not valid hex") from None
        if self.grader == "integer":
            if _parse_int(self.expected) is None:
                raise ConfigError(f"{self.id}: expected value is not a number")


def _collapse_ws(text: str) -> str:
    return re.sub(r"\s+", " ", text.strip())


def _parse_int(text: str) -> int | None:
    t = text.strip().lower()
    try:
        if t.startswith("0x") or t.startswith("-0x"):
            return int(t, 16)
        return int(t, 10)
    except ValueError:
        return None


def _normalize_hex(text: str) -> str:
    return re.sub(r"[\s:,]", "", text.strip()).lower()


def _hex_mismatch_feedback(expected: bytes, got: bytes) -> str:
    if len(got) != len(expected):
        return (f"expected {len(expected)} bytes but got {len(got)}")
    for i, (e, g) in enumerate(zip(expected, got)):
        if e != g:
            return (f"first mismatch at byte offset {i}: expected "
                    f"{e:02x}, got {g:02x}")
    return "byte strings differ"


def grade_short(q: ShortAnswerQuestion, submitted: str) -> Verdict:
    """Grade a free-text answer; unparseable input is an incorrect verdict
    with parse feedback, never an exception."""
    if q.grader == "exact_text":
        if _collapse_ws(submitted) == _collapse_ws(q.expected):
            return Verdict(True, 1.0, [])
        return Verdict(False, 0.0, [Feedback("answer", q.feedback_wrong)])
    if q.grader == "integer":
        value = _parse_int(submitted)
        if value is None:
            return Verdict(False, 0.0, [Feedback(
                "answer", "could not parse a number (decimal or 0x-hex) "
                          "from the submission")])
        if value == _parse_int(q.expected):
            return Verdict(True, 1.0, [])
        return Verdict(False, 0.0, [Feedback("answer", q.feedback_wrong)])
    # hex graders
    expected = (codec.stuff(bytes.fromhex(_normalize_hex(q.expected)))
                if q.grader == "stuffing"
                else bytes.fromhex(_normalize_hex(q.expected)))
    try:
        got = bytes.fromhex(_normalize_hex(submitted))
    except ValueError:
        return Verdict(False, 0.0, [Feedback(
            "answer", "could not parse the submission as hex bytes")])
    if got == expected:
        return Verdict(True, 1.0, [])
    detail = _hex_mismatch_feedback(expected, got)
    return Verdict(False, 0.0, [
        Feedback("answer", f"{detail}. {q.feedback_wrong}".strip())])


@dataclass(frozen=True)
class TraceMaskQuestion:
    id: str
    prompt: str
    capture: dissect.Capture
    packet_index: int
    masked_paths: list[str]
    comments: dict[str, str] = dc_field(default_factory=dict)

    def __post_init__(self):
        if not self.masked_paths:
            raise ConfigError(f"{self.id}: a mask question must mask fields")
        if not 0 <= self.packet_index < len(self.capture.packets):
            raise ConfigError(f"{self.id}: packet index out of range")
        tree = self.dissected()
        for path in self.masked_paths:
            try:
                dissect.resolve_path(tree, path)
            except dissect.FieldPathError:
                raise ConfigError(
                    f"{self.id}: mask path {path} does not resolve") from None

    def dissected(self) -> dissect.PacketTree:
        pkt = self.capture.packets[self.packet_index]
        return dissect.dissect_packet(pkt.data, self.capture.link_type)


def render_trace_mask(q: TraceMaskQuestion) -> dissect.PacketTree:
    """Masked tree for display; raw values stay internal to the tree."""
    return dissect.mask_fields(q.dissected(), q.masked_paths)


def grade_trace_mask(q: TraceMaskQuestion, answers: dict[str, str],
                     strict: bool = False) -> Verdict:
    """Fractional credit per field; `strict` collapses to all-or-nothing."""
    tree = q.dissected()
    hits = 0
    feedback = []
    for path in q.masked_paths:
        field = dissect.resolve_path(tree, path)
        submitted = answers.get(path)
        comment = q.comments.get(path, "")
        if submitted is None or not str(submitted).strip():
            feedback.append(Feedback(
                path, f"unanswered. {comment}".strip()))
            continue
        if _field_matches(field, str(submitted)):
            hits += 1
        else:
            feedback.append(Feedback(
                path, (f"incorrect. {comment}".strip() if comment
                       else "incorrect")))
    score = hits / len(q.masked_paths)
    if strict:
        score = 1.0 if score == 1.0 else 0.0
    return Verdict(score == 1.0, score, feedback)


def _field_matches(field: dissect.Field, submitted: str) -> bool:
    if isinstance(field.raw_value, bytes):
        try:
            return bytes.fromhex(_normalize_hex(submitted)) == field.raw_value
        except ValueError:
            return _collapse_ws(submitted) == _collapse_ws(field.display)
    value = _parse_int(submitted)
    return value is not None and value == field.raw_value


@dataclass(frozen=True)
class ReorderQuestion:
    id: str
    prompt: str
    capture: dissect.Capture
    true_order: list[int]  # capture indices in chronological order

    def __post_init__(self):
        if sorted(self.true_order) != list(range(len(self.capture.packets))):
            raise ConfigError(
                f"{self.id}: true_order must be a permutation of the packets")


@dataclass(frozen=True)
class ReorderInstance:
    question: ReorderQuestion
    seed: int
    display_order: list[int]  # display position -> capture index

    def summaries(self) -> list[str]:
        out = []
        for capture_index in self.display_order:
            pkt = self.question.capture.packets[capture_index]
            tree = dissect.dissect_packet(pkt.data,
                                          self.question.capture.link_type)
            out.append(packet_summary(tree))
        return out


def packet_summary(tree: dissect.PacketTree) -> str:
    """One-line packet description (no timestamps, which would give away
    the original order)."""
    fields = {dissect.field_path(layer, f): f
              for layer, f in tree.iter_fields()}
    parts = []
    if "ipv4.src" in fields:
        parts.append(f"{fields['ipv4.src'].display} -> "
                     f"{fields['ipv4.dst'].display}")
    if "tcp.srcport" in fields:
        flags = [name.upper() for name in
                 ("syn", "ack", "fin", "rst", "psh", "urg")
                 if fields.get(f"tcp.flags.{name}")
                 and fields[f"tcp.flags.{name}"].raw_value]
        parts.append(f"TCP {fields['tcp.srcport'].display} -> "
                     f"{fields['tcp.dstport'].display}"
                     + (f" [{','.join(flags)}]" if flags else ""))
        parts.append(f"seq={fields['tcp.seq'].display}"
                     f" ack={fields['tcp.ack'].display}")
    elif "udp.srcport" in fields:
        parts.append(f"UDP {fields['udp.srcport'].display} -> "
                     f"{fields['udp.dstport'].display}")
    return "  ".join(parts) if parts else "packet"


def instantiate_reorder(q: ReorderQuestion, seed: int) -> ReorderInstance:
    order = list(range(len(q.capture.packets)))
    SplitMix64(seed).shuffle(order)
    return ReorderInstance(q, seed, order)


def grade_reorder(instance: ReorderInstance, submitted: list[int],
                  strict: bool = False) -> Verdict:
    """`submitted[k]` is the display position the student placed k-th in
    time; correct when that display slot holds the k-th true packet.
    Fractional credit per position; `strict` makes it all-or-nothing."""
    n = len(instance.display_order)
    if sorted(submitted) != list(range(n)):
        raise InputError(
            f"submission must be a permutation of 0..{n - 1}")
    hits = 0
    first_wrong = None
    for k, display_pos in enumerate(submitted):
        if instance.display_order[display_pos] == instance.question.true_order[k]:
            hits += 1
        elif first_wrong is None:
            first_wrong = k
    if hits == n:
        return Verdict(True, 1.0, [])
    return Verdict(False, 0.0 if strict else hits / n, [Feedback(
        f"position:{first_wrong + 1}",
        f"the packet you placed at position {first_wrong + 1} was not "
        f"sent at that point of the exchange")])


Question = (McqQuestion | ShortAnswerQuestion | TraceMaskQuestion
            | ReorderQuestion)


class Bank:
    """Immutable set of questions loaded from a directory."""

    def __init__(self, questions: dict[str, Question]):
        self.questions = questions

    def __contains__(self, qid: str) -> bool:
        return qid in self.questions

    def __getitem__(self, qid: str) -> Question:
        return self.questions[qid]

    def ids(self) -> list[str]:
        return sorted(self.questions)

    @staticmethod
    def qtype(q: Question) -> str:
        return {McqQuestion: "mcq", ShortAnswerQuestion: "short",
                TraceMaskQuestion: "trace_mask",
                ReorderQuestion: "trace_reorder"}[type(q)]


def _load_capture(bank_dir: Path, rel: str,
                  cache: dict[str, dissect.Capture]) -> dissect.Capture:
    if rel not in cache:
        path = (bank_dir / rel).resolve()
        if bank_dir.resolve() not in path.parents and path != bank_dir.resolve():
            raise ConfigError(f"capture path {rel} escapes the bank")
        cache[rel] = dissect.read_pcap(path.read_bytes())
    return cache[rel]


def load_bank(bank_dir: str | Path) -> Bank:
    bank_dir = Path(bank_dir)
    if not bank_dir.is_dir():
        raise ConfigError(f"bank directory {bank_dir} does not exist")
    captures: dict[str, dissect.Capture] = {}
    questions: dict[str, Question] = {}
    for path in sorted(bank_dir.glob("*.json")):
        raw = json.loads(path.read_text())
        q = _parse_question(raw, bank_dir, captures)
        if q.id in questions:
            raise ConfigError(f"duplicate exercise id {q.id}")
        questions[q.id] = q
    return Bank(questions)


def _parse_question(raw: dict, bank_dir: Path,
                    captures: dict) -> Question:
    qtype = raw.get("type")
    qid = raw.get("id", "<missing id>")
    try:
        if qtype == "mcq":
            return McqQuestion(
                id=raw["id"], prompt=raw["prompt"],
                correct_pool=[AnswerOption(a["text"], a["comment"])
                              for a in raw["correct"]],
                incorrect_pool=[AnswerOption(a["text"], a["comment"])
                                for a in raw["incorrect"]],
                n=raw["n"])
        if qtype == "short":
            return ShortAnswerQuestion(
                id=raw["id"], prompt=raw["prompt"], grader=raw["grader"],
                expected=raw.get("expected", raw.get("payload", "")),
                feedback_wrong=raw.get("feedback_wrong",
                                       "That is not the expected answer."))
        if qtype == "trace_mask":
            return TraceMaskQuestion(
                id=raw["id"], prompt=raw["prompt"],
                capture=_load_capture(bank_dir, raw["capture"], captures),
                packet_index=raw["packet"],
                masked_paths=list(raw["mask"]),
                comments=dict(raw.get("comments", {})))
        if qtype == "trace_reorder":
            return ReorderQuestion(
                id=raw["id"], prompt=raw["prompt"],
                capture=_load_capture(bank_dir, raw["capture"], captures),
                true_order=list(raw["true_order"]))
    except KeyError as exc:
        raise ConfigError(f"{qid}: missing field {exc}") from None
    raise ConfigError(f"{qid}: unknown exercise type {qtype!r}")
