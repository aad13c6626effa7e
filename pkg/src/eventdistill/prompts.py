"""Frozen prompt templates for sequence generation and pair judging.

All three builders are pure: the exemplar blocks are byte-frozen constants
and caller inputs are substituted only at designated slots, so identical
inputs always yield identical prompt bytes. Regression goldens live under
tests/goldens/prompts/.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

KIND_TRIGGER = "trigger"
KIND_ITERATIVE = "iterative"
KIND_PRECISION_EVAL = "precision_eval"

_VOCAB_PREFIX = "Use the following vocabulary to respond to the questions: "

_TRIGGER_EXEMPLARS = (
    "Question: what usually happens after earthquake?\n"
    "Answer: tsunami\n"
    "Question: what usually happens after economic crises?\n"
    "Answer: unemployment\n"
    "Question: what usually happens after bomb attack?\n"
    "Answer: injury\n"
)

_ITERATIVE_EXEMPLARS = (
    "Question: what usually happens after earthquake?\n"
    "Answer: tsunami\n"
    "Question: what usually happens after earthquake and tsunami?\n"
    "Answer: nuclear disaster\n"
    "Question: what usually happens after economic crises and wage decline and unemployment?\n"
    "Answer: legislation\n"
    "Question: what usually happens after military conflict?\n"
    "Answer: war\n"
    "Question: what usually happens after military conflict and war?\n"
    "Answer: peace treaty\n"
)

# The instruction line runs straight into the first exemplar question with no
# newline; that is intentional and matched by the golden files.
_PRECISION_EXEMPLARS = (
    "Respond to the questions below with a (YES/NO) with a historical example:"
    "Question: Can economic crises cause a landslide?\n"
    "Answer: NO. There is no historical example of an economic crisis causing a landslide, "
    "which is natural disaster.\n"
    "Question: Can earthquake cause a tsunami?\n"
    "Answer: YES. In 2011, Japan experienced an earthquake in tohoku that caused a tsunami. \n"
    "Question: Can mass shooting cause a condensation cloud?\n"
    "Answer: NO. A condensation cloud is a weather phenomenon, not a mass shooting.\n"
    "Question: Can accident cause a stock market crash?\n"
    "Answer: NO. The stock market crash of 1929 was caused by a series of events, not an accident.\n"
    "Question: Can disease outbreak cause a inventory shrinkage?\n"
    "Answer: YES. The bubonic plague outbreak in Europe in 1348 caused a massive inventory shrinkage.\n"
    "Question: Can fraud cause a travel ban?\n"
    "Answer: YES. Travel bans are a form of punishment for immigration fraud.\n"
)


@dataclass(frozen=True)
class PromptText:
    """A complete prompt plus its kind and an input digest for caching."""

    text: str
    kind: str
    inputs_digest: str


def _digest(*parts: object) -> str:
    blob = json.dumps(parts, ensure_ascii=False).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def build_trigger_prompt(vocab: list[str], target: str) -> PromptText:
    """Initial prompt asking what usually happens after ``target``.

    The vocabulary is joined by single spaces; three fixed exemplars follow.
    """
    if not vocab:
        raise ValueError("vocabulary must be non-empty")
    if not target:
        raise ValueError("target label must be non-empty")
    text = (
        f"{_VOCAB_PREFIX}{' '.join(vocab)}\n"
        f"{_TRIGGER_EXEMPLARS}"
        f"Question: what usually happens after {target}?\n"
        "Answer:"
    )
    return PromptText(text=text, kind=KIND_TRIGGER, inputs_digest=_digest(vocab, target))


def build_iterative_prompt(vocab: list[str], history: list[str]) -> PromptText:
    """Conjunctive follow-up prompt over the full generation history.

    The final question joins the history with " and "; five fixed exemplars.
    """
    if not vocab:
        raise ValueError("vocabulary must be non-empty")
    if not history:
        raise ValueError("history must be non-empty")
    text = (
        f"{_VOCAB_PREFIX}{' '.join(vocab)}\n"
        f"{_ITERATIVE_EXEMPLARS}"
        f"Question: what usually happens after {' and '.join(history)}?\n"
        "Answer:"
    )
    return PromptText(
        text=text, kind=KIND_ITERATIVE, inputs_digest=_digest(vocab, list(history))
    )


def build_precision_prompt(trigger: str, consequence: str) -> PromptText:
    """YES/NO judging prompt asking whether ``trigger`` can cause ``consequence``."""
    if not trigger or not consequence:
        raise ValueError("trigger and consequence must be non-empty")
    text = (
        f"{_PRECISION_EXEMPLARS}"
        f"Question: Can {trigger} cause a {consequence}?\n"
        "Answer: "
    )
    return PromptText(
        text=text, kind=KIND_PRECISION_EVAL, inputs_digest=_digest(trigger, consequence)
    )


def final_question(prompt_text: str) -> str:
    """The content of the prompt's last question line, without prefix or '?'.

    Scripted backends keyed by question use this to select a response.
    """
    marker = "Question: "
    start = prompt_text.rfind(marker)
    if start < 0:
        return ""
    rest = prompt_text[start + len(marker) :]
    question = rest.split("\n", 1)[0].strip()
    return question[:-1] if question.endswith("?") else question
