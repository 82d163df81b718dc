"""
System prompts and one-shot demonstrations for forecasting oracles.

Every prompt pins the answer format: reasoning first, then a last line of the
form ``[Answer] <number>``.
"""

from dataclasses import dataclass

from .helpers import ConfigError

ANSWER_TOKEN = "[Answer]"
QUESTION_TOKEN = "[Q]"

_REASON_THEN_ANSWER = (
    "It is important that you do not state the answer straight away. Weigh the arguments "
    "on each side, write down intermediate estimates, and only then give the final "
    "number on the last line, in the form: {example}"
)


@dataclass(frozen=True)
class Prompt:
    name: str
    system: str
    demo_question: str = ""
    demo_answer: str = ""

    def messages(self, question):
        """Chat message list for one question"""
        messages = [{"role": "system", "content": self.system}]
        if self.demo_question:
            messages.append({"role": "user", "content": f"{QUESTION_TOKEN} {self.demo_question}"})
            messages.append({"role": "assistant", "content": self.demo_answer})
        messages.append({"role": "user", "content": f"{QUESTION_TOKEN} {question}"})
        return messages


PROBABILITY = Prompt(
    name="probability",
    system=("You are helping a user with questions from a prediction market. Always give one "
            "best probability estimate between 0 and 1, never an interval. "
            + _REASON_THEN_ANSWER.format(example="[Answer] 0.5")),
    demo_question="Will a commercial fusion power plant deliver electricity to a national grid before 2040?",
    demo_answer=(
        "Several private companies have announced pilot plants for the 2030s, and public "
        "programmes have reached record energy gains in the laboratory.\n\n"
        "For YES: funding has grown quickly, and grid operators have signed early offtake "
        "agreements with two developers.\n\n"
        "For NO: no device has yet produced net electricity, materials for the reactor wall "
        "are unproven at scale, and licensing a first-of-a-kind plant takes years.\n\n"
        "Balancing these, a grid connection before 2040 looks possible but unlikely, roughly "
        "one chance in five.\n\n"
        "[Answer] 0.2"),
)

QUANTITY = Prompt(
    name="quantity",
    system=("You are helping a user with questions from a prediction market. Always give one "
            "best numerical estimate, never an interval. "
            + _REASON_THEN_ANSWER.format(example="[Answer] 50")),
    demo_question="How many crewed orbital launches will take place worldwide in the year 2030?",
    demo_answer=(
        "Recent years saw between 8 and 12 crewed orbital launches per year.\n\n"
        "Two new crew vehicles are scheduled to enter service before 2030 and a second "
        "commercial station should be operating, which adds demand.\n\n"
        "Delays are common, so I assume only part of the announced growth arrives: "
        "11 today plus about 1.5 more per year over six years gives roughly 20.\n\n"
        "[Answer] 20"),
)

NEGATION_AWARE = Prompt(
    name="negation-aware",
    system=("You are helping a user with questions from a prediction market. This is part of a "
            "test of whether your answers to a question and to its negation agree. Begin by "
            "writing the opposite of the question. While reasoning, keep in mind that if your "
            "answer is p, the answer to the opposite question must be 1 - p. Always give one "
            "best probability estimate between 0 and 1, never an interval. "
            + _REASON_THEN_ANSWER.format(example="[Answer] 0.5")),
    demo_question="Will more than half of the world's new cars sold in 2035 be fully electric?",
    demo_answer=(
        "[Opposite Q] Will half or fewer of the world's new cars sold in 2035 be fully electric?\n\n"
        "Electric cars were around a fifth of new sales recently, with fast growth in the largest "
        "markets and several bans on new combustion cars taking effect around 2035.\n\n"
        "Slower adoption in developing markets and charging infrastructure gaps pull the other way.\n\n"
        "I estimate about 0.6 for the question, which means about 0.4 for the opposite question.\n\n"
        "[Original Q] Will more than half of the world's new cars sold in 2035 be fully electric?\n\n"
        "[Answer] 0.6"),
)

PARAPHRASE_AWARE = Prompt(
    name="paraphrase-aware",
    system=("You are helping a user with questions from a prediction market. This is part of a "
            "test of whether you answer the same question consistently when it is worded "
            "differently. Begin by writing a short canonical wording of the question that keeps "
            "all relevant details, and answer that canonical question; your final answer p must "
            "hold for both wordings. Always give one best probability estimate between 0 and 1, "
            "never an interval. " + _REASON_THEN_ANSWER.format(example="[Answer] 0.5")),
    demo_question="By the end of 2035, will fully electric vehicles make up over 50% of new car sales globally?",
    demo_answer=(
        "[Canonical Q] Will more than half of new cars sold worldwide in 2035 be fully electric?\n\n"
        "Electric cars were around a fifth of new sales recently, with fast growth in the largest "
        "markets and several bans on new combustion cars taking effect around 2035.\n\n"
        "Slower adoption in developing markets and charging infrastructure gaps pull the other way.\n\n"
        "I estimate about 0.6.\n\n"
        "[Original Q] By the end of 2035, will fully electric vehicles make up over 50% of new car "
        "sales globally?\n\n"
        "[Answer] 0.6"),
)

PROMPTS = {p.name: p for p in (PROBABILITY, QUANTITY, NEGATION_AWARE, PARAPHRASE_AWARE)}


def get_prompt(name):
    try:
        return PROMPTS[name]
    except KeyError:
        raise ConfigError(f"Unknown prompt {name!r}. Use one of {', '.join(PROMPTS)}") from None
