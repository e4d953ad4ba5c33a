"""The fixed 11-word prompt inventory.

The list and its order are frozen: classifiers, confusion matrices, and
serialized reports all index classes by this order.
"""

from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class WordLabel:
    id: int
    text: str
    ipa: str


WORDS: tuple[WordLabel, ...] = (
    WordLabel(0, "heed", "hid"),
    WordLabel(1, "had", "hæd"),
    WordLabel(2, "hood", "hʊd"),
    WordLabel(3, "tail", "tʰeɪl"),
    WordLabel(4, "kale", "kʰeɪl"),
    WordLabel(5, "doe", "doʊ"),
    WordLabel(6, "goat", "goʊt"),
    WordLabel(7, "aba", "aba"),
    WordLabel(8, "ada", "ada"),
    WordLabel(9, "aga", "aga"),
    WordLabel(10, "aka", "akʰa"),
)

WORD_BY_TEXT: dict[str, WordLabel] = {w.text: w for w in WORDS}
WORD_BY_ID: dict[int, WordLabel] = {w.id: w for w in WORDS}


def word_by_text(text: str) -> WordLabel:
    try:
        return WORD_BY_TEXT[text]
    except KeyError:
        raise KeyError(f"unknown word {text!r}; inventory is fixed to {[w.text for w in WORDS]}") from None
