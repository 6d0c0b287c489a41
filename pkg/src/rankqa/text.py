"""Text normalization and tokenization.

Two tokenizers live here and they serve different purposes:

* :func:`passage_tokens` is the span tokenizer. Passages are NFC-normalized and
  split on whitespace; every answer span is expressed in these token indices.
* :func:`normalize_text` is the lexical tokenizer used for retrieval and for
  "same text" comparisons. It folds Arabic orthographic variants and splits
  on punctuation as well as whitespace.
"""

import re
import unicodedata
from typing import List, NamedTuple, Tuple

# harakat, quranic annotation marks, superscript alef, small high/low marks
_DIACRITICS = re.compile(
    "[\u0610-\u061a\u064b-\u065f\u0670\u06d6-\u06dc\u06df-\u06e8\u06ea-\u06ed\u08d3-\u08ff]"
)
_TATWEEL = "\u0640"
_LETTER_FOLDS = str.maketrans(
    {
        "\u0622": "\u0627",  # alef with madda
        "\u0623": "\u0627",  # alef with hamza above
        "\u0625": "\u0627",  # alef with hamza below
        "\u0671": "\u0627",  # alef wasla
        "\u0629": "\u0647",  # teh marbuta -> heh
        "\u0649": "\u064a",  # alef maqsura -> yeh
    }
)
# letters and digits only; everything else (punctuation, symbols, space) separates
_WORD = re.compile(r"[^\W_]+")
_NON_SPACE = re.compile(r"\S+")


class Token(NamedTuple):
    text: str
    start: int
    end: int  # exclusive character offset


def nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


def passage_tokens(text: str) -> List[Token]:
    """Whitespace tokens of ``text`` with character offsets into ``text``.

    The caller is expected to pass NFC text; offsets refer to the string
    given, so normalizing here would silently shift them.
    """
    return [Token(m.group(), m.start(), m.end()) for m in _NON_SPACE.finditer(text)]


def char_span_to_tokens(tokens: List[Token], start_char: int, end_char: int) -> Tuple[int, int]:
    """Map a character range ``[start_char, end_char)`` to an inclusive token range.

    Every token overlapping the character range is covered. Raises
    ``ValueError`` when no token overlaps.
    """
    if end_char <= start_char:
        raise ValueError(f"empty character range [{start_char}, {end_char})")
    covered = [i for i, tok in enumerate(tokens) if tok.start < end_char and tok.end > start_char]
    if not covered:
        raise ValueError(f"character range [{start_char}, {end_char}) covers no token")
    return covered[0], covered[-1]


def render_span(text: str, tokens: List[Token], start_token: int, end_token: int) -> str:
    return text[tokens[start_token].start : tokens[end_token].end]


def strip_diacritics(text: str) -> str:
    return _DIACRITICS.sub("", text).replace(_TATWEEL, "")


def normalize_text(text: str) -> List[str]:
    """Lexical tokens: NFC, diacritics and tatweel removed, letter variants
    folded, case folded, split on anything that is not a letter or digit."""
    if not text:
        return []
    text = strip_diacritics(nfc(text)).translate(_LETTER_FOLDS).casefold()
    return _WORD.findall(text)


def text_key(text: str) -> str:
    """Canonical string used to decide whether two texts are "the same"."""
    return " ".join(normalize_text(text))
