"""Fixed instruction vocabulary for templated route descriptions."""

from __future__ import annotations

from ..gridmap import SEMANTIC_CLASSES
from .scene import ROOM_NAMES

PAD, UNK, BOS, EOS = 0, 1, 2, 3
SPECIALS = ("<pad>", "<unk>", "<bos>", "<eos>")

TEMPLATE_WORDS = (
    ",", ".", "a", "and", "at", "along", "by", "corridor", "down", "enter",
    "exit", "go", "hallway", "head", "in", "into", "leave", "near", "next",
    "of", "out", "pass", "past", "room", "stop", "the", "through", "to",
    "turn", "walk", "wait", "continue", "then", "until", "you", "reach",
    "straight", "left", "right", "find", "beside", "inside", "cross", "follow",
)

WORDS = SPECIALS + TEMPLATE_WORDS + ROOM_NAMES + tuple(SEMANTIC_CLASSES)
assert len(set(WORDS)) == len(WORDS)

_INDEX = {w: i for i, w in enumerate(WORDS)}
VOCAB_SIZE = len(WORDS)


def token_id(word: str) -> int:
    return _INDEX.get(word, UNK)


def encode(words, add_bos: bool = True, add_eos: bool = True) -> list[int]:
    ids = [token_id(w) for w in words]
    return ([BOS] if add_bos else []) + ids + ([EOS] if add_eos else [])


def decode(ids) -> list[str]:
    return [WORDS[i] if 0 <= i < VOCAB_SIZE else SPECIALS[UNK] for i in ids]
