"""Deterministic cleaning of raw comment text.

Stages run in a fixed order: numbers, punctuation, emoji, part-of-speech
filtering, whitespace. Every stage is idempotent and so is the composition.
"""

from __future__ import annotations

import enum
import re
import string
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence

from .errors import ConfigError, LexiconError

__all__ = [
    "DIGITS",
    "PUNCTUATION",
    "EMOJI_RANGES",
    "JOINERS",
    "STAGES",
    "PosTag",
    "DEFAULT_DROP_TAGS",
    "PosSource",
    "StopPosLexicon",
    "TaggerPosSource",
    "CleanConfig",
    "CleanText",
    "normalize_whitespace",
    "remove_numbers",
    "remove_punctuation",
    "remove_emoji",
    "remove_stop_pos",
    "clean",
]

DIGITS = string.digits + "".join(chr(c) for c in range(0x09E6, 0x09F0))
# ASCII punctuation plus the Bengali danda and double danda.
PUNCTUATION = string.punctuation + "।॥"
EMOJI_RANGES: tuple[tuple[int, int], ...] = (
    (0x1F300, 0x1FAFF),
    (0x2600, 0x27BF),
    (0xFE0F, 0xFE0F),
    (0x200D, 0x200D),
    (0x1F1E6, 0x1F1FF),
)
# Sequence glue: deleted in place, never turned into a separator. Bengali
# script also uses ZWJ inside words (e.g. ya-phala after ra).
JOINERS = frozenset({0xFE0F, 0x200D})

STAGES = ("numbers", "punctuation", "emoji", "pos", "whitespace")


def normalize_whitespace(text: str) -> str:
    return " ".join(text.split())


def remove_numbers(text: str, digits: str = DIGITS) -> str:
    """Delete digits in place, so ``"12Tar"`` becomes ``"Tar"``."""
    return normalize_whitespace(text.translate({ord(d): None for d in digits}))


@lru_cache(maxsize=32)
def _punct_pattern(punctuation: str) -> re.Pattern[str]:
    return re.compile("[" + re.escape(punctuation) + "]+")


def remove_punctuation(text: str, replacement: str = "", punctuation: str = PUNCTUATION) -> str:
    """Strip punctuation runs, substituting ``replacement`` for each run."""
    return normalize_whitespace(_punct_pattern(punctuation).sub(replacement, text))


def _char_class(ranges: Iterable[tuple[int, int]]) -> str:
    parts = []
    for lo, hi in ranges:
        parts.append(re.escape(chr(lo)) if lo == hi else f"{re.escape(chr(lo))}-{re.escape(chr(hi))}")
    return "".join(parts)


@lru_cache(maxsize=32)
def _emoji_patterns(
    ranges: tuple[tuple[int, int], ...], joiners: frozenset[int]
) -> tuple[re.Pattern[str] | None, re.Pattern[str] | None]:
    glue = [(j, j) for j in sorted(joiners) if any(lo <= j <= hi for lo, hi in ranges)]
    pictographic = []
    for lo, hi in ranges:
        # Carve the joiners out of each range so they never count as a run.
        start = lo
        for j in sorted(joiners):
            if start <= j <= hi:
                if start < j:
                    pictographic.append((start, j - 1))
                start = j + 1
        if start <= hi:
            pictographic.append((start, hi))
    glue_re = re.compile(f"[{_char_class(glue)}]") if glue else None
    pict_re = re.compile(f"[{_char_class(pictographic)}]+") if pictographic else None
    return glue_re, pict_re


def remove_emoji(
    text: str,
    replacement: str = "",
    ranges: Sequence[tuple[int, int]] = EMOJI_RANGES,
    joiners: Iterable[int] = JOINERS,
) -> str:
    glue_re, pict_re = _emoji_patterns(tuple(ranges), frozenset(joiners))
    if glue_re is not None:
        text = glue_re.sub("", text)
    if pict_re is not None:
        text = pict_re.sub(replacement, text)
    return normalize_whitespace(text)


class PosTag(str, enum.Enum):
    PRONOUN = "PRONOUN"
    CONJUNCTION = "CONJUNCTION"
    INTERJECTION = "INTERJECTION"
    PREPOSITION = "PREPOSITION"
    NOUN = "NOUN"

    @classmethod
    def parse(cls, raw: str) -> "PosTag":
        try:
            return cls(raw.strip().upper())
        except ValueError:
            raise ConfigError(f"unknown POS tag {raw!r}; expected one of {[t.value for t in cls]}") from None


# Nouns carry most of the content, so they are kept unless asked for.
DEFAULT_DROP_TAGS = frozenset({PosTag.PRONOUN, PosTag.CONJUNCTION, PosTag.INTERJECTION, PosTag.PREPOSITION})


class PosSource(Protocol):
    def tag(self, tokens: Sequence[str]) -> list[PosTag | None]: ...


@dataclass(frozen=True)
class StopPosLexicon:
    """Exact-match word lists keyed by part-of-speech tag."""

    words: Mapping[PosTag, frozenset[str]]

    def __post_init__(self) -> None:
        seen: dict[str, PosTag] = {}
        for tag, ws in self.words.items():
            for w in ws:
                if w in seen and seen[w] is not tag:
                    raise LexiconError(f"word {w!r} listed under both {seen[w].value} and {tag.value}")
                seen[w] = tag
        object.__setattr__(self, "_index", seen)

    @property
    def tags(self) -> frozenset[PosTag]:
        return frozenset(self.words)

    def tag(self, tokens: Sequence[str]) -> list[PosTag | None]:
        index: dict[str, PosTag] = self._index  # type: ignore[attr-defined]
        return [index.get(t) for t in tokens]

    @classmethod
    def from_lines(cls, lines: Iterable[str], source: str = "<lexicon>") -> "StopPosLexicon":
        words: dict[PosTag, set[str]] = {}
        for n, line in enumerate(lines, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[1].strip():
                raise LexiconError(f"{source}:{n}: expected 'tag<TAB>word'")
            try:
                tag = PosTag.parse(parts[0])
            except ConfigError as exc:
                raise LexiconError(f"{source}:{n}: {exc}") from None
            words.setdefault(tag, set()).add(parts[1].strip())
        return cls({t: frozenset(ws) for t, ws in words.items()})

    @classmethod
    def from_file(cls, path: str | Path) -> "StopPosLexicon":
        path = Path(path)
        with path.open(encoding="utf-8") as fh:
            return cls.from_lines(fh, str(path))

    @classmethod
    def bundled(cls) -> "StopPosLexicon":
        return _bundled_lexicon()


@lru_cache(maxsize=1)
def _bundled_lexicon() -> StopPosLexicon:
    text = resources.files("bnracism.data").joinpath("pos_lexicon.tsv").read_text(encoding="utf-8")
    return StopPosLexicon.from_lines(text.splitlines(), "pos_lexicon.tsv")


class TaggerPosSource:
    """Adapter for an external tagger returning its own tag strings.

    ``tagger`` maps a token list to one tag string per token; ``mapping``
    translates those strings to :class:`PosTag`. Unmapped tags are kept.
    """

    def __init__(self, tagger: Callable[[list[str]], Sequence[str]], mapping: Mapping[str, PosTag]) -> None:
        self.tagger = tagger
        self.mapping = dict(mapping)

    @property
    def tags(self) -> frozenset[PosTag]:
        return frozenset(self.mapping.values())

    def tag(self, tokens: Sequence[str]) -> list[PosTag | None]:
        raw = list(self.tagger(list(tokens)))
        if len(raw) != len(tokens):
            raise LexiconError(f"tagger returned {len(raw)} tags for {len(tokens)} tokens")
        return [self.mapping.get(t) for t in raw]


def _check_drop_tags(source: PosSource, drop_tags: Iterable[PosTag]) -> frozenset[PosTag]:
    drop = frozenset(PosTag.parse(t) if isinstance(t, str) and not isinstance(t, PosTag) else t for t in drop_tags)
    known = getattr(source, "tags", None)
    if known is not None and not drop <= known:
        missing = sorted(t.value for t in drop - known)
        raise ConfigError(f"drop tags not provided by the POS source: {missing}")
    return drop


def _drop_tokens(tokens: list[str], source: PosSource, drop: frozenset[PosTag]) -> list[str]:
    if not drop or not tokens:
        return tokens
    return [tok for tok, tag in zip(tokens, source.tag(tokens)) if tag not in drop]


def remove_stop_pos(text: str, lexicon: PosSource, drop_tags: Iterable[PosTag] = DEFAULT_DROP_TAGS) -> str:
    drop = _check_drop_tags(lexicon, drop_tags)
    return " ".join(_drop_tokens(text.split(), lexicon, drop))


@dataclass(frozen=True)
class CleanConfig:
    numbers: bool = True
    punctuation: bool = True
    emoji: bool = True
    pos: bool = True
    drop_tags: frozenset[PosTag] = DEFAULT_DROP_TAGS
    pos_source: PosSource | None = None
    digits: str = DIGITS
    punctuation_chars: str = PUNCTUATION
    emoji_ranges: tuple[tuple[int, int], ...] = EMOJI_RANGES

    def source(self) -> PosSource:
        return self.pos_source if self.pos_source is not None else StopPosLexicon.bundled()

    def enabled_stages(self) -> tuple[str, ...]:
        on = {"numbers": self.numbers, "punctuation": self.punctuation, "emoji": self.emoji, "pos": self.pos}
        return tuple(s for s in STAGES if on.get(s, True))


@dataclass(frozen=True)
class CleanText:
    original: str
    cleaned: str
    stages_applied: tuple[str, ...]
    removed_token_count: int = 0
    changed_by: tuple[str, ...] = field(default=(), compare=False)

    @property
    def is_empty(self) -> bool:
        return self.cleaned == ""


def _per_token(tokens: list[str], fn: Callable[[str], str]) -> tuple[list[str], int]:
    out: list[str] = []
    removed = 0
    for tok in tokens:
        new = fn(tok)
        if new:
            out.extend(new.split())
        else:
            removed += 1
    return out, removed


def clean(text: str, config: CleanConfig | None = None) -> CleanText:
    """Run the enabled stages over ``text``.

    Punctuation and emoji runs become a single space before whitespace is
    collapsed, so ``"a,b"`` stays two words; digits are deleted in place.
    """
    cfg = config or CleanConfig()
    stages = cfg.enabled_stages()
    tokens = text.split()
    removed = 0
    changed: list[str] = []

    char_stages: dict[str, Callable[[str], str]] = {
        "numbers": lambda t: remove_numbers(t, cfg.digits),
        "punctuation": lambda t: remove_punctuation(t, " ", cfg.punctuation_chars),
        "emoji": lambda t: remove_emoji(t, " ", cfg.emoji_ranges),
    }
    for stage in stages:
        before = tokens
        if stage in char_stages:
            tokens, n = _per_token(tokens, char_stages[stage])
            removed += n
        elif stage == "pos":
            source = cfg.source()
            tokens = _drop_tokens(tokens, source, _check_drop_tags(source, cfg.drop_tags))
            removed += len(before) - len(tokens)
        if tokens != before:
            changed.append(stage)

    cleaned = " ".join(tokens)
    if normalize_whitespace(text) != text:
        changed.append("whitespace")
    return CleanText(text, cleaned, stages, removed, tuple(changed))
