"""Sentence ingestion, rule-based fallback annotation and pronoun rewriting.

Token records can come from any external tagger via a JSONL format; when no
tagger output is available, a deterministic lexicon + suffix-rule annotator
produces the same feature interface.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

POS_TAGS = frozenset(
    {"NOUN", "VERB", "ADJ", "ADV", "ADP", "DET", "PRON", "NUM", "CONJ", "PART", "OTHER"}
)

RESOLVABLE_PRONOUNS = frozenset({"it", "them", "this", "that"})

DATA_DIR = Path(__file__).parent / "data"

_TOKEN_RE = re.compile(r"[A-Za-z']+|[0-9]+|[^\sA-Za-z0-9']")


class AnnotationError(ValueError):
    """Malformed token record or unusable raw text."""


class EmptyInputError(AnnotationError):
    pass


@dataclass(frozen=True)
class Token:
    index: int
    text: str
    lemma: str
    pos: str
    dep: str
    head: int


@dataclass(frozen=True)
class AnnotatedSentence:
    tokens: tuple[Token, ...]
    source_text: str

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def words(self) -> tuple[str, ...]:
        return tuple(t.text for t in self.tokens)


def _validate(tokens: list[Token], source_text: str) -> AnnotatedSentence:
    if not tokens:
        raise EmptyInputError("sentence has no tokens")
    roots = []
    for row, tok in enumerate(tokens):
        if tok.index != row:
            raise AnnotationError(f"row {row}: index {tok.index} is not contiguous from 0")
        if not 0 <= tok.head < len(tokens):
            raise AnnotationError(f"row {row}: head {tok.head} out of range")
        if tok.pos not in POS_TAGS:
            raise AnnotationError(f"row {row}: unknown POS tag {tok.pos!r}")
        if tok.dep == "root":
            roots.append(row)
    if len(roots) != 1 or tokens[roots[0]].head != roots[0]:
        raise AnnotationError(f"expected exactly one self-headed root, got roots at {roots}")
    return AnnotatedSentence(tokens=tuple(tokens), source_text=source_text)


def ingest_annotated(record: dict) -> AnnotatedSentence:
    """Build an AnnotatedSentence from a token-record dict ({text, tokens})."""
    rows = record.get("tokens")
    if not rows:
        raise AnnotationError("record has no token rows")
    tokens = []
    for i, row in enumerate(rows):
        try:
            tokens.append(
                Token(
                    index=int(row["i"]),
                    text=str(row["text"]),
                    lemma=str(row["lemma"]),
                    pos=str(row["pos"]),
                    dep=str(row["dep"]),
                    head=int(row["head"]),
                )
            )
        except KeyError as exc:
            raise AnnotationError(f"row {i}: missing field {exc.args[0]!r}") from exc
    return _validate(tokens, str(record.get("text", " ".join(t.text for t in tokens))))


def serialize(sentence: AnnotatedSentence) -> dict:
    """Inverse of ingest_annotated."""
    return {
        "text": sentence.source_text,
        "tokens": [
            {"i": t.index, "text": t.text, "lemma": t.lemma, "pos": t.pos, "dep": t.dep, "head": t.head}
            for t in sentence.tokens
        ],
    }


def read_jsonl(path: str | Path) -> list[AnnotatedSentence]:
    sentences = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            sentences.append(ingest_annotated(json.loads(line)))
        except (json.JSONDecodeError, AnnotationError) as exc:
            raise AnnotationError(f"{path}:{lineno}: {exc}") from exc
    return sentences


@lru_cache(maxsize=None)
def _load_table(name: str) -> dict[str, str]:
    table = {}
    for line in (DATA_DIR / name).read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        surface, value = line.split("\t")
        table[surface] = value
    return table


def _guess_pos(word: str) -> str:
    lexicon = _load_table("lexicon.tsv")
    lowered = word.lower()
    if lowered in lexicon:
        return lexicon[lowered]
    if lowered.isdigit():
        return "NUM"
    if lowered.endswith("ly"):
        return "ADV"
    return "NOUN"


def _guess_lemma(word: str) -> str:
    irregular = _load_table("lemmas.tsv")
    lowered = word.lower()
    if lowered in irregular:
        return irregular[lowered]
    for suffix in ("ing", "ed", "s"):
        if lowered.endswith(suffix) and len(lowered) > len(suffix) + 2:
            return lowered[: -len(suffix)]
    return lowered


def fallback_annotate(text: str) -> AnnotatedSentence:
    """Annotate raw text with the bundled lexicon and shallow dependency rules."""
    if not text or not text.strip():
        raise EmptyInputError("empty or whitespace-only text")
    words = _TOKEN_RE.findall(text)
    pos = [_guess_pos(w) for w in words]

    root = next((i for i, p in enumerate(pos) if p == "VERB"), 0)
    deps: list[tuple[str, int]] = []
    last_prep: int | None = None
    for i, p in enumerate(pos):
        if i == root:
            deps.append(("root", i))
            continue
        if p == "DET":
            head = next((j for j in range(i + 1, len(words)) if pos[j] in ("NOUN", "PRON")), root)
            deps.append(("det", head))
        elif p == "ADP":
            last_prep = i
            deps.append(("prep", root))
        elif p in ("NOUN", "PRON", "NUM"):
            if i > root and last_prep is not None and last_prep > root:
                deps.append(("pobj", last_prep))
            elif i > root:
                deps.append(("dobj", root))
            else:
                deps.append(("OTHER", root))
        else:
            deps.append(("OTHER", root))

    tokens = [
        Token(index=i, text=w, lemma=_guess_lemma(w), pos=pos[i], dep=deps[i][0], head=deps[i][1])
        for i, w in enumerate(words)
    ]
    return _validate(tokens, text)


def resolve_pronouns(sentence: AnnotatedSentence) -> AnnotatedSentence:
    """Rewrite resolvable pronouns with the most recent preceding object noun."""
    tokens = list(sentence.tokens)
    for i, tok in enumerate(tokens):
        if tok.pos != "PRON" or tok.text.lower() not in RESOLVABLE_PRONOUNS:
            continue
        # Direct objects are better antecedents than oblique nouns, so the
        # nearest preceding dobj wins and pobj is only a fallback.
        antecedent = None
        fallback = None
        for j in range(i - 1, -1, -1):
            prev = tokens[j]
            if prev.pos != "NOUN":
                continue
            if prev.dep == "dobj":
                antecedent = prev
                break
            if prev.dep == "pobj" and fallback is None:
                fallback = prev
        antecedent = antecedent or fallback
        if antecedent is not None:
            tokens[i] = replace(tok, text=antecedent.text, lemma=antecedent.lemma, pos=antecedent.pos)
    return AnnotatedSentence(tokens=tuple(tokens), source_text=sentence.source_text)
