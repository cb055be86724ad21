"""Coding-problem corpus: records, public/private test splits, POMDP variants.

Corpus file format ("corpus-v1"): UTF-8 text, one JSON object per line.
The first line is a header ``{"format": "corpus-v1"}``. Every following
line is a record::

    {
      "id": "tasks/0014",
      "prompt": "Write a function to ...",
      "test_kind": "assert-code" | "stdio-pair",
      "entry_point": "min_cost",            # optional, assert-code only
      "public_tests":  [<test>, ...],
      "private_tests": [<test>, ...]
    }

where an assert test is ``{"kind": "assert-code", "code": "assert ..."}``
and a stdio test is ``{"kind": "stdio-pair", "input": "...", "output": "..."}``.
Private tests keep the order they were authored in; the loader never
reorders them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable

CORPUS_FORMAT = "corpus-v1"

ASSERT_CODE = "assert-code"
STDIO_PAIR = "stdio-pair"
TEST_KINDS = (ASSERT_CODE, STDIO_PAIR)

SPLIT_FIRST_PUBLIC = "first-public"
SPLIT_DOCSTRING_PUBLIC = "docstring-public"


class CorpusError(ValueError):
    """Malformed corpus file or record."""


class SplitError(ValueError):
    """Test split cannot be performed (e.g. no tests)."""


@dataclass(frozen=True)
class TestCase:
    """One executable check: an assert snippet or a stdin/stdout pair."""

    __test__ = False  # not a pytest class, despite the name

    kind: str
    code: str = ""
    input: str = ""
    output: str = ""
    docstring_public: bool = False

    def __post_init__(self):
        if self.kind not in TEST_KINDS:
            raise CorpusError(f"unknown test kind {self.kind!r}")
        if self.kind == ASSERT_CODE and not self.code.strip():
            raise CorpusError("assert-code test has empty payload")

    def to_dict(self) -> dict:
        if self.kind == ASSERT_CODE:
            d = {"kind": self.kind, "code": self.code}
        else:
            d = {"kind": self.kind, "input": self.input, "output": self.output}
        if self.docstring_public:
            d["docstring_public"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TestCase":
        return cls(
            kind=d.get("kind", ""),
            code=d.get("code", ""),
            input=d.get("input", ""),
            output=d.get("output", ""),
            docstring_public=bool(d.get("docstring_public", False)),
        )


@dataclass(frozen=True)
class Problem:
    """A coding task: prompt text plus its public and private test suites.

    ``pomdp`` marks a prompt-rendering variant in which the public tests are
    omitted from the rendered prompt; the tests themselves are untouched and
    still drive execution feedback and the oracle.
    """

    id: str
    prompt: str
    test_kind: str
    public_tests: tuple[TestCase, ...] = ()
    private_tests: tuple[TestCase, ...] = ()
    entry_point: str | None = None
    pomdp: bool = False

    def __post_init__(self):
        if self.test_kind not in TEST_KINDS:
            raise CorpusError(f"problem {self.id!r}: unknown test_kind {self.test_kind!r}")
        all_tests = self.public_tests + self.private_tests
        if not all_tests:
            raise CorpusError(f"problem {self.id!r}: no tests")
        for t in all_tests:
            if t.kind != self.test_kind:
                raise CorpusError(
                    f"problem {self.id!r}: test kind {t.kind!r} does not match "
                    f"problem test_kind {self.test_kind!r}"
                )

    @property
    def all_tests(self) -> tuple[TestCase, ...]:
        return self.public_tests + self.private_tests

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "prompt": self.prompt,
            "test_kind": self.test_kind,
            "public_tests": [t.to_dict() for t in self.public_tests],
            "private_tests": [t.to_dict() for t in self.private_tests],
        }
        if self.entry_point is not None:
            d["entry_point"] = self.entry_point
        if self.pomdp:
            d["pomdp"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Problem":
        return cls(
            id=str(d["id"]),
            prompt=d["prompt"],
            test_kind=d["test_kind"],
            public_tests=tuple(TestCase.from_dict(t) for t in d.get("public_tests", [])),
            private_tests=tuple(TestCase.from_dict(t) for t in d.get("private_tests", [])),
            entry_point=d.get("entry_point"),
            pomdp=bool(d.get("pomdp", False)),
        )


def load_problems(path, format: str = CORPUS_FORMAT) -> list[Problem]:
    """Load a corpus file, validating the header, every record, and id uniqueness.

    Order of records is preserved. Raises :class:`CorpusError` naming the
    offending line on any malformed record or duplicate id.
    """
    if format != CORPUS_FORMAT:
        raise CorpusError(f"unsupported corpus format {format!r}")
    problems: list[Problem] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
        if not first.strip():
            return []  # empty file -> empty corpus
        try:
            header = json.loads(first)
        except json.JSONDecodeError as e:
            raise CorpusError(f"{path}:1: invalid header: {e}") from e
        if header.get("format") != CORPUS_FORMAT:
            raise CorpusError(f"{path}:1: expected format {CORPUS_FORMAT!r}, got {header.get('format')!r}")
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                problem = Problem.from_dict(record)
            except (json.JSONDecodeError, KeyError, CorpusError, TypeError) as e:
                raise CorpusError(f"{path}:{lineno}: malformed record: {e}") from e
            if problem.id in seen:
                raise CorpusError(f"{path}:{lineno}: duplicate problem id {problem.id!r}")
            seen.add(problem.id)
            problems.append(problem)
    return problems


def save_problems(problems: Iterable[Problem], path) -> None:
    """Write a corpus-v1 file; inverse of :func:`load_problems`."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format": CORPUS_FORMAT}) + "\n")
        for p in problems:
            fh.write(json.dumps(p.to_dict(), ensure_ascii=False) + "\n")


def split_tests(
    raw_tests: list[TestCase], policy: str = SPLIT_FIRST_PUBLIC
) -> tuple[list[TestCase], list[TestCase]]:
    """Split a flat test list into (public, private) suites.

    ``first-public``: the first test is public, the rest private.
    ``docstring-public``: the single test flagged ``docstring_public`` is
    public; every other test (the remaining checks plus the official suite)
    is private.
    """
    if not raw_tests:
        raise SplitError("cannot split an empty test list")
    if policy == SPLIT_FIRST_PUBLIC:
        return [raw_tests[0]], list(raw_tests[1:])
    if policy == SPLIT_DOCSTRING_PUBLIC:
        marked = [t for t in raw_tests if t.docstring_public]
        if len(marked) != 1:
            raise SplitError(
                f"docstring-public split needs exactly one designated test, found {len(marked)}"
            )
        public = marked[0]
        return [public], [t for t in raw_tests if t is not public]
    raise SplitError(f"unknown split policy {policy!r}")


def make_pomdp_variant(p: Problem) -> Problem:
    """Return the prompt-rendering variant with public tests hidden.

    Idempotent; test membership and oracle outcomes are unchanged.
    """
    if p.pomdp:
        return p
    return replace(p, pomdp=True)
