import json

import pytest

from codeloop.problems import (
    ASSERT_CODE,
    SPLIT_DOCSTRING_PUBLIC,
    SPLIT_FIRST_PUBLIC,
    STDIO_PAIR,
    CorpusError,
    Problem,
    SplitError,
    TestCase,
    load_problems,
    make_pomdp_variant,
    save_problems,
    split_tests,
)

from conftest import FIXTURE_CORPUS


def _asserts(*codes):
    return [TestCase(kind=ASSERT_CODE, code=c) for c in codes]


class TestLoadProblems:
    def test_fixture_corpus_loads_12_problems(self, fixture_problems):
        assert len(fixture_problems) == 12
        assert [p.id for p in fixture_problems] == [str(i) for i in range(12)]

    def test_min_cost_record(self, problems_by_id):
        p = problems_by_id["0"]
        assert "minimum cost path" in p.prompt
        assert p.test_kind == ASSERT_CODE
        assert len(p.public_tests) == 1
        assert len(p.private_tests) == 2
        assert p.entry_point == "min_cost"

    def test_empty_file_gives_empty_list(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert load_problems(str(path)) == []

    def test_malformed_record_names_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"format": "corpus-v1"}\n{"id": "x", "nope": 1\n')
        with pytest.raises(CorpusError, match=r":2:"):
            load_problems(str(path))

    def test_duplicate_id_rejected(self, tmp_path):
        record = {
            "id": "a",
            "prompt": "p",
            "test_kind": "assert-code",
            "public_tests": [{"kind": "assert-code", "code": "assert True"}],
            "private_tests": [],
        }
        path = tmp_path / "dup.jsonl"
        with open(path, "w") as fh:
            fh.write(json.dumps({"format": "corpus-v1"}) + "\n")
            fh.write(json.dumps(record) + "\n")
            fh.write(json.dumps(record) + "\n")
        with pytest.raises(CorpusError, match="duplicate"):
            load_problems(str(path))

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "hdr.jsonl"
        path.write_text('{"format": "corpus-v0"}\n')
        with pytest.raises(CorpusError, match="corpus-v1"):
            load_problems(str(path))

    def test_round_trip_identity(self, fixture_problems, tmp_path):
        out = tmp_path / "copy.jsonl"
        save_problems(fixture_problems, str(out))
        again = load_problems(str(out))
        assert again == fixture_problems

    def test_order_preserved_matches_file(self):
        with open(FIXTURE_CORPUS) as fh:
            fh.readline()
            file_ids = [json.loads(line)["id"] for line in fh if line.strip()]
        assert [p.id for p in load_problems(FIXTURE_CORPUS)] == file_ids


class TestProblemInvariants:
    def test_no_tests_rejected(self):
        with pytest.raises(CorpusError, match="no tests"):
            Problem(id="x", prompt="p", test_kind=ASSERT_CODE)

    def test_mixed_kinds_rejected(self):
        with pytest.raises(CorpusError, match="does not match"):
            Problem(
                id="x",
                prompt="p",
                test_kind=ASSERT_CODE,
                public_tests=(TestCase(kind=STDIO_PAIR, input="1", output="1"),),
            )

    def test_empty_assert_payload_rejected(self):
        with pytest.raises(CorpusError, match="empty payload"):
            TestCase(kind=ASSERT_CODE, code="   ")


class TestSplitTests:
    def test_first_public_on_min_cost_asserts(self):
        tests = _asserts(
            "assert min_cost([[1, 2, 3], [4, 8, 2], [1, 5, 3]], 2, 2) == 8",
            "assert min_cost([[2, 3, 4], [5, 9, 3], [2, 6, 4]], 2, 2) == 12",
            "assert min_cost([[3, 4, 5], [6, 10, 4], [3, 7, 5]], 2, 2) == 16",
        )
        public, private = split_tests(tests, SPLIT_FIRST_PUBLIC)
        assert public == [tests[0]]
        assert "== 8" in public[0].code
        assert [t.code for t in private] == [tests[1].code, tests[2].code]

    def test_single_test_leaves_empty_private(self):
        tests = _asserts("assert f() == 1")
        public, private = split_tests(tests, SPLIT_FIRST_PUBLIC)
        assert public == tests
        assert private == []

    def test_docstring_public_designation(self):
        docstring_check = TestCase(
            kind=ASSERT_CODE,
            code="assert has_close_elements([1.0, 2.0, 3.0], 0.5) == False",
            docstring_public=True,
        )
        official = _asserts(
            "def check(f):\n    assert f([1.0, 2.0, 3.0], 0.5) == False\ncheck(has_close_elements)"
        )
        public, private = split_tests([official[0], docstring_check], SPLIT_DOCSTRING_PUBLIC)
        assert public == [docstring_check]
        assert private == [official[0]]

    def test_empty_input_raises(self):
        with pytest.raises(SplitError):
            split_tests([], SPLIT_FIRST_PUBLIC)

    def test_split_is_partition(self, fixture_problems):
        for p in fixture_problems:
            tests = list(p.all_tests)
            public, private = split_tests(tests, SPLIT_FIRST_PUBLIC)
            assert public + private == tests
            assert not set(t.code or t.input for t in public) & set(
                t.code or t.input for t in private
            )


class TestPomdpVariant:
    def test_sets_flag_only(self, problems_by_id):
        p = problems_by_id["0"]
        v = make_pomdp_variant(p)
        assert v.pomdp is True
        assert v.public_tests == p.public_tests
        assert v.private_tests == p.private_tests
        assert v.prompt == p.prompt

    def test_idempotent(self, problems_by_id):
        v = make_pomdp_variant(problems_by_id["4"])
        assert make_pomdp_variant(v) is v

    def test_whole_corpus(self, fixture_problems):
        variants = [make_pomdp_variant(p) for p in fixture_problems]
        assert len(variants) == 12
        assert all(v.pomdp for v in variants)

    def test_oracle_outcomes_unchanged_on_variants(
        self, problems_by_id, env_cfg, executor
    ):
        from codeloop.env import oracle_reward

        import solutions

        for pid in ("0", "4", "8"):
            problem = problems_by_id[pid]
            variant = make_pomdp_variant(problem)
            reference = solutions.FIXTURE_SOLUTIONS[pid]
            assert oracle_reward(problem, reference, env_cfg, executor) == oracle_reward(
                variant, reference, env_cfg, executor
            ) == 1
            broken = "def nothing():\n    return None\n"
            assert oracle_reward(problem, broken, env_cfg, executor) == oracle_reward(
                variant, broken, env_cfg, executor
            ) == 0
