import json
from concurrent.futures import ThreadPoolExecutor

import pytest
from hypothesis import given, strategies as st

from codeloop.contract import check_chat_endpoint, check_scorer_endpoint
from codeloop.env import EnvState, reset
from codeloop.generate import (
    BACKEND_MOCK,
    BACKEND_REMOTE,
    BackendError,
    GeneratorConfig,
    MockScript,
    advance_stage,
    generate_candidates,
    state_to_transcript,
)
from codeloop.prompts import render_initial_prompt

from stub_servers import StubServer


@pytest.fixture(scope="module")
def mock_script_path(tmp_path_factory, request):
    pools = {
        "4": {
            "stages": [
                {
                    "first": [
                        "```python\ndef increment(n):\n    return n\n```",
                        "```python\ndef increment(n):\n    return n + 1\n```",
                        "no code in this reply",
                    ],
                    "retry": [
                        "```python\ndef increment(n):\n    return n + 1\n```",
                        "```python\ndef increment(n):\n    return n + 2\n```",
                    ],
                },
                {
                    "first": ["```python\ndef increment(n):\n    return n + 1\n```"],
                },
            ]
        }
    }
    path = tmp_path_factory.mktemp("mock") / "script.json"
    path.write_text(json.dumps({"format": "mockgen-v1", "problems": pools}))
    return str(path)


@pytest.fixture()
def mock_cfg(mock_script_path):
    return GeneratorConfig(
        backend=BACKEND_MOCK, mock_script=mock_script_path, temperature=0.7, seed=7
    )


class TestGeneratorConfig:
    def test_bad_backend(self):
        with pytest.raises(ValueError):
            GeneratorConfig(backend="other")

    def test_temperature_bounds(self):
        with pytest.raises(ValueError):
            GeneratorConfig(temperature=-0.1)
        with pytest.raises(ValueError):
            GeneratorConfig(temperature=2.5)


class TestTranscript:
    def test_fresh_state_single_message(self, problems_by_id):
        transcript = state_to_transcript(reset(problems_by_id["0"]))
        assert len(transcript) == 1
        assert transcript[0].role == "user"
        assert transcript[0].content == render_initial_prompt(problems_by_id["0"])

    def test_two_history_entries_five_messages(self, problems_by_id):
        state = EnvState(
            problem=problems_by_id["0"],
            history=(
                ("def min_cost(c, m, n):\n    return 0", "Feedback:\n\nAssertionError"),
                ("def min_cost(c, m, n):\n    return 1", "Feedback:\n\nAssertionError"),
            ),
        )
        transcript = state_to_transcript(state)
        assert [m.role for m in transcript] == ["user", "assistant", "user", "assistant", "user"]
        assert transcript[1].content == state.history[0][0]
        assert transcript[2].content == state.history[0][1]

    @given(st.lists(st.tuples(st.text(max_size=30), st.text(min_size=1, max_size=30)), max_size=5))
    def test_roles_alternate_for_any_history(self, history):
        from codeloop.problems import ASSERT_CODE, Problem, TestCase

        problem = Problem(
            id="h",
            prompt="p",
            test_kind=ASSERT_CODE,
            public_tests=(TestCase(kind=ASSERT_CODE, code="assert True"),),
        )
        state = EnvState(problem=problem, history=tuple(history))
        roles = [m.role for m in state_to_transcript(state)]
        assert roles[0] == "user"
        expected = ["user"] + ["assistant", "user"] * len(history)
        assert roles == expected
        # feedback messages land at odd positions (0-indexed) shifted by one
        for k, (_, feedback) in enumerate(history):
            assert state_to_transcript(state)[2 * k + 2].content == feedback


class TestMockBackend:
    def test_same_state_same_candidates(self, problems_by_id, mock_cfg):
        state = reset(problems_by_id["4"])
        assert generate_candidates(state, 4, mock_cfg) == generate_candidates(state, 4, mock_cfg)

    def test_n_completions(self, problems_by_id, mock_cfg):
        state = reset(problems_by_id["4"])
        assert len(generate_candidates(state, 5, mock_cfg)) == 5

    def test_greedy_returns_canonical_pool_head(self, problems_by_id, mock_script_path):
        cfg = GeneratorConfig(backend=BACKEND_MOCK, mock_script=mock_script_path, temperature=0.0)
        state = reset(problems_by_id["4"])
        [completion] = generate_candidates(state, 1, cfg)
        assert completion == "```python\ndef increment(n):\n    return n\n```"

    def test_retry_pool_used_after_feedback(self, problems_by_id, mock_script_path):
        cfg = GeneratorConfig(backend=BACKEND_MOCK, mock_script=mock_script_path, temperature=0.0)
        state = EnvState(
            problem=problems_by_id["4"],
            history=(("def increment(n):\n    return n", "Feedback:\n\nAssertionError"),),
        )
        [completion] = generate_candidates(state, 1, cfg)
        assert completion == "```python\ndef increment(n):\n    return n + 1\n```"

    def test_stage_clamps_to_last(self, problems_by_id, mock_script_path):
        cfg = GeneratorConfig(
            backend=BACKEND_MOCK, mock_script=mock_script_path, temperature=0.0, stage=9
        )
        state = reset(problems_by_id["4"])
        [completion] = generate_candidates(state, 1, cfg)
        assert "return n + 1" in completion

    def test_advance_stage_changes_distribution(self, problems_by_id, mock_script_path):
        cfg = GeneratorConfig(backend=BACKEND_MOCK, mock_script=mock_script_path, temperature=0.0)
        state = reset(problems_by_id["4"])
        stage0 = generate_candidates(state, 1, cfg)
        stage1 = generate_candidates(state, 1, advance_stage(cfg))
        assert stage0 != stage1

    def test_seed_changes_samples(self, problems_by_id, mock_script_path):
        state = reset(problems_by_id["4"])
        a = generate_candidates(
            state, 8, GeneratorConfig(backend=BACKEND_MOCK, mock_script=mock_script_path, temperature=0.7, seed=1)
        )
        b = generate_candidates(
            state, 8, GeneratorConfig(backend=BACKEND_MOCK, mock_script=mock_script_path, temperature=0.7, seed=2)
        )
        assert a != b

    def test_parallel_equals_serial(self, problems_by_id, mock_cfg):
        state = reset(problems_by_id["4"])
        serial = generate_candidates(state, 8, mock_cfg)
        with ThreadPoolExecutor(max_workers=4) as pool:
            parallel = list(
                pool.map(lambda _: generate_candidates(state, 8, mock_cfg), range(6))
            )
        assert all(run == serial for run in parallel)

    def test_unknown_problem_errors(self, problems_by_id, mock_cfg):
        state = reset(problems_by_id["5"])
        with pytest.raises(BackendError, match="no pool"):
            generate_candidates(state, 1, mock_cfg)

    def test_bad_script_format_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"format": "mockgen-v0", "problems": {}}))
        with pytest.raises(BackendError, match="mockgen-v1"):
            MockScript.load(str(path))


class TestRemoteBackend:
    def test_n_candidates_ordered(self, problems_by_id):
        with StubServer() as stub:
            cfg = GeneratorConfig(
                backend=BACKEND_REMOTE, endpoint=stub.chat_url, temperature=0.7
            )
            state = reset(problems_by_id["4"])
            completions = generate_candidates(state, 3, cfg)
            assert len(completions) == 3
            assert [stub.requests[-1]["n"]] == [3]

    def test_sends_full_transcript(self, problems_by_id):
        with StubServer() as stub:
            cfg = GeneratorConfig(backend=BACKEND_REMOTE, endpoint=stub.chat_url)
            state = EnvState(
                problem=problems_by_id["4"],
                history=(("def increment(n):\n    return n", "Feedback:\n\nAssertionError"),),
            )
            generate_candidates(state, 1, cfg)
            sent = stub.requests[-1]["messages"]
            assert [m["role"] for m in sent] == ["user", "assistant", "user"]

    def test_transport_failure_retried(self, problems_by_id, monkeypatch):
        monkeypatch.setattr("time.sleep", lambda s: None)
        with StubServer() as stub:
            stub.httpd.fail_next = 2
            cfg = GeneratorConfig(backend=BACKEND_REMOTE, endpoint=stub.chat_url)
            completions = generate_candidates(reset(problems_by_id["4"]), 1, cfg)
            assert len(completions) == 1
            assert len(stub.requests) == 3  # two dropped, one served

    def test_application_error_not_retried(self, problems_by_id):
        with StubServer() as stub:
            stub.httpd.status = 500
            cfg = GeneratorConfig(backend=BACKEND_REMOTE, endpoint=stub.chat_url)
            with pytest.raises(BackendError, match="500"):
                generate_candidates(reset(problems_by_id["4"]), 1, cfg)
            assert len(stub.requests) == 1

    def test_exhausted_retries_raise(self, problems_by_id, monkeypatch):
        monkeypatch.setattr("time.sleep", lambda s: None)
        with StubServer() as stub:
            stub.httpd.fail_next = 99
            cfg = GeneratorConfig(backend=BACKEND_REMOTE, endpoint=stub.chat_url)
            with pytest.raises(BackendError, match="failed after"):
                generate_candidates(reset(problems_by_id["4"]), 1, cfg)


class TestWireContract:
    def test_stub_chat_endpoint_conforms(self):
        with StubServer() as stub:
            check_chat_endpoint(stub.chat_url)

    def test_stub_scorer_endpoint_conforms(self):
        with StubServer() as stub:
            check_scorer_endpoint(stub.score_url)
