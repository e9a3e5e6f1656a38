"""Gateway contracts: caching, stub determinism, retries, sidecars, jobs."""

from __future__ import annotations

import json
import subprocess
import sys
import textwrap

import httpx
import pytest

from procplan.gateway import (
    BackendRefused,
    BackendUnavailable,
    CaptionRequest,
    ChatClient,
    ChatRequest,
    ContextOverflow,
    DEFAULT_MODALITIES,
    FileCaptioner,
    Gateway,
    HttpChatBackend,
    ResponseCache,
    SimilarityClient,
    SimilarityRequest,
    StubChatBackend,
    StubSimilarityScorer,
    StubVideoBackend,
    UnknownJob,
    UnreadableSidecar,
    VideoClient,
    VideoJobRequest,
    build_gateway,
    parse_sidecar,
)
from procplan.model import DEFAULT_INFERENCE_PARAMS, JobStatus


def make_request(prompt="What's the step-by-step procedure for How to Cook Spaghetti?"):
    return ChatRequest(
        model_id="stub-model",
        system_prompt=DEFAULT_INFERENCE_PARAMS.system_prompt,
        user_prompt=prompt,
        params=DEFAULT_INFERENCE_PARAMS,
    )


class TestChatCache:
    def test_second_identical_request_is_cached(self, tmp_path):
        client = ChatClient(StubChatBackend(seed=3), cache=ResponseCache(tmp_path))
        first = client.chat(make_request())
        second = client.chat(make_request())
        assert first.cached is False
        assert second.cached is True
        assert second.text == first.text
        assert second.created_at == first.created_at
        assert client.backend_calls == 1
        assert client.cache_hits == 1

    def test_different_params_miss_cache(self, tmp_path):
        client = ChatClient(StubChatBackend(seed=3), cache=ResponseCache(tmp_path))
        client.chat(make_request())
        other = ChatRequest(
            model_id="stub-model",
            system_prompt=DEFAULT_INFERENCE_PARAMS.system_prompt,
            user_prompt="What's the step-by-step procedure for How to Cook Spaghetti?",
            params=DEFAULT_INFERENCE_PARAMS,
            template_version="variant",
        )
        client.chat(other)
        assert client.backend_calls == 2

    def test_first_write_wins(self, tmp_path):
        cache = ResponseCache(tmp_path)
        key = "ab" + "0" * 62
        assert cache.put(key, {"v": 1}) is True
        assert cache.put(key, {"v": 2}) is False
        assert cache.get(key) == {"v": 1}


class TestStubChat:
    def test_deterministic_across_processes(self, tmp_path):
        script = textwrap.dedent(
            """
            from procplan.gateway import StubChatBackend
            from procplan.gateway.chat import ChatRequest
            from procplan.model import DEFAULT_INFERENCE_PARAMS
            req = ChatRequest(
                model_id="stub-model",
                system_prompt=DEFAULT_INFERENCE_PARAMS.system_prompt,
                user_prompt="What's the step-by-step procedure for How to Cook Spaghetti?",
                params=DEFAULT_INFERENCE_PARAMS,
            )
            print(StubChatBackend(seed=11).complete(req).text)
            """
        )
        runs = {
            subprocess.run(
                [sys.executable, "-c", script], capture_output=True, text=True, check=True
            ).stdout
            for _ in range(2)
        }
        assert len(runs) == 1

    def test_prompt_families_parse(self):
        from procplan.parsing import parse_foc, parse_grounded, parse_vanilla

        backend = StubChatBackend(seed=5)
        vanilla = backend.complete(make_request()).text
        steps, _ = parse_vanilla(vanilla)
        assert len(steps) >= 1

        foc_prompt = (
            "captions...\n\nAccording to the captions above, then prepare the logical "
            "video captions for the task procedures of the X step-by-step in a "
            "sentence template of <person> <verb> <action>?"
        )
        foc = backend.complete(make_request(foc_prompt)).text
        foc_steps, diag = parse_foc(foc)
        assert len(foc_steps) >= 1
        assert diag.warnings == []

        align_prompt = (
            "Rewrite the step-by-step procedures of X by using video captions "
            "pair-wisely in a template <text>, <context> and <visual> separately.\n..."
        )
        grounded_steps, _ = parse_grounded(backend.complete(make_request(align_prompt)).text)
        assert len(grounded_steps) >= 1
        assert all(s.visual for s in grounded_steps)

    def test_canned_response_wins(self):
        backend = StubChatBackend(seed=1, responses={"Spaghetti": "I cannot help with that."})
        assert backend.complete(make_request()).text == "I cannot help with that."


class _FlakyTransport(httpx.BaseTransport):
    def __init__(self, failures: int, response: httpx.Response | None = None):
        self.failures = failures
        self.response = response
        self.attempts = 0

    def handle_request(self, request):
        self.attempts += 1
        if self.attempts <= self.failures:
            raise httpx.ConnectError("boom", request=request)
        if self.response is None:
            body = {"choices": [{"message": {"content": "1. Do the thing."}}]}
            return httpx.Response(200, json=body)
        return self.response


def http_client_with(transport):
    return httpx.Client(transport=transport, base_url="http://backend")


class TestHttpChat:
    def test_retries_then_succeeds(self):
        transport = _FlakyTransport(failures=2)
        backend = HttpChatBackend("http://backend/v1/chat", client=http_client_with(transport))
        client = ChatClient(backend, retries=3, backoff_base=0, sleep=lambda s: None)
        response = client.chat(make_request())
        assert response.text == "1. Do the thing."
        assert transport.attempts == 3

    def test_exhausted_retries_raise_unavailable(self):
        transport = _FlakyTransport(failures=10)
        backend = HttpChatBackend("http://backend/v1/chat", client=http_client_with(transport))
        client = ChatClient(backend, retries=3, backoff_base=0, sleep=lambda s: None)
        with pytest.raises(BackendUnavailable):
            client.chat(make_request())
        assert transport.attempts == 3

    def test_malformed_envelope_refused_with_body(self):
        transport = _FlakyTransport(failures=0, response=httpx.Response(200, json={"oops": 1}))
        backend = HttpChatBackend("http://backend/v1/chat", client=http_client_with(transport))
        client = ChatClient(backend, retries=1, sleep=lambda s: None)
        with pytest.raises(BackendRefused) as err:
            client.chat(make_request())
        assert "oops" in err.value.body

    def test_context_overflow_detected(self):
        transport = _FlakyTransport(
            failures=0,
            response=httpx.Response(400, text="maximum context length is 4096 tokens"),
        )
        backend = HttpChatBackend("http://backend/v1/chat", client=http_client_with(transport))
        client = ChatClient(backend, retries=1, sleep=lambda s: None)
        with pytest.raises(ContextOverflow):
            client.chat(make_request())


class TestCaptions:
    def test_default_modalities_exclude_audio(self):
        assert "audio" not in DEFAULT_MODALITIES
        assert CaptionRequest("x.mp4").modalities == ("image", "region")

    def test_sidecar_three_lines(self, tmp_path):
        sidecar = tmp_path / "clip.mp4.captions.csv"
        sidecar.write_text(
            "0,5,hands rinsing apples in a sink\n"
            "17,26,wooden cutting board with sliced apples on it\n"
            "30,41,pouring water into a blender\n"
        )
        result = FileCaptioner(tmp_path).caption(CaptionRequest("clip.mp4"), video_index=0)
        assert len(result.track.segments) == 3
        assert result.track.segments[1].start_sec == 17
        assert result.track.segments[1].end_sec == 26

    def test_out_of_order_sidecar_sorted(self):
        track = parse_sidecar("30,41,c\n0,5,a\n17,26,b\n")
        assert [s.start_sec for s in track.segments] == [0, 17, 30]

    def test_text_with_commas_kept_whole(self):
        track = parse_sidecar("1,4,a person slices apples, then pears\n")
        assert track.segments[0].text == "a person slices apples, then pears"

    def test_missing_sidecar(self, tmp_path):
        with pytest.raises(UnreadableSidecar):
            FileCaptioner(tmp_path).caption(CaptionRequest("absent.mp4"))

    def test_malformed_sidecar(self):
        with pytest.raises(UnreadableSidecar):
            parse_sidecar("not,numeric\n")


class TestVideoJobs:
    def test_idempotent_submit(self):
        client = VideoClient(StubVideoBackend())
        request = VideoJobRequest(prompt="A person slicing apples.", seed=4)
        assert client.submit(request) == client.submit(request)
        assert client.backend.submissions == 1

    def test_poll_unknown(self):
        with pytest.raises(UnknownJob):
            VideoClient(StubVideoBackend()).poll("nope")

    def test_polls_to_done_sequence(self):
        client = VideoClient(StubVideoBackend(polls_to_done=2))
        job_id = client.submit(VideoJobRequest(prompt="x"))
        assert client.poll(job_id).status is JobStatus.PENDING
        done = client.poll(job_id)
        assert done.status is JobStatus.DONE
        assert done.artifact_uri

    def test_terminal_state_immutable(self):
        client = VideoClient(StubVideoBackend(polls_to_done=1))
        job_id = client.submit(VideoJobRequest(prompt="x"))
        first = client.poll(job_id)
        assert first.status is JobStatus.DONE
        assert client.poll(job_id) == first

    def test_fail_prompts(self):
        client = VideoClient(StubVideoBackend(fail_prompts=("broken",)))
        status = client.run_to_completion(VideoJobRequest(prompt="a broken prompt"))
        assert status.status is JobStatus.FAILED
        assert status.artifact_uri is None


class TestSimilarity:
    def test_stub_constant(self):
        client = SimilarityClient(StubSimilarityScorer(constant=0.5))
        assert client.score(SimilarityRequest("frame0", "text")) == 0.5

    def test_cache_hit(self, tmp_path):
        client = SimilarityClient(
            StubSimilarityScorer(constant=0.25), cache=ResponseCache(tmp_path)
        )
        request = SimilarityRequest("frame0", "text")
        client.score(request)
        client.score(request)
        assert client.cache_hits == 1

    def test_out_of_range_clamped_with_warning(self):
        class WildScorer:
            backend_id = "wild"

            def score(self, request):
                return 3.7

        client = SimilarityClient(WildScorer())
        assert client.score(SimilarityRequest("f", "t")) == 1.0
        assert client.warnings


class TestGatewayConfig:
    def test_build_all_stub(self, tmp_path):
        config = {
            "chat": {"kind": "stub", "stub_seed": 9, "model_id": "stub-9"},
            "captioner": {"kind": "stub"},
            "video": {"kind": "stub", "polls_to_done": 2},
            "similarity": {"kind": "stub", "constant": 0.5},
        }
        gateway = build_gateway(config, cache_dir=tmp_path / "cache")
        assert gateway.chat_model_id == "stub-9"
        response = gateway.chat.chat(make_request())
        assert response.text

    def test_file_captioner_from_config(self, tmp_path):
        (tmp_path / "v.mp4.captions.csv").write_text("0,2,someone stirs a pot\n")
        gateway = build_gateway({"captioner": {"kind": "file", "sidecar_root": str(tmp_path)}})
        result = gateway.captioner.caption(CaptionRequest("v.mp4"))
        assert result.track.segments[0].text == "someone stirs a pot"

    def test_default_stub_roundtrip(self, tmp_path):
        gateway = Gateway.default_stub(cache_dir=tmp_path)
        first = gateway.chat.chat(make_request())
        second = gateway.chat.chat(make_request())
        assert second.cached and second.text == first.text

    def test_bad_kind_rejected(self):
        from procplan.gateway import ConfigError

        with pytest.raises(ConfigError):
            build_gateway({"chat": {"kind": "carrier-pigeon"}})

    def test_http_requires_endpoint(self):
        from procplan.gateway import ConfigError

        with pytest.raises(ConfigError):
            build_gateway({"chat": {"kind": "http"}})

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "backends.json"
        path.write_text(json.dumps({"chat": {"kind": "stub"}}))
        from procplan.gateway import load_gateway

        gateway = load_gateway(path)
        assert gateway.chat.backend.backend_id == "stub-chat"
