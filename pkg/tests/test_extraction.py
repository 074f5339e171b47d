"""Endpoint client, output parsing, grounding, and the batch driver."""

from __future__ import annotations

import logging
import random

import pytest

from cogspan.corpus import Category
from cogspan.errors import ConfigError, CredentialError, ProtocolError, TransportError
from cogspan.extraction import (
    EndpointConfig,
    ExtractionItem,
    GroundedResult,
    Provenance,
    call_endpoint,
    extract_batch,
    ground,
    parse_model_output,
    parse_predictions,
    results_to_annotation_sets,
    serialize_predictions,
)
from cogspan.prompting import PromptRecord

from conftest import make_doc


def config_for(stub, **overrides) -> EndpointConfig:
    defaults = dict(base_url=stub.base_url, model_name="test-model", retry_backoff=0.01)
    defaults.update(overrides)
    return EndpointConfig(**defaults)


PROMPT = PromptRecord(instruction="inst", input="probe")


# ---------------------------------------------------------------------------
# parse_model_output


def test_parse_direct_array():
    parsed = parse_model_output('[{"category":"action","text":"walked"}]')
    assert parsed.items == (ExtractionItem(Category.ACTION, "walked"),)
    assert not parsed.null_response
    assert not parsed.salvaged


def test_parse_salvages_wrapped_array():
    raw = (
        'Here are the entities: [{"category":"Social Interaction",'
        '"text":"We laughed together"}] Hope this helps!'
    )
    parsed = parse_model_output(raw)
    assert parsed.items == (ExtractionItem(Category.SOCIAL_INTERACTION, "We laughed together"),)
    assert parsed.salvaged


def test_parse_empty_and_whitespace_are_null():
    assert parse_model_output("").null_response
    assert parse_model_output("   \n\t ").null_response


def test_parse_prose_without_array_is_null():
    assert parse_model_output("I could not find any spans in this narrative.").null_response


def test_parse_empty_array_is_a_real_answer():
    parsed = parse_model_output("[]")
    assert parsed.items == ()
    assert not parsed.null_response


def test_parse_first_parsable_block_wins():
    parsed = parse_model_output('scores [1, 2] then [{"category":"action","text":"x"}]')
    # the leading numeric array is the first balanced block that parses; its
    # elements are not item objects, so they are dropped and counted
    assert parsed.items == ()
    assert parsed.dropped == 2
    assert not parsed.null_response


def test_parse_category_name_normalization():
    raw = (
        '[{"category":"SENSORY","text":"a"},'
        '{"category":" social interaction ","text":"b"},'
        '{"category":"Time","text":"c"}]'
    )
    parsed = parse_model_output(raw)
    assert [i.category for i in parsed.items] == [
        Category.SENSORY,
        Category.SOCIAL_INTERACTION,
        Category.TIME,
    ]


def test_parse_drops_bad_items_and_counts():
    raw = (
        '[{"category":"weather","text":"rainy"},'
        '{"category":"action","text":""},'
        '{"category":"action"},'
        '"just a string",'
        '{"category":"action","text":"kept"}]'
    )
    parsed = parse_model_output(raw)
    assert parsed.items == (ExtractionItem(Category.ACTION, "kept"),)
    assert parsed.dropped == 4


def test_parse_occurrence_field():
    raw = (
        '[{"category":"action","text":"a","occurrence":2},'
        '{"category":"action","text":"b","occurrence":0},'
        '{"category":"action","text":"c","occurrence":"first"}]'
    )
    parsed = parse_model_output(raw)
    assert [i.occurrence for i in parsed.items] == [2, None, None]


def test_parse_never_raises_on_noise():
    rng = random.Random(4242)
    for _ in range(1000):
        blob = bytes(rng.randrange(256) for _ in range(rng.randrange(80))).decode("latin-1")
        parsed = parse_model_output(blob)
        assert parsed.null_response or isinstance(parsed.items, tuple)
        for item in parsed.items:
            assert isinstance(item.category, Category) and item.text


# ---------------------------------------------------------------------------
# grounding


def test_ground_unique_surfaces():
    doc = make_doc("d1", "I walked to Paris on Monday")
    items = [
        ExtractionItem(Category.LOCATION, "Paris"),
        ExtractionItem(Category.TIME, "Monday"),
    ]
    result = ground(items, doc)
    assert [(s.start, s.end, s.category) for s in result.spans] == [
        (12, 17, Category.LOCATION),
        (21, 27, Category.TIME),
    ]
    assert not result.ungrounded


def test_ground_repeated_surface_takes_next_unused():
    doc = make_doc("d1", "the hot oven warmed; the hot oven glowed")
    items = [ExtractionItem(Category.SENSORY, "hot oven")] * 2
    result = ground(items, doc)
    starts = [s.start for s in result.spans]
    assert starts == [4, 25]


def test_ground_occurrence_override():
    doc = make_doc("d1", "hot oven here, hot oven there, hot oven everywhere")
    items = [ExtractionItem(Category.SENSORY, "hot oven", occurrence=3)]
    result = ground(items, doc)
    assert result.spans[0].start == 31


def test_ground_case_insensitive_fallback_keeps_document_casing():
    doc = make_doc("d1", "We visited Paris today")
    result = ground([ExtractionItem(Category.LOCATION, "paris")], doc)
    assert result.spans[0].surface == "Paris"
    assert result.spans[0].start == 11


def test_ground_case_variants_share_consumption():
    doc = make_doc("d1", "paris then Paris")
    items = [
        ExtractionItem(Category.LOCATION, "Paris"),
        ExtractionItem(Category.LOCATION, "paris"),
    ]
    result = ground(items, doc)
    # exact pass puts the first item at offset 11; the second item's exact pass
    # finds offset 0 still free
    assert sorted(s.start for s in result.spans) == [0, 11]


def test_ground_unmatched_items_reported():
    doc = make_doc("d1", "Nothing relevant here")
    items = [ExtractionItem(Category.EMOTION, "ecstatic")]
    result = ground(items, doc)
    assert result.spans == ()
    assert result.ungrounded == tuple(items)
    assert not result.null_response


# ---------------------------------------------------------------------------
# call_endpoint


def test_call_passes_content_through(stub_endpoint):
    stub_endpoint.route("probe", '[{"category": "action", "text": "x"}]')
    raw = call_endpoint(PROMPT, config_for(stub_endpoint))
    assert raw == '[{"category": "action", "text": "x"}]'
    body = stub_endpoint.requests[0]["body"]
    assert body["model"] == "test-model"
    assert body["temperature"] == 0
    assert body["messages"][0] == {"role": "system", "content": "inst"}
    assert body["messages"][1] == {"role": "user", "content": "probe"}
    assert stub_endpoint.requests[0]["path"] == "/v1/chat/completions"


def test_call_retries_on_429_and_logs(stub_endpoint, caplog):
    stub_endpoint.route("probe", 429, 429, "recovered")
    with caplog.at_level(logging.WARNING, logger="cogspan.extraction"):
        raw = call_endpoint(PROMPT, config_for(stub_endpoint))
    assert raw == "recovered"
    assert len(stub_endpoint.requests) == 3
    retries = [r for r in caplog.records if "retry" in r.getMessage()]
    assert len(retries) == 2


def test_call_credential_error_no_retry(stub_endpoint):
    stub_endpoint.route("probe", 401)
    with pytest.raises(CredentialError):
        call_endpoint(PROMPT, config_for(stub_endpoint))
    assert len(stub_endpoint.requests) == 1


def test_call_exhausted_retries(stub_endpoint):
    stub_endpoint.route("probe", 503)
    with pytest.raises(TransportError):
        call_endpoint(PROMPT, config_for(stub_endpoint, max_retries=2))
    assert len(stub_endpoint.requests) == 3


def test_call_non_json_body_is_protocol_error(stub_endpoint):
    stub_endpoint.route("probe", ("raw", b"<html>oops</html>"))
    with pytest.raises(ProtocolError):
        call_endpoint(PROMPT, config_for(stub_endpoint))


def test_call_missing_choices_is_protocol_error(stub_endpoint):
    stub_endpoint.route("probe", ("raw", b'{"unexpected": true}'))
    with pytest.raises(ProtocolError):
        call_endpoint(PROMPT, config_for(stub_endpoint))


def test_call_sends_bearer_key_from_env(stub_endpoint, monkeypatch):
    monkeypatch.setenv("COGSPAN_API_KEY", "sk-local-test")
    stub_endpoint.route("probe", "[]")
    call_endpoint(PROMPT, config_for(stub_endpoint))
    assert stub_endpoint.requests[0]["auth"] == "Bearer sk-local-test"


def test_call_omits_auth_header_without_key(stub_endpoint, monkeypatch):
    monkeypatch.delenv("COGSPAN_API_KEY", raising=False)
    stub_endpoint.route("probe", "[]")
    call_endpoint(PROMPT, config_for(stub_endpoint))
    assert stub_endpoint.requests[0]["auth"] is None


# ---------------------------------------------------------------------------
# extract_batch


def test_batch_empty_doc_list(stub_endpoint):
    assert extract_batch([], "zero", None, config_for(stub_endpoint)) == []


def test_batch_invalid_config_before_any_request(stub_endpoint):
    with pytest.raises(ConfigError):
        extract_batch(
            [make_doc("d1", "text")], "zero", None, config_for(stub_endpoint, max_concurrency=0)
        )
    with pytest.raises(ConfigError):
        extract_batch([make_doc("d1", "text")], "few", None, config_for(stub_endpoint))
    assert stub_endpoint.requests == []


def test_batch_results_follow_input_order(stub_endpoint):
    docs = [make_doc(f"d{i}", f"walked segment {i}") for i in range(3)]
    for doc in docs:
        stub_endpoint.route(doc.text, f'[{{"category":"action","text":"walked"}}]')
    sequential = extract_batch(docs, "zero", None, config_for(stub_endpoint, max_concurrency=1))
    concurrent = extract_batch(docs, "zero", None, config_for(stub_endpoint, max_concurrency=4))
    assert [r.doc_id for r in sequential] == ["d0", "d1", "d2"]
    assert sequential == concurrent
    assert all(r.provenance.model_name == "test-model" for r in sequential)
    assert all(r.provenance.prompt_hash for r in sequential)


def test_batch_isolates_failing_document(stub_endpoint):
    docs = [make_doc("d1", "fine one"), make_doc("d2", "stuck one"), make_doc("d3", "fine two")]
    stub_endpoint.route("fine one", '[{"category":"action","text":"fine"}]')
    stub_endpoint.route("stuck one", ("slow", 2.0))
    stub_endpoint.route("fine two", "[]")
    config = config_for(stub_endpoint, timeout=0.3, max_retries=0, max_concurrency=3)
    results = extract_batch(docs, "zero", None, config)
    assert [r.doc_id for r in results] == ["d1", "d2", "d3"]
    assert results[1].null_response
    assert results[1].provenance.error
    assert not results[0].null_response
    assert not results[2].null_response


def test_batch_marks_salvage_and_drops(stub_endpoint):
    doc = make_doc("d1", "We laughed together a lot")
    stub_endpoint.route(
        doc.text,
        'Sure! [{"category":"social interaction","text":"We laughed together"},'
        '{"category":"noise","text":"zzz"}] done',
    )
    result = extract_batch([doc], "zero", None, config_for(stub_endpoint))[0]
    assert result.provenance.salvaged
    assert result.provenance.dropped == 1
    assert len(result.spans) == 1


# ---------------------------------------------------------------------------
# predictions file


def sample_results():
    doc = make_doc("d1", "I walked to Paris on Monday")
    grounded = ground(
        [
            ExtractionItem(Category.LOCATION, "Paris"),
            ExtractionItem(Category.EMOTION, "ecstatic"),
        ],
        doc,
        provenance=Provenance("m", "zero", "abc123", dropped=1),
    )
    failed = GroundedResult(
        doc_id="d2",
        spans=(),
        ungrounded=(),
        null_response=True,
        provenance=Provenance("m", "zero", "def456", error="boom"),
    )
    return [grounded, failed]


def test_predictions_round_trip():
    results = sample_results()
    data = serialize_predictions(results)
    assert parse_predictions(data) == results


def test_results_to_annotation_sets_dedupes():
    doc = make_doc("d1", "Paris Paris")
    first = ground([ExtractionItem(Category.LOCATION, "Paris", occurrence=1)] * 2, doc)
    # occurrence=1 twice grounds to the same offsets: one span must survive
    assert len(first.spans) == 2
    sets = results_to_annotation_sets([first], "model")
    assert len(sets[0].spans) == 1
    assert sets[0].annotator_id == "model"
