"""Two-phase synthetic retrieval data: topic brainstorming, then one
(query, positive, hard negative) triplet per randomised prompt.

The LLM is reached through :func:`call_llm`, which talks to any
chat-completion style HTTP endpoint or to :class:`MockLLM`, a deterministic
offline stand-in backed by a fixture file.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
import hashlib
import json
import logging
import os
from pathlib import Path
import re
import time

import httpx
import numpy as np

from .data import RetrievalExample
from .errors import (
    AuthError,
    MissingKey,
    NotJson,
    RateLimited,
    ServiceError,
    Timeout,
    TooShort,
)

log = logging.getLogger(__name__)

QUERY_TYPES = ("extremely long-tail", "long-tail", "common")
QUERY_LENGTHS = ("less than 5 words", "5 to 15 words", "at least 10 words")
CLARITIES = ("clear", "understandable with some effort", "ambiguous")
NUM_WORDS = (50, 100, 200, 300, 400, 500)
DIFFICULTIES = ("high school", "college", "PhD")

GENERATIONS_PER_TOPIC = 10
MIN_LENGTH_FRACTION = 0.5
API_KEY_ENV = "SYNTH_API_KEY"

PHASE1_TEMPLATE = (
    "Brainstorm a list of potentially useful text retrieval tasks. "
    "Here are a few examples for your reference:\n"
    "- {task1}\n"
    "- {task2}\n"
    "Please adhere to the following guidelines:\n"
    "- Specify what the text is, and what the desired documents are.\n"
    "- Each retrieval task should cover a wide range of queries, and should not be too specific.\n"
    "Your output must always be string, the string is a json dict start with {{ and ends with }}, "
    "the key is 'tasks', and the value is a list of strings only, with about {num} elements, "
    "and each element corresponds to a distinct retrieval task in one sentence. "
    "Do not explain yourself or output anything else. Be creative!"
)

PHASE2_TEMPLATE = (
    "You have been assigned a retrieval task: {task}\n"
    "Your mission is to write one text retrieval example for this task in JSON format. "
    "The JSON object must contain the following keys:\n"
    "- 'user_query': a string, a random user search query specified by the retrieval task.\n"
    "- 'positive_document': a string, a relevant document for the user query.\n"
    "- 'hard_negative_document': a string, a hard negative document that only appears relevant to the query.\n"
    "Please adhere to the following guidelines:\n"
    "- The 'user_query' should be {query_type}, {query_length}, {clarity}, and diverse in topic.\n"
    "- All documents must be created independent of the query. Avoid copying the query verbatim. "
    "It’s acceptable if some parts of the 'positive-document' are not topically related to the query.\n"
    "- All documents should be at least {num_words} words long.\n"
    "- The 'hard_negative_document' contains some useful information, but it should be less useful "
    "or comprehensive compared to the 'positive_document'.\n"
    "- Both the query and documents should be in {language}.\n"
    "- Do not provide any explanation in any document on why it is relevant or not relevant to the query.\n"
    "- Both the query and documents require {difficulty} level education to understand.\n"
    "Your output must always be a JSON object only, do not explain yourself or output anything else. "
    "Be creative!"
)


@dataclass(frozen=True)
class SynthParams:
    query_type: str
    query_length: str
    clarity: str
    num_words: int
    difficulty: str
    language: str = "English"

    def __post_init__(self):
        for name, allowed in (
            ("query_type", QUERY_TYPES),
            ("query_length", QUERY_LENGTHS),
            ("clarity", CLARITIES),
            ("num_words", NUM_WORDS),
            ("difficulty", DIFFICULTIES),
        ):
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name}={getattr(self, name)!r} not in {allowed}")


def build_phase1_prompt(example_tasks, num):
    task1, task2 = example_tasks
    if num < 1:
        raise ValueError("num must be >= 1")
    return PHASE1_TEMPLATE.format(task1=task1, task2=task2, num=num)


def build_phase2_prompt(task, params):
    if not task.strip():
        raise ValueError("task must be non-empty")
    return PHASE2_TEMPLATE.format(task=task, **asdict(params))


def sample_params(seed, language="English"):
    """Independent uniform draw of every randomised prompt field."""
    rng = np.random.default_rng(seed)
    return SynthParams(
        query_type=QUERY_TYPES[rng.integers(len(QUERY_TYPES))],
        query_length=QUERY_LENGTHS[rng.integers(len(QUERY_LENGTHS))],
        clarity=CLARITIES[rng.integers(len(CLARITIES))],
        num_words=NUM_WORDS[rng.integers(len(NUM_WORDS))],
        difficulty=DIFFICULTIES[rng.integers(len(DIFFICULTIES))],
        language=language,
    )


@dataclass(frozen=True)
class LLMRequest:
    prompt: str
    model: str = "gpt-4"
    temperature: float = 1.0
    max_tokens: int = 2048

    def __post_init__(self):
        if not self.prompt.strip():
            raise ValueError("prompt must be non-empty")

    def digest(self):
        blob = json.dumps(asdict(self), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class LLMResponse:
    text: str
    finish: str = "stop"


@dataclass
class Endpoint:
    """A chat-completion HTTP endpoint.

    The credential is read from ``$SYNTH_API_KEY`` at call time. ``transport``
    and ``sleep`` exist so tests can stub the network and the backoff clock.
    """

    url: str
    model: str = "gpt-4"
    timeout: float = 60.0
    max_attempts: int = 3
    backoff: float = 1.0
    transport: object = None
    sleep: object = time.sleep

    @classmethod
    def from_config(cls, path):
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(url=cfg["url"], model=cfg.get("model", "gpt-4"))


def _post_once(request, endpoint, key):
    payload = {
        "model": request.model,
        "messages": [{"role": "user", "content": request.prompt}],
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
    }
    with httpx.Client(transport=endpoint.transport, timeout=endpoint.timeout) as client:
        return client.post(endpoint.url, json=payload, headers={"Authorization": f"Bearer {key}"})


def call_llm(request, endpoint):
    """One completion, retrying 429 / 5xx / timeouts with exponential backoff."""
    if hasattr(endpoint, "complete"):
        return endpoint.complete(request)
    key = os.environ.get(API_KEY_ENV)
    if not key:
        raise AuthError(f"${API_KEY_ENV} is not set")

    last = None
    for attempt in range(endpoint.max_attempts):
        if attempt:
            endpoint.sleep(endpoint.backoff * 2 ** (attempt - 1))
        try:
            resp = _post_once(request, endpoint, key)
        except httpx.TimeoutException as exc:
            last = Timeout(str(exc) or "request timed out")
            continue
        if resp.status_code in (401, 403):
            raise AuthError(f"endpoint rejected credential (HTTP {resp.status_code})")
        if resp.status_code == 429:
            last = RateLimited(f"rate limited after {attempt + 1} attempts")
            continue
        if resp.status_code >= 500:
            last = ServiceError(resp.status_code)
            continue
        if resp.status_code != 200:
            raise ServiceError(resp.status_code, resp.text[:200])
        try:
            choice = resp.json()["choices"][0]
            return LLMResponse(choice["message"]["content"], choice.get("finish_reason", "stop"))
        except (ValueError, KeyError, IndexError, TypeError):
            raise ServiceError(resp.status_code, "malformed completion body") from None
    raise last


_FENCE = re.compile(r"^\s*```(?:json)?\s*(.*?)\s*```\s*$", re.DOTALL)


def _load_json_object(raw):
    m = _FENCE.match(raw)
    if m:
        raw = m.group(1)
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise NotJson(f"not valid JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise NotJson("expected a JSON object")
    return obj


def parse_triplet(raw, params):
    """Validate one phase-2 completion into a retrieval example.

    Documents under half the requested word count are rejected.
    """
    obj = _load_json_object(raw)
    for key in ("user_query", "positive_document", "hard_negative_document"):
        if key not in obj:
            raise MissingKey(key)
        if not isinstance(obj[key], str) or not obj[key].strip():
            raise NotJson(f"{key} must be a non-empty string")
    need = MIN_LENGTH_FRACTION * params.num_words
    for key in ("positive_document", "hard_negative_document"):
        words = len(obj[key].split())
        if words < need:
            raise TooShort(key, words, int(np.ceil(need)))
    return RetrievalExample(
        query=obj["user_query"],
        pos=(obj["positive_document"],),
        neg=(obj["hard_negative_document"],),
    )


def parse_topics(raw):
    obj = _load_json_object(raw)
    if "tasks" not in obj:
        raise MissingKey("tasks")
    tasks = obj["tasks"]
    if not isinstance(tasks, list) or not all(isinstance(t, str) and t.strip() for t in tasks):
        raise NotJson("'tasks' must be a list of strings")
    return tasks


class MockLLM:
    """Offline endpoint: canned responses keyed by :meth:`LLMRequest.digest`.

    Requests missing from the fixture fall through to a seeded generator that
    writes conforming output for either prompt phase, unless ``strict``.
    """

    def __init__(self, fixture=None, strict=False):
        self.responses = {}
        if fixture is not None:
            self.responses = json.loads(Path(fixture).read_text(encoding="utf-8"))
        self.strict = strict
        self.calls = 0

    def complete(self, request):
        self.calls += 1
        key = request.digest()
        if key in self.responses:
            return LLMResponse(self.responses[key])
        if self.strict:
            raise ServiceError(404, f"no canned response for {key[:12]}")
        return LLMResponse(canned_completion(request.prompt))


_SYLLABLES = ("ka", "lo", "mi", "ten", "rus", "vo", "shi", "dan", "pel", "or", "qua", "zen", "bri", "tal")


def _words(rng, n):
    return " ".join(
        "".join(rng.choice(_SYLLABLES, size=rng.integers(2, 4))) for _ in range(n)
    )


def canned_completion(prompt):
    """Deterministic fake completion for a phase-1 or phase-2 prompt."""
    seed = int.from_bytes(hashlib.sha256(prompt.encode("utf-8")).digest()[:8], "little")
    rng = np.random.default_rng(seed)
    m = re.search(r"with about (\d+) elements", prompt)
    if m:
        tasks = [f"Given a question about {_words(rng, 2)}, retrieve documents that answer it"
                 for _ in range(int(m.group(1)))]
        return json.dumps({"tasks": tasks})
    m = re.search(r"at least (\d+) words long", prompt)
    n = int(m.group(1)) if m else 50
    body = {
        "user_query": _words(rng, 6),
        "positive_document": _words(rng, n),
        "hard_negative_document": _words(rng, n),
    }
    return "```json\n" + json.dumps(body) + "\n```"


def pick_examples(pool, seed):
    """Two distinct example tasks drawn at random from ``pool``."""
    pool = list(dict.fromkeys(pool))
    if len(pool) < 2:
        raise ValueError("need at least two distinct example tasks")
    i, j = np.random.default_rng(seed).choice(len(pool), size=2, replace=False)
    return pool[i], pool[j]


def brainstorm_topics(example_tasks, num, endpoint, model="gpt-4"):
    raw = call_llm(LLMRequest(build_phase1_prompt(example_tasks, num), model=model), endpoint).text
    return parse_topics(raw)


def _params_seed(seed, topic_index, generation):
    return int(np.random.SeedSequence([seed, topic_index, generation]).generate_state(1)[0])


def generate_triplets(topics, endpoint, generations=GENERATIONS_PER_TOPIC, seed=0,
                      language="English", model="gpt-4", max_in_flight=4):
    """Phase 2 for every topic, ``generations`` fresh parameter draws each.

    Requests run on up to ``max_in_flight`` threads; results come back in
    input order. Returns ``(examples, failures)`` where ``failures`` lists
    ``(topic, generation, error)`` for completions that did not validate.
    """
    jobs = []
    for ti, topic in enumerate(topics):
        for g in range(generations):
            params = sample_params(_params_seed(seed, ti, g), language)
            jobs.append((topic, g, params, LLMRequest(build_phase2_prompt(topic, params), model=model)))

    def run(job):
        topic, g, params, req = job
        try:
            return parse_triplet(call_llm(req, endpoint).text, params)
        except (MissingKey, NotJson, TooShort) as exc:
            log.warning("topic %r generation %d rejected: %s", topic, g, exc)
            return exc

    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        results = list(pool.map(run, jobs))
    examples, failures = [], []
    for (topic, g, _, _), res in zip(jobs, results):
        if isinstance(res, Exception):
            failures.append((topic, g, res))
        else:
            examples.append(res)
    return examples, failures
