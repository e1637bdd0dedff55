"""
Chat-completion gateway.

Every LLM-dependent stage goes through :class:`LlmGateway`, which runs in
one of three modes:

- ``scripted``: responses come from a fixture map keyed by request hash,
- ``cached``: responses come from the on-disk :class:`ResponseCache` only,
- ``live``: the cache is consulted first, then the transport, and every
  fresh response is written back to the cache.

A live run therefore leaves behind a cache that a cached run replays with
zero network calls.
"""

import hashlib
import json
import math
import os
import tempfile
import threading
import time
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import openai

from ..core.errors import ApiError, CacheMiss, FixtureMiss, LlmTimeout, MalformedResponse, TkgIoError
from ..core.log_utils import get_logger

logger = get_logger(__name__)

DEFAULT_MODEL = "gpt-4o-mini"
JSON_NUDGE = "Return valid JSON only."


class LlmMode(Enum):
    SCRIPTED = "scripted"
    CACHED = "cached"
    LIVE = "live"


class ResponseBackend(Enum):
    SCRIPTED = "Scripted"
    CACHED = "Cached"
    LIVE = "Live"


@dataclass(frozen=True)
class LlmRequest:
    """
    One chat-completion request.

    Only ``model_id``, ``system_instruction``, ``user_content`` and
    ``temperature`` take part in the request hash; ``tag`` (the question id
    used for call accounting) and ``template_id`` are bookkeeping.
    """

    system_instruction: str
    user_content: str
    temperature: float = 0.0
    model_id: str = DEFAULT_MODEL
    template_id: str = field(default="", compare=False)
    tag: str = field(default=None, compare=False)

    def request_hash(self):
        payload = json.dumps(
            {
                "model_id": self.model_id,
                "system_instruction": self.system_instruction,
                "user_content": self.user_content,
                "temperature": float(self.temperature),
            },
            sort_keys=True,
            ensure_ascii=False,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def with_nudge(self, nudge=JSON_NUDGE):
        return replace(self, user_content=f"{self.user_content}\n{nudge}")


@dataclass(frozen=True)
class LlmResponse:
    text: str
    backend: ResponseBackend
    token_estimate: int
    request_hash: str


def estimate_tokens(*texts):
    return int(math.ceil(sum(len(t) for t in texts) / 4))


class TransportError(Exception):
    """Retryable transport failure."""

    def __init__(self, message, status=None):
        self.status = status
        super().__init__(message)


class TransportTimeout(TransportError):
    pass


class OpenAIChatTransport:
    """OpenAI-compatible ``/chat/completions`` client."""

    def __init__(self, base_url=None, api_key_env="OPENAI_API_KEY", timeout=60.0):
        self.base_url = base_url or os.getenv("OPENAI_BASE_URL") or None
        self.api_key_env = api_key_env
        self.timeout = timeout
        self._client = None

    def _get_client(self):
        if self._client is None:
            api_key = os.getenv(self.api_key_env, "").strip()
            if not api_key:
                raise ApiError(f"missing API key: set {self.api_key_env}")
            # retries are handled by the gateway
            self._client = openai.OpenAI(api_key=api_key, base_url=self.base_url, timeout=self.timeout, max_retries=0)
        return self._client

    def chat(self, request):
        messages = [
            {"role": "system", "content": request.system_instruction},
            {"role": "user", "content": request.user_content},
        ]
        try:
            response = self._get_client().chat.completions.create(
                model=request.model_id,
                messages=messages,
                temperature=request.temperature,
            )
        except openai.APITimeoutError as exc:
            raise TransportTimeout(str(exc)) from exc
        except openai.APIStatusError as exc:
            raise TransportError(str(exc), status=exc.status_code) from exc
        except openai.APIConnectionError as exc:
            raise TransportError(str(exc)) from exc
        return response.choices[0].message.content or ""


def _atomic_write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile("w", encoding="utf-8", dir=path.parent, delete=False, suffix=".tmp") as handle:
        handle.write(text)
        tmp_name = handle.name
    os.replace(tmp_name, path)


class ResponseCache:
    """
    Response store keyed by request hash.

    Each entry is ``<dir>/<hash[:2]>/<hash>.json`` holding the request fields
    and the response text. Without a directory the cache lives in memory.
    """

    def __init__(self, cache_dir=None):
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        self._memory = {}
        self._lock = threading.Lock()
        if self.cache_dir is not None:
            self.cache_dir.mkdir(parents=True, exist_ok=True)

    def _path(self, key):
        return self.cache_dir / key[:2] / f"{key}.json"

    def get(self, key):
        if self.cache_dir is None:
            with self._lock:
                return self._memory.get(key)
        path = self._path(key)
        try:
            entry = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            return None
        except json.JSONDecodeError:
            logger.warning(f"Ignoring corrupt response cache entry {path}")
            return None
        return entry.get("text")

    def put(self, key, request, text):
        if self.cache_dir is None:
            with self._lock:
                self._memory[key] = text
            return
        entry = {
            "model_id": request.model_id,
            "system_instruction": request.system_instruction,
            "user_content": request.user_content,
            "temperature": request.temperature,
            "text": text,
        }
        _atomic_write_text(self._path(key), json.dumps(entry, ensure_ascii=False, indent=1))


def load_fixtures(path):
    """
    Reads a scripted fixture file: a JSON object mapping request hash to
    response text.

    :raises TkgIoError: the file is missing or is not such a map.
    """
    path = Path(path)
    try:
        fixtures = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise TkgIoError(f"fixture file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise TkgIoError(f"fixture file {path} is not valid JSON: {exc}") from exc
    if not isinstance(fixtures, dict) or not all(isinstance(v, str) for v in fixtures.values()):
        raise TkgIoError(f"fixture file {path} must map request hashes to strings")
    return fixtures


class LlmGateway:
    """
    Shared entry point for every LLM call.

    The gateway is thread safe; at most ``parallelism`` live requests are in
    flight at once. Every logical call is counted per request tag, whatever
    the mode, so replayed runs report the same statistics as live ones.
    """

    def __init__(self, mode=LlmMode.SCRIPTED, fixtures=None, cache_dir=None, transport=None,
                 max_retries=3, backoff_base=1.0, parallelism=4, sleep=time.sleep):
        """
        :param mode: Operating mode.
        :type mode: :class:`LlmMode` or str
        :param fixtures: Request hash to response text map (scripted mode).
        :type fixtures: dict, optional
        :param cache_dir: Response cache directory (cached and live modes).
        :type cache_dir: str or Path, optional
        :param transport: Object with a ``chat(request) -> str`` method (live mode).
        :param max_retries: Retries after the first failed live attempt.
        :type max_retries: int
        :param backoff_base: First backoff delay in seconds; doubles per retry.
        :type backoff_base: float
        :param parallelism: Maximum number of concurrent live requests.
        :type parallelism: int
        """
        self.mode = LlmMode(mode)
        if self.mode is LlmMode.SCRIPTED and fixtures is None:
            raise ValueError("scripted mode needs a fixture map")
        if self.mode is LlmMode.CACHED and cache_dir is None:
            raise ValueError("cached mode needs a cache directory")
        if self.mode is LlmMode.LIVE and transport is None:
            raise ValueError("live mode needs a transport")
        if parallelism < 1:
            raise ValueError("parallelism must be >= 1")

        self._fixtures = dict(fixtures or {})
        self._cache = ResponseCache(cache_dir)
        self._transport = transport
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(parallelism)
        self._lock = threading.Lock()
        self._calls = Counter()
        self._session = {}
        self.total_calls = 0
        self.network_calls = 0

    @classmethod
    def from_fixture_file(cls, path, **kwargs):
        return cls(LlmMode.SCRIPTED, fixtures=load_fixtures(path), **kwargs)

    def calls_for(self, tag):
        """Number of logical calls made for requests carrying ``tag``."""
        with self._lock:
            return self._calls[tag]

    def _count(self, tag):
        with self._lock:
            self._calls[tag] += 1
            self.total_calls += 1

    def complete(self, request):
        """
        Answers one request.

        :type request: :class:`LlmRequest`
        :rtype: :class:`LlmResponse`
        :raises FixtureMiss: scripted mode, no fixture for the request hash.
        :raises CacheMiss: cached mode, no cache entry for the request hash.
        :raises ApiError: live mode, the endpoint kept failing.
        :raises LlmTimeout: live mode, the endpoint kept timing out.
        """
        key = request.request_hash()
        self._count(request.tag)

        if self.mode is LlmMode.SCRIPTED:
            text = self._fixtures.get(key)
            if text is None:
                raise FixtureMiss(key, request.tag)
            backend = ResponseBackend.SCRIPTED
        elif self.mode is LlmMode.CACHED:
            text = self._cache.get(key)
            if text is None:
                raise CacheMiss(key, request.tag)
            backend = ResponseBackend.CACHED
        else:
            text = self._cache.get(key)
            if text is not None:
                backend = ResponseBackend.CACHED
            else:
                text = self._call_live(request)
                self._cache.put(key, request, text)
                backend = ResponseBackend.LIVE

        with self._lock:
            self._session[key] = (text, request.tag, request.template_id)
        response = LlmResponse(
            text=text,
            backend=backend,
            token_estimate=estimate_tokens(request.system_instruction, request.user_content, text),
            request_hash=key,
        )
        logger.debug(f"{backend.value} {request.template_id or '-'} {key[:12]} ~{response.token_estimate} tokens")
        return response

    def _call_live(self, request):
        attempt = 0
        while True:
            try:
                with self._slots:
                    with self._lock:
                        self.network_calls += 1
                    text = self._transport.chat(request)
                if not text or not text.strip():
                    raise TransportError("empty completion")
                return text
            except TransportError as exc:
                if attempt >= self.max_retries:
                    if isinstance(exc, TransportTimeout):
                        raise LlmTimeout(f"request timed out after {attempt} retries: {exc}") from exc
                    raise ApiError(str(exc), status=exc.status, retries=attempt) from exc
                delay = self.backoff_base * (2 ** attempt)
                logger.warning(f"LLM request failed ({exc}); retry {attempt + 1}/{self.max_retries} in {delay:.1f}s")
                self._sleep(delay)
                attempt += 1

    def complete_json(self, request, parse):
        """
        Completes a request whose answer must parse, retrying once with the
        JSON repair nudge appended.

        :param parse: Callable turning response text into a value; raises
            ``ValueError`` on bad input.
        :return: Parsed value and the response it came from.
        :rtype: (object, :class:`LlmResponse`)
        :raises MalformedResponse: both attempts failed to parse.
        """
        response = self.complete(request)
        try:
            return parse(response.text), response
        except ValueError as exc:
            logger.warning(f"Unparseable response for {request.template_id or 'request'} ({exc}); retrying once")

        response = self.complete(request.with_nudge())
        try:
            return parse(response.text), response
        except ValueError as exc:
            raise MalformedResponse(f"response still unparseable after repair nudge: {exc}") from exc

    def export_fixtures(self, path, merge=False):
        """
        Writes every response seen in this session as a scripted fixture map,
        plus a ``<path>.questions.json`` sidecar naming the question and
        template behind each hash.

        :param merge: Keep the entries of an existing fixture file at ``path``.
        :type merge: bool
        :return: Number of fixtures written.
        :rtype: int
        """
        path = Path(path)
        sidecar_path = Path(f"{path}.questions.json")
        fixtures, sidecar = {}, {}
        if merge and path.exists():
            fixtures = load_fixtures(path)
            if sidecar_path.exists():
                sidecar = json.loads(sidecar_path.read_text(encoding="utf-8"))
        with self._lock:
            session = dict(self._session)
        for key, (text, tag, template_id) in session.items():
            fixtures[key] = text
            sidecar[key] = {"question": tag, "template_id": template_id}
        fixtures = {key: fixtures[key] for key in sorted(fixtures)}
        sidecar = {key: sidecar[key] for key in sorted(sidecar)}
        _atomic_write_text(path, json.dumps(fixtures, ensure_ascii=False, indent=1))
        _atomic_write_text(sidecar_path, json.dumps(sidecar, ensure_ascii=False, indent=1))
        logger.info(f"Exported {len(fixtures)} fixtures to {path}")
        return len(fixtures)
