"""
Forecasting oracles: a chat-completion client and local stand-ins.
"""

import abc
import itertools
import logging
import os
import threading
import time

import backoff
import yaml
from dotenv import load_dotenv

from .helpers import ConfigError, OracleError
from .prompts import QUESTION_TOKEN

log = logging.getLogger(__name__)


class Oracle(abc.ABC):
    @abc.abstractmethod
    def complete(self, messages, temperature=0.0):
        """Assistant text for a chat message list"""


def question_of(messages):
    """The question of the final user message, without the ``[Q]`` marker"""
    text = messages[-1]["content"].strip()
    if text.startswith(QUESTION_TOKEN):
        text = text[len(QUESTION_TOKEN):].strip()
    return text


class RateLimiter:
    """Spaces out calls so that at most ``per_minute`` start in any minute"""

    def __init__(self, per_minute=None):
        self.interval = 60.0 / per_minute if per_minute else 0.0
        self._lock = threading.Lock()
        self._next = 0.0

    def wait(self):
        if not self.interval:
            return
        with self._lock:
            now = time.monotonic()
            start = max(now, self._next)
            self._next = start + self.interval
        if start > now:
            time.sleep(start - now)


class FixedOracle(Oracle):
    def __init__(self, text="[Answer] 0.5"):
        self.text = text

    def complete(self, messages, temperature=0.0):
        return self.text


class ScriptedOracle(Oracle):
    """
    Answers from a script mapping question text to a list of responses, used
    in turn on successive calls for that question. A number stands for
    ``[Answer] <number>``; ``None`` stands for a failed request.
    """

    def __init__(self, script, default=None):
        self._cycles = {question: itertools.cycle(_as_list(answers)) for question, answers in script.items()}
        self.default = default
        self._lock = threading.Lock()
        self.calls = 0

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            script = yaml.safe_load(fh)
        if not isinstance(script, dict):
            raise ConfigError(f"{path}: a scripted oracle file maps questions to answers")
        return cls(script)

    def complete(self, messages, temperature=0.0):
        question = question_of(messages)
        with self._lock:
            self.calls += 1
            cycle = self._cycles.get(question)
            answer = next(cycle) if cycle is not None else self.default
        if answer is None:
            raise OracleError(f"scripted failure for {question!r}")
        if isinstance(answer, (int, float)):
            return f"Reasoning omitted.\n[Answer] {answer}"
        return str(answer)


def _as_list(answers):
    return list(answers) if isinstance(answers, (list, tuple)) else [answers]


class ChatOracle(Oracle):
    """
    Any OpenAI-compatible chat-completion endpoint. Credentials come from the
    environment variable named in the config, after loading ``.env``.
    """

    def __init__(self, config, client=None):
        self.config = config
        self.limiter = RateLimiter(config.requests_per_minute)
        if client is None:
            client = self._client(config)
        self.client = client
        self._request = backoff.on_exception(backoff.expo, Exception,
                                             max_tries=config.max_retries,
                                             max_time=config.max_time,
                                             giveup=_is_permanent,
                                             logger=log)(self._request_once)

    @staticmethod
    def _client(config):
        from openai import OpenAI

        load_dotenv()
        api_key = os.getenv(config.api_key_env)
        if not api_key and not config.endpoint:
            raise ConfigError(f"{config.api_key_env} not set")
        return OpenAI(api_key=api_key or "unused", base_url=config.endpoint, timeout=config.timeout)

    def _request_once(self, messages, temperature):
        self.limiter.wait()
        response = self.client.chat.completions.create(model=self.config.model_name, messages=messages,
                                                       temperature=temperature,
                                                       max_tokens=self.config.max_tokens)
        content = response.choices[0].message.content
        if not isinstance(content, str):
            raise OracleError("endpoint returned no text")
        return content

    def complete(self, messages, temperature=0.0):
        try:
            return self._request(messages, temperature)
        except OracleError:
            raise
        except Exception as e:
            raise OracleError(f"{self.config.model_name}: {e!r}") from e


def _is_permanent(error):
    """Client errors other than rate limiting are not retried"""
    status = getattr(error, "status_code", None)
    return isinstance(error, OracleError) or (status is not None and 400 <= status < 500 and status != 429)


def build_oracle(config):
    if config.kind == "fixed":
        return FixedOracle(config.fixed_response)
    if config.kind == "scripted":
        return ScriptedOracle.from_file(config.script)
    return ChatOracle(config)
