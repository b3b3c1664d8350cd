"""Completion endpoints: an HTTP client for OpenAI-style ``/v1/completions`` and test stubs."""

from __future__ import annotations

import json
import os
import re
import urllib.error
import urllib.request
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

from fedsql.errors import PlannerError

# A language model is anything that maps prompt text to completion text.
LLM = Callable[[str], str]

ENV_URL = "FEDSQL_ENDPOINT_URL"
ENV_MODEL = "FEDSQL_MODEL"
ENV_TIMEOUT = "FEDSQL_TIMEOUT"
ENV_TEMPERATURE = "FEDSQL_TEMPERATURE"


@dataclass(frozen=True)
class EndpointConfig:
    url: str | None = None
    model: str = "default"
    timeout: float = 60.0
    temperature: float = 0.0
    max_tokens: int = 512
    stop: tuple[str, ...] = ("\nObservation:",)

    @classmethod
    def resolve(cls, config_file: str | Path | None = None, env: Mapping[str, str] | None = None,
                **flags: Any) -> EndpointConfig:
        """Flags win over environment variables, which win over the config file."""
        cfg = cls()
        if config_file:
            try:
                data = json.loads(Path(config_file).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise PlannerError(f"cannot read endpoint config {config_file}: {exc}") from None
            known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
            if "stop" in known:
                known["stop"] = tuple(known["stop"])
            cfg = replace(cfg, **known)
        env = os.environ if env is None else env
        from_env: dict[str, Any] = {}
        try:
            if env.get(ENV_URL):
                from_env["url"] = env[ENV_URL]
            if env.get(ENV_MODEL):
                from_env["model"] = env[ENV_MODEL]
            if env.get(ENV_TIMEOUT):
                from_env["timeout"] = float(env[ENV_TIMEOUT])
            if env.get(ENV_TEMPERATURE):
                from_env["temperature"] = float(env[ENV_TEMPERATURE])
        except ValueError as exc:
            raise PlannerError(f"bad endpoint environment value: {exc}") from None
        cfg = replace(cfg, **from_env)
        return replace(cfg, **{k: v for k, v in flags.items() if v is not None})


def completions_url(url: str) -> str:
    base = url.rstrip("/")
    if base.endswith("/completions"):
        return base
    if base.endswith("/v1"):
        return base + "/completions"
    return base + "/v1/completions"


def complete(prompt: str, config: EndpointConfig) -> str:
    """One text-in/text-out completion call."""
    if not config.url:
        raise PlannerError(f"no completion endpoint configured (set {ENV_URL} or pass --endpoint)")
    body = {
        "model": config.model,
        "prompt": prompt,
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
        "stop": list(config.stop),
    }
    req = urllib.request.Request(
        completions_url(config.url),
        data=json.dumps(body).encode("utf-8"),
        headers={"Content-Type": "application/json", "Accept": "application/json"},
        method="POST",
    )
    try:
        with urllib.request.urlopen(req, timeout=config.timeout) as resp:
            payload = json.loads(resp.read().decode("utf-8"))
    except urllib.error.HTTPError as exc:
        raise PlannerError(f"completion endpoint answered HTTP {exc.code}") from None
    except (urllib.error.URLError, TimeoutError, OSError) as exc:
        raise PlannerError(f"completion endpoint unreachable: {getattr(exc, 'reason', exc)}") from None
    except json.JSONDecodeError:
        raise PlannerError("completion endpoint returned a body that is not JSON") from None
    try:
        choice = payload["choices"][0]
        text = choice.get("text")
        if text is None:
            text = choice["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise PlannerError("completion response has no choices[0].text") from None
    return str(text)


class EndpointLLM:
    def __init__(self, config: EndpointConfig):
        self.config = config

    def __call__(self, prompt: str) -> str:
        return complete(prompt, self.config)


@dataclass
class ScriptedLLM:
    """Replays a fixed list of completions and keeps every prompt it was shown."""

    responses: Sequence[str]
    prompts: list[str] = field(default_factory=list)

    def __call__(self, prompt: str) -> str:
        if len(self.prompts) >= len(self.responses):
            raise PlannerError("scripted model has no more responses")
        self.prompts.append(prompt)
        return self.responses[len(self.prompts) - 1]


def _words(text: str) -> set[str]:
    words = set()
    for w in re.findall(r"[a-z0-9]+", re.sub(r"(?<=[a-z])(?=[A-Z])", " ", text).lower()):
        words.add(w)
        if len(w) > 3 and w.endswith("s"):
            words.add(w[:-1])
    return words


class LexicalSelector:
    """Offline stand-in for the table-selector model: picks tables whose name
    shares a word (or its singular) with the question."""

    def __init__(self, tables: Mapping[str, Iterable[str]]):
        self.tables = {t: tuple(cols) for t, cols in tables.items()}
        self.prompts: list[str] = []

    def __call__(self, prompt: str) -> str:
        self.prompts.append(prompt)
        question = prompt.rsplit("Question:", 1)[-1].split("\n", 1)[0]
        asked = _words(question)
        picked = []
        for table in self.tables:
            if _words(table) & asked:
                picked.append(table)
        return ", ".join(picked)
