"""Maven repository download URLs and offline-first artifact fetching."""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

BASE_URLS = (
    "https://repo1.maven.org/maven2",
    "https://repo.clojars.org",
    "https://repo.akka.io/maven",
    "https://maven.google.com",
    "https://maven.artifacts.atlassian.com",
    "https://maven.wso2.org/nexus/content/repositories/releases",
    "https://nexus.bedatadriven.com/content/groups/public",
    "https://repository.mulesoft.org/nexus/content/repositories/public",
    "https://repo.jenkins-ci.org/releases",
    "https://nexus.senbox.net/nexus/content/repositories/releases",
    "https://open.artefacts.tax.service.gov.uk/maven2",
)
EXTENSIONS = ("jar", "aar")
CACHE_ENV = "DORMANT_CACHE_DIR"
USER_AGENT = "dormant-repoclient/0.1"


class RepoError(Exception):
    pass


class BadCoordinates(RepoError):
    pass


class NotHosted(RepoError):
    pass


class TransportError(RepoError):
    pass


@dataclass(frozen=True)
class RepoEndpoint:
    base_url: str
    priority: int


DEFAULT_ENDPOINTS = tuple(RepoEndpoint(u, i) for i, u in enumerate(BASE_URLS))


@dataclass(frozen=True)
class Coordinates:
    group: str
    artifact: str
    version: str

    @classmethod
    def parse(cls, text: str) -> "Coordinates":
        parts = text.split(":")
        if len(parts) != 3:
            raise BadCoordinates(f"expected group:artifact:version, got {text!r}")
        return cls(*parts)


def _check(value: str, what: str) -> None:
    if not value or not value.strip():
        raise BadCoordinates(f"empty {what}")
    if "/" in value or value != value.strip() or any(c.isspace() for c in value):
        raise BadCoordinates(f"invalid {what} {value!r}")


def build_download_url(endpoint: RepoEndpoint | str, group: str, artifact: str, version: str,
                       ext: str = "jar") -> str:
    """``<base>/<group as path>/<artifact>/<version>/<artifact>-<version>.<ext>``"""
    for value, what in ((group, "group"), (artifact, "artifact"), (version, "version"), (ext, "extension")):
        _check(value, what)
    if any(not seg for seg in group.split(".")):
        raise BadCoordinates(f"invalid group {group!r}")
    base = endpoint.base_url if isinstance(endpoint, RepoEndpoint) else endpoint
    return f"{base.rstrip('/')}/{group.replace('.', '/')}/{artifact}/{version}/{artifact}-{version}.{ext}"


@dataclass(frozen=True)
class FetchPlan:
    coordinates: Coordinates
    candidates: tuple[str, ...]


def make_plan(coords: Coordinates, endpoints: Sequence[RepoEndpoint] = DEFAULT_ENDPOINTS,
              extensions: Sequence[str] = EXTENSIONS) -> FetchPlan:
    """Candidates by endpoint priority; per endpoint every extension in order."""
    urls = tuple(
        build_download_url(e, coords.group, coords.artifact, coords.version, ext)
        for e in sorted(endpoints, key=lambda e: e.priority)
        for ext in extensions
    )
    return FetchPlan(coords, urls)


class Transport(Protocol):
    def head(self, url: str) -> int: ...

    def get(self, url: str) -> bytes: ...


class FixtureTransport:
    """Answers from recorded responses: a mapping url -> (status, body).

    Unknown URLs answer 404. ``requests`` records every call in order.
    """

    def __init__(self, responses: dict[str, tuple[int, bytes]] | None = None):
        self.responses = dict(responses or {})
        self.requests: list[tuple[str, str]] = []

    @classmethod
    def from_dir(cls, path: str | Path) -> "FixtureTransport":
        """``index.json`` maps each URL to ``{"status": int, "file": name}``;
        files live beside it."""
        path = Path(path)
        index = json.loads((path / "index.json").read_text(encoding="utf-8"))
        responses = {}
        for url, rec in index.items():
            body = (path / rec["file"]).read_bytes() if rec.get("file") else b""
            responses[url] = (int(rec["status"]), body)
        return cls(responses)

    def head(self, url: str) -> int:
        self.requests.append(("HEAD", url))
        return self.responses.get(url, (404, b""))[0]

    def get(self, url: str) -> bytes:
        self.requests.append(("GET", url))
        status, body = self.responses.get(url, (404, b""))
        if status != 200:
            raise TransportError(f"GET {url}: HTTP {status}")
        return body


class HttpTransport:
    """Real network access; polite by default (rate limit, bounded retries)."""

    _lock = threading.Lock()
    _gate = threading.BoundedSemaphore(4)

    def __init__(self, min_interval: float = 1.0, retries: int = 3, timeout: float = 30.0,
                 backoff: float = 2.0):
        self.min_interval = min_interval
        self.retries = retries
        self.timeout = timeout
        self.backoff = backoff
        self._last = 0.0

    def _wait(self) -> None:
        with self._lock:
            delay = self._last + self.min_interval - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            self._last = time.monotonic()

    def _request(self, url: str, method: str):
        req = urllib.request.Request(url, method=method, headers={"User-Agent": USER_AGENT})
        last_exc: Exception | None = None
        for attempt in range(self.retries + 1):
            self._wait()
            try:
                with self._gate, urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    return resp.status, (resp.read() if method == "GET" else b"")
            except urllib.error.HTTPError as exc:
                if exc.code < 500:
                    return exc.code, b""
                last_exc = exc
            except (urllib.error.URLError, OSError) as exc:
                last_exc = exc
            if attempt < self.retries:
                time.sleep(self.backoff * (attempt + 1))
        raise TransportError(f"{method} {url}: {last_exc}")

    def head(self, url: str) -> int:
        return self._request(url, "HEAD")[0]

    def get(self, url: str) -> bytes:
        status, body = self._request(url, "GET")
        if status != 200:
            raise TransportError(f"GET {url}: HTTP {status}")
        return body


def probe_and_fetch(plan: FetchPlan, transport: Transport) -> tuple[str, bytes]:
    """Probe candidates strictly in plan order and download the first hosted one."""
    for url in plan.candidates:
        status = transport.head(url)
        if status == 200:
            return url, transport.get(url)
        if status >= 500:
            raise TransportError(f"HEAD {url}: HTTP {status}")
    c = plan.coordinates
    raise NotHosted(f"{c.group}:{c.artifact}:{c.version} not found in {len(plan.candidates)} candidate locations")


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "dormant"


class ArtifactCache:
    """On-disk store keyed by coordinates and content digest."""

    def __init__(self, root: str | Path | None = None):
        self.root = Path(root) if root is not None else default_cache_dir()

    def _dir(self, c: Coordinates) -> Path:
        return self.root / c.group / c.artifact / c.version

    def lookup(self, c: Coordinates) -> tuple[str, bytes] | None:
        meta = self._dir(c) / "meta.json"
        if not meta.is_file():
            return None
        info = json.loads(meta.read_text(encoding="utf-8"))
        blob = self._dir(c) / info["file"]
        if not blob.is_file():
            return None
        data = blob.read_bytes()
        if hashlib.sha256(data).hexdigest() != info["sha256"]:
            return None  # corrupt entry; refetch
        return info["url"], data

    def store(self, c: Coordinates, url: str, data: bytes) -> Path:
        d = self._dir(c)
        d.mkdir(parents=True, exist_ok=True)
        digest = hashlib.sha256(data).hexdigest()
        name = f"{digest[:16]}-{url.rsplit('/', 1)[-1]}"
        (d / name).write_bytes(data)
        (d / "meta.json").write_text(json.dumps({"url": url, "file": name, "sha256": digest}, sort_keys=True),
                                     encoding="utf-8")
        return d / name


def fetch(coords: Coordinates, transport: Transport, cache: ArtifactCache | None = None,
          endpoints: Iterable[RepoEndpoint] = DEFAULT_ENDPOINTS) -> tuple[str, bytes]:
    if cache is not None:
        hit = cache.lookup(coords)
        if hit is not None:
            return hit
    url, data = probe_and_fetch(make_plan(coords, tuple(endpoints)), transport)
    if cache is not None:
        cache.store(coords, url, data)
    return url, data
