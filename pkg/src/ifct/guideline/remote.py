"""Client for an external service that turns a raw guideline (e.g. a PDF) into a tree document."""

from __future__ import annotations

import urllib.error
import urllib.request

from ..errors import ProviderError
from .document import parse_guideline
from .model import GuidelineTree


class HTTPGuidelineParser:
    """POSTs the raw bytes; the response body must be a guideline document."""

    def __init__(self, url: str, timeout: float = 120.0, content_type: str = "application/octet-stream"):
        self.url = url
        self.timeout = timeout
        self.content_type = content_type

    def fetch(self, raw: bytes) -> bytes:
        req = urllib.request.Request(self.url, data=raw, method="POST",
                                     headers={"Content-Type": self.content_type})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return resp.read()
        except (urllib.error.URLError, OSError) as exc:
            raise ProviderError(f"guideline parser {self.url} failed: {exc}") from exc

    def parse(self, raw: bytes) -> GuidelineTree:
        # the returned document goes through the same schema and semantic checks as a local file
        return parse_guideline(self.fetch(raw))
