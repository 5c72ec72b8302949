"""Synchronous client for the enhancement service.

By default the client mounts the FastAPI app in-process through an ASGI
transport, so no server needs to be running and results are identical to
library calls; pass ``base_url`` to talk to a remote instance instead.
Each method performs one request and returns decoded payloads.
"""

from __future__ import annotations

import asyncio
from typing import Any

import httpx

__all__ = ["ServiceError", "ServiceClient"]

# video runs can legitimately take minutes; disable read timeouts
_TIMEOUT = httpx.Timeout(10.0, read=None, write=None)


class ServiceError(RuntimeError):
    """Non-2xx response from the service."""

    def __init__(self, status_code: int, detail: str):
        super().__init__(f"service returned {status_code}: {detail}")
        self.status_code = status_code
        self.detail = detail


class ServiceClient:
    """One-call-per-method facade over the HTTP API."""

    def __init__(self, base_url: str | None = None):
        self.base_url = base_url

    def _make_client(self) -> httpx.AsyncClient:
        if self.base_url:
            return httpx.AsyncClient(base_url=self.base_url, timeout=_TIMEOUT)
        from .service import app  # deferred so the CLI stays fast for --help

        transport = httpx.ASGITransport(app=app)
        return httpx.AsyncClient(transport=transport, base_url="http://veinview.local", timeout=_TIMEOUT)

    def _request(self, method: str, path: str, *, params: dict | None = None, content: bytes | None = None) -> httpx.Response:
        async def go() -> httpx.Response:
            async with self._make_client() as client:
                return await client.request(method, path, params=params, content=content)

        response = asyncio.run(go())
        if response.status_code >= 300:
            try:
                detail = response.json().get("detail", response.text)
            except ValueError:
                detail = response.text
            raise ServiceError(response.status_code, str(detail))
        return response

    @staticmethod
    def _clean(params: dict[str, Any]) -> dict[str, Any]:
        return {k: v for k, v in params.items() if v is not None}

    # -- endpoints ----------------------------------------------------------

    def health(self) -> dict:
        return self._request("GET", "/healthz").json()

    def canonical_spec(self, input_channels: int = 3) -> dict:
        return self._request(
            "GET", "/v1/pipeline/canonical", params={"input_channels": input_channels}
        ).json()

    def gray(self, image: bytes, *, rescale: bool = False, eq6_verbatim: bool = False) -> bytes:
        return self._request(
            "POST",
            "/v1/ops/gray",
            params={"rescale": rescale, "eq6_verbatim": eq6_verbatim},
            content=image,
        ).content

    def clahe(self, image: bytes, *, grid: str = "8x8", clip_limit: float = 2.0, bins: int = 256) -> bytes:
        return self._request(
            "POST",
            "/v1/ops/clahe",
            params={"grid": grid, "clip_limit": clip_limit, "bins": bins},
            content=image,
        ).content

    def median(self, image: bytes, *, window: int = 5) -> bytes:
        return self._request(
            "POST", "/v1/ops/median", params={"window": window}, content=image
        ).content

    def frangi(
        self,
        image: bytes,
        *,
        scales: str,
        beta: float = 0.5,
        c: str = "auto",
        dark_vessels: bool = True,
    ) -> bytes:
        return self._request(
            "POST",
            "/v1/ops/frangi",
            params={"scales": scales, "beta": beta, "c": c, "dark_vessels": dark_vessels},
            content=image,
        ).content

    def enhance(
        self,
        image: bytes,
        *,
        threshold: str = "otsu",
        median_window: int = 5,
        clip_limit: float = 2.0,
        bins: int = 256,
        rescale: bool = False,
        eq6_verbatim: bool = False,
    ) -> bytes:
        return self._request(
            "POST",
            "/v1/ops/enhance",
            params={
                "threshold": threshold,
                "median_window": median_window,
                "clip_limit": clip_limit,
                "bins": bins,
                "rescale": rescale,
                "eq6_verbatim": eq6_verbatim,
            },
            content=image,
        ).content

    def process_video(
        self,
        video: bytes,
        *,
        spec_json: str | None = None,
        jobs: int | None = None,
        queue_depth: int | None = None,
        include_video: bool = True,
    ) -> dict:
        params = self._clean(
            {"spec": spec_json, "jobs": jobs, "queue_depth": queue_depth, "include_video": include_video}
        )
        return self._request("POST", "/v1/video/process", params=params, content=video).json()

    def bench(
        self,
        video: bytes,
        *,
        spec_json: str | None = None,
        jobs: int | None = None,
        queue_depth: int | None = None,
    ) -> dict:
        params = self._clean({"spec": spec_json, "jobs": jobs, "queue_depth": queue_depth})
        return self._request("POST", "/v1/video/bench", params=params, content=video).json()
