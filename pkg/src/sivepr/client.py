"""Thin client for the computation service.

By default requests run in-process against the ASGI app (no server needed,
same code path as a deployed instance); pass a base URL to talk to a remote
service instead.
"""
from __future__ import annotations

import asyncio
from typing import Optional

import httpx

from .errors import (
    NumericalError,
    ParseError,
    PreconditionError,
    SivEprError,
    UsageError,
)

_ERROR_BY_CLASS = {
    "usage": UsageError,
    "parse": ParseError,
    "precondition": PreconditionError,
    "numerical": NumericalError,
}

_TIMEOUT = httpx.Timeout(300.0)


class ServiceClient:
    def __init__(self, server_url: Optional[str] = None):
        self.server_url = server_url

    def post(self, path: str, payload: dict) -> dict:
        if self.server_url is not None:
            with httpx.Client(base_url=self.server_url, timeout=_TIMEOUT) as client:
                response = client.post(path, json=payload)
        else:
            response = asyncio.run(self._post_in_process(path, payload))
        return self._handle(response)

    async def _post_in_process(self, path: str, payload: dict) -> httpx.Response:
        from .service.app import app

        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://sivepr.local", timeout=_TIMEOUT
        ) as client:
            return await client.post(path, json=payload)

    @staticmethod
    def _handle(response: httpx.Response) -> dict:
        if response.status_code == 200:
            return response.json()
        try:
            detail = response.json().get("detail")
        except ValueError:
            detail = None
        if isinstance(detail, dict) and "error_class" in detail:
            exc_type = _ERROR_BY_CLASS.get(detail["error_class"], SivEprError)
            message = detail.get("message", "service error")
            if exc_type is ParseError:
                raise ParseError(message)
            raise exc_type(message)
        if response.status_code == 422:
            # pydantic validation failure: the request itself was malformed
            raise UsageError(f"invalid request: {detail}")
        raise SivEprError(f"service returned HTTP {response.status_code}: {response.text[:500]}")
