# app/core/sse.py
import asyncio
import logging
from contextlib import suppress

log = logging.getLogger(__name__)

TERMINAL = ("DONE", "ERROR")


class EventBus:
    """Per-job progress queues; the loop is taken from the last async publisher."""

    def __init__(self, maxsize: int = 1000):
        self._queues: dict[str, asyncio.Queue] = {}
        self._loop: asyncio.AbstractEventLoop | None = None
        self._maxsize = maxsize

    def _queue(self, job_id: str) -> asyncio.Queue:
        q = self._queues.get(job_id)
        if q is None:
            q = self._queues[job_id] = asyncio.Queue(maxsize=self._maxsize)
        return q

    async def publish(self, job_id: str, data: str) -> None:
        self._loop = asyncio.get_running_loop()
        try:
            self._queue(job_id).put_nowait(str(data))
        except asyncio.QueueFull:
            log.debug("event queue for %s is full; dropping %r", job_id, data)

    # for worker threads
    def publish_threadsafe(self, job_id: str, data: str) -> None:
        if self._loop is None or self._loop.is_closed():
            return
        asyncio.run_coroutine_threadsafe(self.publish(job_id, str(data)), self._loop)

    async def stream(self, job_id: str):
        q = self._queue(job_id)
        try:
            yield {"event": "message", "data": f"START {job_id}"}
            while True:
                msg = await q.get()
                yield {"event": "message", "data": msg}
                if msg.startswith(TERMINAL):
                    break
        finally:
            with suppress(Exception):
                self._queues.pop(job_id, None)


event_bus = EventBus()
