import asyncio

from app.core.sse import EventBus


def _collect(bus: EventBus, job_id: str) -> list[str]:
    async def run():
        await bus.publish(job_id, "N=10: running 2 replicates")
        await bus.publish(job_id, "DONE")
        await bus.publish(job_id, "after the end")
        return [event["data"] async for event in bus.stream(job_id)]

    return asyncio.run(run())


def test_stream_stops_at_done():
    assert _collect(EventBus(), "job") == ["START job", "N=10: running 2 replicates", "DONE"]


def test_full_queue_drops_messages():
    bus = EventBus(maxsize=1)

    async def run():
        await bus.publish("job", "ERROR: first")
        await bus.publish("job", "second")
        return [event["data"] async for event in bus.stream("job")]

    assert asyncio.run(run()) == ["START job", "ERROR: first"]


def test_threadsafe_publish_without_loop_is_a_noop():
    EventBus().publish_threadsafe("job", "ignored")
