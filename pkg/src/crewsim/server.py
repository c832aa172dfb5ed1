"""Streaming session service over WebSocket.

Frames are JSON objects {type, payload} with type one of chat, state,
wizard_inbox, error, or control. Clients send {type: "say", text}, wizards
send {type: "wizard", reply, tbs?} (tbs as an encoded command line), and
control frames claim the wizard role or switch the DM mode. Every inbound
command is queued and applied at a tick boundary, so the engine stays the
single writer.
"""

from __future__ import annotations

import asyncio
import contextlib

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import tbs
from .errors import BindError, CrewsimError
from .orchestrator import Session, SessionConfig


class _Client:
    def __init__(self, websocket: WebSocket):
        self.websocket = websocket
        self.queue: asyncio.Queue = asyncio.Queue()
        self.is_wizard = False

    def push(self, frame: dict, wizard_only: bool) -> None:
        if wizard_only and not self.is_wizard:
            return
        self.queue.put_nowait(frame)


class SessionHub:
    """Owns the session, its command queue, and the connected clients."""

    def __init__(self, config: SessionConfig):
        self.config = config
        self.session = Session(config)
        self.commands: asyncio.Queue = asyncio.Queue()
        self.clients: list[_Client] = []
        self._ticker: asyncio.Task | None = None

    def start(self) -> None:
        self.session.subscribers.append(self._fanout)
        self._ticker = asyncio.get_running_loop().create_task(self._run())

    async def stop(self) -> None:
        if self._ticker is not None:
            self._ticker.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await self._ticker

    def _fanout(self, frame: dict, wizard_only: bool = False) -> None:
        for client in self.clients:
            client.push(frame, wizard_only)

    async def _run(self) -> None:
        tick = self.session.state.config.tick
        while True:
            while not self.commands.empty():
                client, command = self.commands.get_nowait()
                self._apply(client, command)
            self.session.tick()
            self._fanout(self.session.snapshot_frame(), wizard_only=False)
            await asyncio.sleep(tick)

    def _apply(self, client: _Client, command: dict) -> None:
        try:
            kind = command.get("type")
            if kind == "say":
                text = command.get("text")
                if not isinstance(text, str) or not text.strip():
                    raise CrewsimError("say frame needs non-empty text")
                self.session.submit_say(text)
            elif kind == "wizard":
                if not client.is_wizard:
                    raise CrewsimError("wizard frames require the wizard role")
                message = None
                if command.get("tbs"):
                    message = tbs.decode(command["tbs"])
                self.session.wizard_submit(command.get("reply", ""), message)
            elif kind == "control":
                self._control(client, command.get("payload") or {})
            else:
                raise CrewsimError(f"unknown frame type {kind!r}")
        except CrewsimError as exc:
            client.push({"type": "error", "payload": {"message": str(exc)}}, False)

    def _control(self, client: _Client, payload: dict) -> None:
        action = payload.get("action")
        if action == "claim_wizard":
            if any(c.is_wizard for c in self.clients):
                raise CrewsimError("another client already holds the wizard role")
            client.is_wizard = True
            self.session.wizard_connected = True
            client.push({"type": "control", "payload": {"event": "wizard_granted"}}, False)
        elif action == "set_dm_mode":
            self.session.set_dm_mode(payload.get("mode", ""))
        else:
            raise CrewsimError(f"unknown control action {action!r}")

    def attach(self, client: _Client) -> None:
        self.clients.append(client)
        client.push(self.session.hello_frame(), False)
        client.push(self.session.snapshot_frame(), False)

    def detach(self, client: _Client) -> None:
        if client in self.clients:
            self.clients.remove(client)
        if client.is_wizard:
            client.is_wizard = False
            self.session.wizard_connected = any(c.is_wizard for c in self.clients)


def create_app(config: SessionConfig) -> FastAPI:
    hub = SessionHub(config)

    @contextlib.asynccontextmanager
    async def lifespan(_app: FastAPI):
        hub.start()
        yield
        await hub.stop()

    app = FastAPI(title="crewsim", lifespan=lifespan)
    app.state.hub = hub

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        client = _Client(websocket)
        hub.attach(client)

        async def sender():
            while True:
                frame = await client.queue.get()
                await websocket.send_json(frame)

        send_task = asyncio.get_running_loop().create_task(sender())
        try:
            while True:
                try:
                    command = await websocket.receive_json()
                except ValueError:
                    client.push(
                        {"type": "error", "payload": {"message": "malformed frame"}},
                        False,
                    )
                    continue
                if not isinstance(command, dict):
                    client.push(
                        {"type": "error", "payload": {"message": "frame must be an object"}},
                        False,
                    )
                    continue
                await hub.commands.put((client, command))
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await send_task
            hub.detach(client)

    return app


def serve(config: SessionConfig) -> None:
    """Run the session service until interrupted."""
    import uvicorn

    app = create_app(config)
    try:
        uvicorn.run(app, host="127.0.0.1", port=config.port, log_level="warning")
    except OSError as exc:
        raise BindError(f"cannot bind port {config.port}: {exc}") from exc
