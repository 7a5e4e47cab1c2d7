"""Real-time streaming service.

One WebSocket connection owns one generator session, ticked at a fixed rate
(100 Hz by default). Incoming command messages are coalesced latest-wins
between ticks; each tick emits a frame message built from the most recent
command. Sessions are fully isolated; the robot model and clip set are
shared immutably.

Endpoints:
  GET /            operator console bundle (PMG_ASSETS_DIR overrides)
  GET /model       robot model document (the UI runs FK client-side)
  WS  /session     frame stream, JSON text messages
"""

from __future__ import annotations

import asyncio
import itertools
import json
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, JSONResponse, PlainTextResponse

from pmg import _kernels
from pmg.clips import ClipSet
from pmg.generator import CommandVector, GaitSession
from pmg.robot import RobotModel

log = logging.getLogger("pmg.server")

COMMAND_KEYS = ("vx", "vy", "wz", "pitch", "roll", "height")


@dataclass
class ServiceConfig:
    dt: float = 0.01
    gco: bool = True
    slew_rate: float | None = 2.0
    assets_dir: str | None = None


def frame_message(frame) -> dict:
    return {
        "type": "frame",
        "t": frame.t,
        "phi": frame.phi,
        "q_ref": [float(v) for v in frame.q_ref],
        "contact": [int(frame.contact[0]), int(frame.contact[1])],
        "u_prime": frame.u_prime.as_list() if frame.u_prime is not None else None,
        "slip_pre": frame.slip_pre,
        "slip_post": frame.slip_post,
        # production timestamp; lets consumers measure tick jitter without
        # folding in transport noise
        "wall": time.monotonic(),
    }


def parse_command(msg: dict) -> CommandVector:
    values = {}
    for key in COMMAND_KEYS:
        v = msg.get(key, 0.0 if key != "height" else None)
        if v is not None and not isinstance(v, (int, float)):
            raise ValueError(f"command field {key!r} must be a number")
        values[key] = v
    return CommandVector(
        vx=float(values["vx"]), vy=float(values["vy"]), wz=float(values["wz"]),
        pitch=float(values["pitch"]), roll=float(values["roll"]),
        height=float(values["height"]) if values["height"] is not None else None,
    )


def _assets_dir(config: ServiceConfig) -> Path | None:
    candidates = []
    if os.environ.get("PMG_ASSETS_DIR"):
        candidates.append(Path(os.environ["PMG_ASSETS_DIR"]))
    if config.assets_dir:
        candidates.append(Path(config.assets_dir))
    candidates.append(Path(__file__).resolve().parents[2] / "frontend" / "dist")
    for c in candidates:
        if c.is_dir():
            return c
    return None


def create_app(model: RobotModel, clipset: ClipSet, config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    clipset.bind_check(model)
    _kernels.warmup()
    app = FastAPI(title="pmg stream service")
    session_ids = itertools.count(1)
    assets = _assets_dir(config)

    @app.get("/model")
    def model_doc():
        return JSONResponse(model.to_dict())

    @app.get("/")
    def index():
        if assets is None:
            return PlainTextResponse(
                "operator console bundle not built; see frontend/README notes", status_code=404
            )
        return FileResponse(assets / "index.html")

    @app.get("/assets/{name}")
    def asset(name: str):
        if assets is None or "/" in name or ".." in name:
            return PlainTextResponse("not found", status_code=404)
        target = assets / name
        if not target.is_file():
            return PlainTextResponse("not found", status_code=404)
        return FileResponse(target)

    @app.websocket("/session")
    async def session_endpoint(ws: WebSocket):
        await ws.accept()
        session = GaitSession(
            model,
            clipset,
            dt=config.dt,
            gco=config.gco,
            slew_rate=config.slew_rate,
            session_id=f"s{next(session_ids)}",
        )
        state = {"cmd": None, "closed": False}

        async def reader():
            try:
                while True:
                    raw = await ws.receive_text()
                    try:
                        msg = json.loads(raw)
                        kind = msg.get("type")
                        if kind == "command":
                            state["cmd"] = parse_command(msg)
                        elif kind == "config":
                            if "gco" in msg:
                                session.gco = bool(msg["gco"])
                        else:
                            raise ValueError(f"unknown message type {kind!r}")
                    except (ValueError, TypeError, KeyError) as exc:
                        await ws.send_text(json.dumps({"type": "error", "code": "bad_message", "detail": str(exc)}))
            except (WebSocketDisconnect, RuntimeError):
                state["closed"] = True

        reader_task = asyncio.get_event_loop().create_task(reader())
        log.info("session %s connected", session.session_id)
        try:
            loop = asyncio.get_event_loop()
            spin = min(0.004, session.dt / 2)
            next_tick = loop.time()
            while not state["closed"]:
                frame = session.step(state["cmd"])
                state["cmd"] = None  # zero-order hold until the next command
                await ws.send_text(json.dumps(frame_message(frame)))
                next_tick += session.dt
                # hybrid wait: a plain sleep can overshoot by a scheduler
                # quantum, so finish the last slice with a cooperative spin
                coarse = next_tick - loop.time() - spin
                if coarse > 0:
                    await asyncio.sleep(coarse)
                while loop.time() < next_tick:
                    await asyncio.sleep(0)
                if loop.time() - next_tick > session.dt:
                    next_tick = loop.time()  # fell behind; don't burst
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            reader_task.cancel()
            log.info("session %s closed", session.session_id)

    return app


def serve(model: RobotModel, clipset: ClipSet, config: ServiceConfig | None = None,
          host: str = "127.0.0.1", port: int = 8700) -> None:
    """Run the streaming service until interrupted."""
    import uvicorn

    app = create_app(model, clipset, config)
    uvicorn.run(app, host=host, port=port, log_level="warning")
