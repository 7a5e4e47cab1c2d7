"""Regenerate the frontend test fixtures from the backend.

Run from the repository root:
    python3 frontend/scripts/make_fixtures.py

Produces, under frontend/tests/fixtures/:
  model.json        the robot model document the /model endpoint serves
  fk_golden.json    joint vectors with backend-computed foot positions
  message_log.json  a recorded /session stream (varied commands, gco on)
"""

import json
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(ROOT / "tests"))

from fastapi.testclient import TestClient

from conftest import make_clipset, make_humanoid
from pmg.clips import save_clipset
from pmg.robot import fk_foot, save_robot_model
from pmg.server import ServiceConfig, create_app

OUT = ROOT / "frontend" / "tests" / "fixtures"
OUT.mkdir(parents=True, exist_ok=True)


def main() -> None:
    model = make_humanoid()
    clipset = make_clipset(model)

    (OUT / "model.json").write_text(json.dumps(model.to_dict(), indent=1))
    # server assets for the live console test
    save_robot_model(model, OUT / "robot.json")
    save_clipset(clipset, OUT / "clips.json")

    rng = np.random.default_rng(99)
    cases = []
    for _ in range(25):
        q = rng.uniform(-1.0, 1.0, model.dof)
        cases.append(
            {
                "q": q.tolist(),
                "L": fk_foot(model, q, "L").tolist(),
                "R": fk_foot(model, q, "R").tolist(),
            }
        )
    cases.append(
        {
            "q": model.q_stand.tolist(),
            "L": fk_foot(model, model.q_stand, "L").tolist(),
            "R": fk_foot(model, model.q_stand, "R").tolist(),
        }
    )
    (OUT / "fk_golden.json").write_text(json.dumps(cases, indent=1))

    app = create_app(model, clipset, ServiceConfig(dt=0.01, gco=True))
    log = []
    with TestClient(app) as client:
        with client.websocket_connect("/session") as ws:
            for k in range(220):
                if k == 5:
                    ws.send_text(json.dumps({
                        "type": "command", "vx": 0.5, "vy": 0.1, "wz": 0.0,
                        "pitch": 0.0, "roll": 0.0,
                    }))
                if k == 110:  # correction off for the back half of the log
                    ws.send_text(json.dumps({"type": "config", "gco": False}))
                log.append(json.loads(ws.receive_text()))
    (OUT / "message_log.json").write_text(json.dumps(log, indent=1))
    print(f"wrote fixtures to {OUT}")


if __name__ == "__main__":
    main()
