// Browser entry point: fetches the robot model, opens the stream, and wires
// sliders / keyboard / gamepad into command snapshots. Rendering is pure
// playback of received frames at display rate; the 100 Hz stream is
// buffered and decimated by the animation loop.

import { InputAggregator, rangesFromModel } from "./input.js";
import { advanceBase, buildScene, defaultCamera, project, type BasePose } from "./render.js";
import { SessionClient } from "./session.js";
import { sparkline } from "./telemetry.js";
import type { AxisState } from "./input.js";
import type { RobotModelDoc } from "./types.js";

const SEGMENT_STYLE: Record<string, { stroke: string; width: number }> = {
  ground: { stroke: "#29323c", width: 1 },
  bone: { stroke: "#9fd8ff", width: 3 },
  torso: { stroke: "#5f84a2", width: 4 },
};

const MARKER_STYLE: Record<string, string> = {
  joint: "#cde7ff",
  contact: "#61e294",
  swing: "#39444f",
  base: "#e2b93b",
};

async function boot(): Promise<void> {
  const model = (await (await fetch("/model")).json()) as RobotModelDoc;
  const ranges = rangesFromModel(model);
  const input = new InputAggregator(ranges);
  const proto = location.protocol === "https:" ? "wss" : "ws";
  const session = new SessionClient(`${proto}://${location.host}/session`);

  const canvas = document.getElementById("view") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  const camera = defaultCamera(canvas.width, canvas.height);
  const slipCanvas = document.getElementById("slip") as HTMLCanvasElement;
  const slipCtx = slipCanvas.getContext("2d")!;
  const banner = document.getElementById("banner")!;
  const readout = document.getElementById("readout")!;
  const gcoToggle = document.getElementById("gco") as HTMLInputElement;

  gcoToggle.checked = true;
  gcoToggle.addEventListener("change", () => session.setGco(gcoToggle.checked));

  const sliderIds: (keyof AxisState)[] = ["vx", "vy", "wz", "pitch", "roll", "height"];
  for (const channel of sliderIds) {
    const el = document.getElementById(`slider-${channel}`) as HTMLInputElement;
    el.addEventListener("input", () => {
      input.setSlider(channel, parseFloat(el.value));
      pushCommand();
    });
    el.addEventListener("dblclick", () => {
      el.value = "0";
      input.setSlider(channel, 0);
      pushCommand();
    });
  }

  window.addEventListener("keydown", (ev) => {
    if (input.keyEvent(ev.code, true)) {
      ev.preventDefault();
      pushCommand();
    }
  });
  window.addEventListener("keyup", (ev) => {
    if (input.keyEvent(ev.code, false)) pushCommand();
  });

  canvas.addEventListener("pointermove", (ev) => {
    if (ev.buttons & 1) {
      camera.yaw += ev.movementX * 0.008;
      camera.pitch = Math.max(-1.2, Math.min(1.2, camera.pitch + ev.movementY * 0.006));
    }
  });
  canvas.addEventListener("wheel", (ev) => {
    camera.distance = Math.max(1.2, Math.min(8, camera.distance + ev.deltaY * 0.002));
    ev.preventDefault();
  });

  function pushCommand(): void {
    session.setCommand(input.current(navigator.getGamepads ? navigator.getGamepads() : []));
  }

  session.onstatus = (status) => {
    banner.textContent =
      status === "open" ? "" : status === "retrying" ? `connection lost, retrying (attempt ${session.attempts})` : status;
    banner.classList.toggle("hidden", status === "open");
  };
  session.connect();

  let base: BasePose = { x: 0, y: 0, heading: 0 };
  let lastFrameT: number | null = null;
  let hadGamepad = false;

  function draw(): void {
    // gamepads only report via polling; re-send while one is active
    const pads = navigator.getGamepads ? navigator.getGamepads() : [];
    const padActive = Array.from(pads).some((p) => p && p.connected);
    if (padActive || hadGamepad) pushCommand();
    hadGamepad = padActive;

    const frame = session.latest;
    ctx.fillStyle = "#10151b";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    if (frame) {
      if (lastFrameT !== null && frame.t > lastFrameT) {
        base = advanceBase(base, frame, frame.t - lastFrameT);
      }
      lastFrameT = frame.t;
      const scene = buildScene(model, frame, camera, base);
      for (const seg of scene.segments) {
        const style = SEGMENT_STYLE[seg.kind];
        ctx.strokeStyle = style.stroke;
        ctx.lineWidth = style.width;
        ctx.beginPath();
        ctx.moveTo(seg.a[0], seg.a[1]);
        ctx.lineTo(seg.b[0], seg.b[1]);
        ctx.stroke();
      }
      for (const marker of scene.markers) {
        ctx.fillStyle = MARKER_STYLE[marker.kind];
        ctx.beginPath();
        ctx.arc(marker.at[0], marker.at[1], marker.radius, 0, Math.PI * 2);
        ctx.fill();
      }
      const u = frame.u_prime;
      readout.textContent =
        `t ${frame.t.toFixed(2)} s  phi ${frame.phi.toFixed(3)}  ` +
        `odom (${base.x.toFixed(2)}, ${base.y.toFixed(2)}) m  ` +
        (u
          ? `u' [${u.map((v) => v.toFixed(2)).join(", ")}]  slip ${frame.slip_pre.toFixed(3)} -> ${frame.slip_post.toExponential(1)} m/s`
          : "");
    }

    slipCtx.fillStyle = "#10151b";
    slipCtx.fillRect(0, 0, slipCanvas.width, slipCanvas.height);
    const pre = sparkline(session.telemetry.slipPre, slipCanvas.width, slipCanvas.height);
    const post = sparkline(session.telemetry.slipPost, slipCanvas.width, slipCanvas.height, pre.max);
    for (const [series, color] of [
      [pre, "#e2703a"],
      [post, "#61e294"],
    ] as const) {
      slipCtx.strokeStyle = color;
      slipCtx.lineWidth = 1.5;
      slipCtx.beginPath();
      series.points.forEach(([x, y], i) => (i === 0 ? slipCtx.moveTo(x, y) : slipCtx.lineTo(x, y)));
      slipCtx.stroke();
    }
    requestAnimationFrame(draw);
  }
  requestAnimationFrame(draw);
}

boot().catch((err) => {
  document.getElementById("banner")!.textContent = `failed to start: ${err}`;
});
