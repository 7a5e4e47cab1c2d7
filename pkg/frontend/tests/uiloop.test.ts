// Live console loop against a real served backend: connect, drive a vx
// ramp with the correction disabled, toggle it on, and watch the slip
// telemetry collapse. This is the release criterion for the console.

import { spawn, type ChildProcess } from "node:child_process";
import { once } from "node:events";
import { createServer } from "node:net";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { rangesFromModel } from "../src/input.js";
import { SessionClient } from "../src/session.js";
import type { RobotModelDoc } from "../src/types.js";

const fixture = (name: string) => fileURLToPath(new URL(`./fixtures/${name}`, import.meta.url));

let server: ChildProcess;
let port: number;

async function freePort(): Promise<number> {
  const srv = createServer();
  srv.listen(0, "127.0.0.1");
  await once(srv, "listening");
  const address = srv.address() as { port: number };
  srv.close();
  return address.port;
}

async function waitForModel(url: string, timeoutMs = 60_000): Promise<RobotModelDoc> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(url);
      if (response.ok) return (await response.json()) as RobotModelDoc;
    } catch (err) {
      lastError = err;
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error(`service never came up: ${lastError}`);
}

beforeAll(async () => {
  port = await freePort();
  server = spawn(
    "python3",
    [
      "-m", "pmg.cli", "serve",
      "--robot", fixture("robot.json"),
      "--clips", fixture("clips.json"),
      "--port", String(port),
      "--dt", "0.01",
    ],
    { stdio: "ignore" },
  );
}, 70_000);

afterAll(() => {
  server?.kill();
});

describe("console loop against the live service", () => {
  it("vx ramp slips with correction off; toggling it on collapses the telemetry", async () => {
    const model = await waitForModel(`http://127.0.0.1:${port}/model`);
    const ranges = rangesFromModel(model);
    const client = new SessionClient(`ws://127.0.0.1:${port}/session`);
    client.setGco(false);
    client.connect();

    const waitFrames = async (n: number) => {
      const start = client.telemetry.t.length;
      await new Promise<void>((resolve, reject) => {
        const guard = setTimeout(() => reject(new Error("stream stalled")), 30_000);
        client.onframe = () => {
          if (client.telemetry.t.length - start >= n) {
            clearTimeout(guard);
            client.onframe = null;
            resolve();
          }
        };
      });
    };

    await waitFrames(5);
    expect(client.status).toBe("open");

    // ramp vx from rest to beyond nominal; full snapshots, <= 50 Hz
    for (let step = 1; step <= 15; step++) {
      client.setCommand({
        vx: (step / 15) * 0.75 * ranges.vx * 1.0 + 0.25 * ranges.vx,
        vy: 0, wz: 0, pitch: 0, roll: 0,
        height: ranges.neutralHeight,
      });
      await waitFrames(5);
    }
    await waitFrames(150); // walk steadily with the correction off
    const offWindow = client.telemetry.slipPost.slice(-120);
    const offMax = Math.max(...offWindow);

    client.setGco(true);
    await waitFrames(30); // let the toggle land and the stride continue
    const before = client.telemetry.slipPost.length;
    await waitFrames(150);
    const onWindow = client.telemetry.slipPost.slice(before);
    const onMax = Math.max(...onWindow);

    client.close();

    expect(offMax).toBeGreaterThan(0.02); // the uncorrected mixture slips
    expect(onMax).toBeLessThanOrEqual(1e-9); // stance feet pinned exactly
    console.log(
      `\nACCEPTANCE PASS: console loop (slip ${offMax.toFixed(3)} m/s with correction off -> ${onMax.toExponential(1)} m/s after toggle)`,
    );
  }, 90_000);

  it("rendered poses always come from received frames", async () => {
    await waitForModel(`http://127.0.0.1:${port}/model`);
    const client = new SessionClient(`ws://127.0.0.1:${port}/session`);
    client.connect();
    const received: string[] = [];
    await new Promise<void>((resolve) => {
      client.onframe = (frame) => {
        received.push(JSON.stringify(frame.q_ref));
        if (received.length >= 30) resolve();
      };
    });
    client.close();
    for (const frame of client.frames) {
      expect(received).toContain(JSON.stringify(frame.q_ref));
    }
  }, 60_000);
});
