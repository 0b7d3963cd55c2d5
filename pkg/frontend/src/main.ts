/** DOM glue: canvas blitting, tool buttons, status line, curve sparkline.
 * All annotation logic lives in controller.ts / tools.ts. */

import { ApiClient } from "./client.js";
import { hitSupervoxel, renderPatch } from "./render.js";
import { SessionController } from "./controller.js";
import type { QueryResponse } from "./types.js";

const SCALE = 12; // canvas pixels per raster sample

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function start(): Promise<void> {
  const client = new ApiClient("");
  const canvas = el<HTMLCanvasElement>("patch");
  const status = el<HTMLElement>("status");
  const curve = el<HTMLCanvasElement>("curve");
  const hover = el<HTMLElement>("hover");

  const sessionId = await client.createSession({});

  const draw = (q: QueryResponse): void => {
    status.textContent =
      `${q.status} — ${q.inputs_spent}/${q.budget} inputs, ` +
      `${q.metric.kind} ${q.metric.value.toFixed(3)}`;
    if (q.status !== "awaiting_annotation" || !q.raster) return;
    const r = renderPatch(q.raster);
    canvas.width = r.width * SCALE;
    canvas.height = r.height * SCALE;
    const ctx = canvas.getContext("2d")!;
    const off = new OffscreenCanvas(r.width, r.height);
    off
      .getContext("2d")!
      .putImageData(
        new ImageData(new Uint8ClampedArray(r.pixels), r.width, r.height),
        0,
        0,
      );
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
    void drawCurve();
  };

  const drawCurve = async (): Promise<void> => {
    const m = await client.getMetrics(sessionId);
    const ctx = curve.getContext("2d")!;
    ctx.clearRect(0, 0, curve.width, curve.height);
    ctx.strokeStyle = "#4af";
    ctx.beginPath();
    for (const [i, pt] of m.curve.entries()) {
      const x = (pt.inputs / Math.max(m.budget, 1)) * curve.width;
      const y = (1 - pt.value) * curve.height;
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    }
    ctx.stroke();
  };

  const ctl = new SessionController(client, sessionId, { onQuery: draw });

  canvas.addEventListener("click", (ev) => {
    const rect = canvas.getBoundingClientRect();
    ctl.click(
      (ev.clientX - rect.left) / SCALE,
      (ev.clientY - rect.top) / SCALE,
    );
  });
  canvas.addEventListener("mousemove", (ev) => {
    const q = ctl.current;
    if (!q?.raster) return;
    const rect = canvas.getBoundingClientRect();
    const sv = hitSupervoxel(
      q.raster,
      (ev.clientX - rect.left) / SCALE,
      (ev.clientY - rect.top) / SCALE,
    );
    hover.textContent = sv >= 0 ? `supervoxel ${sv}` : "";
  });

  el<HTMLButtonElement>("tool-line").addEventListener("click", () => {
    ctl.tool = "line";
  });
  el<HTMLButtonElement>("tool-correct").addEventListener("click", () => {
    ctl.tool = "correct";
  });
  el<HTMLButtonElement>("submit").addEventListener("click", () => {
    void ctl.submit();
  });

  await ctl.refresh();
}

void start();
