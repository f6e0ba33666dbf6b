/** Browser app: upload, anchor editing, denoise, compare, history.
 *
 * All numerics happen on the server; this file is DOM wiring around the
 * pure modules (api, anchors, history, queue, heatmap).
 */

import {
  ApiError,
  Client,
  DenoiseResponse,
  SIGMA_MAX,
  decodeMapPayload,
  serializeSpec,
} from "./api.js";
import {
  Anchor,
  SIGMA_STEP,
  anchorAt,
  deleteAnchor,
  moveAnchor,
  placeAnchor,
  setSigma,
  snapSigma,
  toSpec,
} from "./anchors.js";
import { heatRGBA } from "./heatmap.js";
import { Attempt, History } from "./history.js";
import { LatestWins } from "./queue.js";

function must<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

const fileInput = must<HTMLInputElement>("file");
const baseUrlInput = must<HTMLInputElement>("base-url");
const editorCanvas = must<HTMLCanvasElement>("editor");
const resultCanvas = must<HTMLCanvasElement>("result");
const sigmaSlider = must<HTMLInputElement>("sigma");
const sigmaLabel = must<HTMLSpanElement>("sigma-label");
const denoiseButton = must<HTMLButtonElement>("denoise");
const splitSlider = must<HTMLInputElement>("split");
const overlayToggle = must<HTMLInputElement>("overlay");
const statusLine = must<HTMLParagraphElement>("status");
const historyList = must<HTMLUListElement>("history");
const modelLine = must<HTMLParagraphElement>("model-info");

sigmaSlider.min = "0";
sigmaSlider.max = String(SIGMA_MAX);
sigmaSlider.step = String(SIGMA_STEP);
sigmaSlider.value = "25";

interface RequestArgs {
  file: Blob;
  specJson: string;
  anchors: Anchor[];
}

interface ResultView {
  response: DenoiseResponse;
  restored: HTMLImageElement;
  mapValues: Float32Array;
}

let originalFile: File | null = null;
let originalImage: HTMLImageElement | null = null;
let anchors: Anchor[] = [];
let selectedId: number | null = null;
let dragId: number | null = null;
let result: ResultView | null = null;
const history = new History();

function client(): Client {
  return new Client(baseUrlInput.value.replace(/\/+$/, ""));
}

function setStatus(text: string, isError = false): void {
  statusLine.textContent = text;
  statusLine.className = isError ? "error" : "";
}

function flashBoundsCue(): void {
  editorCanvas.classList.add("rejected");
  setTimeout(() => editorCanvas.classList.remove("rejected"), 300);
}

async function loadImageElement(src: string): Promise<HTMLImageElement> {
  const img = new Image();
  await new Promise<void>((resolve, reject) => {
    img.onload = () => resolve();
    img.onerror = () => reject(new Error("cannot decode image"));
    img.src = src;
  });
  return img;
}

function drawEditor(): void {
  const ctx = editorCanvas.getContext("2d");
  if (!ctx || !originalImage) return;
  ctx.clearRect(0, 0, editorCanvas.width, editorCanvas.height);
  ctx.drawImage(originalImage, 0, 0);
  for (const a of anchors) {
    ctx.beginPath();
    ctx.arc(a.c, a.r, 9, 0, 2 * Math.PI);
    ctx.fillStyle = a.id === selectedId ? "rgba(255,140,0,0.85)" : "rgba(30,120,255,0.75)";
    ctx.fill();
    ctx.strokeStyle = "white";
    ctx.lineWidth = 2;
    ctx.stroke();
    ctx.fillStyle = "white";
    ctx.font = "bold 11px sans-serif";
    ctx.textAlign = "center";
    ctx.textBaseline = "middle";
    ctx.fillText(String(a.sigma), a.c, a.r);
  }
}

function drawResult(): void {
  const ctx = resultCanvas.getContext("2d");
  if (!ctx || !originalImage) return;
  const w = resultCanvas.width;
  const h = resultCanvas.height;
  ctx.clearRect(0, 0, w, h);
  if (!result) return;
  const split = Math.round((Number(splitSlider.value) / 100) * w);
  ctx.drawImage(originalImage, 0, 0);
  ctx.save();
  ctx.beginPath();
  ctx.rect(split, 0, w - split, h);
  ctx.clip();
  ctx.drawImage(result.restored, 0, 0);
  ctx.restore();
  if (overlayToggle.checked) {
    const rgba = heatRGBA(result.mapValues, w, h, SIGMA_MAX);
    const overlay = new ImageData(rgba, w, h);
    const buffer = document.createElement("canvas");
    buffer.width = w;
    buffer.height = h;
    buffer.getContext("2d")!.putImageData(overlay, 0, 0);
    ctx.drawImage(buffer, 0, 0);
  }
  ctx.strokeStyle = "rgba(255,255,255,0.9)";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(split, 0);
  ctx.lineTo(split, h);
  ctx.stroke();
}

function refreshControls(): void {
  denoiseButton.disabled = !originalFile || anchors.length === 0 || queue.busy;
  splitSlider.disabled = history.length === 0;
  const selected = anchors.find((a) => a.id === selectedId);
  if (selected) {
    sigmaSlider.value = String(selected.sigma);
  }
  sigmaLabel.textContent = `sigma ${sigmaSlider.value}`;
}

function renderHistory(): void {
  historyList.replaceChildren();
  history.entries().forEach((attempt, index) => {
    const item = document.createElement("li");
    const link = document.createElement("a");
    link.href = "#";
    link.textContent = attempt.label;
    link.onclick = (event) => {
      event.preventDefault();
      restoreAttempt(attempt);
    };
    item.appendChild(link);
    if (index === 0) item.classList.add("latest");
    historyList.appendChild(item);
  });
}

async function showResponse(response: DenoiseResponse): Promise<void> {
  const restored = await loadImageElement(`data:image/png;base64,${response.image}`);
  result = {
    response,
    restored,
    mapValues: decodeMapPayload(response.map),
  };
  drawResult();
}

function restoreAttempt(attempt: Attempt): void {
  if (attempt.spec.kind !== "anchors") return;
  anchors = attempt.spec.points.map((p, i) => ({ id: -(i + 1), ...p }));
  selectedId = null;
  void showResponse(attempt.response);
  setStatus(`restored: ${attempt.label} (resend reproduces the exact request)`);
  drawEditor();
  refreshControls();
}

const queue = new LatestWins<RequestArgs, DenoiseResponse>(
  (args) => client().denoise(args.file, args.specJson),
  (args, response) => {
    const label = `${args.anchors.length} anchor${args.anchors.length === 1 ? "" : "s"}, ` +
      `mean sigma ${response.mean_sigma.toFixed(1)}`;
    history.push({
      specJson: args.specJson,
      spec: JSON.parse(args.specJson),
      response,
      label,
    });
    void showResponse(response);
    renderHistory();
    setStatus(`done (mean sigma ${response.mean_sigma.toFixed(1)})`);
    refreshControls();
  },
  (_args, error) => {
    const message = error instanceof ApiError
      ? `${error.status}: ${error.message}`
      : String(error);
    setStatus(message, true);
    refreshControls();
  },
);

function canvasPosition(event: MouseEvent): { r: number; c: number } {
  const rect = editorCanvas.getBoundingClientRect();
  const c = Math.round(((event.clientX - rect.left) / rect.width) * editorCanvas.width);
  const r = Math.round(((event.clientY - rect.top) / rect.height) * editorCanvas.height);
  return { r, c };
}

fileInput.onchange = async () => {
  const file = fileInput.files?.[0];
  if (!file) return;
  try {
    originalImage = await loadImageElement(URL.createObjectURL(file));
  } catch {
    setStatus("cannot decode that file; upload an 8-bit PNG", true);
    return;
  }
  originalFile = file;
  anchors = [];
  selectedId = null;
  result = null;
  editorCanvas.width = originalImage.naturalWidth;
  editorCanvas.height = originalImage.naturalHeight;
  resultCanvas.width = originalImage.naturalWidth;
  resultCanvas.height = originalImage.naturalHeight;
  setStatus(`loaded ${file.name} (${editorCanvas.width}x${editorCanvas.height}); ` +
    "click to place anchors");
  drawEditor();
  drawResult();
  refreshControls();
};

editorCanvas.onmousedown = (event) => {
  if (!originalImage) return;
  const { r, c } = canvasPosition(event);
  const hit = anchorAt(anchors, r, c, 14);
  if (hit) {
    selectedId = hit.id;
    dragId = hit.id;
  } else {
    const bounds = { height: editorCanvas.height, width: editorCanvas.width };
    const placed = placeAnchor(anchors, r, c, Number(sigmaSlider.value), bounds);
    if (placed === null) {
      flashBoundsCue();
      setStatus("anchor outside the image", true);
      return;
    }
    anchors = placed;
    selectedId = anchors[anchors.length - 1].id;
  }
  drawEditor();
  refreshControls();
};

editorCanvas.onmousemove = (event) => {
  if (dragId === null) return;
  const { r, c } = canvasPosition(event);
  anchors = moveAnchor(anchors, dragId, r, c, {
    height: editorCanvas.height,
    width: editorCanvas.width,
  });
  drawEditor();
};

editorCanvas.onmouseup = () => {
  dragId = null;
};

editorCanvas.ondblclick = (event) => {
  const { r, c } = canvasPosition(event);
  const hit = anchorAt(anchors, r, c, 14);
  if (hit) {
    anchors = deleteAnchor(anchors, hit.id);
    if (selectedId === hit.id) selectedId = null;
    drawEditor();
    refreshControls();
  }
};

sigmaSlider.oninput = () => {
  const snapped = snapSigma(Number(sigmaSlider.value));
  sigmaSlider.value = String(snapped);
  if (selectedId !== null) {
    anchors = setSigma(anchors, selectedId, snapped);
    drawEditor();
  }
  refreshControls();
};

denoiseButton.onclick = () => {
  if (!originalFile || anchors.length === 0) return;
  const specJson = serializeSpec(toSpec(anchors));
  setStatus("denoising...");
  queue.submit({ file: originalFile, specJson, anchors: [...anchors] });
  refreshControls();
};

splitSlider.oninput = drawResult;
overlayToggle.onchange = drawResult;

void (async () => {
  try {
    const info = await client().model();
    modelLine.textContent =
      `model: ${info.layers} layers, ${info.channels} channels, ` +
      `${info.color ? "color" : "grayscale"}, sigma ${info.noise_range[0]}-${info.noise_range[1]}`;
  } catch {
    modelLine.textContent = "service unreachable; start it with: mapdenoise serve --model <file>";
  }
})();

refreshControls();
