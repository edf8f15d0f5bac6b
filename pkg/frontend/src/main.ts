/** DOM wiring for the studio.
 *
 * All interaction rules live in state.ts; this file only translates events
 * into state transitions and redraws.  Masks and value maps are rendered
 * from the service's PNG bytes verbatim — nothing is recomputed here.
 */

import {
  ApiClient,
  ApiError,
  decodeBase64,
  type CandidatePayload,
  type MaskResponse,
  type Point,
  type SuperpixelPayload,
  type TraceRow,
} from "./api.js";
import { canvasToImage, strokedRegionIds } from "./overlay.js";
import {
  addVertex,
  beginMutation,
  beginStroke,
  canSubmitEdit,
  canSubmitSegment,
  closePolygon,
  endMutation,
  endStroke,
  extendStroke,
  initialState,
  loadImage,
  resetPolygon,
  setBrushLabel,
  toggleOverlay,
  undoStroke,
  type OverlayName,
  type StudioState,
} from "./state.js";

const api = new ApiClient("");

function element<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (found === null) throw new Error(`missing element #${id}`);
  return found as T;
}

const canvas = element<HTMLCanvasElement>("canvas");
const context = canvas.getContext("2d")!;
const fileInput = element<HTMLInputElement>("file");
const zoomSelect = element<HTMLSelectElement>("zoom");
const ncCut0Box = element<HTMLInputElement>("nc-cut0");
const closeButton = element<HTMLButtonElement>("close-roi");
const resetButton = element<HTMLButtonElement>("reset-roi");
const segmentButton = element<HTMLButtonElement>("segment");
const undoButton = element<HTMLButtonElement>("undo-stroke");
const editButton = element<HTMLButtonElement>("apply-edits");
const messageBox = element<HTMLDivElement>("message");
const readout = element<HTMLDivElement>("readout");
const traceBody = element<HTMLTableSectionElement>("trace-body");

let state: StudioState = initialState();
let zoom = Number(zoomSelect.value) || 1;

interface Artifacts {
  imageBitmap: ImageBitmap | null;
  maskBitmap: ImageBitmap | null;
  maskBytes: Uint8Array | null;
  tmapBitmap: ImageBitmap | null;
  superpixels: SuperpixelPayload | null;
  candidates: CandidatePayload | null;
  trace: TraceRow[];
}

let artifacts: Artifacts = emptyArtifacts();

function emptyArtifacts(): Artifacts {
  return {
    imageBitmap: null,
    maskBitmap: null,
    maskBytes: null,
    tmapBitmap: null,
    superpixels: null,
    candidates: null,
    trace: [],
  };
}

function setState(next: StudioState): void {
  state = next;
  render();
}

async function bitmapFromPng(bytes: Uint8Array): Promise<ImageBitmap> {
  return createImageBitmap(new Blob([bytes.slice()], { type: "image/png" }));
}

function pointerToImage(event: MouseEvent): Point | null {
  if (state.imageSize === null) return null;
  const rect = canvas.getBoundingClientRect();
  return canvasToImage(
    event.clientX - rect.left,
    event.clientY - rect.top,
    zoom,
    state.imageSize.width,
    state.imageSize.height,
  );
}

/* ------------------------------------------------------------------ */
/* drawing                                                             */

function drawPolyline(points: readonly Point[], closePath: boolean): void {
  if (points.length === 0) return;
  context.beginPath();
  const [first, ...rest] = points as [Point, ...Point[]];
  context.moveTo(first[0] * zoom, first[1] * zoom);
  for (const [x, y] of rest) context.lineTo(x * zoom, y * zoom);
  if (closePath) context.closePath();
  context.stroke();
}

function drawOverlays(): void {
  const size = state.imageSize;
  if (size === null) return;
  if (state.overlays.tmap && artifacts.tmapBitmap !== null) {
    context.globalAlpha = 0.55;
    context.drawImage(
      artifacts.tmapBitmap, 0, 0, size.width * zoom, size.height * zoom);
    context.globalAlpha = 1;
  }
  if (state.overlays.mask && artifacts.maskBitmap !== null) {
    context.globalAlpha = 0.45;
    context.drawImage(
      artifacts.maskBitmap, 0, 0, size.width * zoom, size.height * zoom);
    context.globalAlpha = 1;
  }
  if (state.overlays.superpixels && artifacts.superpixels !== null) {
    context.strokeStyle = "rgba(255, 255, 255, 0.6)";
    context.lineWidth = 1;
    for (const line of artifacts.superpixels.polylines) {
      drawPolyline(line, false);
    }
  }
  if (
    state.overlays.candidates &&
    artifacts.candidates !== null &&
    artifacts.superpixels !== null
  ) {
    const regionById = new Map(
      artifacts.superpixels.regions.map((r) => [r.id, r]));
    const mark = (ids: number[], color: string) => {
      context.fillStyle = color;
      for (const id of ids) {
        const region = regionById.get(id);
        if (region === undefined) continue;
        context.beginPath();
        context.arc(
          region.centroid[0] * zoom, region.centroid[1] * zoom,
          Math.max(2, zoom * 2), 0, 2 * Math.PI);
        context.fill();
      }
    };
    mark(artifacts.candidates.p_obj, "rgba(80, 220, 100, 0.9)");
    mark(artifacts.candidates.p_bkg, "rgba(240, 90, 90, 0.9)");
  }
}

function drawInteraction(): void {
  if (state.polygon.length > 0) {
    context.strokeStyle = "#ff3b30";
    context.lineWidth = 2;
    context.setLineDash(state.polygonClosed ? [] : [6, 4]);
    drawPolyline(state.polygon, state.polygonClosed);
    context.setLineDash([]);
    context.fillStyle = "#ff3b30";
    for (const [x, y] of state.polygon) {
      context.fillRect(x * zoom - 2, y * zoom - 2, 5, 5);
    }
  }
  const paths = [...state.strokes.map((s) => s.path)];
  if (state.activeStroke !== null) paths.push(state.activeStroke);
  if (paths.length > 0 && artifacts.superpixels !== null) {
    context.fillStyle = "rgba(255, 210, 60, 0.35)";
    const regionById = new Map(
      artifacts.superpixels.regions.map((r) => [r.id, r]));
    for (const id of strokedRegionIds(artifacts.superpixels.regions, paths)) {
      const region = regionById.get(id);
      if (region === undefined) continue;
      const radius = Math.sqrt(region.pixels / Math.PI) * zoom;
      context.beginPath();
      context.arc(
        region.centroid[0] * zoom, region.centroid[1] * zoom,
        radius, 0, 2 * Math.PI);
      context.fill();
    }
  }
  context.lineWidth = Math.max(2, zoom);
  for (const stroke of state.strokes) {
    context.strokeStyle = stroke.label === 1 ? "#ffd23c" : "#3c78ff";
    drawPolyline(stroke.path, false);
  }
  if (state.activeStroke !== null) {
    context.strokeStyle = state.brushLabel === 1 ? "#ffd23c" : "#3c78ff";
    drawPolyline(state.activeStroke, false);
  }
}

function render(): void {
  const size = state.imageSize;
  if (size !== null) {
    canvas.width = size.width * zoom;
    canvas.height = size.height * zoom;
  }
  context.imageSmoothingEnabled = false;
  context.clearRect(0, 0, canvas.width, canvas.height);
  if (artifacts.imageBitmap !== null && size !== null) {
    context.drawImage(
      artifacts.imageBitmap, 0, 0, size.width * zoom, size.height * zoom);
  }
  drawOverlays();
  drawInteraction();

  closeButton.disabled = state.polygonClosed || state.polygon.length === 0;
  segmentButton.disabled = !canSubmitSegment(state);
  editButton.disabled = !canSubmitEdit(state);
  undoButton.disabled =
    state.strokes.length === 0 && state.activeStroke === null;
  messageBox.textContent = state.message ?? "";
  messageBox.hidden = state.message === null;
  const last = artifacts.trace[artifacts.trace.length - 1];
  readout.textContent =
    last === undefined
      ? ""
      : `${artifacts.trace.length} iterations · γ ${last.gamma.toExponential(2)}` +
        ` · energy ${last.energy.toFixed(1)}`;
  traceBody.replaceChildren(
    ...artifacts.trace.map((row) => {
      const tr = document.createElement("tr");
      for (const value of [
        row.iteration, row.changed_pixels, row.gamma.toExponential(2),
        row.energy.toFixed(1), row.n_seeds, row.n_obj_candidates,
        row.n_bkg_candidates,
      ]) {
        const td = document.createElement("td");
        td.textContent = String(value);
        tr.append(td);
      }
      return tr;
    }),
  );
}

/* ------------------------------------------------------------------ */
/* service round trips                                                 */

async function refreshArtifacts(response: MaskResponse): Promise<void> {
  artifacts.maskBytes = decodeBase64(response.mask);
  artifacts.maskBitmap = await bitmapFromPng(artifacts.maskBytes);
  artifacts.trace = response.trace;
  const id = state.sessionId;
  if (id === null) return;
  // Read-only overlay refreshes may run while the user keeps working.
  void api
    .ncmapPng(id, "truth")
    .then(bitmapFromPng)
    .then((bitmap) => {
      artifacts.tmapBitmap = bitmap;
      render();
    })
    .catch(() => undefined);
  void api
    .candidates(id)
    .then((payload) => {
      artifacts.candidates = payload;
      render();
    })
    .catch(() => undefined);
}

async function ensureSuperpixels(): Promise<void> {
  const id = state.sessionId;
  if (id === null || artifacts.superpixels !== null) return;
  try {
    artifacts.superpixels = await api.superpixels(id);
  } catch (error) {
    setState({ ...state, message: describe(error) });
    return;
  }
  render();
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return error.message;
  return "the service is unreachable — your edits are kept, retry when ready";
}

async function onFileChosen(): Promise<void> {
  const file = fileInput.files?.[0];
  if (file === undefined) return;
  const bytes = new Uint8Array(await file.arrayBuffer());
  const previous = state.sessionId;
  try {
    const info = await api.createSession(bytes);
    artifacts = emptyArtifacts();
    artifacts.imageBitmap = await bitmapFromPng(bytes);
    setState(loadImage(state, info.id, info.width, info.height));
  } catch (error) {
    setState({ ...state, message: describe(error) });
    return;
  }
  if (previous !== null) {
    void api.deleteSession(previous).catch(() => undefined);
  }
}

async function onSegment(): Promise<void> {
  const id = state.sessionId;
  if (id === null || !canSubmitSegment(state)) return;
  setState(beginMutation(state));
  try {
    const response = await api.segment(id, state.polygon, {
      ncCut0: ncCut0Box.checked,
    });
    await refreshArtifacts(response);
    setState(endMutation(state, true));
  } catch (error) {
    setState(endMutation(state, false, describe(error)));
  }
}

async function onApplyEdits(): Promise<void> {
  const id = state.sessionId;
  if (id === null || !canSubmitEdit(state)) return;
  setState(beginMutation(state));
  try {
    const response = await api.edit(id, state.strokes);
    await refreshArtifacts(response);
    setState(endMutation(state, true));
  } catch (error) {
    setState(endMutation(state, false, describe(error)));
  }
}

/* ------------------------------------------------------------------ */
/* event wiring                                                        */

fileInput.addEventListener("change", () => void onFileChosen());
segmentButton.addEventListener("click", () => void onSegment());
editButton.addEventListener("click", () => void onApplyEdits());
closeButton.addEventListener("click", () => setState(closePolygon(state)));
resetButton.addEventListener("click", () => setState(resetPolygon(state)));
undoButton.addEventListener("click", () => setState(undoStroke(state)));
zoomSelect.addEventListener("change", () => {
  zoom = Number(zoomSelect.value) || 1;
  render();
});

for (const name of ["superpixels", "tmap", "candidates", "mask"] as const) {
  element<HTMLInputElement>(`overlay-${name}`).addEventListener(
    "change",
    () => {
      setState(toggleOverlay(state, name as OverlayName));
      if (name === "superpixels") void ensureSuperpixels();
    },
  );
}

for (const input of document.querySelectorAll<HTMLInputElement>(
  "input[name=brush]",
)) {
  input.addEventListener("change", () => {
    setState(setBrushLabel(state, Number(input.value) === 1 ? 1 : 0));
  });
}

canvas.addEventListener("click", (event) => {
  if (state.polygonClosed) return;
  const point = pointerToImage(event);
  if (point !== null) setState(addVertex(state, point));
});

canvas.addEventListener("dblclick", (event) => {
  event.preventDefault();
  if (!state.polygonClosed) setState(closePolygon(state));
});

document.addEventListener("keydown", (event) => {
  if (event.key === "Enter" && !state.polygonClosed) {
    setState(closePolygon(state));
  }
});

canvas.addEventListener("mousedown", (event) => {
  if (!state.polygonClosed || !state.hasMask) return;
  const point = pointerToImage(event);
  if (point === null) return;
  void ensureSuperpixels();
  setState(beginStroke(state, point));
});

canvas.addEventListener("mousemove", (event) => {
  if (state.activeStroke === null) return;
  const point = pointerToImage(event);
  if (point !== null) setState(extendStroke(state, point));
});

for (const name of ["mouseup", "mouseleave"] as const) {
  canvas.addEventListener(name, () => {
    if (state.activeStroke !== null) setState(endStroke(state));
  });
}

render();
