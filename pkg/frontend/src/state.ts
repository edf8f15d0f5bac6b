/** Pure studio state and its transitions.
 *
 * Everything here is plain data and pure functions so the interaction rules
 * (polygon closing, stroke buffering, undo, single in-flight mutation) are
 * testable without a DOM.  Coordinates are always image pixels, never canvas
 * pixels — the view layer converts before calling in.
 */

import type { Label, Point, Stroke } from "./api.js";

export type OverlayName = "superpixels" | "tmap" | "candidates" | "mask";

export interface StudioState {
  sessionId: string | null;
  imageSize: { width: number; height: number } | null;
  /** ROI vertices accumulated so far (image pixel coordinates). */
  polygon: Point[];
  polygonClosed: boolean;
  /** Finished, not-yet-submitted brush strokes. */
  strokes: Stroke[];
  /** Stroke being dragged right now, if any. */
  activeStroke: Point[] | null;
  brushLabel: Label;
  overlays: Record<OverlayName, boolean>;
  /** True while a segment/edit request is in flight. */
  pending: boolean;
  /** True once the session has a committed mask. */
  hasMask: boolean;
  /** Inline validation / status message for the user. */
  message: string | null;
}

export function initialState(): StudioState {
  return {
    sessionId: null,
    imageSize: null,
    polygon: [],
    polygonClosed: false,
    strokes: [],
    activeStroke: null,
    brushLabel: 0,
    overlays: { superpixels: false, tmap: false, candidates: false, mask: true },
    pending: false,
    hasMask: false,
    message: null,
  };
}

export function loadImage(
  state: StudioState,
  sessionId: string,
  width: number,
  height: number,
): StudioState {
  return {
    ...initialState(),
    overlays: { ...state.overlays },
    sessionId,
    imageSize: { width, height },
  };
}

export function addVertex(state: StudioState, point: Point): StudioState {
  if (state.polygonClosed || state.imageSize === null) return state;
  return { ...state, polygon: [...state.polygon, point], message: null };
}

/** Close the ROI; refuses with an inline message below 3 vertices. */
export function closePolygon(state: StudioState): StudioState {
  if (state.polygonClosed) return state;
  if (state.polygon.length < 3) {
    return { ...state, message: "a region needs at least 3 vertices" };
  }
  return { ...state, polygonClosed: true, message: null };
}

export function resetPolygon(state: StudioState): StudioState {
  return {
    ...state,
    polygon: [],
    polygonClosed: false,
    strokes: [],
    activeStroke: null,
    message: null,
  };
}

export function setBrushLabel(state: StudioState, label: Label): StudioState {
  return { ...state, brushLabel: label };
}

export function beginStroke(state: StudioState, point: Point): StudioState {
  if (!state.hasMask || state.pending) return state;
  return { ...state, activeStroke: [point] };
}

export function extendStroke(state: StudioState, point: Point): StudioState {
  if (state.activeStroke === null) return state;
  return { ...state, activeStroke: [...state.activeStroke, point] };
}

export function endStroke(state: StudioState): StudioState {
  if (state.activeStroke === null) return state;
  const stroke: Stroke = {
    path: state.activeStroke,
    label: state.brushLabel,
  };
  return {
    ...state,
    activeStroke: null,
    strokes: [...state.strokes, stroke],
  };
}

/** Remove the last unsubmitted stroke only; submitted ones are gone from
 * the buffer already, so they can never be undone from here. */
export function undoStroke(state: StudioState): StudioState {
  if (state.activeStroke !== null) {
    return { ...state, activeStroke: null };
  }
  if (state.strokes.length === 0) return state;
  return { ...state, strokes: state.strokes.slice(0, -1) };
}

export function toggleOverlay(
  state: StudioState,
  name: OverlayName,
): StudioState {
  return {
    ...state,
    overlays: { ...state.overlays, [name]: !state.overlays[name] },
  };
}

/** Segment is available once the polygon is closed and nothing is in
 * flight. */
export function canSubmitSegment(state: StudioState): boolean {
  return (
    state.sessionId !== null && state.polygonClosed && !state.pending
  );
}

/** Edits need a mask to correct and at least one buffered stroke. */
export function canSubmitEdit(state: StudioState): boolean {
  return (
    state.sessionId !== null &&
    state.hasMask &&
    state.strokes.length > 0 &&
    !state.pending
  );
}

/** Mark a mutation in flight; one at a time per session. */
export function beginMutation(state: StudioState): StudioState {
  return { ...state, pending: true, message: null };
}

/** Settle the in-flight mutation.  On success the stroke buffer has been
 * consumed by the service; on failure it is preserved for retry. */
export function endMutation(
  state: StudioState,
  ok: boolean,
  message: string | null = null,
): StudioState {
  return {
    ...state,
    pending: false,
    hasMask: ok || state.hasMask,
    strokes: ok ? [] : state.strokes,
    message,
  };
}
