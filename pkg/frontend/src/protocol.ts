// Wire protocol of the scenario service: JSON messages over a WebSocket.
// See docs/protocol.md in the repository root for the schemas.

export type MessageType =
  | "STATE"
  | "PLAN"
  | "MAP_SLICE"
  | "ESTIMATE"
  | "METRIC"
  | "ACK"
  | "ERROR";

export interface StreamMessage {
  type: MessageType;
  seq: number;
  t: number;
  payload: Record<string, unknown>;
}

export interface MapSlice {
  tendon: string;
  ar: number;
  activation: number;
  peRange: [number, number];
  seRange: [number, number];
  shape: [number, number];
  values: Float32Array;
}

export interface StatePayload {
  t: number;
  q: number[];
  qRef: number[];
  wrench: number[];
  sigma: number;
  paused: boolean;
  mode: string;
}

export interface PlanPayload {
  t0: number;
  pe: number[];
  se: number[];
}

export interface EstimatePayload {
  t: number;
  alpha: Record<string, number>;
  residual: number[];
}

export class DecodeError extends Error {}

export function parseMessage(raw: string): StreamMessage {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch (err) {
    throw new DecodeError(`invalid JSON: ${err}`);
  }
  const msg = data as Partial<StreamMessage>;
  if (
    typeof msg.type !== "string" ||
    typeof msg.seq !== "number" ||
    typeof msg.payload !== "object" ||
    msg.payload === null
  ) {
    throw new DecodeError("malformed stream message");
  }
  return msg as StreamMessage;
}

function asNumberArray(value: unknown, name: string): number[] {
  if (!Array.isArray(value) || value.some((v) => typeof v !== "number")) {
    throw new DecodeError(`${name} must be a number array`);
  }
  return value as number[];
}

export function decodeMapSlice(payload: Record<string, unknown>): MapSlice {
  const shape = asNumberArray(payload.shape, "shape");
  const b64 = payload.values_b64;
  if (typeof b64 !== "string" || shape.length !== 2) {
    throw new DecodeError("map slice missing shape or values");
  }
  const binary = atob(b64);
  const bytes = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) {
    bytes[i] = binary.charCodeAt(i);
  }
  const values = new Float32Array(bytes.buffer);
  if (values.length !== shape[0] * shape[1]) {
    throw new DecodeError(
      `map slice size mismatch: ${values.length} != ${shape[0]}x${shape[1]}`,
    );
  }
  return {
    tendon: String(payload.tendon ?? "?"),
    ar: Number(payload.ar ?? 0),
    activation: Number(payload.activation ?? 0),
    peRange: asNumberArray(payload.pe_range, "pe_range") as [number, number],
    seRange: asNumberArray(payload.se_range, "se_range") as [number, number],
    shape: [shape[0], shape[1]],
    values,
  };
}

export function decodeState(payload: Record<string, unknown>): StatePayload {
  return {
    t: Number(payload.t ?? 0),
    q: asNumberArray(payload.q, "q"),
    qRef: asNumberArray(payload.q_ref, "q_ref"),
    wrench: asNumberArray(payload.wrench, "wrench"),
    sigma: Number(payload.sigma ?? 0),
    paused: Boolean(payload.paused),
    mode: String(payload.mode ?? "RUNNING"),
  };
}

export function decodePlan(payload: Record<string, unknown>): PlanPayload {
  return {
    t0: Number(payload.t0 ?? 0),
    pe: asNumberArray(payload.pe, "pe"),
    se: asNumberArray(payload.se, "se"),
  };
}

export function decodeEstimate(payload: Record<string, unknown>): EstimatePayload {
  const alpha = payload.alpha;
  if (typeof alpha !== "object" || alpha === null) {
    throw new DecodeError("estimate missing alpha");
  }
  return {
    t: Number(payload.t ?? 0),
    alpha: alpha as Record<string, number>,
    residual: asNumberArray(payload.residual ?? [], "residual"),
  };
}

export interface Command {
  action: string;
  [key: string]: unknown;
}

export function commandFrame(id: number, command: Command): string {
  return JSON.stringify({ type: "COMMAND", id, command });
}

export function subscribeFrame(operator: boolean): string {
  return JSON.stringify({ type: "SUBSCRIBE", operator });
}
