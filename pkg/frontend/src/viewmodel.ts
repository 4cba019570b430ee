// Pure reducer from stream messages to the rendered view state.  Rendered
// paths hold exactly the streamed points: no smoothing, no client-side
// extrapolation beyond the staleness window.

import {
  DecodeError,
  EstimatePayload,
  MapSlice,
  PlanPayload,
  StatePayload,
  StreamMessage,
  decodeEstimate,
  decodeMapSlice,
  decodePlan,
  decodeState,
} from "./protocol.js";

export interface Point {
  pe: number;
  se: number;
}

export interface PendingCommand {
  id: number;
  action: string;
  sentAt: number;
}

export interface ViewModel {
  map: MapSlice | null;
  executed: Point[];
  planned: Point[];
  ghost: Point[];
  planT0: number;
  activations: Record<string, number>;
  wrenchTrace: { t: number; magnitude: number }[];
  sigma: number;
  mode: string;
  paused: boolean;
  lastSeq: number;
  lastMessageAt: number;
  lastStateT: number;
  missedFrames: number;
  connected: boolean;
  stale: boolean;
  pending: PendingCommand[];
  lastError: string | null;
  goal: Point | null;
}

export const EXECUTED_LIMIT = 4000;
export const WRENCH_TRACE_LIMIT = 400;
export const STALE_AFTER_MS = 1000;

export function initialViewModel(): ViewModel {
  return {
    map: null,
    executed: [],
    planned: [],
    ghost: [],
    planT0: 0,
    activations: {},
    wrenchTrace: [],
    sigma: 0,
    mode: "IDLE",
    paused: false,
    lastSeq: 0,
    lastMessageAt: 0,
    lastStateT: 0,
    missedFrames: 0,
    connected: false,
    stale: false,
    pending: [],
    lastError: null,
    goal: null,
  };
}

function wrenchMagnitude(wrench: number[]): number {
  const f = wrench.slice(0, 3);
  return Math.sqrt(f.reduce((acc, v) => acc + v * v, 0));
}

export function applyMessage(
  vm: ViewModel,
  msg: StreamMessage,
  nowMs: number,
): ViewModel {
  const next: ViewModel = { ...vm, lastMessageAt: nowMs, stale: false };
  if (msg.seq <= vm.lastSeq && vm.lastSeq !== 0) {
    // out-of-order or duplicated message on one connection: drop it
    return vm;
  }
  next.lastSeq = msg.seq;

  switch (msg.type) {
    case "MAP_SLICE": {
      next.map = decodeMapSlice(msg.payload);
      // a new map invalidates nothing else: overlays persist
      break;
    }
    case "STATE": {
      const state: StatePayload = decodeState(msg.payload);
      next.executed = [...vm.executed, { pe: state.q[0], se: state.q[1] }];
      if (next.executed.length > EXECUTED_LIMIT) {
        next.executed = next.executed.slice(-EXECUTED_LIMIT);
      }
      next.wrenchTrace = [
        ...vm.wrenchTrace,
        { t: state.t, magnitude: wrenchMagnitude(state.wrench) },
      ].slice(-WRENCH_TRACE_LIMIT);
      next.sigma = state.sigma;
      next.paused = state.paused;
      next.mode = state.mode;
      next.missedFrames = 0;
      next.lastStateT = state.t;
      break;
    }
    case "PLAN": {
      const plan: PlanPayload = decodePlan(msg.payload);
      next.ghost = vm.planned; // the superseded plan stays visible
      next.planned = plan.pe.map((pe, i) => ({ pe, se: plan.se[i] }));
      next.planT0 = plan.t0;
      break;
    }
    case "ESTIMATE": {
      const est: EstimatePayload = decodeEstimate(msg.payload);
      next.activations = est.alpha;
      break;
    }
    case "ACK":
    case "ERROR": {
      const id = (msg.payload as { id?: number }).id;
      if (typeof id === "number") {
        next.pending = vm.pending.filter((p) => p.id !== id);
        if (msg.type === "ERROR") {
          const code = (msg.payload as { code?: string }).code ?? "ERROR";
          const message =
            (msg.payload as { message?: string }).message ?? "command failed";
          next.lastError = `${code}: ${message}`;
        } else {
          next.lastError = null;
          const goal = (msg.payload as { goal?: number[] }).goal;
          if (Array.isArray(goal) && goal.length === 2) {
            next.goal = { pe: goal[0], se: goal[1] };
          }
        }
      } else if (msg.type === "ERROR") {
        const message =
          (msg.payload as { message?: string }).message ?? "stream error";
        next.lastError = message;
      }
      break;
    }
    case "METRIC":
      break;
    default:
      throw new DecodeError(`unknown message type ${msg.type}`);
  }
  return next;
}

export function markTick(vm: ViewModel, nowMs: number): ViewModel {
  // staleness: grey the view when the stream pauses for more than a second;
  // count missed state frames so rendering never extrapolates beyond two
  const stale = vm.lastMessageAt > 0 && nowMs - vm.lastMessageAt > STALE_AFTER_MS;
  if (stale === vm.stale) {
    return vm;
  }
  return { ...vm, stale };
}

export function onDisconnect(vm: ViewModel): ViewModel {
  return { ...vm, connected: false, stale: true };
}

export function onConnect(vm: ViewModel): ViewModel {
  // a fresh connection restarts its own sequence numbering and resyncs the
  // map + plan; executed history remains (it is client-side truth)
  return { ...vm, connected: true, lastSeq: 0, lastError: null };
}

export function addPending(
  vm: ViewModel,
  id: number,
  action: string,
  nowMs: number,
): ViewModel {
  return { ...vm, pending: [...vm.pending, { id, action, sentAt: nowMs }] };
}
