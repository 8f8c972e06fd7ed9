/**
 * Console state and its pure reducers.  Network and user events funnel
 * through `reduce`; renders are pure functions of the returned state, so
 * replaying a recorded snapshot stream reproduces the UI exactly.
 */

import type { DecisionEntry, UiSnapshot } from "./protocol.js";

export const ROLLING_WINDOW_S = 120;
export const LAB_BOUNDS = { xMin: 0, xMax: 10, yMin: 0, yMax: 10 };

export type ConnectionStatus =
  | "disconnected"
  | "connecting"
  | "connected"
  | "incompatible";

export interface SeriesPoint {
  time_s: number;
  value: number;
}

/** Rolling per-antenna series for one KPM of one UE. */
export type AntennaSeries = SeriesPoint[][];

export interface CommandEntry {
  seq: number;
  kind: "fault" | "move_ue";
  detail: string;
  status: "pending" | "applied" | "failed";
}

export interface ConsoleState {
  status: ConnectionStatus;
  statusDetail: string;
  staleSince: number | null;
  latest: UiSnapshot | null;
  /* per UE id -> per antenna -> rolling series */
  snrSeries: Record<string, AntennaSeries>;
  rsrpSeries: Record<string, AntennaSeries>;
  throughputSeries: SeriesPoint[];
  decisions: DecisionEntry[];
  commands: CommandEntry[];
  nextSeq: number;
}

export function initialState(): ConsoleState {
  return {
    status: "disconnected",
    statusDetail: "",
    staleSince: null,
    latest: null,
    snrSeries: {},
    rsrpSeries: {},
    throughputSeries: [],
    decisions: [],
    commands: [],
    nextSeq: 1,
  };
}

export type Event =
  | { kind: "connecting" }
  | { kind: "connected" }
  | { kind: "disconnected"; reason: string; atTimeS: number | null }
  | { kind: "incompatible"; serverVersion: string }
  | { kind: "snapshot"; snapshot: UiSnapshot }
  | { kind: "server_error"; message: string }
  | { kind: "command_sent"; command: CommandEntry };

export function reduce(state: ConsoleState, event: Event): ConsoleState {
  switch (event.kind) {
    case "connecting":
      return { ...state, status: "connecting", statusDetail: "" };
    case "connected":
      return { ...state, status: "connected", statusDetail: "", staleSince: null };
    case "disconnected":
      return {
        ...state,
        status: "disconnected",
        statusDetail: event.reason,
        staleSince: event.atTimeS,
      };
    case "incompatible":
      return {
        ...state,
        status: "incompatible",
        statusDetail: `server speaks ${event.serverVersion}`,
      };
    case "snapshot":
      return applySnapshot(state, event.snapshot);
    case "server_error":
      return { ...state, statusDetail: event.message };
    case "command_sent":
      return { ...state, commands: [...state.commands, event.command], nextSeq: state.nextSeq + 1 };
  }
}

function appendRolling(series: AntennaSeries | undefined, values: number[], timeS: number): AntennaSeries {
  const out: AntennaSeries = [];
  for (let a = 0; a < values.length; a++) {
    const prev = series?.[a] ?? [];
    const next = [...prev, { time_s: timeS, value: values[a] }];
    out.push(next.filter((p) => p.time_s > timeS - ROLLING_WINDOW_S));
  }
  return out;
}

function applySnapshot(state: ConsoleState, snap: UiSnapshot): ConsoleState {
  const snrSeries: Record<string, AntennaSeries> = {};
  const rsrpSeries: Record<string, AntennaSeries> = {};
  for (const ue of Object.keys(snap.per_port_snr)) {
    snrSeries[ue] = appendRolling(state.snrSeries[ue], snap.per_port_snr[ue], snap.time_s);
    rsrpSeries[ue] = appendRolling(state.rsrpSeries[ue], snap.per_port_rsrp[ue], snap.time_s);
  }
  const throughputSeries = [
    ...state.throughputSeries,
    { time_s: snap.time_s, value: snap.total_thpt_mbps },
  ].filter((p) => p.time_s > snap.time_s - ROLLING_WINDOW_S);

  // The decision log is cumulative client-side; the server sends a tail.
  const known = new Set(state.decisions.map((d) => `${d.t_ms}/${d.ue_id}/${d.antenna}/${d.op}`));
  const decisions = [
    ...state.decisions,
    ...snap.decisions.filter((d) => !known.has(`${d.t_ms}/${d.ue_id}/${d.antenna}/${d.op}`)),
  ];

  // Commands are confirmed once a snapshot reflects them.
  const commands = state.commands.map((c) =>
    c.status === "pending" && commandReflected(c, snap) ? { ...c, status: "applied" as const } : c,
  );

  return {
    ...state,
    latest: snap,
    snrSeries,
    rsrpSeries,
    throughputSeries,
    decisions,
    commands,
    staleSince: null,
  };
}

function commandReflected(cmd: CommandEntry, snap: UiSnapshot): boolean {
  if (cmd.kind === "fault") {
    const [antenna, on] = JSON.parse(cmd.detail) as [number, boolean];
    return snap.fault_state[antenna] === on;
  }
  const [ueId, x, y] = JSON.parse(cmd.detail) as [number, number, number];
  const pos = snap.ue_positions[String(ueId)];
  return pos !== undefined && pos[0] === x && pos[1] === y;
}

/** Client-side validation for what-if moves; the lab floor is 10x10 m. */
export function moveInBounds(x: number, y: number): boolean {
  return (
    x >= LAB_BOUNDS.xMin && x <= LAB_BOUNDS.xMax && y >= LAB_BOUNDS.yMin && y <= LAB_BOUNDS.yMax
  );
}
