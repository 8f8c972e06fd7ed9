/**
 * Pure view-model builders: every panel is a deterministic function of
 * ConsoleState, so replaying a snapshot stream renders identically.
 * The terminal front-end (main.ts) and the tests consume these directly;
 * a browser shell can bind the same view models to DOM widgets.
 */

import type { ConsoleState, SeriesPoint } from "./state.js";

export interface TopologyView {
  rus: Array<{ antenna0: number; antenna1: number }>;
  ues: Array<{ id: string; x: number; y: number }>;
}

/** Four RUs with two antennas each, numbered 0..7 left to right. */
export function topologyView(state: ConsoleState): TopologyView {
  const ues = state.latest
    ? Object.entries(state.latest.ue_positions).map(([id, [x, y]]) => ({ id, x, y }))
    : [];
  return {
    rus: [0, 1, 2, 3].map((r) => ({ antenna0: 2 * r, antenna1: 2 * r + 1 })),
    ues,
  };
}

export interface StripChart {
  ueId: string;
  antenna: number;
  points: SeriesPoint[];
  latest: number | null;
}

export function kpmStripCharts(
  state: ConsoleState,
  metric: "snr" | "rsrp",
): StripChart[] {
  const source = metric === "snr" ? state.snrSeries : state.rsrpSeries;
  const charts: StripChart[] = [];
  for (const ueId of Object.keys(source).sort()) {
    source[ueId].forEach((points, antenna) => {
      charts.push({
        ueId,
        antenna,
        points,
        latest: points.length ? points[points.length - 1].value : null,
      });
    });
  }
  return charts;
}

export interface ThroughputView {
  points: SeriesPoint[];
  latestTotal: number | null;
  perUe: Record<string, number>;
}

export function throughputView(state: ConsoleState): ThroughputView {
  return {
    points: state.throughputSeries,
    latestTotal: state.latest ? state.latest.total_thpt_mbps : null,
    perUe: state.latest ? state.latest.per_ue_thpt : {},
  };
}

export interface DecisionRow {
  timeS: number;
  ueId: number;
  label: string;
  sent: boolean;
}

export function decisionLogView(state: ConsoleState, tail = 50): DecisionRow[] {
  return state.decisions.slice(-tail).map((d) => ({
    timeS: d.t_ms / 1000,
    ueId: d.ue_id,
    label: `${d.op} antenna ${d.antenna}`,
    sent: d.sent,
  }));
}

export interface ToggleButton {
  antenna: number;
  faulted: boolean;
  pendingCommand: boolean;
}

export function antennaToggleGrid(state: ConsoleState): ToggleButton[] {
  const faultState = state.latest ? state.latest.fault_state : new Array(8).fill(false);
  return faultState.map((faulted: boolean, antenna: number) => ({
    antenna,
    faulted,
    pendingCommand: state.commands.some(
      (c) =>
        c.kind === "fault" &&
        c.status === "pending" &&
        (JSON.parse(c.detail) as [number, boolean])[0] === antenna,
    ),
  }));
}

export interface StatusBanner {
  text: string;
  stale: boolean;
}

export function statusBanner(state: ConsoleState): StatusBanner {
  switch (state.status) {
    case "connected":
      return { text: "connected", stale: false };
    case "connecting":
      return { text: "connecting…", stale: state.latest !== null };
    case "incompatible":
      return { text: `incompatible protocol: ${state.statusDetail}`, stale: true };
    case "disconnected":
      return {
        text: state.statusDetail
          ? `disconnected (${state.statusDetail}) — retrying`
          : "disconnected — retrying",
        stale: state.latest !== null,
      };
  }
}
