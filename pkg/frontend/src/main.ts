/**
 * Terminal shell for the console: renders the view models at the 1 Hz
 * snapshot cadence and maps keys to commands (0-7 toggles that antenna's
 * fault, q quits).  Usage: node dist/main.js [host] [port]
 */

import { ConsoleClient } from "./client.js";
import {
  antennaToggleGrid,
  decisionLogView,
  kpmStripCharts,
  statusBanner,
  throughputView,
  topologyView,
} from "./render.js";
import type { ConsoleState } from "./state.js";

const SPARK = "▁▂▃▄▅▆▇█";

function spark(points: Array<{ value: number }>, lo: number, hi: number): string {
  return points
    .slice(-40)
    .map((p) => {
      const t = Math.max(0, Math.min(1, (p.value - lo) / (hi - lo)));
      return SPARK[Math.round(t * (SPARK.length - 1))];
    })
    .join("");
}

export function renderScreen(state: ConsoleState): string {
  const lines: string[] = [];
  const banner = statusBanner(state);
  lines.push(`cflab console — ${banner.text}${banner.stale ? " [stale]" : ""}`);

  const topo = topologyView(state);
  lines.push(
    "UEs: " + topo.ues.map((u) => `#${u.id}@(${u.x.toFixed(1)},${u.y.toFixed(1)})`).join("  "),
  );

  const grid = antennaToggleGrid(state);
  lines.push(
    "antennas: " +
      grid
        .map((b) => `${b.antenna}${b.faulted ? "✗" : "✓"}${b.pendingCommand ? "?" : ""}`)
        .join(" "),
  );

  const thpt = throughputView(state);
  lines.push(
    `UL total ${thpt.latestTotal?.toFixed(1) ?? "-"} Mbps  ` + spark(thpt.points, 0, 40),
  );

  for (const chart of kpmStripCharts(state, "rsrp")) {
    lines.push(
      `ue${chart.ueId} ant${chart.antenna} rsrp ${chart.latest?.toFixed(0) ?? "-"} ` +
        spark(chart.points, -160, -20),
    );
  }

  lines.push("decisions:");
  for (const row of decisionLogView(state, 8)) {
    lines.push(`  t=${row.timeS.toFixed(0)}s ue${row.ueId} ${row.label}${row.sent ? "" : " (noop)"}`);
  }
  return lines.join("\n");
}

function main() {
  const host = process.argv[2] ?? "127.0.0.1";
  const port = Number(process.argv[3] ?? 9310);
  const client = new ConsoleClient({ host, port });
  client.subscribe((state) => {
    process.stdout.write("\x1b[2J\x1b[H" + renderScreen(state) + "\n");
  });
  client.connect();

  process.stdin.setRawMode?.(true);
  process.stdin.resume();
  process.stdin.on("data", (key: Buffer) => {
    const ch = key.toString();
    if (ch === "q" || ch === "") {
      client.stop();
      process.exit(0);
    }
    if (ch >= "0" && ch <= "7") {
      const antenna = Number(ch);
      const faulted = client.getState().latest?.fault_state[antenna] ?? false;
      client.toggleAntenna(antenna, !faulted);
    }
  });
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("main.js")) {
  main();
}
