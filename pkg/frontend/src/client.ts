/**
 * Console client: TCP transport, version handshake, reconnect with
 * exponential backoff, and the command API.  All inbound/outbound events
 * are folded into the single state store; subscribers get the new state
 * after every event.
 */

import * as net from "node:net";

import {
  FrameParser,
  PROTOCOL_VERSION,
  VERSION_FRAME,
  encode,
  type ClientMessage,
} from "./protocol.js";
import {
  initialState,
  moveInBounds,
  reduce,
  type CommandEntry,
  type ConsoleState,
  type Event,
} from "./state.js";

export interface ClientOptions {
  host: string;
  port: number;
  /** First reconnect delay; doubles per attempt up to maxBackoffMs. */
  backoffMs?: number;
  maxBackoffMs?: number;
}

export type Listener = (state: ConsoleState) => void;

export class ConsoleClient {
  private state: ConsoleState = initialState();
  private socket: net.Socket | null = null;
  private parser = new FrameParser();
  private listeners: Listener[] = [];
  private stopped = false;
  private backoff: number;
  private readonly opts: Required<ClientOptions>;
  private reconnectTimer: NodeJS.Timeout | null = null;

  constructor(opts: ClientOptions) {
    this.opts = {
      backoffMs: 200,
      maxBackoffMs: 5000,
      ...opts,
    };
    this.backoff = this.opts.backoffMs;
  }

  getState(): ConsoleState {
    return this.state;
  }

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private dispatch(event: Event) {
    this.state = reduce(this.state, event);
    for (const fn of this.listeners) fn(this.state);
  }

  connect() {
    if (this.stopped) return;
    this.parser = new FrameParser();
    this.dispatch({ kind: "connecting" });
    const socket = net.createConnection({ host: this.opts.host, port: this.opts.port });
    this.socket = socket;
    socket.on("connect", () => {
      socket.write(VERSION_FRAME);
    });
    socket.on("data", (chunk) => this.onData(chunk));
    socket.on("error", () => {
      /* close follows; reason captured there */
    });
    socket.on("close", () => {
      if (this.socket === socket) this.onClose("connection lost");
    });
  }

  private onData(chunk: Buffer) {
    let events;
    try {
      events = this.parser.feed(chunk);
    } catch (e) {
      this.dispatch({ kind: "disconnected", reason: String(e), atTimeS: this.lastTimeS() });
      this.socket?.destroy();
      return;
    }
    for (const ev of events) {
      if (ev.kind === "version") {
        if (ev.version !== PROTOCOL_VERSION) {
          this.dispatch({ kind: "incompatible", serverVersion: ev.version });
          this.stop();
          return;
        }
        this.backoff = this.opts.backoffMs;
        this.dispatch({ kind: "connected" });
      } else if (ev.message.msg_type === "ui_snapshot") {
        this.dispatch({ kind: "snapshot", snapshot: ev.message });
      } else {
        // server-side errors keep the connection; surfaced as detail
        this.dispatch({ kind: "server_error", message: ev.message.message });
      }
    }
  }

  private lastTimeS(): number | null {
    return this.state.latest ? this.state.latest.time_s : null;
  }

  private onClose(reason: string) {
    this.socket = null;
    if (this.state.status === "incompatible" || this.stopped) return;
    this.dispatch({ kind: "disconnected", reason, atTimeS: this.lastTimeS() });
    this.reconnectTimer = setTimeout(() => {
      this.backoff = Math.min(this.backoff * 2, this.opts.maxBackoffMs);
      this.connect();
    }, this.backoff);
  }

  private send(msg: ClientMessage): boolean {
    if (this.state.status !== "connected" || this.socket === null) return false;
    this.socket.write(encode(msg));
    return true;
  }

  /** Toggle a physical antenna fault; idempotent on repeat. */
  toggleAntenna(antenna: number, on: boolean): boolean {
    if (!this.send({ msg_type: "ui_fault", antenna, on })) return false;
    const command: CommandEntry = {
      seq: this.state.nextSeq,
      kind: "fault",
      detail: JSON.stringify([antenna, on]),
      status: "pending",
    };
    this.dispatch({ kind: "command_sent", command });
    return true;
  }

  /** What-if steering; rejected client-side outside the lab bounds. */
  moveUe(ueId: number, x: number, y: number): boolean {
    if (!moveInBounds(x, y)) return false;
    if (!this.send({ msg_type: "ui_move_ue", ue_id: ueId, x, y })) return false;
    const command: CommandEntry = {
      seq: this.state.nextSeq,
      kind: "move_ue",
      detail: JSON.stringify([ueId, x, y]),
      status: "pending",
    };
    this.dispatch({ kind: "command_sent", command });
    return true;
  }

  requestSnapshot(): boolean {
    return this.send({ msg_type: "ui_snapshot_req" });
  }

  stop() {
    this.stopped = true;
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    this.socket?.destroy();
    this.socket = null;
  }
}
