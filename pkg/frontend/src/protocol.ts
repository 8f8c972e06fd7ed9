/**
 * Wire protocol for the console stream: 4-byte big-endian length prefix
 * followed by a UTF-8 JSON payload carrying a `msg_type` tag.  On connect
 * each side sends one raw (non-JSON) version frame whose payload is the
 * protocol version string.
 */

export const PROTOCOL_VERSION = "cfe2/1";

export interface UiSnapshot {
  msg_type: "ui_snapshot";
  time_s: number;
  total_thpt_mbps: number;
  dl_thpt_mbps: number;
  active_antennas: number;
  power_w: number;
  ptime_us: number;
  actions: number;
  per_ue_thpt: Record<string, number>;
  per_port_snr: Record<string, number[]>;
  per_port_rsrp: Record<string, number[]>;
  ue_positions: Record<string, [number, number]>;
  fault_state: boolean[];
  decisions: DecisionEntry[];
}

export interface DecisionEntry {
  t_ms: number;
  ue_id: number;
  antenna: number;
  op: "activate" | "deactivate";
  sent: boolean;
  inference_ms: number;
}

export interface UiFault {
  msg_type: "ui_fault";
  antenna: number;
  on: boolean;
}

export interface UiMoveUe {
  msg_type: "ui_move_ue";
  ue_id: number;
  x: number;
  y: number;
}

export interface UiSnapshotReq {
  msg_type: "ui_snapshot_req";
}

export interface ErrorMsg {
  msg_type: "error";
  message: string;
}

export type ServerMessage = UiSnapshot | ErrorMsg;
export type ClientMessage = UiFault | UiMoveUe | UiSnapshotReq;
export type Message = ServerMessage | ClientMessage;

/** Length-prefix a raw payload. */
export function frame(payload: Buffer): Buffer {
  const header = Buffer.alloc(4);
  header.writeUInt32BE(payload.length, 0);
  return Buffer.concat([header, payload]);
}

/** Encode a message as one wire frame. */
export function encode(msg: Message): Buffer {
  return frame(Buffer.from(JSON.stringify(msg), "utf-8"));
}

export const VERSION_FRAME = frame(Buffer.from(PROTOCOL_VERSION, "utf-8"));

/**
 * Incremental frame splitter: feed arbitrary byte chunks, get complete
 * payloads out in order.  The stream's first frame is the peer's version
 * string and is surfaced separately.
 */
export class FrameParser {
  private buffer: Buffer = Buffer.alloc(0);
  private sawVersion = false;

  /** Returns the events completed by this chunk. */
  feed(chunk: Buffer): Array<{ kind: "version"; version: string } | { kind: "message"; message: ServerMessage }> {
    this.buffer = Buffer.concat([this.buffer, chunk]);
    const out: Array<{ kind: "version"; version: string } | { kind: "message"; message: ServerMessage }> = [];
    for (;;) {
      if (this.buffer.length < 4) return out;
      const len = this.buffer.readUInt32BE(0);
      if (this.buffer.length < 4 + len) return out;
      const payload = this.buffer.subarray(4, 4 + len);
      this.buffer = this.buffer.subarray(4 + len);
      if (!this.sawVersion) {
        this.sawVersion = true;
        out.push({ kind: "version", version: payload.toString("utf-8") });
        continue;
      }
      out.push({ kind: "message", message: parsePayload(payload) });
    }
  }
}

export class ProtocolError extends Error {}

function parsePayload(payload: Buffer): ServerMessage {
  let obj: unknown;
  try {
    obj = JSON.parse(payload.toString("utf-8"));
  } catch (e) {
    throw new ProtocolError(`payload is not valid JSON: ${e}`);
  }
  const msg = obj as { msg_type?: string };
  if (msg.msg_type === "ui_snapshot" || msg.msg_type === "error") {
    return msg as ServerMessage;
  }
  throw new ProtocolError(`unexpected message type ${JSON.stringify(msg.msg_type)}`);
}
