import { describe, expect, it } from "vitest";

import {
  FrameParser,
  PROTOCOL_VERSION,
  ProtocolError,
  VERSION_FRAME,
  encode,
  frame,
  type UiFault,
  type UiSnapshot,
} from "../src/protocol.js";

function snapshot(timeS: number): UiSnapshot {
  return {
    msg_type: "ui_snapshot",
    time_s: timeS,
    total_thpt_mbps: 38.0,
    dl_thpt_mbps: 127.0,
    active_antennas: 8,
    power_w: 58.9,
    ptime_us: 4.1,
    actions: 0,
    per_ue_thpt: { "1": 19.0, "2": 19.0 },
    per_port_snr: { "1": [20, 20, 20, 20, 20, 20, 20, 20] },
    per_port_rsrp: { "1": [-40, -40, -40, -40, -40, -40, -40, -40] },
    ue_positions: { "1": [3, 4] },
    fault_state: [false, false, false, false, false, false, false, false],
    decisions: [],
  };
}

describe("framing", () => {
  it("prefixes the payload length big-endian", () => {
    const msg: UiFault = { msg_type: "ui_fault", antenna: 3, on: true };
    const buf = encode(msg);
    expect(buf.readUInt32BE(0)).toBe(buf.length - 4);
    expect(JSON.parse(buf.subarray(4).toString())).toEqual(msg);
  });

  it("version frame carries the raw version string", () => {
    expect(VERSION_FRAME.subarray(4).toString()).toBe(PROTOCOL_VERSION);
  });
});

describe("FrameParser", () => {
  it("handles frames split across arbitrary chunks", () => {
    const stream = Buffer.concat([VERSION_FRAME, encode(snapshot(0)), encode(snapshot(1))]);
    for (const chunkSize of [1, 3, 7, stream.length]) {
      const parser = new FrameParser();
      const events = [];
      for (let i = 0; i < stream.length; i += chunkSize) {
        events.push(...parser.feed(stream.subarray(i, i + chunkSize)));
      }
      expect(events).toHaveLength(3);
      expect(events[0]).toEqual({ kind: "version", version: PROTOCOL_VERSION });
      expect(events[1].kind).toBe("message");
      expect((events[2] as { message: UiSnapshot }).message.time_s).toBe(1);
    }
  });

  it("holds partial frames until completed", () => {
    const parser = new FrameParser();
    const buf = Buffer.concat([VERSION_FRAME, encode(snapshot(5))]);
    expect(parser.feed(buf.subarray(0, buf.length - 1))).toHaveLength(1);
    const rest = parser.feed(buf.subarray(buf.length - 1));
    expect(rest).toHaveLength(1);
    expect((rest[0] as { message: UiSnapshot }).message.time_s).toBe(5);
  });

  it("rejects non-JSON payloads after the version frame", () => {
    const parser = new FrameParser();
    parser.feed(VERSION_FRAME);
    expect(() => parser.feed(frame(Buffer.from("{nope")))).toThrow(ProtocolError);
  });

  it("rejects unexpected message types", () => {
    const parser = new FrameParser();
    parser.feed(VERSION_FRAME);
    const bogus = frame(Buffer.from(JSON.stringify({ msg_type: "ui_fault" })));
    expect(() => parser.feed(bogus)).toThrow(ProtocolError);
  });
});
