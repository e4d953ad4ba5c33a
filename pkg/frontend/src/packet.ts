/**
 * Browser-side DevicePacket codec.
 *
 * Independently implements the documented wire layout so the UI decodes the
 * service's binary frames without server-side transcoding; the test suite
 * holds it bit-exact against vectors published by the Python codec.
 *
 * Layout (little-endian):
 *   magic  u16 0xA55A | version u8 | channel_count u8 | samples_per_channel u8
 *   sequence u32 | timestamp_us u64
 *   payload u16 x (spc * cc), sample-major; bits 0..14 = code + 16384,
 *   bit 15 of the FIRST word only = trigger flag
 *   crc16 u16, CRC-16/CCITT-FALSE over all preceding bytes
 */

export const PACKET_MAGIC = 0xa55a;
export const PACKET_VERSION = 1;
export const HEADER_SIZE = 17;
export const MIN_PACKET_SIZE = HEADER_SIZE + 2 + 2;

const CODE_OFFSET = 16384;
const TRIGGER_BIT = 0x8000;

export interface DevicePacket {
  sequence: number;
  timestampUs: bigint;
  trigger: boolean;
  channelCount: number;
  samplesPerChannel: number;
  /** One Int16Array of ADC codes per channel. */
  samples: Int16Array[];
}

export type PacketErrorCode =
  | "short_buffer"
  | "bad_magic"
  | "bad_crc"
  | "bad_version"
  | "bad_length"
  | "bad_payload";

export class PacketDecodeError extends Error {
  constructor(readonly code: PacketErrorCode, message: string) {
    super(message);
    this.name = "PacketDecodeError";
  }
}

/** CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection. */
export function crc16(bytes: Uint8Array, length?: number): number {
  const n = length ?? bytes.length;
  let crc = 0xffff;
  for (let i = 0; i < n; i++) {
    crc ^= (bytes[i] as number) << 8;
    for (let bit = 0; bit < 8; bit++) {
      crc = crc & 0x8000 ? ((crc << 1) ^ 0x1021) & 0xffff : (crc << 1) & 0xffff;
    }
  }
  return crc;
}

export function decodePacket(buffer: ArrayBuffer | Uint8Array): DevicePacket {
  const bytes = buffer instanceof Uint8Array ? buffer : new Uint8Array(buffer);
  if (bytes.length < MIN_PACKET_SIZE) {
    throw new PacketDecodeError(
      "short_buffer",
      `frame of ${bytes.length} bytes is below the ${MIN_PACKET_SIZE}-byte minimum`,
    );
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  if (view.getUint16(0, true) !== PACKET_MAGIC) {
    throw new PacketDecodeError("bad_magic", "bad packet magic");
  }
  const stored = view.getUint16(bytes.length - 2, true);
  if (crc16(bytes, bytes.length - 2) !== stored) {
    throw new PacketDecodeError("bad_crc", "CRC-16 mismatch");
  }
  const version = view.getUint8(2);
  if (version !== PACKET_VERSION) {
    throw new PacketDecodeError("bad_version", `unsupported packet version ${version}`);
  }
  const channelCount = view.getUint8(3);
  const samplesPerChannel = view.getUint8(4);
  if (channelCount < 1 || samplesPerChannel < 1) {
    throw new PacketDecodeError("bad_payload", "channel_count and samples_per_channel must be >= 1");
  }
  const expected = HEADER_SIZE + 2 * channelCount * samplesPerChannel + 2;
  if (bytes.length !== expected) {
    throw new PacketDecodeError(
      "bad_length",
      `frame is ${bytes.length} bytes, header implies ${expected}`,
    );
  }
  const sequence = view.getUint32(5, true);
  const timestampUs = view.getBigUint64(9, true);

  const samples: Int16Array[] = [];
  for (let c = 0; c < channelCount; c++) samples.push(new Int16Array(samplesPerChannel));
  let trigger = false;
  for (let t = 0; t < samplesPerChannel; t++) {
    for (let c = 0; c < channelCount; c++) {
      const index = t * channelCount + c;
      let word = view.getUint16(HEADER_SIZE + 2 * index, true);
      if (index === 0) {
        trigger = (word & TRIGGER_BIT) !== 0;
        word &= 0x7fff;
      } else if (word & TRIGGER_BIT) {
        throw new PacketDecodeError("bad_payload", "trigger bit set outside the first payload word");
      }
      (samples[c] as Int16Array)[t] = word - CODE_OFFSET;
    }
  }
  return { sequence, timestampUs, trigger, channelCount, samplesPerChannel, samples };
}

export function encodePacket(packet: DevicePacket): Uint8Array {
  const { channelCount, samplesPerChannel } = packet;
  const size = HEADER_SIZE + 2 * channelCount * samplesPerChannel + 2;
  const bytes = new Uint8Array(size);
  const view = new DataView(bytes.buffer);
  view.setUint16(0, PACKET_MAGIC, true);
  view.setUint8(2, PACKET_VERSION);
  view.setUint8(3, channelCount);
  view.setUint8(4, samplesPerChannel);
  view.setUint32(5, packet.sequence, true);
  view.setBigUint64(9, packet.timestampUs, true);
  for (let t = 0; t < samplesPerChannel; t++) {
    for (let c = 0; c < channelCount; c++) {
      const index = t * channelCount + c;
      const code = (packet.samples[c] as Int16Array)[t] as number;
      let word = code + CODE_OFFSET;
      if (index === 0 && packet.trigger) word |= TRIGGER_BIT;
      view.setUint16(HEADER_SIZE + 2 * index, word, true);
    }
  }
  view.setUint16(size - 2, crc16(bytes, size - 2), true);
  return bytes;
}

export function hexToBytes(hex: string): Uint8Array {
  const out = new Uint8Array(hex.length / 2);
  for (let i = 0; i < out.length; i++) {
    out[i] = parseInt(hex.slice(2 * i, 2 * i + 2), 16);
  }
  return out;
}

export function bytesToHex(bytes: Uint8Array): string {
  return Array.from(bytes, (b) => b.toString(16).padStart(2, "0")).join("");
}
