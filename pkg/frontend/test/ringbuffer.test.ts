import { describe, expect, it } from "vitest";

import { ChannelRings } from "../src/ringbuffer.js";

describe("ChannelRings", () => {
  it("keeps the most recent samples per channel, oldest first", () => {
    const rings = new ChannelRings(5);
    rings.push([Int16Array.from([1, 2, 3]), Int16Array.from([10, 20, 30])]);
    expect(rings.channelCount).toBe(2);
    expect(Array.from(rings.channel(0))).toEqual([1, 2, 3]);
    rings.push([Int16Array.from([4, 5, 6]), Int16Array.from([40, 50, 60])]);
    expect(rings.length).toBe(5);
    expect(Array.from(rings.channel(0))).toEqual([2, 3, 4, 5, 6]);
    expect(Array.from(rings.channel(1))).toEqual([20, 30, 40, 50, 60]);
  });

  it("restarts cleanly when the channel count changes", () => {
    const rings = new ChannelRings(8);
    rings.push([Int16Array.from([1, 2])]);
    rings.push([Int16Array.from([3, 4]), Int16Array.from([5, 6])]);
    expect(rings.channelCount).toBe(2);
    expect(Array.from(rings.channel(0))).toEqual([3, 4]);
  });

  it("returns empty data for unknown channels", () => {
    const rings = new ChannelRings(4);
    expect(Array.from(rings.channel(3))).toEqual([]);
  });
});
