import { describe, expect, it } from "vitest";
import { crc64 } from "../src/crc64.js";

describe("crc64 (ECMA-182, init 0, non-reflected, no xor)", () => {
  it("matches the consumer's checksum on the standard vector", () => {
    const data = new TextEncoder().encode("123456789");
    // value cross-checked against the restoration library's implementation
    expect(crc64(data).toString(16)).toBe("43bcbea88c92ad80");
  });

  it("is 0 for empty input", () => {
    expect(crc64(new Uint8Array(0))).toBe(0n);
  });

  it("changes when any byte changes", () => {
    const a = new Uint8Array([1, 2, 3, 4, 5, 6, 7, 8]);
    const base = crc64(a);
    for (let i = 0; i < a.length; i++) {
      const b = a.slice();
      b[i] ^= 0x10;
      expect(crc64(b)).not.toBe(base);
    }
  });

  it("single zero byte differs from empty", () => {
    expect(crc64(new Uint8Array([0]))).toBe(0n);
    // leading zeros are absorbed by init 0; a nonzero byte is not
    expect(crc64(new Uint8Array([1]))).not.toBe(0n);
  });
});
