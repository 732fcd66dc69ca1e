/**
 * CRC-64/ECMA-182: polynomial 0x42F0E1EB2ADCF177, init 0, non-reflected,
 * no final xor. Matches the checksum the restoration library verifies on
 * weight-archive payloads.
 */

const POLY = 0x42f0e1eb2adcf177n;
const MASK = 0xffffffffffffffffn;

let table: bigint[] | null = null;

function makeTable(): bigint[] {
  const t: bigint[] = [];
  for (let byte = 0; byte < 256; byte++) {
    let crc = BigInt(byte) << 56n;
    for (let i = 0; i < 8; i++) {
      if (crc & (1n << 63n)) {
        crc = ((crc << 1n) ^ POLY) & MASK;
      } else {
        crc = (crc << 1n) & MASK;
      }
    }
    t.push(crc);
  }
  return t;
}

export function crc64(data: Uint8Array): bigint {
  if (table === null) {
    table = makeTable();
  }
  let crc = 0n;
  for (const b of data) {
    crc = ((crc << 8n) & MASK) ^ table[Number((crc >> 56n) ^ BigInt(b)) & 0xff];
  }
  return crc;
}
