/**
 * Binary PPM (P6, maxval 255) decoding for API payloads.
 *
 * The engine ships every image as base64-encoded P6; the client decodes to
 * RGBA suitable for putImageData.
 */

export interface DecodedImage {
  width: number;
  height: number;
  /** RGBA bytes, row-major, alpha forced to 255. */
  rgba: Uint8ClampedArray<ArrayBuffer>;
}

function base64ToBytes(b64: string): Uint8Array {
  const binary = atob(b64);
  const bytes = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) {
    bytes[i] = binary.charCodeAt(i);
  }
  return bytes;
}

function isSpace(byte: number): boolean {
  return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d || byte === 0x0b || byte === 0x0c;
}

/** Read `count` whitespace-separated header tokens, skipping # comments. */
function headerTokens(bytes: Uint8Array, count: number, start: number): { tokens: string[]; end: number } {
  const tokens: string[] = [];
  let i = start;
  while (tokens.length < count) {
    while (i < bytes.length && isSpace(bytes[i])) i++;
    if (i < bytes.length && bytes[i] === 0x23) {
      while (i < bytes.length && bytes[i] !== 0x0a && bytes[i] !== 0x0d) i++;
      continue;
    }
    let j = i;
    while (j < bytes.length && !isSpace(bytes[j]) && bytes[j] !== 0x23) j++;
    if (j === i) throw new Error("truncated PPM header");
    tokens.push(String.fromCharCode(...bytes.slice(i, j)));
    i = j;
  }
  return { tokens, end: i };
}

export function decodePpm(bytes: Uint8Array): DecodedImage {
  if (bytes.length < 2 || bytes[0] !== 0x50 || bytes[1] !== 0x36) {
    throw new Error("not a P6 PPM");
  }
  const { tokens, end } = headerTokens(bytes, 3, 2);
  const width = parseInt(tokens[0], 10);
  const height = parseInt(tokens[1], 10);
  const maxval = parseInt(tokens[2], 10);
  if (!Number.isFinite(width) || !Number.isFinite(height) || width < 1 || height < 1) {
    throw new Error("bad PPM dimensions");
  }
  if (maxval !== 255) throw new Error(`unsupported PPM maxval ${maxval}`);
  const payload = bytes.subarray(end + 1);
  const expected = width * height * 3;
  if (payload.length < expected) {
    throw new Error(`PPM payload has ${payload.length} bytes, expected ${expected}`);
  }
  const rgba = new Uint8ClampedArray(width * height * 4);
  for (let p = 0; p < width * height; p++) {
    rgba[p * 4] = payload[p * 3];
    rgba[p * 4 + 1] = payload[p * 3 + 1];
    rgba[p * 4 + 2] = payload[p * 3 + 2];
    rgba[p * 4 + 3] = 255;
  }
  return { width, height, rgba };
}

export function decodePpmBase64(b64: string): DecodedImage {
  return decodePpm(base64ToBytes(b64));
}

function bytesToBase64(bytes: Uint8Array): string {
  let binary = "";
  const chunk = 0x8000;
  for (let i = 0; i < bytes.length; i += chunk) {
    binary += String.fromCharCode(...bytes.subarray(i, i + chunk));
  }
  return btoa(binary);
}

/**
 * Encode RGB samples as base64 P6, matching the engine's writer byte for
 * byte ("P6\n{w} {h}\n255\n" + payload) so client-side reconstructions of
 * masked images compare equal to server renders of the same state.
 */
export function encodePpmBase64(width: number, height: number, rgb: Uint8Array): string {
  const header = `P6\n${width} ${height}\n255\n`;
  const bytes = new Uint8Array(header.length + rgb.length);
  for (let i = 0; i < header.length; i++) bytes[i] = header.charCodeAt(i);
  bytes.set(rgb, header.length);
  return bytesToBase64(bytes);
}

/** RGB bytes of the image with the listed pixel indices forced to black. */
export function blackOutPixels(image: DecodedImage, hidden: Iterable<number>): Uint8Array {
  const rgb = new Uint8Array(image.width * image.height * 3);
  for (let p = 0; p < image.width * image.height; p++) {
    rgb[p * 3] = image.rgba[p * 4];
    rgb[p * 3 + 1] = image.rgba[p * 4 + 1];
    rgb[p * 3 + 2] = image.rgba[p * 4 + 2];
  }
  for (const p of hidden) {
    rgb[p * 3] = 0;
    rgb[p * 3 + 1] = 0;
    rgb[p * 3 + 2] = 0;
  }
  return rgb;
}
