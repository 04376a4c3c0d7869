/** Canonical JSON: sorted keys, no whitespace, trailing newline — matching
 * the Python exporter byte for byte so round-trips diff clean.
 *
 * Scene documents contain only strings, booleans, null, integers and
 * nested arrays/objects; integer formatting is identical between JS and
 * Python, so no float handling is needed (a non-integer number is a bug
 * and raises).
 */

function encodeString(s: string): string {
  // JSON.stringify leaves non-ASCII raw; the Python side escapes it.
  return JSON.stringify(s).replace(/[-￿]/g, (ch) => {
    return "\\u" + ch.charCodeAt(0).toString(16).padStart(4, "0");
  });
}

function encode(value: unknown): string {
  if (value === null) return "null";
  if (typeof value === "boolean") return value ? "true" : "false";
  if (typeof value === "number") {
    if (!Number.isFinite(value)) throw new Error(`non-finite number: ${value}`);
    if (!Number.isInteger(value)) throw new Error(`non-integer number in canonical doc: ${value}`);
    return Object.is(value, -0) ? "0" : String(value);
  }
  if (typeof value === "string") return encodeString(value);
  if (Array.isArray(value)) return `[${value.map(encode).join(",")}]`;
  if (typeof value === "object") {
    const entries = Object.entries(value as Record<string, unknown>)
      .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
      .map(([k, v]) => `${JSON.stringify(k)}:${encode(v)}`);
    return `{${entries.join(",")}}`;
  }
  throw new Error(`cannot canonicalize value of type ${typeof value}`);
}

export function dumpsCanonical(doc: unknown): string {
  return encode(doc) + "\n";
}
