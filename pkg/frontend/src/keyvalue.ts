/**
 * Parser for the `key = value` configuration format shared with the
 * simulation CLI; '#' starts a comment, keys must be unique.
 */

export function parseKeyValue(text: string): Map<string, string> {
  const out = new Map<string, string>();
  const lines = text.split(/\r?\n/);
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].split("#", 1)[0].trim();
    if (!line) continue;
    const eq = line.indexOf("=");
    if (eq < 0) throw new Error(`line ${i + 1}: expected 'key = value', got ${JSON.stringify(lines[i])}`);
    const key = line.slice(0, eq).trim();
    const value = line.slice(eq + 1).trim();
    if (!key || !value) throw new Error(`line ${i + 1}: empty key or value`);
    if (out.has(key)) throw new Error(`line ${i + 1}: duplicate key ${JSON.stringify(key)}`);
    out.set(key, value);
  }
  return out;
}

export function requireKey(kv: Map<string, string>, key: string): string {
  const value = kv.get(key);
  if (value === undefined) throw new Error(`figure spec is missing required key ${JSON.stringify(key)}`);
  return value;
}

export function numberKey(kv: Map<string, string>, key: string, fallback: number): number {
  const raw = kv.get(key);
  if (raw === undefined) return fallback;
  const value = Number(raw);
  if (!Number.isFinite(value)) throw new Error(`key ${JSON.stringify(key)} is not a number: ${raw}`);
  return value;
}

export function listKey(kv: Map<string, string>, key: string): string[] {
  const raw = requireKey(kv, key);
  return raw.split(",").map((part) => part.trim()).filter((part) => part.length > 0);
}
