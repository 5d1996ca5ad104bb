import { describe, expect, it } from "vitest";

import { listKey, numberKey, parseKeyValue, requireKey } from "../src/keyvalue.js";

describe("parseKeyValue", () => {
  it("parses keys, trims whitespace and strips comments", () => {
    const kv = parseKeyValue("# header\n a = 1 \nb = two words # tail\n\n");
    expect(kv.get("a")).toBe("1");
    expect(kv.get("b")).toBe("two words");
  });

  it("rejects duplicates and malformed lines", () => {
    expect(() => parseKeyValue("a = 1\na = 2")).toThrow(/duplicate/);
    expect(() => parseKeyValue("no separator here")).toThrow(/key = value/);
    expect(() => parseKeyValue("a =")).toThrow(/empty/);
  });
});

describe("typed accessors", () => {
  const kv = parseKeyValue("n = 4.5\nfiles = a.csv, b.csv\nname = x");

  it("requireKey throws for absent keys", () => {
    expect(requireKey(kv, "name")).toBe("x");
    expect(() => requireKey(kv, "missing")).toThrow(/missing/);
  });

  it("numberKey validates and falls back", () => {
    expect(numberKey(kv, "n", 0)).toBe(4.5);
    expect(numberKey(kv, "absent", 7)).toBe(7);
    expect(() => numberKey(kv, "name", 0)).toThrow(/not a number/);
  });

  it("listKey splits on commas", () => {
    expect(listKey(kv, "files")).toEqual(["a.csv", "b.csv"]);
  });
});
