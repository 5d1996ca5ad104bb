/** CLI: `render <figure-spec-path>` writes the SVG named by the spec's `out` key. */

import { writeFileSync } from "node:fs";
import path from "node:path";

import { loadSpec, renderSpec } from "./figures.js";

export function main(argv: string[]): number {
  if (argv.length !== 2 || argv[0] !== "render") {
    console.error("usage: render <figure-spec-path>");
    return 2;
  }
  try {
    const spec = loadSpec(argv[1]);
    const svg = renderSpec(spec);
    const outPath = path.resolve(path.dirname(path.resolve(argv[1])), spec.out);
    writeFileSync(outPath, svg);
    console.log(`wrote ${outPath}`);
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

if (process.argv[1] && path.basename(process.argv[1]).startsWith("main")) {
  process.exit(main(process.argv.slice(2)));
}
