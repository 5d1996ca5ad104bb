/** Fixed perceptual colormap (inferno-like stops, linear interpolation). */

const STOPS: Array<[number, number, number]> = [
  [0, 0, 4],
  [40, 11, 84],
  [101, 21, 110],
  [159, 42, 99],
  [212, 72, 66],
  [245, 125, 21],
  [250, 193, 39],
  [252, 255, 164],
];

export function colormap(t: number): string {
  const x = Math.min(1, Math.max(0, t)) * (STOPS.length - 1);
  const i = Math.min(STOPS.length - 2, Math.floor(x));
  const f = x - i;
  const mix = (a: number, b: number) => Math.round(a + (b - a) * f);
  const [r, g, b] = [0, 1, 2].map((k) => mix(STOPS[i][k], STOPS[i + 1][k]));
  return `#${hex(r)}${hex(g)}${hex(b)}`;
}

function hex(v: number): string {
  return v.toString(16).padStart(2, "0");
}

/** Quantized color index in [0, levels-1]; 0 is reserved for background. */
export function quantize(t: number, levels: number): number {
  if (!(t > 0)) return 0;
  return Math.min(levels - 1, Math.max(0, Math.round(t * (levels - 1))));
}
