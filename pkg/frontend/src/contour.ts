/**
 * Marching-squares contour extraction at a fixed level.  Returns line
 * segments in data coordinates; enough for half-maximum overlays.
 */

export type Segment = [number, number, number, number];

export function contourSegments(xAxis: Float64Array, yAxis: Float64Array,
                                values: Float64Array, level: number): Segment[] {
  const n = yAxis.length;
  const m = xAxis.length;
  const at = (i: number, j: number) => values[i * m + j];
  const segments: Segment[] = [];

  const interp = (a: number, b: number, va: number, vb: number) =>
    a + ((level - va) / (vb - va)) * (b - a);

  for (let i = 0; i < n - 1; i++) {
    for (let j = 0; j < m - 1; j++) {
      const v00 = at(i, j), v01 = at(i, j + 1), v11 = at(i + 1, j + 1), v10 = at(i + 1, j);
      let caseId = 0;
      if (v00 > level) caseId |= 1;
      if (v01 > level) caseId |= 2;
      if (v11 > level) caseId |= 4;
      if (v10 > level) caseId |= 8;
      if (caseId === 0 || caseId === 15) continue;

      const x0 = xAxis[j], x1 = xAxis[j + 1];
      const y0 = yAxis[i], y1 = yAxis[i + 1];
      // edge crossing points: bottom (v00-v01), right (v01-v11),
      // top (v10-v11), left (v00-v10)
      const bottom: [number, number] = [interp(x0, x1, v00, v01), y0];
      const right: [number, number] = [x1, interp(y0, y1, v01, v11)];
      const top: [number, number] = [interp(x0, x1, v10, v11), y1];
      const left: [number, number] = [x0, interp(y0, y1, v00, v10)];

      const add = (p: [number, number], q: [number, number]) =>
        segments.push([p[0], p[1], q[0], q[1]]);

      switch (caseId) {
        case 1: case 14: add(left, bottom); break;
        case 2: case 13: add(bottom, right); break;
        case 3: case 12: add(left, right); break;
        case 4: case 11: add(right, top); break;
        case 6: case 9: add(bottom, top); break;
        case 7: case 8: add(left, top); break;
        case 5: add(left, bottom); add(right, top); break;
        case 10: add(bottom, right); add(left, top); break;
      }
    }
  }
  return segments;
}
