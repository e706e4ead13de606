/** Chart geometry as pure functions over server series.
 *
 * Values are taken verbatim; the only transformation is visual
 * downsampling by index and mapping to pixel coordinates.
 */

export interface Size {
  width: number;
  height: number;
}

export interface Line {
  name: string;
  color: string;
  path: string; // SVG path data
  dashed?: boolean;
}

export interface ChartModel {
  lines: Line[];
  areas?: { name: string; color: string; path: string }[];
  markers: { label: string; x: number; color: string }[];
  yZero?: number; // pixel y of value 0, when inside the range
  xDomain: [number, number];
  yDomain: [number, number];
}

/** Pick at most `maxPoints` samples by index, always keeping the first
 * and last. Returned values are the original array values. */
export function downsampleIndices(length: number, maxPoints: number): number[] {
  if (length <= maxPoints) return Array.from({ length }, (_, i) => i);
  const out: number[] = [];
  const stride = (length - 1) / (maxPoints - 1);
  for (let k = 0; k < maxPoints; k++) out.push(Math.round(k * stride));
  out[out.length - 1] = length - 1;
  return [...new Set(out)];
}

function extent(arrays: number[][]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const arr of arrays) {
    for (const v of arr) {
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  return [lo, hi];
}

function scaler(domain: [number, number], range: [number, number]) {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  return (v: number) => r0 + ((v - d0) / (d1 - d0)) * (r1 - r0);
}

function pathOf(xs: number[], ys: number[]): string {
  return xs.map((x, i) => `${i === 0 ? "M" : "L"}${x.toFixed(1)},${ys[i].toFixed(1)}`).join("");
}

const MAX_POINTS = 400;

function sampled(times: number[], series: number[][]): { t: number[]; s: number[][] } {
  const ix = downsampleIndices(times.length, MAX_POINTS);
  return {
    t: ix.map((i) => times[i]),
    s: series.map((arr) => ix.map((i) => arr[i])),
  };
}

/** Staff-mix stacked areas: legacy on top of i4.0. */
export function staffChart(
  times: number[],
  legacy: number[],
  i40: number[],
  size: Size,
): ChartModel {
  const { t, s } = sampled(times, [legacy, i40]);
  const [lg, nw] = s;
  const stackedTop = lg.map((v, i) => v + nw[i]);
  const xDomain: [number, number] = [t[0], t[t.length - 1]];
  const yDomain: [number, number] = [0, Math.max(...stackedTop, 1)];
  const x = scaler(xDomain, [0, size.width]);
  const y = scaler(yDomain, [size.height, 0]);
  const xs = t.map(x);
  const base = t.map(() => y(0));
  const area = (top: number[], bottom: number[]): string =>
    pathOf(xs, top.map(y)) +
    [...xs].reverse().map((px, i) => `L${px.toFixed(1)},${y(bottom[bottom.length - 1 - i]).toFixed(1)}`).join("") +
    "Z";
  return {
    lines: [],
    areas: [
      { name: "I4.0 staff", color: "#2d7dd2", path: pathOf(xs, nw.map(y)) + [...xs].reverse().map((px, i) => `L${px.toFixed(1)},${base[base.length - 1 - i].toFixed(1)}`).join("") + "Z" },
      { name: "legacy staff", color: "#c4c4c4", path: area(stackedTop, nw) },
    ],
    markers: [],
    xDomain,
    yDomain,
  };
}

/** Unit-cost line: blended cost over time (gaps where undefined). */
export function unitCostChart(
  times: number[],
  blended: (number | null)[],
  size: Size,
): ChartModel {
  const defined = blended.map((v, i) => [v, i] as const).filter(([v]) => v !== null);
  const ts = defined.map(([, i]) => times[i]);
  const vs = defined.map(([v]) => v as number);
  const { t, s } = sampled(ts, [vs]);
  const xDomain: [number, number] = [times[0], times[times.length - 1]];
  const yDomain = extent(s);
  const x = scaler(xDomain, [0, size.width]);
  const y = scaler(yDomain, [size.height, 0]);
  return {
    lines: [{ name: "blended unit cost", color: "#d1495b", path: pathOf(t.map(x), s[0].map(y)) }],
    markers: [],
    xDomain,
    yDomain,
  };
}

/** Cash line with a zero line and event markers; supports overlays. */
export function cashChart(
  times: number[],
  runs: { label: string; cash: number[]; bankruptcyTime: number | null; color: string }[],
  size: Size,
): ChartModel {
  const xDomain: [number, number] = [times[0], times[times.length - 1]];
  const yDomain = extent([...runs.map((r) => r.cash), [0]]);
  const x = scaler(xDomain, [0, size.width]);
  const y = scaler(yDomain, [size.height, 0]);
  const lines = runs.map((run, i) => {
    const { t, s } = sampled(times.slice(0, run.cash.length), [run.cash]);
    return {
      name: run.label,
      color: run.color,
      path: pathOf(t.map(x), s[0].map(y)),
      dashed: i > 0,
    };
  });
  const markers = runs
    .filter((r) => r.bankruptcyTime !== null)
    .map((r) => ({ label: `${r.label} bankrupt`, x: x(r.bankruptcyTime as number), color: r.color }));
  return { lines, markers, yZero: y(0), xDomain, yDomain };
}

export function renderSvg(model: ChartModel, size: Size): string {
  const parts: string[] = [
    `<svg viewBox="0 0 ${size.width} ${size.height}" xmlns="http://www.w3.org/2000/svg">`,
  ];
  for (const a of model.areas ?? []) {
    parts.push(`<path d="${a.path}" fill="${a.color}" opacity="0.8"><title>${a.name}</title></path>`);
  }
  if (model.yZero !== undefined && model.yZero >= 0 && model.yZero <= size.height) {
    parts.push(
      `<line x1="0" y1="${model.yZero.toFixed(1)}" x2="${size.width}" y2="${model.yZero.toFixed(1)}" stroke="#888" stroke-dasharray="4 3"/>`,
    );
  }
  for (const l of model.lines) {
    const dash = l.dashed ? ' stroke-dasharray="6 4"' : "";
    parts.push(
      `<path d="${l.path}" fill="none" stroke="${l.color}" stroke-width="1.5"${dash}><title>${l.name}</title></path>`,
    );
  }
  for (const m of model.markers) {
    parts.push(
      `<line x1="${m.x.toFixed(1)}" y1="0" x2="${m.x.toFixed(1)}" y2="${size.height}" stroke="${m.color}" stroke-width="1"/>` +
        `<text x="${(m.x + 3).toFixed(1)}" y="12" font-size="10" fill="${m.color}">${m.label}</text>`,
    );
  }
  parts.push("</svg>");
  return parts.join("");
}
