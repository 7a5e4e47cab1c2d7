// Sparkline geometry for the telemetry strips (slip speeds, command echo).

export interface Sparkline {
  points: [number, number][];
  max: number;
  latest: number;
}

export function sparkline(
  values: number[],
  width: number,
  height: number,
  floor: number = 1e-12,
): Sparkline {
  if (values.length === 0) return { points: [], max: floor, latest: 0 };
  const max = Math.max(floor, ...values);
  const n = values.length;
  const points: [number, number][] = values.map((v, i) => [
    (i / Math.max(n - 1, 1)) * width,
    height - (v / max) * (height - 2) - 1,
  ]);
  return { points, max, latest: values[n - 1] };
}
