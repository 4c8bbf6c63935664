/** Mean and population standard deviation; the only statistics figures use. */

export function mean(values: number[]): number {
  if (values.length === 0) {
    throw new Error("mean of empty list");
  }
  let total = 0;
  for (const v of values) total += v;
  return total / values.length;
}

export function populationSd(values: number[]): number {
  const m = mean(values);
  let total = 0;
  for (const v of values) total += (v - m) * (v - m);
  return Math.sqrt(total / values.length);
}

export function groupBy<T>(items: T[], keyOf: (item: T) => string): Map<string, T[]> {
  const groups = new Map<string, T[]>();
  for (const item of items) {
    const key = keyOf(item);
    const bucket = groups.get(key);
    if (bucket) {
      bucket.push(item);
    } else {
      groups.set(key, [item]);
    }
  }
  return groups;
}
