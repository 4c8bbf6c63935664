/**
 * Closed-form curves restated from the training library so figures can be
 * drawn without running Python: the per-class keep probability mu_j^q and
 * the four blend-decay schedules.
 */

export const SCHEDULES = ["equal", "linear", "cosine", "parabolic"] as const;
export type Schedule = (typeof SCHEDULES)[number];

/** counts -> frequency-matched class distribution mu. */
export function classDistribution(counts: number[]): number[] {
  if (counts.length === 0 || counts.some((c) => !(c > 0))) {
    throw new Error("counts must be positive");
  }
  const total = counts.reduce((a, b) => a + b, 0);
  return counts.map((c) => c / total);
}

/** Keep probability mu^q with the 0^0 = 1 convention. */
export function keepProb(mu: number, q: number): number {
  if (mu < 0 || mu > 1) throw new Error(`mu outside [0, 1]: ${mu}`);
  if (q < 0) throw new Error(`negative q: ${q}`);
  if (q === 0) return 1;
  return Math.pow(mu, q);
}

/** Blend weight alpha at epoch t of t_max; endpoints are exact. */
export function alphaAt(schedule: Schedule, t: number, tMax: number): number {
  if (t < 0 || t > tMax) throw new Error(`epoch ${t} outside [0, ${tMax}]`);
  if (schedule === "equal") return 0.5;
  if (t === tMax) return 0;
  const frac = t / tMax;
  let alpha: number;
  if (schedule === "linear") {
    alpha = 1 - frac;
  } else if (schedule === "cosine") {
    alpha = Math.cos((frac * Math.PI) / 2);
  } else {
    alpha = 1 - frac * frac;
  }
  return Math.min(1, Math.max(0, alpha));
}

export function alphaCurve(schedule: Schedule, points: number): number[] {
  const tMax = points - 1;
  return Array.from({ length: points }, (_, t) => alphaAt(schedule, t, tMax));
}
