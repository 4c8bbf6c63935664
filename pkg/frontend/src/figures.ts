/**
 * The three figure builders. Each returns the SVG text plus a dump object
 * holding every plotted value, so tests compare numbers instead of pixels.
 */

import {
  PerClassRow,
  RunFilter,
  SummaryRow,
  configLabel,
  finalEpochOnly,
  readPerClass,
  readSummary,
} from "./csv.js";
import { SCHEDULES, alphaCurve, classDistribution, keepProb } from "./analytic.js";
import { groupBy, mean, populationSd } from "./stats.js";
import { Series, barPanel, curvePanel, legend, svgDocument } from "./svg.js";

export interface FigureResult {
  svg: string;
  dump: Record<string, unknown>;
}

const ALPHA_POINTS = 1000;

interface MeanSd {
  mean: number[];
  sd: number[];
}

function meanSdByClass(
  rows: PerClassRow[],
  classes: number[],
  pick: (row: PerClassRow) => number,
): MeanSd {
  const out: MeanSd = { mean: [], sd: [] };
  for (const cls of classes) {
    const values = rows.filter((r) => r.cls === cls).map(pick);
    if (values.length === 0) {
      throw new Error(`no rows for class ${cls} in one run group`);
    }
    out.mean.push(mean(values));
    out.sd.push(populationSd(values));
  }
  return out;
}

/**
 * Grouped per-class recall and precision bars, one bar group per run
 * configuration, averaged over seeds. Classes are ordered head to tail,
 * which is descending labeled count in these datasets (class 0 always
 * holds the most samples).
 */
export function biasBars(csvPath: string, filter: RunFilter): FigureResult {
  const rows = finalEpochOnly(readPerClass(csvPath, filter));
  if (rows.length === 0) {
    throw new Error("no per-class rows match the filter");
  }
  const classes = [...new Set(rows.map((r) => r.cls))].sort((a, b) => a - b);
  const groups = groupBy(rows, (r) => configLabel(r.key));
  const labels = [...groups.keys()];

  const recall: Record<string, MeanSd> = {};
  const precision: Record<string, MeanSd> = {};
  for (const label of labels) {
    const groupRows = groups.get(label)!;
    recall[label] = meanSdByClass(groupRows, classes, (r) => r.recall);
    precision[label] = meanSdByClass(groupRows, classes, (r) => r.precision);
  }

  const categories = classes.map((c) => String(c));
  const toSeries = (table: Record<string, MeanSd>): Series[] =>
    labels.map((label) => ({
      label,
      values: table[label].mean,
      sd: table[label].sd,
    }));
  const svg = svgDocument(980, 330, [
    barPanel(60, 40, 360, 230, "per-class recall", categories, toSeries(recall)),
    barPanel(480, 40, 360, 230, "per-class precision", categories, toSeries(precision)),
    legend(860, 50, labels),
  ]);
  return {
    svg,
    dump: {
      figure: "bias_bars",
      classes,
      legend: labels,
      recall,
      precision,
    },
  };
}

/**
 * Blend-decay comparison: analytic alpha(t) curves for all four schedules
 * next to the measured accuracy of the blended runs grouped by schedule.
 */
export function decayCompare(csvPath: string, filter: RunFilter): FigureResult {
  const rows = readSummary(csvPath, { ...filter, stage: "bis" });
  if (rows.length === 0) {
    throw new Error("no blended runs match the filter");
  }
  const bySchedule = groupBy(rows, (r) => r.key.schedule ?? "");
  const present = SCHEDULES.filter((s) => bySchedule.has(s));

  const alphas: Record<string, number[]> = {};
  for (const schedule of SCHEDULES) {
    alphas[schedule] = alphaCurve(schedule, ALPHA_POINTS);
  }
  const accuracy: Record<string, { mean: number; sd: number; n: number }> = {};
  for (const schedule of present) {
    const values = bySchedule.get(schedule)!.map((r: SummaryRow) => r.accuracy);
    accuracy[schedule] = {
      mean: mean(values),
      sd: populationSd(values),
      n: values.length,
    };
  }

  const grid = Array.from({ length: ALPHA_POINTS }, (_, t) => t / (ALPHA_POINTS - 1));
  const curveSeries: Series[] = SCHEDULES.map((schedule) => ({
    label: schedule,
    values: alphas[schedule],
  }));
  const accuracySeries: Series[] = [
    {
      label: "accuracy",
      values: present.map((s) => accuracy[s].mean),
      sd: present.map((s) => accuracy[s].sd),
    },
  ];
  const svg = svgDocument(980, 330, [
    curvePanel(60, 40, 360, 230, "blend weight over training", grid, curveSeries),
    barPanel(480, 40, 360, 230, "accuracy by schedule", [...present], accuracySeries),
    legend(860, 50, [...SCHEDULES]),
  ]);
  return {
    svg,
    dump: {
      figure: "decay_compare",
      alpha_points: ALPHA_POINTS,
      alphas,
      schedules: present,
      accuracy,
    },
  };
}

/**
 * Analytic keep-probability curves mu_j^q per class, one curve per q.
 * No CSV involved; classes come out sorted by descending count.
 */
export function keepprobCurves(qList: number[], counts: number[]): FigureResult {
  if (qList.length === 0) {
    throw new Error("need at least one q value");
  }
  const order = counts
    .map((count, cls) => ({ count, cls }))
    .sort((a, b) => b.count - a.count || a.cls - b.cls);
  const mu = classDistribution(order.map((o) => o.count));
  const curves = qList.map((q) => ({
    q,
    keep: mu.map((m) => keepProb(m, q)),
  }));

  const xValues = order.map((_, i) => i);
  const series: Series[] = curves.map((c) => ({
    label: `q=${c.q}`,
    values: c.keep,
  }));
  const svg = svgDocument(640, 330, [
    curvePanel(60, 40, 420, 230, "keep probability by class", xValues, series),
    legend(520, 50, series.map((s) => s.label)),
  ]);
  return {
    svg,
    dump: {
      figure: "keepprob_curves",
      classes: order.map((o) => o.cls),
      counts: order.map((o) => o.count),
      mu,
      curves,
    },
  };
}
