/** Score rings: per-task moving averages and their color levels.
 *
 * The thresholds mirror the ones the judge publishes with its summaries:
 * a ring turns success at a mean of 0.75 or above, caution at 0.4 or above,
 * failure below that, and neutral when there is no data at all.
 */

import type { RingLevel, SummaryDoc } from "./types.js";

export const RING_SUCCESS_THRESHOLD = 0.75;
export const RING_CAUTION_THRESHOLD = 0.4;

export function ringLevel(meanScore: number | null): RingLevel {
  if (meanScore === null) return "neutral";
  if (meanScore >= RING_SUCCESS_THRESHOLD) return "success";
  if (meanScore >= RING_CAUTION_THRESHOLD) return "caution";
  return "failure";
}

/** Client-side ring state: the windowed score tail plus derived display values. */
export interface RingState {
  window: number;
  scores: number[];
  meanScore: number | null;
  sampleCount: number;
  ring: RingLevel;
}

function derive(window: number, scores: number[]): RingState {
  const tail = scores.slice(-window);
  const mean = tail.length
    ? tail.reduce((a, b) => a + b, 0) / tail.length
    : null;
  return {
    window,
    scores: tail,
    meanScore: mean,
    sampleCount: tail.length,
    ring: ringLevel(mean),
  };
}

/** Seed a ring from the summary the snapshot (or evaluations route) carries. */
export function ringFromSummary(summary: SummaryDoc): RingState {
  return derive(summary.window, summary.scores);
}

export function emptyRing(window: number): RingState {
  return derive(window, []);
}

/** Fold one new evaluation score into a ring, trimming to the window. */
export function foldScore(ring: RingState, score: number): RingState {
  return derive(ring.window, [...ring.scores, score]);
}
